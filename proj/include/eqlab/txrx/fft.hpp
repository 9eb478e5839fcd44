#pragma once

#include <complex>
#include <mutex>
#include <numbers>
#include <span>
#include <vector>

#include <fftw3.h>

#include "../errors.hpp"

namespace eqlab::txrx {

using cplx = std::complex<double>;

namespace detail {
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

// In-place complex FFT of a fixed length. Plans are created with
// FFTW_ESTIMATE | FFTW_UNALIGNED so results do not depend on buffer
// alignment or timing; planning is serialized, execution is thread-safe.
class Fft {
 public:
  explicit Fft(std::size_t n) : n_(n) {
    if (n == 0) throw ConfigError("FFT length must be >= 1");
    std::vector<cplx> scratch(n);
    auto* p = reinterpret_cast<fftw_complex*>(scratch.data());
    const std::lock_guard lock(detail::fftw_planner_mutex());
    const int len = static_cast<int>(n);
    fwd_ = fftw_plan_dft_1d(len, p, p, FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
    inv_ = fftw_plan_dft_1d(len, p, p, FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;
  ~Fft() {
    const std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
  }

  std::size_t size() const noexcept { return n_; }

  void forward(std::span<cplx> data) const { execute(fwd_, data); }

  // Normalized: inverse(forward(x)) == x.
  void inverse(std::span<cplx> data) const {
    execute(inv_, data);
    const double s = 1.0 / static_cast<double>(n_);
    for (auto& v : data) v *= s;
  }

 private:
  void execute(fftw_plan plan, std::span<cplx> data) const {
    if (data.size() != n_) throw ConfigError("FFT buffer length mismatch");
    auto* p = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(plan, p, p);
  }

  std::size_t n_;
  fftw_plan fwd_ = nullptr;
  fftw_plan inv_ = nullptr;
};

// Angular frequency (rad/ps) of FFT bin k for a sample rate in GHz.
inline std::vector<double> angular_frequencies(std::size_t n, double sample_rate_ghz) {
  std::vector<double> w(n);
  const double fs_thz = sample_rate_ghz * 1e-3;
  for (std::size_t k = 0; k < n; ++k) {
    const double kk = k < (n + 1) / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(n);
    w[k] = 2.0 * std::numbers::pi * kk * fs_thz / static_cast<double>(n);
  }
  return w;
}

}  // namespace eqlab::txrx
