#pragma once

// Receiver DSP: spectral resampling to 2 samples/symbol -> CDC (or DBP) ->
// matched RRC -> symbol-rate decimation -> normalization by the
// least-squares complex gain against the known transmitted symbols.

#include <bit>
#include <climits>
#include <complex>
#include <cstdint>
#include <vector>

#include "../errors.hpp"
#include "fiber.hpp"
#include "metrics.hpp"
#include "qam.hpp"
#include "rrc.hpp"

namespace eqlab::txrx {

enum class Compensation { CDC, DBP };

struct ReceiverOptions {
  Compensation compensation = Compensation::CDC;
  std::size_t dbp_steps_per_span = 3;
  std::size_t dsp_samples_per_symbol = 2;
};

// Symbol-rate received samples (normalized) with ground truth.
struct SymbolFrame {
  std::vector<cplx> x;
  std::vector<cplx> y;
  std::vector<std::uint8_t> truth_x;
  std::vector<std::uint8_t> truth_y;
  cplx gain_x{1.0, 0.0};  // received = gain * normalized
  cplx gain_y{1.0, 0.0};
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return x.size(); }
};

/// Ideal band-limited resampling of a periodic waveform by spectral truncation.
inline std::vector<cplx> resample(std::vector<cplx> waveform, std::size_t from_sps, std::size_t to_sps) {
  if (from_sps == to_sps || waveform.empty()) return waveform;
  if (to_sps == 0 || from_sps == 0) throw ConfigError("samples per symbol must be >= 1");
  const std::size_t n = waveform.size();
  if ((n * to_sps) % from_sps != 0) throw ConfigError("waveform length does not resample to an integer length");
  const std::size_t m = n * to_sps / from_sps;
  Fft big(n), small(m);
  big.forward(waveform);
  std::vector<cplx> spec(m);
  const std::size_t keep = std::min(n, m);
  const std::size_t half = (keep - 1) / 2;  // drop the Nyquist bin for even lengths
  for (std::size_t k = 0; k <= half; ++k) spec[k] = waveform[k];
  for (std::size_t k = 1; k <= half; ++k) spec[m - k] = waveform[n - k];
  small.inverse(spec);
  const double scale = static_cast<double>(m) / static_cast<double>(n);
  for (auto& v : spec) v *= scale;
  return spec;
}

/// Least-squares complex gain g minimizing |r - g s|^2.
inline cplx ls_gain(const std::vector<cplx>& received, const std::vector<std::uint8_t>& truth) {
  cplx num{};
  double den = 0.0;
  for (std::size_t k = 0; k < received.size(); ++k) {
    const cplx s = qam16_point(truth[k]);
    num += received[k] * std::conj(s);
    den += std::norm(s);
  }
  return den > 0.0 ? num / den : cplx(1.0, 0.0);
}

inline SymbolFrame receive(const SignalFrame& rx, const LinkConfig& link, const ReceiverOptions& opt = {}) {
  const std::size_t sps = opt.dsp_samples_per_symbol;
  if (sps < 2) throw ConfigError("receiver DSP needs >= 2 samples per symbol");
  SignalFrame f;
  f.x = resample(rx.x, rx.samples_per_symbol, sps);
  f.y = resample(rx.y, rx.samples_per_symbol, sps);
  f.samples_per_symbol = sps;
  f.sample_rate_ghz = link.symbol_rate_gbd * static_cast<double>(sps);
  if (opt.compensation == Compensation::DBP) {
    f = dbp_equalize(std::move(f), link, opt.dbp_steps_per_span);
  } else {
    const double dl = link.accumulated_dispersion_ps_per_nm();
    f.x = cd_compensate(std::move(f.x), dl, f.sample_rate_ghz, link.center_wavelength_nm);
    f.y = cd_compensate(std::move(f.y), dl, f.sample_rate_ghz, link.center_wavelength_nm);
  }
  const std::size_t taps = default_rrc_taps(sps, link.rrc_span_symbols);
  SymbolFrame out;
  out.x = decimate(rrc_matched(f.x, link.rrc_rolloff, sps, taps), sps);
  out.y = decimate(rrc_matched(f.y, link.rrc_rolloff, sps, taps), sps);
  out.truth_x = rx.truth_x;
  out.truth_y = rx.truth_y;
  out.seed = rx.seed;
  out.gain_x = ls_gain(out.x, out.truth_x);
  out.gain_y = ls_gain(out.y, out.truth_y);
  for (auto& v : out.x) v /= out.gain_x;
  for (auto& v : out.y) v /= out.gain_y;
  return out;
}

/// Hard-decision BER of symbols [first, last) of both polarizations.
inline EvalResult evaluate_hard(const SymbolFrame& f, std::size_t first = 0, std::size_t last = SIZE_MAX) {
  last = std::min(last, f.size());
  std::uint64_t errors = 0;
  for (std::size_t k = first; k < last; ++k) {
    errors += static_cast<std::uint64_t>(std::popcount(static_cast<unsigned>(qam16_decide(f.x[k]) ^ f.truth_x[k])));
    errors += static_cast<std::uint64_t>(std::popcount(static_cast<unsigned>(qam16_decide(f.y[k]) ^ f.truth_y[k])));
  }
  const std::uint64_t bits = last > first ? 8 * static_cast<std::uint64_t>(last - first) : 0;
  return make_result(errors, bits);
}

}  // namespace eqlab::txrx
