#pragma once

// Reference implementations used only by tests. They are written from the
// textbook definitions and share no code with the library.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace oracle {

// Number of valid window start positions of a dilated kernel sliding with
// `stride` over a zero-padded sequence, by enumeration.
inline std::uint64_t conv_windows(std::uint64_t ns, std::uint64_t k, std::uint64_t pad, std::uint64_t dil,
                                  std::uint64_t stride) {
  const std::uint64_t len = ns + 2 * pad;
  std::uint64_t count = 0;
  for (std::uint64_t start = 0; start < len; ++start) {
    if (start % stride != 0) continue;
    bool inside = true;
    for (std::uint64_t tap = 0; tap < k; ++tap)
      if (start + tap * dil >= len) inside = false;
    if (inside) ++count;
  }
  return count;
}

// Executes textbook forward passes on random data and tallies every scalar
// product.
class Counter {
 public:
  double mul(double a, double b) {
    ++n_;
    return a * b;
  }
  std::uint64_t count() const { return n_; }

 private:
  std::uint64_t n_ = 0;
};

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(gen);
  return v;
}

// y = W x, W is rows x cols.
inline std::vector<double> matvec(Counter& c, const std::vector<double>& w, std::size_t rows, std::size_t cols,
                                  const std::vector<double>& x) {
  std::vector<double> y(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t k = 0; k < cols; ++k) y[r] += c.mul(w[r * cols + k], x[k]);
  return y;
}

// Input -> hidden (n1) -> output (n_o): the two-matrix chain of a dense layer.
inline std::uint64_t dense_chain_count(std::size_t n_i, std::size_t n1, std::size_t n_o, std::uint64_t seed = 1) {
  std::mt19937_64 gen(seed);
  Counter c;
  const auto x = random_vector(n_i, gen);
  const auto h = matvec(c, random_vector(n1 * n_i, gen), n1, n_i, x);
  matvec(c, random_vector(n_o * n1, gen), n_o, n1, h);
  return c.count();
}

// Valid-length 1-D convolution: for each output position and filter, a
// kernel-by-channel dot product.
inline std::uint64_t conv_count(std::size_t k, std::size_t n_i, std::size_t filters, std::size_t out_steps,
                                std::uint64_t seed = 1) {
  std::mt19937_64 gen(seed);
  Counter c;
  const auto x = random_vector((out_steps + k - 1) * n_i, gen);
  const auto w = random_vector(filters * k * n_i, gen);
  for (std::size_t t = 0; t < out_steps; ++t)
    for (std::size_t f = 0; f < filters; ++f) {
      double acc = 0.0;
      for (std::size_t j = 0; j < k; ++j)
        for (std::size_t ch = 0; ch < n_i; ++ch) acc += c.mul(w[(f * k + j) * n_i + ch], x[(t + j) * n_i + ch]);
      (void)acc;
    }
  return c.count();
}

// Unidirectional LSTM over n_s steps with a per-step output projection to n_o.
inline std::uint64_t lstm_count(std::size_t n_s, std::size_t n_i, std::size_t n_h, std::size_t n_o,
                                std::uint64_t seed = 1) {
  std::mt19937_64 gen(seed);
  Counter c;
  auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  std::vector<std::vector<double>> wx, wh;
  for (int g = 0; g < 4; ++g) {
    wx.push_back(random_vector(n_h * n_i, gen));
    wh.push_back(random_vector(n_h * n_h, gen));
  }
  const auto wo = random_vector(n_o * n_h, gen);
  std::vector<double> h(n_h, 0.0), cell(n_h, 0.0);
  for (std::size_t t = 0; t < n_s; ++t) {
    const auto x = random_vector(n_i, gen);
    std::vector<std::vector<double>> gate(4);
    for (int g = 0; g < 4; ++g) {
      const auto a = matvec(c, wx[g], n_h, n_i, x);
      const auto b = matvec(c, wh[g], n_h, n_h, h);
      gate[g].resize(n_h);
      for (std::size_t u = 0; u < n_h; ++u) gate[g][u] = g == 2 ? std::tanh(a[u] + b[u]) : sig(a[u] + b[u]);
    }
    for (std::size_t u = 0; u < n_h; ++u) {
      cell[u] = c.mul(gate[1][u], cell[u]) + c.mul(gate[0][u], gate[2][u]);
      h[u] = c.mul(gate[3][u], std::tanh(cell[u]));
    }
    matvec(c, wo, n_o, n_h, h);
  }
  return c.count();
}

// Bits of a Fibonacci LFSR by direct recurrence on the output sequence:
// a[n + L] = XOR over taps i of a[n + i], a[0..L) = bits of `fill`.
inline std::vector<int> lfsr_bits(unsigned order, const std::vector<unsigned>& taps, std::uint64_t fill,
                                  std::size_t n) {
  std::vector<int> a(order + n);
  for (unsigned i = 0; i < order; ++i) a[i] = static_cast<int>((fill >> i) & 1u);
  for (std::size_t k = 0; k < n; ++k) {
    int v = 0;
    for (unsigned t : taps) v ^= a[k + t];
    a[k + order] = v;
  }
  a.resize(n);
  return a;
}

// Q in dB from BER by bisection on std::erfc.
inline double q_db_from_ber(double ber) {
  double lo = 0.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (std::erfc(mid) > 2.0 * ber)
      lo = mid;
    else
      hi = mid;
  }
  return 20.0 * std::log10(std::sqrt(2.0) * 0.5 * (lo + hi));
}

// Raised-cosine pulse (the RRC-RRC cascade), t in symbol periods.
inline double raised_cosine(double t, double beta) {
  const double pi = 3.14159265358979323846;
  if (std::abs(t) < 1e-12) return 1.0;
  if (beta > 0.0 && std::abs(std::abs(t) - 1.0 / (2.0 * beta)) < 1e-9)
    return pi / 4.0 * std::sin(pi / (2.0 * beta)) / (pi / (2.0 * beta));
  return std::sin(pi * t) / (pi * t) * std::cos(pi * beta * t) / (1.0 - 4.0 * beta * beta * t * t);
}

// Full (non-circular) linear convolution.
inline std::vector<double> convolve(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> y(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) y[i + j] += a[i] * b[j];
  return y;
}

}  // namespace oracle
