#pragma once

// Root-raised-cosine pulse shaping and matched filtering. Frames are
// periodic, so both filters are circular convolutions; symbol k sits at
// sample k * sps and filters are centred, which makes the shaping ->
// matched cascade zero-delay.

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include "../errors.hpp"

namespace eqlab::txrx {

using cplx = std::complex<double>;

/// Continuous RRC impulse response, t in symbol periods, unnormalized.
inline double rrc_impulse(double t, double rolloff) {
  constexpr double pi = std::numbers::pi;
  const double b = rolloff;
  if (std::abs(t) < 1e-12) return 1.0 - b + 4.0 * b / pi;
  if (b > 0.0 && std::abs(std::abs(t) - 1.0 / (4.0 * b)) < 1e-12) {
    return b / std::sqrt(2.0) *
           ((1.0 + 2.0 / pi) * std::sin(pi / (4.0 * b)) + (1.0 - 2.0 / pi) * std::cos(pi / (4.0 * b)));
  }
  const double num = std::sin(pi * t * (1.0 - b)) + 4.0 * b * t * std::cos(pi * t * (1.0 + b));
  const double den = pi * t * (1.0 - (4.0 * b * t) * (4.0 * b * t));
  return num / den;
}

/// Odd-length RRC taps sampled at `sps` samples per symbol, unit energy.
inline std::vector<double> rrc_taps(double rolloff, std::size_t sps, std::size_t taps) {
  if (taps % 2 == 0) throw ConfigError("RRC tap count must be odd");
  if (sps < 2) throw ConfigError("RRC filter needs at least 2 samples per symbol");
  if (!(rolloff >= 0.0 && rolloff <= 1.0)) throw ConfigError("RRC roll-off must be in [0, 1]");
  std::vector<double> h(taps);
  const auto half = static_cast<std::ptrdiff_t>(taps / 2);
  double energy = 0.0;
  for (std::ptrdiff_t n = -half; n <= half; ++n) {
    const double v = rrc_impulse(static_cast<double>(n) / static_cast<double>(sps), rolloff);
    h[static_cast<std::size_t>(n + half)] = v;
    energy += v * v;
  }
  const double norm = 1.0 / std::sqrt(energy);
  for (auto& v : h) v *= norm;
  return h;
}

inline std::size_t default_rrc_taps(std::size_t sps, std::size_t span_symbols = 64) {
  return span_symbols * sps + 1;
}

/// Upsamples symbols by `sps` and shapes them: y[n] = sum_k s_k h[n - k sps] (circular).
inline std::vector<cplx> rrc_shape(std::span<const cplx> symbols, double rolloff, std::size_t sps,
                                   std::size_t taps) {
  const auto h = rrc_taps(rolloff, sps, taps);
  const std::size_t n = symbols.size() * sps;
  std::vector<cplx> y(n);
  if (n == 0) return y;
  const auto half = static_cast<std::ptrdiff_t>(taps / 2);
  const auto nn = static_cast<std::ptrdiff_t>(n);
  for (std::size_t k = 0; k < symbols.size(); ++k) {
    const auto base = static_cast<std::ptrdiff_t>(k * sps) - half;
    for (std::size_t j = 0; j < taps; ++j) {
      std::ptrdiff_t idx = (base + static_cast<std::ptrdiff_t>(j)) % nn;
      if (idx < 0) idx += nn;
      y[static_cast<std::size_t>(idx)] += symbols[k] * h[j];
    }
  }
  return y;
}

/// Matched filter at the waveform's own rate (circular; RRC taps are symmetric).
inline std::vector<cplx> rrc_matched(std::span<const cplx> waveform, double rolloff, std::size_t sps,
                                     std::size_t taps) {
  const auto h = rrc_taps(rolloff, sps, taps);
  const std::size_t n = waveform.size();
  std::vector<cplx> y(n);
  if (n == 0) return y;
  const auto half = static_cast<std::ptrdiff_t>(taps / 2);
  const auto nn = static_cast<std::ptrdiff_t>(n);
  for (std::size_t i = 0; i < n; ++i) {
    cplx acc{};
    const auto base = static_cast<std::ptrdiff_t>(i) - half;
    for (std::size_t j = 0; j < taps; ++j) {
      std::ptrdiff_t idx = (base + static_cast<std::ptrdiff_t>(j)) % nn;
      if (idx < 0) idx += nn;
      acc += waveform[static_cast<std::size_t>(idx)] * h[j];
    }
    y[i] = acc;
  }
  return y;
}

inline std::vector<cplx> decimate(std::span<const cplx> samples, std::size_t factor, std::size_t offset = 0) {
  if (factor == 0) throw ConfigError("decimation factor must be >= 1");
  std::vector<cplx> out;
  out.reserve(samples.size() / factor + 1);
  for (std::size_t i = offset; i < samples.size(); i += factor) out.push_back(samples[i]);
  return out;
}

}  // namespace eqlab::txrx
