#pragma once

// Gray-coded 16-QAM with unit average energy. A symbol index packs four
// bits b0 b1 b2 b3 (b0 most significant); b0 b1 select the in-phase level
// and b2 b3 the quadrature level, each Gray-mapped 00->-3, 01->-1,
// 11->+1, 10->+3, and scaled by 1/sqrt(10).

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "../errors.hpp"

namespace eqlab::txrx {

using cplx = std::complex<double>;

namespace detail {

inline const double kQamScale = 1.0 / std::sqrt(10.0);

constexpr double gray_level(unsigned two_bits) noexcept {
  switch (two_bits & 3u) {
    case 0b00: return -3.0;
    case 0b01: return -1.0;
    case 0b11: return 1.0;
    default: return 3.0;
  }
}

// Nearest level in {-3,-1,1,3} (unscaled) back to its Gray pair.
inline unsigned slice_level(double v) noexcept {
  if (v < -2.0) return 0b00;
  if (v < 0.0) return 0b01;
  if (v < 2.0) return 0b11;
  return 0b10;
}

}  // namespace detail

inline cplx qam16_point(std::uint8_t index) noexcept {
  return {detail::gray_level(index >> 2) * detail::kQamScale, detail::gray_level(index) * detail::kQamScale};
}

inline const std::array<cplx, 16>& qam16_constellation() {
  static const std::array<cplx, 16> pts = [] {
    std::array<cplx, 16> a{};
    for (unsigned i = 0; i < 16; ++i) a[i] = qam16_point(static_cast<std::uint8_t>(i));
    return a;
  }();
  return pts;
}

inline std::uint8_t qam16_decide(cplx s) noexcept {
  const unsigned i = detail::slice_level(s.real() / detail::kQamScale);
  const unsigned q = detail::slice_level(s.imag() / detail::kQamScale);
  return static_cast<std::uint8_t>((i << 2) | q);
}

inline std::vector<std::uint8_t> bits_to_indices(std::span<const std::uint8_t> bits) {
  if (bits.size() % 4 != 0) throw ConfigError("16-QAM mapping needs a bit count divisible by 4");
  std::vector<std::uint8_t> idx(bits.size() / 4);
  for (std::size_t k = 0; k < idx.size(); ++k)
    idx[k] = static_cast<std::uint8_t>((bits[4 * k] << 3) | (bits[4 * k + 1] << 2) | (bits[4 * k + 2] << 1) |
                                       bits[4 * k + 3]);
  return idx;
}

inline std::vector<std::uint8_t> indices_to_bits(std::span<const std::uint8_t> indices) {
  std::vector<std::uint8_t> bits(indices.size() * 4);
  for (std::size_t k = 0; k < indices.size(); ++k)
    for (unsigned b = 0; b < 4; ++b) bits[4 * k + b] = (indices[k] >> (3 - b)) & 1u;
  return bits;
}

inline std::vector<cplx> qam16_map(std::span<const std::uint8_t> bits) {
  const auto idx = bits_to_indices(bits);
  std::vector<cplx> out(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) out[k] = qam16_point(idx[k]);
  return out;
}

inline std::vector<std::uint8_t> qam16_demap_hard(std::span<const cplx> symbols) {
  std::vector<std::uint8_t> idx(symbols.size());
  for (std::size_t k = 0; k < symbols.size(); ++k) idx[k] = qam16_decide(symbols[k]);
  return indices_to_bits(idx);
}

}  // namespace eqlab::txrx
