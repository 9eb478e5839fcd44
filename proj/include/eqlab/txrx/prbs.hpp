#pragma once

// Fibonacci linear-feedback shift registers.
//
// A polynomial x^L + sum(c_i x^i) generates a_{n+L} = XOR_{c_i = 1} a_{n+i}.
// PRBS-32 uses x^32 + x^22 + x^2 + x + 1 with initial fill (all ones XOR seed).

#include <cstdint>
#include <initializer_list>
#include <vector>

#include "../errors.hpp"

namespace eqlab::txrx {

class Lfsr {
 public:
  // `taps` are the exponents i < order with c_i = 1 (0 must be among them).
  Lfsr(unsigned order, std::initializer_list<unsigned> taps, std::uint64_t fill) : order_(order) {
    if (order == 0 || order > 63) throw ConfigError("LFSR order must be in [1, 63]");
    for (unsigned t : taps) {
      if (t >= order) throw ConfigError("LFSR tap exponent must be below the order");
      mask_ |= std::uint64_t{1} << t;
    }
    state_ = fill & ((std::uint64_t{1} << order) - 1);
    if (state_ == 0) throw ConfigError("LFSR fill must be non-zero");
  }

  // Emits a_n and advances to a_{n+1}.
  std::uint8_t next() noexcept {
    const std::uint8_t out = state_ & 1u;
    const std::uint64_t feedback = static_cast<std::uint64_t>(__builtin_parityll(state_ & mask_));
    state_ = (state_ >> 1) | (feedback << (order_ - 1));
    return out;
  }

  std::uint64_t state() const noexcept { return state_; }

 private:
  unsigned order_;
  std::uint64_t mask_ = 0;
  std::uint64_t state_ = 0;
};

inline Lfsr make_prbs32(std::uint64_t seed) {
  if (seed == 0) throw ConfigError("PRBS seed must be non-zero");
  const std::uint64_t fill = 0xffffffffULL ^ (seed & 0xffffffffULL);
  if (fill == 0) throw ConfigError("PRBS seed produces an all-zero register");
  return Lfsr(32, {22, 2, 1, 0}, fill);
}

inline std::vector<std::uint8_t> prbs32(std::uint64_t seed, std::size_t n_bits) {
  Lfsr lfsr = make_prbs32(seed);
  std::vector<std::uint8_t> bits(n_bits);
  for (auto& b : bits) b = lfsr.next();
  return bits;
}

}  // namespace eqlab::txrx
