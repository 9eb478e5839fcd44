#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>

#include <boost/math/special_functions/erf.hpp>

#include "../errors.hpp"
#include "../io.hpp"

namespace eqlab::txrx {

struct EvalResult {
  std::uint64_t bit_errors = 0;
  std::uint64_t bits = 0;
  double ber = 0.0;
  double q_db = std::numeric_limits<double>::infinity();
  double q_gain_db = 0.0;
};

/// Q = 20 log10(sqrt(2) erfcinv(2 BER)). BER == 0 gives +inf; BER >= 0.5 gives NaN (undefined).
inline double q_factor_db(double ber) {
  if (std::isnan(ber) || ber < 0.0) throw ConfigError("BER must be >= 0");
  if (ber == 0.0) return std::numeric_limits<double>::infinity();
  if (ber >= 0.5) return std::numeric_limits<double>::quiet_NaN();
  return 20.0 * std::log10(std::sqrt(2.0) * boost::math::erfc_inv(2.0 * ber));
}

inline double q_gain_db(double q_eq, double q_ref) {
  if (std::isnan(q_eq) || std::isnan(q_ref)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(q_eq) && std::isinf(q_ref)) return 0.0;
  return q_eq - q_ref;
}

inline EvalResult make_result(std::uint64_t errors, std::uint64_t bits) {
  EvalResult r;
  r.bit_errors = errors;
  r.bits = bits;
  r.ber = bits == 0 ? 0.0 : static_cast<double>(errors) / static_cast<double>(bits);
  r.q_db = q_factor_db(r.ber);
  return r;
}

/// Bit-by-bit comparison of two 0/1 streams.
inline EvalResult ber_count(std::span<const std::uint8_t> decided_bits, std::span<const std::uint8_t> truth_bits) {
  if (decided_bits.size() != truth_bits.size()) throw ConfigError("bit streams differ in length");
  std::uint64_t errors = 0;
  for (std::size_t i = 0; i < decided_bits.size(); ++i) errors += (decided_bits[i] & 1u) != (truth_bits[i] & 1u);
  return make_result(errors, decided_bits.size());
}

/// Bit errors between 4-bit 16-QAM symbol indices.
inline std::uint64_t symbol_bit_errors(std::span<const std::uint8_t> decided, std::span<const std::uint8_t> truth) {
  if (decided.size() != truth.size()) throw ConfigError("symbol streams differ in length");
  std::uint64_t errors = 0;
  for (std::size_t i = 0; i < decided.size(); ++i)
    errors += static_cast<std::uint64_t>(std::popcount(static_cast<unsigned>((decided[i] ^ truth[i]) & 0xfu)));
  return errors;
}

// JSON numbers cannot carry inf/NaN: those become null plus a status string.
inline io::Json q_to_json(double q) {
  if (std::isnan(q)) return nullptr;
  if (std::isinf(q)) return nullptr;
  return q;
}

inline std::string q_status(double q) {
  if (std::isnan(q)) return "undefined";
  if (std::isinf(q)) return q > 0 ? "infinite" : "-infinite";
  return "finite";
}

inline io::Json to_json(const EvalResult& r) {
  return {{"bit_errors", r.bit_errors}, {"bits", r.bits},
          {"ber", r.ber},               {"q_db", q_to_json(r.q_db)},
          {"q_status", q_status(r.q_db)}, {"q_gain_db", q_to_json(r.q_gain_db)},
          {"q_gain_status", q_status(r.q_gain_db)}};
}

}  // namespace eqlab::txrx
