#pragma once

// Dual-polarization fiber link simulation.
//
// Units: distance km, time ps, frequency THz/GHz, power W (fields in sqrt(W)).
// Propagation solves the Manakov equation
//
//   dA/dz = -alpha/2 A - i beta2/2 d2A/dt2 + i (8/9) gamma (|Ax|^2 + |Ay|^2) A
//
// with the symmetric split-step Fourier method: each of the uniform steps
// of size h is L(h/2) N(h) L(h/2), where L is the dispersion + loss operator
// applied in the frequency domain and N the nonlinear phase rotation.
// Every span ends in an EDFA whose gain G = exp(alpha L_span) restores the
// span loss exactly, adding circular Gaussian ASE with one-sided PSD
//   rho = (G - 1) h nu n_sp,   n_sp = NF G / (2 (G - 1))
// per polarization.

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "../errors.hpp"
#include "../io.hpp"
#include "../rng.hpp"
#include "fft.hpp"
#include "prbs.hpp"
#include "qam.hpp"
#include "rrc.hpp"

namespace eqlab::txrx {

inline constexpr double kSpeedOfLightNmPerPs = 2.99792458e5;
inline constexpr double kPlanck = 6.62607015e-34;
inline constexpr double kMaxMeanPowerW = 1.0;  // +30 dBm

struct FiberParams {
  double alpha_db_per_km = 0.2;
  double dispersion_ps_nm_km = 17.0;
  double gamma_per_w_km = 1.2;
  double span_length_km = 50.0;
  std::size_t span_count = 5;

  static FiberParams ssmf() { return {0.2, 17.0, 1.2, 50.0, 5}; }
  static FiberParams twc() { return {0.23, 2.8, 2.5, 50.0, 9}; }

  double alpha_per_km() const noexcept { return alpha_db_per_km * std::numbers::ln10 / 10.0; }
  double span_gain() const noexcept { return std::exp(alpha_per_km() * span_length_km); }

  void validate() const {
    if (!(alpha_db_per_km > 0.0)) throw ConfigError("fiber attenuation must be > 0");
    if (!(span_length_km > 0.0)) throw ConfigError("span length must be > 0");
    if (!(gamma_per_w_km >= 0.0)) throw ConfigError("nonlinearity coefficient must be >= 0");
    if (!std::isfinite(dispersion_ps_nm_km)) throw ConfigError("dispersion must be finite");
  }
};

struct LinkConfig {
  FiberParams fiber = FiberParams::ssmf();
  double launch_power_dbm = 7.0;
  double symbol_rate_gbd = 34.4;
  double rrc_rolloff = 0.1;
  // -infinity disables ASE noise.
  double edfa_noise_figure_db = 4.5;
  double center_wavelength_nm = 1550.0;
  std::size_t samples_per_symbol_sim = 8;
  std::size_t steps_per_span_sim = 50;
  std::uint64_t rng_seed = 1;
  std::size_t rrc_span_symbols = 64;

  static LinkConfig ssmf() { return {}; }
  static LinkConfig twc() {
    LinkConfig c;
    c.fiber = FiberParams::twc();
    c.launch_power_dbm = 2.0;
    return c;
  }

  bool ase_enabled() const noexcept { return std::isfinite(edfa_noise_figure_db); }
  double launch_power_w() const noexcept { return 1e-3 * std::pow(10.0, launch_power_dbm / 10.0); }
  double sim_sample_rate_ghz() const noexcept {
    return symbol_rate_gbd * static_cast<double>(samples_per_symbol_sim);
  }
  // beta2 = -D lambda^2 / (2 pi c), ps^2/km
  double beta2_ps2_per_km() const noexcept {
    return -fiber.dispersion_ps_nm_km * center_wavelength_nm * center_wavelength_nm /
           (2.0 * std::numbers::pi * kSpeedOfLightNmPerPs);
  }
  double accumulated_dispersion_ps_per_nm() const noexcept {
    return fiber.dispersion_ps_nm_km * fiber.span_length_km * static_cast<double>(fiber.span_count);
  }
  // ASE PSD per polarization, W/Hz.
  double ase_psd_w_per_hz() const noexcept {
    if (!ase_enabled()) return 0.0;
    const double g = fiber.span_gain();
    const double nf = std::pow(10.0, edfa_noise_figure_db / 10.0);
    const double n_sp = nf * g / (2.0 * (g - 1.0));
    const double nu = kSpeedOfLightNmPerPs * 1e12 / center_wavelength_nm;  // Hz
    return (g - 1.0) * kPlanck * nu * n_sp;
  }

  void validate() const {
    fiber.validate();
    if (!(symbol_rate_gbd > 0.0)) throw ConfigError("symbol rate must be > 0");
    if (!(rrc_rolloff >= 0.0 && rrc_rolloff <= 1.0)) throw ConfigError("roll-off must be in [0, 1]");
    if (samples_per_symbol_sim < 4) throw ConfigError("simulation needs >= 4 samples per symbol");
    if (samples_per_symbol_sim % 2 != 0) throw ConfigError("simulation samples per symbol must be even");
    if (steps_per_span_sim < 1) throw ConfigError("steps per span must be >= 1");
    if (!(center_wavelength_nm > 0.0)) throw ConfigError("wavelength must be > 0");
    if (std::isnan(edfa_noise_figure_db) || edfa_noise_figure_db == std::numeric_limits<double>::infinity())
      throw ConfigError("noise figure must be finite or -inf (noise off)");
    if (rrc_span_symbols < 1) throw ConfigError("RRC span must be >= 1 symbol");
  }
};

inline io::Json to_json(const LinkConfig& c) {
  return {{"fiber",
           {{"alpha_db_per_km", c.fiber.alpha_db_per_km},
            {"dispersion_ps_nm_km", c.fiber.dispersion_ps_nm_km},
            {"gamma_per_w_km", c.fiber.gamma_per_w_km},
            {"span_length_km", c.fiber.span_length_km},
            {"span_count", c.fiber.span_count}}},
          {"launch_power_dbm", c.launch_power_dbm},
          {"symbol_rate_gbd", c.symbol_rate_gbd},
          {"rrc_rolloff", c.rrc_rolloff},
          {"edfa_noise_figure_db", c.ase_enabled() ? io::Json(c.edfa_noise_figure_db) : io::Json(nullptr)},
          {"center_wavelength_nm", c.center_wavelength_nm},
          {"samples_per_symbol_sim", c.samples_per_symbol_sim},
          {"steps_per_span_sim", c.steps_per_span_sim},
          {"rng_seed", c.rng_seed},
          {"rrc_span_symbols", c.rrc_span_symbols}};
}

inline LinkConfig link_from_json(const io::Json& j) {
  LinkConfig c;
  const auto& f = j.at("fiber");
  c.fiber.alpha_db_per_km = f.at("alpha_db_per_km").get<double>();
  c.fiber.dispersion_ps_nm_km = f.at("dispersion_ps_nm_km").get<double>();
  c.fiber.gamma_per_w_km = f.at("gamma_per_w_km").get<double>();
  c.fiber.span_length_km = f.at("span_length_km").get<double>();
  c.fiber.span_count = f.at("span_count").get<std::size_t>();
  c.launch_power_dbm = j.at("launch_power_dbm").get<double>();
  c.symbol_rate_gbd = j.at("symbol_rate_gbd").get<double>();
  c.rrc_rolloff = j.at("rrc_rolloff").get<double>();
  c.edfa_noise_figure_db = j.at("edfa_noise_figure_db").is_null()
                               ? -std::numeric_limits<double>::infinity()
                               : j["edfa_noise_figure_db"].get<double>();
  c.center_wavelength_nm = j.at("center_wavelength_nm").get<double>();
  c.samples_per_symbol_sim = j.at("samples_per_symbol_sim").get<std::size_t>();
  c.steps_per_span_sim = j.at("steps_per_span_sim").get<std::size_t>();
  c.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  c.rrc_span_symbols = j.value("rrc_span_symbols", c.rrc_span_symbols);
  c.validate();
  return c;
}

inline std::string link_hash(const LinkConfig& c) { return io::json_hash(to_json(c)); }

// Sampled dual-polarization waveform plus its transmitted symbol indices.
struct SignalFrame {
  std::vector<cplx> x;
  std::vector<cplx> y;
  double sample_rate_ghz = 0.0;
  std::size_t samples_per_symbol = 1;
  std::vector<std::uint8_t> truth_x;
  std::vector<std::uint8_t> truth_y;
  std::uint64_t seed = 0;
  std::string link_hash;

  std::size_t symbol_count() const noexcept { return truth_x.size(); }
};

inline double mean_power(const std::vector<cplx>& x, const std::vector<cplx>& y) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::norm(x[i]) + std::norm(y[i]);
  return s / static_cast<double>(x.size());
}

/// PRBS-32 bits -> Gray 16-QAM (8 bits per dual-pol symbol: 4 for X, then 4
/// for Y) -> RRC shaping at the simulation rate -> scaled to launch power.
inline SignalFrame transmit(const LinkConfig& link, std::size_t n_symbols, std::uint64_t seed) {
  link.validate();
  const auto bits = prbs32(seed, 8 * n_symbols);
  SignalFrame f;
  f.seed = seed;
  f.link_hash = link_hash(link);
  f.samples_per_symbol = link.samples_per_symbol_sim;
  f.sample_rate_ghz = link.sim_sample_rate_ghz();
  f.truth_x.resize(n_symbols);
  f.truth_y.resize(n_symbols);
  std::vector<cplx> sx(n_symbols), sy(n_symbols);
  for (std::size_t k = 0; k < n_symbols; ++k) {
    const std::uint8_t* b = bits.data() + 8 * k;
    f.truth_x[k] = static_cast<std::uint8_t>((b[0] << 3) | (b[1] << 2) | (b[2] << 1) | b[3]);
    f.truth_y[k] = static_cast<std::uint8_t>((b[4] << 3) | (b[5] << 2) | (b[6] << 1) | b[7]);
    sx[k] = qam16_point(f.truth_x[k]);
    sy[k] = qam16_point(f.truth_y[k]);
  }
  const std::size_t sps = link.samples_per_symbol_sim;
  const std::size_t taps = default_rrc_taps(sps, link.rrc_span_symbols);
  f.x = rrc_shape(sx, link.rrc_rolloff, sps, taps);
  f.y = rrc_shape(sy, link.rrc_rolloff, sps, taps);
  const double p = mean_power(f.x, f.y);
  if (p > 0.0) {
    const double scale = std::sqrt(link.launch_power_w() / p);
    for (auto& v : f.x) v *= scale;
    for (auto& v : f.y) v *= scale;
  }
  return f;
}

/// Split-step operators for one sample grid.
class SplitStep {
 public:
  SplitStep(std::size_t n, double sample_rate_ghz) : fft_(n), omega_(angular_frequencies(n, sample_rate_ghz)) {}

  std::size_t size() const noexcept { return fft_.size(); }

  // exp((-alpha/2 + i beta2 w^2 / 2) dz); a negative dz inverts it.
  std::vector<cplx> linear_response(double alpha_per_km, double beta2, double dz) const {
    std::vector<cplx> h(omega_.size());
    for (std::size_t k = 0; k < h.size(); ++k) {
      const double w = omega_[k];
      h[k] = std::exp(cplx(-0.5 * alpha_per_km * dz, 0.5 * beta2 * w * w * dz));
    }
    return h;
  }

  void apply_linear(std::vector<cplx>& field, const std::vector<cplx>& response) const {
    fft_.forward(field);
    for (std::size_t k = 0; k < field.size(); ++k) field[k] *= response[k];
    fft_.inverse(field);
  }

  // Manakov self-phase rotation, phi = (8/9) gamma (|Ax|^2 + |Ay|^2) dz.
  static void apply_nonlinear(std::vector<cplx>& x, std::vector<cplx>& y, double gamma, double dz) {
    const double k = (8.0 / 9.0) * gamma * dz;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double phi = k * (std::norm(x[i]) + std::norm(y[i]));
      const cplx rot(std::cos(phi), std::sin(phi));
      x[i] *= rot;
      y[i] *= rot;
    }
  }

  /// `steps` symmetric steps covering signed length `length` (negative = back-propagation).
  void run(std::vector<cplx>& x, std::vector<cplx>& y, double length, std::size_t steps, double alpha_per_km,
           double beta2, double gamma) const {
    if (gamma == 0.0) {
      const auto h = linear_response(alpha_per_km, beta2, length);
      apply_linear(x, h);
      apply_linear(y, h);
      return;
    }
    // Adjacent half steps are fused: L(h/2) N L(h) N ... N L(h/2).
    const double dz = length / static_cast<double>(steps);
    const auto half = linear_response(alpha_per_km, beta2, 0.5 * dz);
    const auto full = linear_response(alpha_per_km, beta2, dz);
    apply_linear(x, half);
    apply_linear(y, half);
    for (std::size_t s = 0; s < steps; ++s) {
      apply_nonlinear(x, y, gamma, dz);
      const auto& h = s + 1 == steps ? half : full;
      apply_linear(x, h);
      apply_linear(y, h);
    }
  }

 private:
  Fft fft_;
  std::vector<double> omega_;
};

struct PropagationTrace {
  std::vector<double> span_output_power_w;
};

/// Multi-span propagation with per-span EDFA. Deterministic in (link, frame.seed).
inline SignalFrame propagate(SignalFrame frame, const LinkConfig& link, PropagationTrace* trace = nullptr) {
  link.validate();
  const std::size_t n = frame.x.size();
  if (n == 0 || link.fiber.span_count == 0) return frame;
  const SplitStep ss(n, frame.sample_rate_ghz);
  const double alpha = link.fiber.alpha_per_km();
  const double beta2 = link.beta2_ps2_per_km();
  const double amp_gain = std::sqrt(link.fiber.span_gain());
  const double sigma = std::sqrt(link.ase_psd_w_per_hz() * frame.sample_rate_ghz * 1e9 / 2.0);
  for (std::size_t span = 0; span < link.fiber.span_count; ++span) {
    ss.run(frame.x, frame.y, link.fiber.span_length_km, link.steps_per_span_sim, alpha, beta2,
           link.fiber.gamma_per_w_km);
    for (auto& v : frame.x) v *= amp_gain;
    for (auto& v : frame.y) v *= amp_gain;
    if (link.ase_enabled()) {
      Rng rng(derive_seed(link.rng_seed ^ derive_seed(frame.seed, 0x415345), span));
      for (auto& v : frame.x) v += cplx(sigma * rng.normal(), sigma * rng.normal());
      for (auto& v : frame.y) v += cplx(sigma * rng.normal(), sigma * rng.normal());
    }
    const double p = mean_power(frame.x, frame.y);
    if (!(p <= kMaxMeanPowerW))
      throw Error("mean power after span " + std::to_string(span) + " exceeds +30 dBm; aborting propagation");
    if (trace) trace->span_output_power_w.push_back(p);
  }
  return frame;
}

/// Frequency-domain all-pass removing the quadratic phase of an accumulated
/// dispersion D*L (ps/nm).
inline std::vector<cplx> cd_compensate(std::vector<cplx> waveform, double accumulated_dispersion_ps_per_nm,
                                       double sample_rate_ghz, double wavelength_nm = 1550.0) {
  if (waveform.empty() || accumulated_dispersion_ps_per_nm == 0.0) return waveform;
  const double beta2_l = -accumulated_dispersion_ps_per_nm * wavelength_nm * wavelength_nm /
                         (2.0 * std::numbers::pi * kSpeedOfLightNmPerPs);
  const SplitStep ss(waveform.size(), sample_rate_ghz);
  ss.apply_linear(waveform, ss.linear_response(0.0, beta2_l, -1.0));
  return waveform;
}

/// Digital back-propagation: spans in reverse order, each undoing the EDFA
/// gain and then running the split-step solver with negated step length
/// (negating alpha, beta2 and gamma) at `steps_per_span` steps.
inline SignalFrame dbp_equalize(SignalFrame rx, const LinkConfig& link, std::size_t steps_per_span = 3) {
  link.validate();
  if (steps_per_span == 0) throw ConfigError("DBP needs at least one step per span");
  const std::size_t n = rx.x.size();
  if (n == 0) return rx;
  const SplitStep ss(n, rx.sample_rate_ghz);
  const double inv_gain = 1.0 / std::sqrt(link.fiber.span_gain());
  for (std::size_t span = 0; span < link.fiber.span_count; ++span) {
    for (auto& v : rx.x) v *= inv_gain;
    for (auto& v : rx.y) v *= inv_gain;
    ss.run(rx.x, rx.y, -link.fiber.span_length_km, steps_per_span, link.fiber.alpha_per_km(),
           link.beta2_ps2_per_km(), link.fiber.gamma_per_w_km);
  }
  return rx;
}

}  // namespace eqlab::txrx
