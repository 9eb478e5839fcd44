#pragma once

// Twin-model symbol equalizer: one network per polarization target, both
// fed the same sliding windows of M received symbols with features
// [Re X, Im X, Re Y, Im Y], each regressing Re/Im of the centre symbol.
//
// Model file (io.hpp container): magic "EQLABMDL", JSON header with format
// "eqlab-model", version "1.0", topology, model spec, seed, training config,
// normalization gains of the training data and per-model parameter counts;
// payload = X-target parameters then Y-target parameters as little-endian
// f64 in the layer order documented in model.hpp.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "../errors.hpp"
#include "../io.hpp"
#include "../model_config.hpp"
#include "../txrx/metrics.hpp"
#include "../txrx/qam.hpp"
#include "../txrx/receiver.hpp"
#include "families.hpp"
#include "model.hpp"
#include "train.hpp"

namespace eqlab::neural {

using txrx::cplx;

enum class Polarization { X, Y };

inline constexpr std::string_view kModelMagic = "EQLABMDL";
inline constexpr std::string_view kModelFormat = "eqlab-model";
inline constexpr int kModelMajor = 1;

/// Windows centred on symbols [h, n - h), h = (M - 1) / 2. Symbols without a
/// full window are excluded.
inline WindowSet make_windows(const txrx::SymbolFrame& f, std::size_t memory, Polarization target) {
  if (memory == 0 || memory % 2 == 0) throw ConfigError("memory M must be odd");
  if (f.size() < memory)
    throw ConfigError("frame of " + std::to_string(f.size()) + " symbols is shorter than memory M=" +
                      std::to_string(memory));
  const std::size_t half = (memory - 1) / 2;
  const std::size_t count = f.size() - 2 * half;
  WindowSet w;
  w.input_size = memory * kFeatures;
  w.output_size = kOutputs;
  w.inputs.resize(count * w.input_size);
  w.targets.resize(count * kOutputs);
  const auto& truth = target == Polarization::X ? f.truth_x : f.truth_y;
  for (std::size_t c = 0; c < count; ++c) {
    double* in = w.inputs.data() + c * w.input_size;
    for (std::size_t t = 0; t < memory; ++t) {
      const cplx sx = f.x[c + t];
      const cplx sy = f.y[c + t];
      in[4 * t + 0] = sx.real();
      in[4 * t + 1] = sx.imag();
      in[4 * t + 2] = sy.real();
      in[4 * t + 3] = sy.imag();
    }
    const cplx s = txrx::qam16_point(truth[c + half]);
    w.targets[2 * c] = s.real();
    w.targets[2 * c + 1] = s.imag();
  }
  return w;
}

struct Equalizer {
  Topology topology;
  Model model_x;
  Model model_y;
  std::uint64_t seed = 1;
  TrainConfig train_config;
  cplx gain_x{1.0, 0.0};
  cplx gain_y{1.0, 0.0};

  std::size_t memory() const noexcept { return topology.memory; }
};

inline Equalizer make_equalizer(const Topology& topology, std::uint64_t seed) {
  Equalizer eq;
  eq.topology = topology;
  eq.seed = seed;
  const auto spec = build_spec(topology);
  eq.model_x = Model(spec);
  eq.model_y = Model(spec);
  eq.model_x.initialize(derive_seed(seed, 0));
  eq.model_y.initialize(derive_seed(seed, 1));
  return eq;
}

struct EqualizerTrainReport {
  TrainReport x;
  TrainReport y;
};

inline EqualizerTrainReport train_equalizer(Equalizer& eq, const txrx::SymbolFrame& data, TrainConfig cfg) {
  eq.train_config = cfg;
  eq.gain_x = data.gain_x;
  eq.gain_y = data.gain_y;
  EqualizerTrainReport r;
  const std::uint64_t base = cfg.seed;
  cfg.seed = derive_seed(base, 0);
  r.x = train(eq.model_x, make_windows(data, eq.memory(), Polarization::X), cfg);
  cfg.seed = derive_seed(base, 1);
  r.y = train(eq.model_y, make_windows(data, eq.memory(), Polarization::Y), cfg);
  return r;
}

struct EqualizedSymbols {
  std::size_t first = 0;  // frame index of x[0] / y[0]
  std::vector<cplx> x;
  std::vector<cplx> y;
};

/// Sliding-window inference (stride 1) on both polarizations.
inline EqualizedSymbols equalize(const Equalizer& eq, const txrx::SymbolFrame& f) {
  const WindowSet w = make_windows(f, eq.memory(), Polarization::X);
  const std::size_t n = w.size();
  EqualizedSymbols out;
  out.first = (eq.memory() - 1) / 2;
  out.x.resize(n);
  out.y.resize(n);
  constexpr std::size_t chunk = 256;
  std::vector<Workspace> ws;
  std::vector<double> buf(chunk * kOutputs);
  for (const auto* pol : {&eq.model_x, &eq.model_y}) {
    auto& dst = pol == &eq.model_x ? out.x : out.y;
    for (std::size_t start = 0; start < n; start += chunk) {
      const std::size_t bs = std::min(chunk, n - start);
      pol->predict_batch(std::span<const double>(w.inputs).subspan(start * w.input_size, bs * w.input_size), bs,
                         std::span<double>(buf).first(bs * kOutputs), ws);
      for (std::size_t b = 0; b < bs; ++b) dst[start + b] = cplx(buf[2 * b], buf[2 * b + 1]);
    }
  }
  return out;
}

/// Hard-decision BER of the raw DSP output over the symbols an equalizer of
/// memory M would score.
inline txrx::EvalResult unequalized_baseline(const txrx::SymbolFrame& f, std::size_t memory) {
  const std::size_t half = (memory - 1) / 2;
  if (f.size() < memory) throw ConfigError("frame shorter than memory M");
  return txrx::evaluate_hard(f, half, f.size() - half);
}

/// Hard-decision BER of the equalizer over the scored (full-window) symbols.
/// Q gain is measured against the unequalized symbols of the same range.
inline txrx::EvalResult evaluate(const Equalizer& eq, const txrx::SymbolFrame& f) {
  const EqualizedSymbols e = equalize(eq, f);
  std::uint64_t errors = 0;
  for (std::size_t i = 0; i < e.x.size(); ++i) {
    const std::size_t k = e.first + i;
    errors += static_cast<std::uint64_t>(std::popcount(static_cast<unsigned>(txrx::qam16_decide(e.x[i]) ^ f.truth_x[k])));
    errors += static_cast<std::uint64_t>(std::popcount(static_cast<unsigned>(txrx::qam16_decide(e.y[i]) ^ f.truth_y[k])));
  }
  auto r = txrx::make_result(errors, 8 * static_cast<std::uint64_t>(e.x.size()));
  const auto base = unequalized_baseline(f, eq.memory());
  r.q_gain_db = txrx::q_gain_db(r.q_db, base.q_db);
  return r;
}

inline io::Json model_header(const Equalizer& eq, const std::string& manifest_hash = "") {
  io::Json h;
  h["format"] = kModelFormat;
  h["version"] = "1.0";
  h["topology"] = to_json(eq.topology);
  h["model"] = complexity::model_to_json(eq.model_x.spec());
  h["seed"] = eq.seed;
  h["train_config"] = to_json(eq.train_config);
  h["normalization"] = {{"x", {eq.gain_x.real(), eq.gain_x.imag()}}, {"y", {eq.gain_y.real(), eq.gain_y.imag()}}};
  h["targets"] = {"x", "y"};
  h["parameters_per_model"] = eq.model_x.parameter_count();
  h["layout"] = "x-target parameters then y-target parameters, f64le, layer order";
  if (!manifest_hash.empty()) h["manifest_hash"] = manifest_hash;
  return h;
}

inline std::vector<std::uint8_t> encode_equalizer(const Equalizer& eq, const std::string& manifest_hash = "") {
  auto w = io::begin_container(kModelMagic, model_header(eq, manifest_hash));
  for (double v : eq.model_x.params()) w.f64(v);
  for (double v : eq.model_y.params()) w.f64(v);
  return w.bytes();
}

inline void save_equalizer(const std::filesystem::path& path, const Equalizer& eq,
                           const std::string& manifest_hash = "") {
  io::write_file(path, encode_equalizer(eq, manifest_hash));
}

inline Equalizer load_equalizer(const std::filesystem::path& path) {
  auto c = io::open_container(io::read_file(path), kModelMagic);
  io::check_header(c.header, kModelFormat, kModelMajor);
  try {
    const auto& h = c.header;
    Equalizer eq = make_equalizer(topology_from_json(h.at("topology")), h.at("seed").get<std::uint64_t>());
    if (complexity::model_from_json(h.at("model")) != eq.model_x.spec())
      throw FormatError("stored model spec does not match its topology");
    eq.train_config = train_config_from_json(h.at("train_config"));
    const auto& n = h.at("normalization");
    eq.gain_x = cplx(n.at("x").at(0).get<double>(), n.at("x").at(1).get<double>());
    eq.gain_y = cplx(n.at("y").at(0).get<double>(), n.at("y").at(1).get<double>());
    const std::size_t per = eq.model_x.parameter_count();
    if (h.at("parameters_per_model").get<std::size_t>() != per) throw FormatError("parameter count mismatch");
    if (c.payload.remaining() != 2 * per * 8) throw FormatError("parameter blob has the wrong size");
    for (auto& v : eq.model_x.params()) v = c.payload.f64();
    for (auto& v : eq.model_y.params()) v = c.payload.f64();
    return eq;
  } catch (const io::Json::exception& e) {
    throw FormatError(std::string("malformed model header: ") + e.what());
  }
}

}  // namespace eqlab::neural
