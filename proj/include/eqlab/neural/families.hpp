#pragma once

// The four equalizer architectures. Each maps a small vector of named
// integer hyperparameters plus the memory M onto a ModelSpec with input
// [M, 4] (Re/Im of X and Y) and output 2 (Re/Im of one polarization).
//
//   mlp         Dense n1 -> Dense n2 -> Dense n3 -> Dense 2
//   cnn-mlp     Conv1D(f, k, same) -> Flatten -> Dense n1 -> Dense n2 -> Dense 2
//   bilstm      BiLSTM n_h -> Flatten -> Dense 2
//   cnn-bilstm  Conv1D(f, k, same) -> BiLSTM n_h -> Flatten -> Dense 2
//
// Hidden dense/conv layers use LeakyReLU; the output layer is linear.
// Convolutions use stride 1 and padding (k-1)/2 with odd k, so n_s' = M.

#include <string>
#include <string_view>
#include <vector>

#include "../complexity.hpp"
#include "../errors.hpp"
#include "../io.hpp"

namespace eqlab::neural {

enum class ArchFamily { MLP3, CNN_MLP2, BiLSTM1, CNN_BiLSTM1 };

inline constexpr std::size_t kFeatures = 4;
inline constexpr std::size_t kOutputs = 2;
inline constexpr std::size_t kDefaultMemory = 41;

inline std::string_view to_string(ArchFamily f) noexcept {
  switch (f) {
    case ArchFamily::MLP3: return "mlp";
    case ArchFamily::CNN_MLP2: return "cnn-mlp";
    case ArchFamily::BiLSTM1: return "bilstm";
    case ArchFamily::CNN_BiLSTM1: return "cnn-bilstm";
  }
  return "?";
}

inline ArchFamily parse_family(std::string_view s) {
  if (s == "mlp") return ArchFamily::MLP3;
  if (s == "cnn-mlp") return ArchFamily::CNN_MLP2;
  if (s == "bilstm") return ArchFamily::BiLSTM1;
  if (s == "cnn-bilstm") return ArchFamily::CNN_BiLSTM1;
  throw ConfigError("unknown architecture family '" + std::string(s) + "'");
}

inline bool is_recurrent(ArchFamily f) noexcept {
  return f == ArchFamily::BiLSTM1 || f == ArchFamily::CNN_BiLSTM1;
}

inline const std::vector<std::string>& hyperparameter_names(ArchFamily f) {
  static const std::vector<std::string> mlp{"n1", "n2", "n3"};
  static const std::vector<std::string> cnn_mlp{"filters", "kernel", "n1", "n2"};
  static const std::vector<std::string> bilstm{"hidden"};
  static const std::vector<std::string> cnn_bilstm{"filters", "kernel", "hidden"};
  switch (f) {
    case ArchFamily::MLP3: return mlp;
    case ArchFamily::CNN_MLP2: return cnn_mlp;
    case ArchFamily::BiLSTM1: return bilstm;
    case ArchFamily::CNN_BiLSTM1: return cnn_bilstm;
  }
  return mlp;
}

// Index of the (odd) convolution kernel size in the hyperparameter vector, if any.
inline std::ptrdiff_t kernel_index(ArchFamily f) noexcept {
  return (f == ArchFamily::CNN_MLP2 || f == ArchFamily::CNN_BiLSTM1) ? 1 : -1;
}

struct Topology {
  ArchFamily family = ArchFamily::MLP3;
  std::size_t memory = kDefaultMemory;
  std::vector<std::size_t> values;  // ordered as hyperparameter_names(family)

  friend bool operator==(const Topology&, const Topology&) = default;
};

inline std::string describe(const Topology& t) {
  std::string s;
  const auto& names = hyperparameter_names(t.family);
  for (std::size_t i = 0; i < t.values.size() && i < names.size(); ++i) {
    if (!s.empty()) s += ';';
    s += names[i] + "=" + std::to_string(t.values[i]);
  }
  return s;
}

inline void validate(const Topology& t) {
  if (t.memory == 0 || t.memory % 2 == 0) throw ConfigError("memory M must be odd and >= 1");
  if (t.values.size() != hyperparameter_names(t.family).size())
    throw ConfigError("family '" + std::string(to_string(t.family)) + "' expects " +
                      std::to_string(hyperparameter_names(t.family).size()) + " hyperparameters");
  for (auto v : t.values)
    if (v == 0) throw ConfigError("hyperparameters must be >= 1");
  const auto ki = kernel_index(t.family);
  if (ki >= 0) {
    const auto k = t.values[static_cast<std::size_t>(ki)];
    if (k % 2 == 0) throw ConfigError("convolution kernel must be odd");
    if (k > t.memory) throw ConfigError("convolution kernel exceeds memory M");
  }
}

inline complexity::ModelSpec build_spec(const Topology& t) {
  using complexity::Activation;
  using complexity::LayerSpec;
  validate(t);
  complexity::ModelSpec m;
  m.memory = t.memory;
  m.features = kFeatures;
  m.outputs = kOutputs;
  const auto& v = t.values;
  auto conv = [](std::size_t f, std::size_t k) {
    return LayerSpec::conv1d(f, k, 1, (k - 1) / 2, 1, Activation::LeakyReLU);
  };
  switch (t.family) {
    case ArchFamily::MLP3:
      m.layers = {LayerSpec::dense(v[0], Activation::LeakyReLU), LayerSpec::dense(v[1], Activation::LeakyReLU),
                  LayerSpec::dense(v[2], Activation::LeakyReLU), LayerSpec::dense(kOutputs)};
      break;
    case ArchFamily::CNN_MLP2:
      m.layers = {conv(v[0], v[1]), LayerSpec::flatten(), LayerSpec::dense(v[2], Activation::LeakyReLU),
                  LayerSpec::dense(v[3], Activation::LeakyReLU), LayerSpec::dense(kOutputs)};
      break;
    case ArchFamily::BiLSTM1:
      m.layers = {LayerSpec::bilstm(v[0]), LayerSpec::flatten(), LayerSpec::dense(kOutputs)};
      break;
    case ArchFamily::CNN_BiLSTM1:
      m.layers = {conv(v[0], v[1]), LayerSpec::bilstm(v[2]), LayerSpec::flatten(), LayerSpec::dense(kOutputs)};
      break;
  }
  return m;
}

inline complexity::Count topology_rmps(const Topology& t) { return complexity::rmps_model(build_spec(t)).total; }

inline io::Json to_json(const Topology& t) {
  io::Json hp = io::Json::object();
  const auto& names = hyperparameter_names(t.family);
  for (std::size_t i = 0; i < names.size(); ++i) hp[names[i]] = t.values.at(i);
  return {{"family", std::string(to_string(t.family))}, {"memory", t.memory}, {"hyperparameters", hp}};
}

inline Topology topology_from_json(const io::Json& j) {
  Topology t;
  t.family = parse_family(j.at("family").get<std::string>());
  t.memory = j.at("memory").get<std::size_t>();
  for (const auto& name : hyperparameter_names(t.family)) {
    if (!j.at("hyperparameters").contains(name)) throw ConfigError("missing hyperparameter '" + name + "'");
    t.values.push_back(j["hyperparameters"][name].get<std::size_t>());
  }
  validate(t);
  return t;
}

/// Largest balanced topology whose RMpS does not exceed `target`: all
/// hyperparameters grow round-robin (kernel by 2, capped at min(M, 15)).
/// Throws InfeasibleError if even the minimal topology exceeds `target`.
inline Topology topology_for_budget(ArchFamily family, complexity::Count target,
                                    std::size_t memory = kDefaultMemory) {
  Topology t{family, memory, std::vector<std::size_t>(hyperparameter_names(family).size(), 1)};
  if (topology_rmps(t) > target)
    throw InfeasibleError("family '" + std::string(to_string(family)) + "' cannot fit " + std::to_string(target) +
                          " RMpS at M=" + std::to_string(memory));
  const auto ki = kernel_index(family);
  const std::size_t kmax = std::min<std::size_t>(memory, 15);
  bool grew = true;
  while (grew) {
    grew = false;
    for (std::size_t i = 0; i < t.values.size(); ++i) {
      Topology next = t;
      const bool is_kernel = static_cast<std::ptrdiff_t>(i) == ki;
      next.values[i] += is_kernel ? 2 : 1;
      if (is_kernel && next.values[i] > kmax) continue;
      if (topology_rmps(next) <= target) {
        t = std::move(next);
        grew = true;
      }
    }
  }
  return t;
}

}  // namespace eqlab::neural
