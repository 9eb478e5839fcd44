#pragma once

// JSON form of ModelSpec:
//
//   {
//     "version": "1.0",                       (optional; major must be 1)
//     "input": {"memory": 41, "features": 4},
//     "output": 2,
//     "layers": [
//       {"type": "conv1d", "filters": 8, "kernel": 3, "stride": 1,
//        "padding": 1, "dilation": 1, "activation": "leaky_relu"},
//       {"type": "bilstm", "units": 16},
//       {"type": "flatten"},
//       {"type": "dense", "units": 2, "activation": "linear"}
//     ]
//   }
//
// "units" is the neuron count for dense layers and the per-direction hidden
// size for lstm/bilstm. Omitted stride/dilation default to 1, padding to 0,
// activation to "linear".

#include <string>
#include <string_view>

#include "complexity.hpp"
#include "io.hpp"

namespace eqlab::complexity {

using Json = nlohmann::json;

inline LayerKind parse_layer_kind(std::string_view s) {
  if (s == "dense") return LayerKind::Dense;
  if (s == "conv1d") return LayerKind::Conv1D;
  if (s == "lstm") return LayerKind::LSTM;
  if (s == "bilstm") return LayerKind::BiLSTM;
  if (s == "flatten") return LayerKind::Flatten;
  throw ConfigError("unknown layer type '" + std::string(s) + "'");
}

inline Activation parse_activation(std::string_view s) {
  if (s == "linear") return Activation::Linear;
  if (s == "leaky_relu") return Activation::LeakyReLU;
  if (s == "tanh") return Activation::Tanh;
  if (s == "sigmoid") return Activation::Sigmoid;
  throw ConfigError("unknown activation '" + std::string(s) + "'");
}

namespace detail {

inline Count count_field(const Json& obj, const char* key, Count fallback, bool required,
                         const std::string& where) {
  if (!obj.contains(key)) {
    if (required) throw ConfigError(where + ": missing \"" + key + "\"");
    return fallback;
  }
  const Json& v = obj.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw ConfigError(where + ": \"" + key + "\" must be a non-negative integer");
  return v.get<Count>();
}

// 1-based line and column of a byte offset.
inline std::string position_of(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace detail

inline LayerSpec layer_from_json(const Json& j, std::size_t index) {
  const std::string where = "layer " + std::to_string(index);
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  if (!j.contains("type") || !j["type"].is_string()) throw ConfigError(where + ": missing \"type\"");
  LayerSpec s;
  s.kind = parse_layer_kind(j["type"].get<std::string>());
  const std::string named = where + " (" + std::string(to_string(s.kind)) + ")";
  if (j.contains("activation")) {
    if (!j["activation"].is_string()) throw ConfigError(named + ": \"activation\" must be a string");
    s.activation = parse_activation(j["activation"].get<std::string>());
  }
  switch (s.kind) {
    case LayerKind::Dense:
      s.units = detail::count_field(j, "units", 1, true, named);
      break;
    case LayerKind::Conv1D:
      s.filters = detail::count_field(j, "filters", 1, true, named);
      s.kernel = detail::count_field(j, "kernel", 1, true, named);
      s.stride = detail::count_field(j, "stride", 1, false, named);
      s.padding = detail::count_field(j, "padding", 0, false, named);
      s.dilation = detail::count_field(j, "dilation", 1, false, named);
      break;
    case LayerKind::LSTM:
    case LayerKind::BiLSTM:
      s.hidden = detail::count_field(j, "units", 1, true, named);
      if (!j.contains("activation")) s.activation = Activation::Tanh;
      break;
    case LayerKind::Flatten:
      break;
  }
  return s;
}

inline Json layer_to_json(const LayerSpec& s) {
  Json j;
  j["type"] = std::string(to_string(s.kind));
  switch (s.kind) {
    case LayerKind::Dense:
      j["units"] = s.units;
      j["activation"] = std::string(to_string(s.activation));
      break;
    case LayerKind::Conv1D:
      j["filters"] = s.filters;
      j["kernel"] = s.kernel;
      j["stride"] = s.stride;
      j["padding"] = s.padding;
      j["dilation"] = s.dilation;
      j["activation"] = std::string(to_string(s.activation));
      break;
    case LayerKind::LSTM:
    case LayerKind::BiLSTM:
      j["units"] = s.hidden;
      break;
    case LayerKind::Flatten:
      break;
  }
  return j;
}

inline ModelSpec model_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  if (j.contains("version")) {
    if (!j["version"].is_string()) throw FormatError("\"version\" must be a string");
    if (io::major_version(j["version"].get<std::string>()) != 1)
      throw FormatError("unsupported model config major version '" + j["version"].get<std::string>() + "'");
  }
  if (!j.contains("input") || !j["input"].is_object()) throw ConfigError("missing \"input\" object");
  ModelSpec m;
  m.memory = detail::count_field(j["input"], "memory", 1, true, "input");
  m.features = detail::count_field(j["input"], "features", 1, true, "input");
  if (!j.contains("output") || !j["output"].is_number_integer())
    throw ConfigError("missing integer \"output\"");
  m.outputs = j["output"].get<Count>();
  if (!j.contains("layers") || !j["layers"].is_array()) throw ConfigError("missing \"layers\" array");
  for (std::size_t i = 0; i < j["layers"].size(); ++i) m.layers.push_back(layer_from_json(j["layers"][i], i));
  return m;
}

inline Json model_to_json(const ModelSpec& m) {
  Json j;
  j["version"] = "1.0";
  j["input"] = {{"memory", m.memory}, {"features", m.features}};
  j["output"] = m.outputs;
  j["layers"] = Json::array();
  for (const auto& l : m.layers) j["layers"].push_back(layer_to_json(l));
  return j;
}

/// Parses config text; syntax errors are reported with line and column.
inline ModelSpec parse_model_config(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    const std::size_t at = e.byte > 0 ? e.byte - 1 : 0;
    throw FormatError("malformed JSON at " + detail::position_of(text, at) + ": " + e.what());
  }
  return model_from_json(j);
}

inline Json report_to_json(const RmpsReport& r) {
  Json j;
  j["total_rmps"] = r.total;
  j["parameters"] = r.parameters;
  j["layers"] = Json::array();
  for (const auto& l : r.layers) {
    j["layers"].push_back({{"index", l.index},
                           {"type", std::string(to_string(l.kind))},
                           {"input_shape", {l.input.batch, l.input.steps, l.input.features}},
                           {"output_shape", {l.output.batch, l.output.steps, l.output.features}},
                           {"rmps", l.multiplications},
                           {"parameters", l.parameters},
                           {"big_o", l.big_o}});
  }
  return j;
}

}  // namespace eqlab::complexity
