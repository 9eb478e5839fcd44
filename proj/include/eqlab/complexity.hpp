#pragma once

// Real-multiplication accounting for neural-network equalizers.
//
// Counts are real multiplications per recovered output symbol (RMpS): one
// forward pass of a model consumes one window of `memory` received symbols
// and produces one output symbol. Additions, activations and reshapes are
// not counted.
//
// Per-layer formulas (n_s sequence length, n_i input features):
//   Dense    n_in * n_1                      (n_in = flattened input width)
//   Conv1D   k * n_i * f * n_s'
//   LSTM     n_s * n_h * (4 n_i + 4 n_h + 3)
//   BiLSTM   2 * LSTM
//   Flatten  0
//
// The standalone LSTM formula carries an extra "+ n_o" per step for the
// projection to the next layer. Inside a model that projection *is* the
// next layer, so rmps_model() charges it to the consumer only; adding it to
// the LSTM as well would count the shared multiplications twice.

#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"

namespace eqlab::complexity {

using Count = std::uint64_t;

enum class LayerKind { Dense, Conv1D, LSTM, BiLSTM, Flatten };

// Metadata only: activations cost zero multiplications.
enum class Activation { Linear, LeakyReLU, Tanh, Sigmoid };

inline std::string_view to_string(LayerKind kind) noexcept {
  switch (kind) {
    case LayerKind::Dense: return "dense";
    case LayerKind::Conv1D: return "conv1d";
    case LayerKind::LSTM: return "lstm";
    case LayerKind::BiLSTM: return "bilstm";
    case LayerKind::Flatten: return "flatten";
  }
  return "?";
}

inline std::string_view to_string(Activation a) noexcept {
  switch (a) {
    case Activation::Linear: return "linear";
    case Activation::LeakyReLU: return "leaky_relu";
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
  }
  return "?";
}

struct LayerSpec {
  LayerKind kind = LayerKind::Dense;
  Count units = 1;     // Dense: neurons n_1
  Count filters = 1;   // Conv1D: f
  Count kernel = 1;    // Conv1D: k
  Count stride = 1;
  Count padding = 0;
  Count dilation = 1;
  Count hidden = 1;    // LSTM / BiLSTM: n_h per direction
  Activation activation = Activation::Linear;

  static LayerSpec dense(Count units, Activation act = Activation::Linear) {
    LayerSpec s;
    s.kind = LayerKind::Dense;
    s.units = units;
    s.activation = act;
    return s;
  }
  static LayerSpec conv1d(Count filters, Count kernel, Count stride = 1, Count padding = 0,
                          Count dilation = 1, Activation act = Activation::Linear) {
    LayerSpec s;
    s.kind = LayerKind::Conv1D;
    s.filters = filters;
    s.kernel = kernel;
    s.stride = stride;
    s.padding = padding;
    s.dilation = dilation;
    s.activation = act;
    return s;
  }
  static LayerSpec lstm(Count hidden) {
    LayerSpec s;
    s.kind = LayerKind::LSTM;
    s.hidden = hidden;
    s.activation = Activation::Tanh;
    return s;
  }
  static LayerSpec bilstm(Count hidden) {
    LayerSpec s = lstm(hidden);
    s.kind = LayerKind::BiLSTM;
    return s;
  }
  static LayerSpec flatten() {
    LayerSpec s;
    s.kind = LayerKind::Flatten;
    return s;
  }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// [B, n_s, n_i]. Two-dimensional tensors use steps == 1.
struct TensorShape {
  Count batch = 1;
  Count steps = 1;
  Count features = 1;

  Count width() const noexcept { return steps * features; }
  friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

inline std::string to_string(const TensorShape& s) {
  return "[" + std::to_string(s.batch) + ", " + std::to_string(s.steps) + ", " +
         std::to_string(s.features) + "]";
}

struct ModelSpec {
  Count memory = 1;    // n_s = M
  Count features = 1;  // n_i
  Count outputs = 1;   // n_o
  std::vector<LayerSpec> layers;

  TensorShape input_shape() const noexcept { return {1, memory, features}; }
  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct LayerReport {
  std::size_t index = 0;
  LayerKind kind = LayerKind::Dense;
  TensorShape input;
  TensorShape output;
  Count multiplications = 0;
  Count parameters = 0;
  std::string big_o;
};

struct RmpsReport {
  std::vector<LayerReport> layers;
  Count total = 0;
  Count parameters = 0;
};

namespace detail {

inline Count mul(Count a, Count b) {
  Count r = 0;
  if (__builtin_mul_overflow(a, b, &r)) throw ConfigError("multiplication count overflows 64 bits");
  return r;
}

inline Count add(Count a, Count b) {
  Count r = 0;
  if (__builtin_add_overflow(a, b, &r)) throw ConfigError("multiplication count overflows 64 bits");
  return r;
}

inline void require_positive(Count v, std::string_view what) {
  if (v == 0) throw ConfigError(std::string(what) + " must be >= 1");
}

inline std::string layer_name(std::size_t index, LayerKind kind) {
  return "layer " + std::to_string(index) + " (" + std::string(to_string(kind)) + ")";
}

}  // namespace detail

/// Output sequence length of a 1-D convolution:
///   floor((n_s + 2 padding - dilation (k - 1) - 1) / stride) + 1
/// Throws ConfigError when the dilated kernel does not fit the padded input.
inline Count conv_output_length(Count steps, Count kernel, Count padding, Count dilation,
                                Count stride) {
  detail::require_positive(steps, "sequence length");
  detail::require_positive(kernel, "kernel");
  detail::require_positive(dilation, "dilation");
  detail::require_positive(stride, "stride");
  const Count span = detail::add(detail::mul(dilation, kernel - 1), 1);
  const Count padded = detail::add(steps, detail::mul(2, padding));
  if (span > padded)
    throw ConfigError("effective kernel " + std::to_string(span) +
                      " exceeds padded input length " + std::to_string(padded));
  return (padded - span) / stride + 1;
}

inline Count rmps_dense(Count inputs, Count units, Count outputs) {
  detail::require_positive(inputs, "n_i");
  detail::require_positive(units, "n_1");
  detail::require_positive(outputs, "n_o");
  return detail::add(detail::mul(inputs, units), detail::mul(units, outputs));
}

inline Count rmps_conv1d(Count kernel, Count inputs, Count filters, Count out_steps) {
  detail::require_positive(kernel, "k");
  detail::require_positive(inputs, "n_i");
  detail::require_positive(filters, "n_o");
  detail::require_positive(out_steps, "n_s'");
  return detail::mul(detail::mul(detail::mul(kernel, inputs), filters), out_steps);
}

// Standalone LSTM including the per-step projection to n_o outputs.
inline Count rmps_lstm(Count steps, Count inputs, Count hidden, Count outputs) {
  detail::require_positive(steps, "n_s");
  detail::require_positive(inputs, "n_i");
  detail::require_positive(hidden, "n_h");
  detail::require_positive(outputs, "n_o");
  const Count per_unit = detail::add(
      detail::add(detail::mul(4, inputs), detail::mul(4, hidden)), detail::add(3, outputs));
  return detail::mul(detail::mul(steps, hidden), per_unit);
}

inline Count rmps_bilstm(Count steps, Count inputs, Count hidden, Count outputs) {
  return detail::mul(2, rmps_lstm(steps, inputs, hidden, outputs));
}

inline std::string big_o(LayerKind kind) {
  switch (kind) {
    case LayerKind::LSTM:
    case LayerKind::BiLSTM: return "O(n d²)";
    case LayerKind::Conv1D: return "O(k n d²)";
    case LayerKind::Dense: return "O(n d)";
    case LayerKind::Flatten: return "O(1)";
  }
  return "?";
}

inline std::string big_o(const LayerSpec& layer) { return big_o(layer.kind); }

/// Shape produced by `layer` when fed `in`. Throws ConfigError naming the layer.
inline TensorShape output_shape(const LayerSpec& layer, const TensorShape& in, std::size_t index = 0) {
  const auto name = detail::layer_name(index, layer.kind);
  try {
    switch (layer.kind) {
      case LayerKind::Dense:
        detail::require_positive(layer.units, "units");
        return {in.batch, 1, layer.units};
      case LayerKind::Flatten:
        return {in.batch, 1, in.width()};
      case LayerKind::Conv1D:
        detail::require_positive(layer.filters, "filters");
        return {in.batch,
                conv_output_length(in.steps, layer.kernel, layer.padding, layer.dilation, layer.stride),
                layer.filters};
      case LayerKind::LSTM:
        detail::require_positive(layer.hidden, "hidden units");
        return {in.batch, in.steps, layer.hidden};
      case LayerKind::BiLSTM:
        detail::require_positive(layer.hidden, "hidden units");
        return {in.batch, in.steps, detail::mul(2, layer.hidden)};
    }
  } catch (const ConfigError& e) {
    throw ConfigError(name + ": " + e.what());
  }
  throw ConfigError(name + ": unknown layer kind");
}

inline Count layer_multiplications(const LayerSpec& layer, const TensorShape& in, const TensorShape& out) {
  using detail::mul;
  switch (layer.kind) {
    case LayerKind::Dense: return mul(in.width(), layer.units);
    case LayerKind::Flatten: return 0;
    case LayerKind::Conv1D: return rmps_conv1d(layer.kernel, in.features, layer.filters, out.steps);
    case LayerKind::LSTM:
    case LayerKind::BiLSTM: {
      const Count per_unit = detail::add(detail::add(mul(4, in.features), mul(4, layer.hidden)), 3);
      const Count one = mul(mul(in.steps, layer.hidden), per_unit);
      return layer.kind == LayerKind::BiLSTM ? mul(2, one) : one;
    }
  }
  return 0;
}

inline Count layer_parameters(const LayerSpec& layer, const TensorShape& in) {
  using detail::add;
  using detail::mul;
  switch (layer.kind) {
    case LayerKind::Dense: return add(mul(in.width(), layer.units), layer.units);
    case LayerKind::Flatten: return 0;
    case LayerKind::Conv1D: return add(mul(mul(layer.kernel, in.features), layer.filters), layer.filters);
    case LayerKind::LSTM:
    case LayerKind::BiLSTM: {
      const Count h = layer.hidden;
      const Count one = mul(4, add(add(mul(in.features, h), mul(h, h)), h));
      return layer.kind == LayerKind::BiLSTM ? mul(2, one) : one;
    }
  }
  return 0;
}

/// Walks the layer stack, returning the shape entering each layer plus the final shape.
/// Throws ConfigError on the first broken link, naming the layer and both shapes.
inline std::vector<TensorShape> shape_chain(const ModelSpec& model) {
  if (model.memory == 0 || model.features == 0 || model.outputs == 0)
    throw ConfigError("model input memory, features and outputs must be >= 1");
  std::vector<TensorShape> shapes{model.input_shape()};
  for (std::size_t i = 0; i < model.layers.size(); ++i)
    shapes.push_back(output_shape(model.layers[i], shapes.back(), i));
  const TensorShape& last = shapes.back();
  if (last.width() != model.outputs)
    throw ConfigError("final shape " + to_string(last) + " does not match expected output shape " +
                      to_string(TensorShape{1, 1, model.outputs}));
  return shapes;
}

/// Per-layer and total RMpS computed on the actual inter-layer shapes.
inline RmpsReport rmps_model(const ModelSpec& model) {
  const auto shapes = shape_chain(model);
  RmpsReport report;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const LayerSpec& layer = model.layers[i];
    LayerReport r;
    r.index = i;
    r.kind = layer.kind;
    r.input = shapes[i];
    r.output = shapes[i + 1];
    r.multiplications = layer_multiplications(layer, r.input, r.output);
    r.parameters = layer_parameters(layer, r.input);
    r.big_o = big_o(layer);
    report.total = detail::add(report.total, r.multiplications);
    report.parameters = detail::add(report.parameters, r.parameters);
    report.layers.push_back(std::move(r));
  }
  return report;
}

inline Count param_count(const ModelSpec& model) { return rmps_model(model).parameters; }

}  // namespace eqlab::complexity
