#pragma once

// From-scratch feed-forward / recurrent network over real-valued windows.
//
// Every real multiplication of the forward pass goes through a `Mul`
// functor. With PlainMul it compiles to an ordinary product; with
// MulCounter each product is tallied, which makes the forward pass an
// executable oracle for the closed-form counts in complexity.hpp.
// Activation functions are evaluated with ordinary arithmetic and are not
// counted, matching the counting convention.
//
// Sample layout: row-major [steps][features]; a batch is B such samples back
// to back. Parameters live in one flat vector; each layer owns a contiguous
// slice, weights stored input-major so the inner loops run over outputs:
//   Dense    W[n_in][units], b[units]
//   Conv1D   W[kernel][n_i][filters], b[filters]
//   LSTM     Wx[n_i][4 n_h], Wh[n_h][4 n_h], b[4 n_h]   gate order i, f, g, o
//   BiLSTM   forward LSTM slice, then backward LSTM slice
//
// An LSTM/BiLSTM emits h_t at every step ([n_s, n_h] or [n_s, 2 n_h]).
// Every pre-activation is accumulated as bias + sum over inputs in index
// order, so results do not depend on the batch size.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <thread>
#include <vector>

#include "../complexity.hpp"
#include "../rng.hpp"

namespace eqlab::neural {

using complexity::Activation;
using complexity::Count;
using complexity::LayerKind;
using complexity::LayerSpec;
using complexity::ModelSpec;
using complexity::TensorShape;

inline constexpr double kLeakySlope = 0.2;

struct PlainMul {
  double operator()(double a, double b) const noexcept { return a * b; }
};

class MulCounter {
 public:
  double operator()(double a, double b) noexcept {
    ++count_;
    return a * b;
  }
  Count count() const noexcept { return count_; }

 private:
  Count count_ = 0;
};

namespace detail {

inline double activate(Activation a, double z) noexcept {
  switch (a) {
    case Activation::Linear: return z;
    case Activation::LeakyReLU: return z > 0.0 ? z : kLeakySlope * z;
    case Activation::Tanh: return std::tanh(z);
    case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-z));
  }
  return z;
}

// Derivative expressed through the activation's output y.
inline double activate_grad(Activation a, double y) noexcept {
  switch (a) {
    case Activation::Linear: return 1.0;
    case Activation::LeakyReLU: return y > 0.0 ? 1.0 : kLeakySlope;
    case Activation::Tanh: return 1.0 - y * y;
    case Activation::Sigmoid: return y * (1.0 - y);
  }
  return 1.0;
}

inline void activate_inplace(Activation a, double* v, std::size_t n) noexcept {
  if (a == Activation::Linear) return;
  for (std::size_t i = 0; i < n; ++i) v[i] = activate(a, v[i]);
}

inline double sigmoid(double z) noexcept { return 1.0 / (1.0 + std::exp(-z)); }

// y[0..n) += a * x[0..n)
template <class Mul>
inline void axpy(double a, const double* x, double* y, std::size_t n, Mul& mul) noexcept {
  for (std::size_t i = 0; i < n; ++i) y[i] += mul(a, x[i]);
}

inline void axpy(double a, const double* x, double* y, std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

// Backward-pass dot product with four partial sums.
inline double dot(const double* a, const double* b, std::size_t n) noexcept {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

}  // namespace detail

struct LayerPlan {
  LayerSpec spec;
  TensorShape in;
  TensorShape out;
  std::size_t offset = 0;
  std::size_t size = 0;
};

// Post-activation gates (i, f, g, o per step) and cell state for one LSTM
// direction, [batch][steps][...].
struct LstmTrace {
  std::vector<double> gates;
  std::vector<double> cell;
  std::vector<double> cell_tanh;
};

// Activations of the last forward batch, kept for backpropagation.
struct Workspace {
  std::size_t batch = 0;
  std::vector<std::vector<double>> acts;      // [layer] -> batch x width
  std::vector<std::vector<LstmTrace>> lstm;   // [layer][direction]
  std::vector<double> padded;
  std::vector<double> z;

  std::span<const double> output(std::size_t b) const {
    const std::size_t w = acts.back().size() / std::max<std::size_t>(batch, 1);
    return std::span<const double>(acts.back()).subspan(b * w, w);
  }
};

class Model {
 public:
  Model() = default;

  explicit Model(ModelSpec spec) : spec_(std::move(spec)) {
    const auto shapes = complexity::shape_chain(spec_);
    std::size_t offset = 0;
    for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
      LayerPlan p{spec_.layers[i], shapes[i], shapes[i + 1], offset,
                  static_cast<std::size_t>(complexity::layer_parameters(spec_.layers[i], shapes[i]))};
      offset += p.size;
      plan_.push_back(p);
    }
    params_.assign(offset, 0.0);
  }

  const ModelSpec& spec() const noexcept { return spec_; }
  const std::vector<LayerPlan>& plan() const noexcept { return plan_; }
  std::size_t input_size() const noexcept { return spec_.memory * spec_.features; }
  std::size_t output_size() const noexcept { return spec_.outputs; }
  std::size_t parameter_count() const noexcept { return params_.size(); }

  std::span<double> params() noexcept { return params_; }
  std::span<const double> params() const noexcept { return params_; }

  // Batch inference splits samples across this many threads. Timing
  // harnesses require 1.
  void set_intra_op_threads(unsigned n) noexcept { threads_ = std::max(1u, n); }
  unsigned intra_op_threads() const noexcept { return threads_; }

  /// Fan-in scaled uniform init for dense/conv, Glorot input kernels and
  /// orthogonal recurrent kernels for LSTMs, forget-gate bias 1.
  void initialize(std::uint64_t seed) {
    Rng rng(seed);
    std::fill(params_.begin(), params_.end(), 0.0);
    for (const auto& p : plan_) {
      double* w = params_.data() + p.offset;
      switch (p.spec.kind) {
        case LayerKind::Dense:
        case LayerKind::Conv1D: {
          const std::size_t fan_in = p.spec.kind == LayerKind::Dense
                                         ? p.in.width()
                                         : p.spec.kernel * p.in.features;
          const std::size_t outs = p.spec.kind == LayerKind::Dense ? p.spec.units : p.spec.filters;
          const double limit = std::sqrt((p.spec.activation == Activation::LeakyReLU ? 6.0 : 3.0) /
                                         static_cast<double>(fan_in));
          for (std::size_t i = 0; i < outs * fan_in; ++i) w[i] = rng.uniform(-limit, limit);
          break;
        }
        case LayerKind::LSTM:
        case LayerKind::BiLSTM: {
          const std::size_t dirs = p.spec.kind == LayerKind::BiLSTM ? 2 : 1;
          const std::size_t h = p.spec.hidden, ni = p.in.features;
          for (std::size_t d = 0; d < dirs; ++d) init_lstm(w + d * lstm_size(ni, h), ni, h, rng);
          break;
        }
        case LayerKind::Flatten: break;
      }
    }
  }

  Workspace make_workspace() const { return {}; }

  /// A batch of samples through the network; results in ws.acts.back()
  /// ([batch][outputs]).
  template <class Mul>
  void forward_batch(std::span<const double> inputs, std::size_t batch, Workspace& ws, Mul& mul) const {
    if (batch == 0 || inputs.size() != batch * input_size())
      throw ConfigError("input has " + std::to_string(inputs.size()) + " values, model expects " +
                        std::to_string(batch) + " x " + std::to_string(input_size()) + " (" +
                        complexity::to_string(spec_.input_shape()) + ")");
    prepare(ws, batch);
    std::copy(inputs.begin(), inputs.end(), ws.acts[0].begin());
    for (std::size_t i = 0; i < plan_.size(); ++i) {
      const LayerPlan& p = plan_[i];
      const double* w = params_.data() + p.offset;
      const double* x = ws.acts[i].data();
      double* y = ws.acts[i + 1].data();
      switch (p.spec.kind) {
        case LayerKind::Dense: dense_forward(p, w, x, batch, y, mul); break;
        case LayerKind::Flatten: std::copy(ws.acts[i].begin(), ws.acts[i].end(), ws.acts[i + 1].begin()); break;
        case LayerKind::Conv1D: conv_forward(p, w, x, batch, y, ws.padded, mul); break;
        case LayerKind::LSTM:
        case LayerKind::BiLSTM: {
          const std::size_t dirs = ws.lstm[i].size();
          for (std::size_t d = 0; d < dirs; ++d)
            lstm_forward(p, w + d * lstm_size(p.in.features, p.spec.hidden), d == 1, d, x, batch, y,
                         ws.lstm[i][d], ws.z, mul);
          break;
        }
      }
    }
  }

  /// One sample; the result is ws.acts.back().
  template <class Mul>
  void forward(std::span<const double> input, Workspace& ws, Mul& mul) const {
    forward_batch(input, 1, ws, mul);
  }

  std::vector<double> predict(std::span<const double> input) const {
    Workspace ws;
    PlainMul mul;
    forward(input, ws, mul);
    return ws.acts.back();
  }

  /// Forward pass returning the number of real multiplications executed.
  Count count_multiplications(std::span<const double> input) const {
    Workspace ws;
    MulCounter counter;
    forward(input, ws, counter);
    return counter.count();
  }

  /// Batch inference: inputs [batch][input_size] -> outputs [batch][output_size].
  void predict_batch(std::span<const double> inputs, std::size_t batch, std::span<double> outputs,
                     std::vector<Workspace>& workspaces) const {
    const std::size_t in = input_size(), out = output_size();
    if (inputs.size() != batch * in || outputs.size() != batch * out)
      throw ConfigError("batch buffers do not match model shapes");
    if (batch == 0) return;
    const std::size_t threads = std::min<std::size_t>(threads_, batch);
    if (workspaces.size() < threads) workspaces.resize(threads);
    auto run = [&](std::size_t t) {
      PlainMul mul;
      const std::size_t lo = batch * t / threads, hi = batch * (t + 1) / threads;
      for (std::size_t b = lo; b < hi; b += kChunk) {
        const std::size_t n = std::min(kChunk, hi - b);
        forward_batch(inputs.subspan(b * in, n * in), n, workspaces[t], mul);
        std::copy(workspaces[t].acts.back().begin(), workspaces[t].acts.back().end(),
                  outputs.begin() + static_cast<std::ptrdiff_t>(b * out));
      }
    };
    if (threads == 1) {
      run(0);
      return;
    }
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(run, t);
  }

  std::vector<double> predict_batch(std::span<const double> inputs, std::size_t batch) const {
    std::vector<double> out(batch * output_size());
    std::vector<Workspace> ws;
    predict_batch(inputs, batch, out, ws);
    return out;
  }

  /// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(output)
  /// ([batch][outputs]) for the batch whose forward pass is held in `ws`.
  void backward(const Workspace& ws, std::span<const double> d_output, std::span<double> grad) const {
    const std::size_t batch = ws.batch;
    if (d_output.size() != batch * output_size()) throw ConfigError("output gradient has the wrong size");
    if (grad.size() != params_.size()) throw ConfigError("gradient buffer has the wrong size");
    std::vector<double> dy(d_output.begin(), d_output.end());
    std::vector<double> dx, scratch;
    for (std::size_t i = plan_.size(); i-- > 0;) {
      const LayerPlan& p = plan_[i];
      const double* w = params_.data() + p.offset;
      double* g = grad.data() + p.offset;
      const double* x = ws.acts[i].data();
      const double* y = ws.acts[i + 1].data();
      const bool need_dx = i > 0;
      dx.assign(need_dx ? ws.acts[i].size() : 0, 0.0);
      double* dxp = need_dx ? dx.data() : nullptr;
      switch (p.spec.kind) {
        case LayerKind::Dense: dense_backward(p, w, g, x, y, batch, dy.data(), dxp, scratch); break;
        case LayerKind::Flatten: dx = dy; break;
        case LayerKind::Conv1D: conv_backward(p, w, g, x, y, batch, dy.data(), dxp, scratch); break;
        case LayerKind::LSTM:
        case LayerKind::BiLSTM: {
          const std::size_t dirs = ws.lstm[i].size();
          const std::size_t slice = lstm_size(p.in.features, p.spec.hidden);
          for (std::size_t d = 0; d < dirs; ++d)
            lstm_backward(p, w + d * slice, g + d * slice, d == 1, d, x, batch, ws.lstm[i][d], dy.data(), dxp);
          break;
        }
      }
      dy.swap(dx);
    }
  }

  /// Mean squared error over a batch and its gradient (overwrites `grad`).
  double loss_and_gradient(std::span<const double> inputs, std::span<const double> targets,
                           std::size_t batch, std::span<double> grad, Workspace& ws) const {
    std::fill(grad.begin(), grad.end(), 0.0);
    const std::size_t out = output_size();
    const double scale = 1.0 / static_cast<double>(batch * out);
    PlainMul mul;
    forward_batch(inputs, batch, ws, mul);
    const auto& y = ws.acts.back();
    std::vector<double> dout(batch * out);
    double loss = 0.0;
    for (std::size_t i = 0; i < batch * out; ++i) {
      const double e = y[i] - targets[i];
      loss += e * e;
      dout[i] = 2.0 * e * scale;
    }
    backward(ws, dout, grad);
    return loss * scale;
  }

  double loss(std::span<const double> inputs, std::span<const double> targets, std::size_t batch) const {
    const std::size_t in = input_size(), out = output_size();
    Workspace ws;
    PlainMul mul;
    double sum = 0.0;
    for (std::size_t b = 0; b < batch; b += kChunk) {
      const std::size_t n = std::min(kChunk, batch - b);
      forward_batch(inputs.subspan(b * in, n * in), n, ws, mul);
      for (std::size_t i = 0; i < n * out; ++i) {
        const double e = ws.acts.back()[i] - targets[b * out + i];
        sum += e * e;
      }
    }
    return sum / static_cast<double>(batch * out);
  }

 private:
  static constexpr std::size_t kChunk = 64;   // samples per forward_batch in inference
  static constexpr std::size_t kBlock = 8;    // samples sharing one pass over a dense weight matrix

  static std::size_t lstm_size(std::size_t ni, std::size_t h) noexcept { return 4 * h * (ni + h + 1); }

  void prepare(Workspace& ws, std::size_t batch) const {
    ws.batch = batch;
    ws.acts.resize(plan_.size() + 1);
    ws.lstm.resize(plan_.size());
    ws.acts[0].resize(batch * input_size());
    for (std::size_t i = 0; i < plan_.size(); ++i) {
      const LayerPlan& p = plan_[i];
      ws.acts[i + 1].resize(batch * p.out.width());
      if (p.spec.kind == LayerKind::LSTM || p.spec.kind == LayerKind::BiLSTM) {
        const std::size_t dirs = p.spec.kind == LayerKind::BiLSTM ? 2 : 1;
        const std::size_t n = batch * p.in.steps * p.spec.hidden;
        ws.lstm[i].resize(dirs);
        for (auto& t : ws.lstm[i]) {
          t.gates.resize(4 * n);
          t.cell.resize(n);
          t.cell_tanh.resize(n);
        }
      } else {
        ws.lstm[i].clear();
      }
    }
  }

  static void init_lstm(double* w, std::size_t ni, std::size_t h, Rng& rng) {
    double* wx = w;
    double* wh = w + 4 * h * ni;
    double* b = wh + 4 * h * h;
    const double limit = std::sqrt(6.0 / static_cast<double>(ni + 4 * h));
    for (std::size_t i = 0; i < 4 * h * ni; ++i) wx[i] = rng.uniform(-limit, limit);
    // Each gate's recurrent block is an orthogonal h x h matrix (Gram-Schmidt).
    std::vector<double> q(h * h);
    for (std::size_t gate = 0; gate < 4; ++gate) {
      for (auto& v : q) v = rng.normal();
      for (std::size_t r = 0; r < h; ++r) {
        double* row = q.data() + r * h;
        for (std::size_t s = 0; s < r; ++s) {
          const double* prev = q.data() + s * h;
          double dot = 0.0;
          for (std::size_t c = 0; c < h; ++c) dot += row[c] * prev[c];
          for (std::size_t c = 0; c < h; ++c) row[c] -= dot * prev[c];
        }
        double norm = 0.0;
        for (std::size_t c = 0; c < h; ++c) norm += row[c] * row[c];
        norm = std::sqrt(norm);
        for (std::size_t c = 0; c < h; ++c) row[c] /= norm;
      }
      for (std::size_t c = 0; c < h; ++c)
        for (std::size_t u = 0; u < h; ++u) wh[c * 4 * h + gate * h + u] = q[u * h + c];
    }
    for (std::size_t u = 0; u < h; ++u) b[h + u] = 1.0;
  }

  template <class Mul>
  static void dense_forward(const LayerPlan& p, const double* w, const double* x, std::size_t batch, double* y,
                            Mul& mul) {
    const std::size_t n_in = p.in.width(), units = p.spec.units;
    const double* bias = w + n_in * units;
    for (std::size_t b0 = 0; b0 < batch; b0 += kBlock) {
      const std::size_t b1 = std::min(batch, b0 + kBlock);
      for (std::size_t b = b0; b < b1; ++b) std::copy(bias, bias + units, y + b * units);
      for (std::size_t j = 0; j < n_in; ++j) {
        const double* wr = w + j * units;
        for (std::size_t b = b0; b < b1; ++b) detail::axpy(x[b * n_in + j], wr, y + b * units, units, mul);
      }
      detail::activate_inplace(p.spec.activation, y + b0 * units, (b1 - b0) * units);
    }
  }

  static void dense_backward(const LayerPlan& p, const double* w, double* g, const double* x, const double* y,
                             std::size_t batch, const double* dy, double* dx, std::vector<double>& dz) {
    const std::size_t n_in = p.in.width(), units = p.spec.units;
    double* gb = g + n_in * units;
    dz.resize(batch * units);
    for (std::size_t i = 0; i < batch * units; ++i) dz[i] = dy[i] * detail::activate_grad(p.spec.activation, y[i]);
    for (std::size_t b = 0; b < batch; ++b) detail::axpy(1.0, dz.data() + b * units, gb, units);
    for (std::size_t j = 0; j < n_in; ++j) {
      const double* wr = w + j * units;
      double* gr = g + j * units;
      for (std::size_t b = 0; b < batch; ++b) {
        const double* dzb = dz.data() + b * units;
        detail::axpy(x[b * n_in + j], dzb, gr, units);
        if (dx) dx[b * n_in + j] = detail::dot(wr, dzb, units);
      }
    }
  }

  // Zero padding is materialized, so padded taps are genuinely multiplied.
  template <class Mul>
  static void conv_forward(const LayerPlan& p, const double* w, const double* x, std::size_t batch, double* y,
                           std::vector<double>& padded, Mul& mul) {
    const std::size_t ni = p.in.features, ns = p.in.steps, pad = p.spec.padding;
    const std::size_t k = p.spec.kernel, f = p.spec.filters, stride = p.spec.stride, dil = p.spec.dilation;
    const std::size_t out_steps = p.out.steps;
    const double* bias = w + k * ni * f;
    padded.assign((ns + 2 * pad) * ni, 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
      std::copy(x + b * ns * ni, x + (b + 1) * ns * ni, padded.begin() + static_cast<std::ptrdiff_t>(pad * ni));
      double* yb = y + b * out_steps * f;
      for (std::size_t t = 0; t < out_steps; ++t) {
        double* yt = yb + t * f;
        std::copy(bias, bias + f, yt);
        for (std::size_t j = 0; j < k; ++j) {
          const double* xr = padded.data() + (t * stride + j * dil) * ni;
          for (std::size_t c = 0; c < ni; ++c) detail::axpy(xr[c], w + (j * ni + c) * f, yt, f, mul);
        }
      }
      detail::activate_inplace(p.spec.activation, yb, out_steps * f);
    }
  }

  static void conv_backward(const LayerPlan& p, const double* w, double* g, const double* x, const double* y,
                            std::size_t batch, const double* dy, double* dx, std::vector<double>& dz) {
    const std::size_t ni = p.in.features, ns = p.in.steps, pad = p.spec.padding;
    const std::size_t k = p.spec.kernel, f = p.spec.filters, stride = p.spec.stride, dil = p.spec.dilation;
    const std::size_t out_steps = p.out.steps;
    double* gb = g + k * ni * f;
    std::vector<double> xp((ns + 2 * pad) * ni), dxp((ns + 2 * pad) * ni);
    dz.resize(out_steps * f);
    for (std::size_t b = 0; b < batch; ++b) {
      std::fill(xp.begin(), xp.end(), 0.0);
      std::fill(dxp.begin(), dxp.end(), 0.0);
      std::copy(x + b * ns * ni, x + (b + 1) * ns * ni, xp.begin() + static_cast<std::ptrdiff_t>(pad * ni));
      const double* yb = y + b * out_steps * f;
      const double* dyb = dy + b * out_steps * f;
      for (std::size_t i = 0; i < out_steps * f; ++i) dz[i] = dyb[i] * detail::activate_grad(p.spec.activation, yb[i]);
      for (std::size_t t = 0; t < out_steps; ++t) {
        const double* dzt = dz.data() + t * f;
        detail::axpy(1.0, dzt, gb, f);
        for (std::size_t j = 0; j < k; ++j) {
          const std::size_t row = (t * stride + j * dil) * ni;
          for (std::size_t c = 0; c < ni; ++c) {
            const std::size_t wi = (j * ni + c) * f;
            detail::axpy(xp[row + c], dzt, g + wi, f);
            dxp[row + c] += detail::dot(w + wi, dzt, f);
          }
        }
      }
      if (dx)
        std::copy(dxp.begin() + static_cast<std::ptrdiff_t>(pad * ni),
                  dxp.begin() + static_cast<std::ptrdiff_t>((pad + ns) * ni), dx + b * ns * ni);
    }
  }

  // One direction; `reverse` walks t = n_s-1 .. 0. Output column block `dir`.
  template <class Mul>
  static void lstm_forward(const LayerPlan& p, const double* w, bool reverse, std::size_t dir, const double* x,
                           std::size_t batch, double* y, LstmTrace& tr, std::vector<double>& z, Mul& mul) {
    const std::size_t ni = p.in.features, ns = p.in.steps, h = p.spec.hidden;
    const std::size_t out_w = p.out.features;
    const double* wx = w;
    const double* wh = w + 4 * h * ni;
    const double* bias = wh + 4 * h * h;
    z.resize(4 * h);
    for (std::size_t b = 0; b < batch; ++b) {
      const double* xb = x + b * ns * ni;
      double* yb = y + b * ns * out_w;
      double* gates_b = tr.gates.data() + b * ns * 4 * h;
      double* cell_b = tr.cell.data() + b * ns * h;
      double* ctanh_b = tr.cell_tanh.data() + b * ns * h;
      const double* h_prev = nullptr;  // y row of the previous step
      const double* c_prev = nullptr;
      for (std::size_t s = 0; s < ns; ++s) {
        const std::size_t t = reverse ? ns - 1 - s : s;
        const double* xt = xb + t * ni;
        std::copy(bias, bias + 4 * h, z.begin());
        for (std::size_t c = 0; c < ni; ++c) detail::axpy(xt[c], wx + c * 4 * h, z.data(), 4 * h, mul);
        // h_0 = 0: the recurrent products still execute, as counted.
        for (std::size_t c = 0; c < h; ++c)
          detail::axpy(h_prev ? h_prev[c] : 0.0, wh + c * 4 * h, z.data(), 4 * h, mul);
        double* gates = gates_b + t * 4 * h;
        double* cell = cell_b + t * h;
        double* ctanh = ctanh_b + t * h;
        double* ht = yb + t * out_w + dir * h;
        for (std::size_t u = 0; u < h; ++u) {
          const double ig = detail::sigmoid(z[u]);
          const double fg = detail::sigmoid(z[h + u]);
          const double gg = std::tanh(z[2 * h + u]);
          const double og = detail::sigmoid(z[3 * h + u]);
          gates[u] = ig;
          gates[h + u] = fg;
          gates[2 * h + u] = gg;
          gates[3 * h + u] = og;
          cell[u] = mul(fg, c_prev ? c_prev[u] : 0.0) + mul(ig, gg);
          ctanh[u] = std::tanh(cell[u]);
          ht[u] = mul(og, ctanh[u]);
        }
        h_prev = ht;
        c_prev = cell;
      }
    }
  }

  static void lstm_backward(const LayerPlan& p, const double* w, double* g, bool reverse, std::size_t dir,
                            const double* x, std::size_t batch, const LstmTrace& tr, const double* dy, double* dx) {
    const std::size_t ni = p.in.features, ns = p.in.steps, h = p.spec.hidden;
    const std::size_t out_w = p.out.features, g4 = 4 * h;
    const double* wx = w;
    const double* wh = w + g4 * ni;
    double* gwx = g;
    double* gwh = g + g4 * ni;
    double* gb = gwh + g4 * h;
    std::vector<double> dh_next(h), dc_next(h), dz(g4), h_prev(h);
    for (std::size_t b = 0; b < batch; ++b) {
      const double* xb = x + b * ns * ni;
      const double* dyb = dy + b * ns * out_w;
      double* dxb = dx ? dx + b * ns * ni : nullptr;
      const double* gates_b = tr.gates.data() + b * ns * g4;
      const double* cell_b = tr.cell.data() + b * ns * h;
      const double* ctanh_b = tr.cell_tanh.data() + b * ns * h;
      std::fill(dh_next.begin(), dh_next.end(), 0.0);
      std::fill(dc_next.begin(), dc_next.end(), 0.0);
      for (std::size_t s = ns; s-- > 0;) {
        const std::size_t t = reverse ? ns - 1 - s : s;
        const bool first = s == 0;
        const std::size_t t_prev = reverse ? t + 1 : t - 1;
        const double* gates = gates_b + t * g4;
        const double* ctanh = ctanh_b + t * h;
        for (std::size_t u = 0; u < h; ++u)
          h_prev[u] = first ? 0.0 : gates_b[t_prev * g4 + 3 * h + u] * ctanh_b[t_prev * h + u];
        for (std::size_t u = 0; u < h; ++u) {
          const double ig = gates[u], fg = gates[h + u], gg = gates[2 * h + u], og = gates[3 * h + u];
          const double c_prev = first ? 0.0 : cell_b[t_prev * h + u];
          const double dh = dyb[t * out_w + dir * h + u] + dh_next[u];
          const double dc = dh * og * (1.0 - ctanh[u] * ctanh[u]) + dc_next[u];
          dz[u] = dc * gg * ig * (1.0 - ig);
          dz[h + u] = dc * c_prev * fg * (1.0 - fg);
          dz[2 * h + u] = dc * ig * (1.0 - gg * gg);
          dz[3 * h + u] = dh * ctanh[u] * og * (1.0 - og);
          dc_next[u] = dc * fg;
        }
        detail::axpy(1.0, dz.data(), gb, g4);
        const double* xt = xb + t * ni;
        for (std::size_t c = 0; c < ni; ++c) {
          detail::axpy(xt[c], dz.data(), gwx + c * g4, g4);
          if (dxb) dxb[t * ni + c] += detail::dot(wx + c * g4, dz.data(), g4);
        }
        for (std::size_t c = 0; c < h; ++c) {
          if (!first) detail::axpy(h_prev[c], dz.data(), gwh + c * g4, g4);
          dh_next[c] = detail::dot(wh + c * g4, dz.data(), g4);
        }
      }
    }
  }

  ModelSpec spec_;
  std::vector<LayerPlan> plan_;
  std::vector<double> params_;
  unsigned threads_ = 1;
};

}  // namespace eqlab::neural
