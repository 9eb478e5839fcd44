#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "../errors.hpp"
#include "../io.hpp"
#include "../rng.hpp"
#include "model.hpp"

namespace eqlab::neural {

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::size_t epochs = 20;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t patience = 5;           // epochs without validation improvement
  double validation_fraction = 0.1;   // tail of the window set, never shuffled in
  std::uint64_t seed = 1;

  void validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
    if (batch_size == 0) throw ConfigError("batch size must be >= 1");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
      throw ConfigError("validation fraction must be in [0, 1)");
  }
};

inline io::Json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
          {"epochs", c.epochs},               {"beta1", c.beta1},
          {"beta2", c.beta2},                 {"epsilon", c.epsilon},
          {"patience", c.patience},           {"validation_fraction", c.validation_fraction},
          {"seed", c.seed}};
}

inline TrainConfig train_config_from_json(const io::Json& j) {
  TrainConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.patience = j.value("patience", c.patience);
  c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
  c.seed = j.value("seed", c.seed);
  return c;
}

class Adam {
 public:
  Adam(std::size_t n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::span<double> params, std::span<const double> grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
      params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
  }

  std::size_t steps() const noexcept { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

// Flattened (input window, target) pairs.
struct WindowSet {
  std::size_t input_size = 0;
  std::size_t output_size = 0;
  std::vector<double> inputs;
  std::vector<double> targets;

  std::size_t size() const noexcept { return input_size == 0 ? 0 : inputs.size() / input_size; }

  std::span<const double> input(std::size_t i) const noexcept {
    return std::span<const double>(inputs).subspan(i * input_size, input_size);
  }
  std::span<const double> target(std::size_t i) const noexcept {
    return std::span<const double>(targets).subspan(i * output_size, output_size);
  }
};

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  std::size_t best_epoch = 0;
  double best_loss = std::numeric_limits<double>::infinity();
};

inline io::Json to_json(const TrainReport& r) {
  return {{"train_loss", r.train_loss},
          {"validation_loss", r.validation_loss},
          {"best_epoch", r.best_epoch},
          {"best_loss", r.best_loss}};
}

/// Mini-batch Adam on MSE. Keeps the parameters of the epoch with the lowest
/// validation loss (train loss when there is no validation split).
/// Throws DivergenceError carrying the epoch index if a loss becomes non-finite.
inline TrainReport train(Model& model, const WindowSet& data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.input_size != model.input_size() || data.output_size != model.output_size())
    throw ConfigError("window set shape does not match the model");
  const std::size_t n = data.size();
  if (n == 0) throw ConfigError("empty training set");

  std::size_t n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * cfg.validation_fraction));
  if (n - n_val == 0) n_val = 0;
  const std::size_t n_train = n - n_val;

  Rng rng(cfg.seed);
  Adam adam(model.parameter_count(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
  std::vector<std::size_t> order(n_train);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> grad(model.parameter_count());
  std::vector<double> bx(cfg.batch_size * data.input_size), by(cfg.batch_size * data.output_size);
  Workspace ws = model.make_workspace();

  TrainReport report;
  std::vector<double> best(model.params().begin(), model.params().end());
  std::size_t since_best = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = n_train; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_int(0, i - 1)]);
    double sum = 0.0;
    for (std::size_t start = 0; start < n_train; start += cfg.batch_size) {
      const std::size_t bs = std::min(cfg.batch_size, n_train - start);
      for (std::size_t b = 0; b < bs; ++b) {
        const auto in = data.input(order[start + b]);
        const auto tg = data.target(order[start + b]);
        std::copy(in.begin(), in.end(), bx.begin() + static_cast<std::ptrdiff_t>(b * data.input_size));
        std::copy(tg.begin(), tg.end(), by.begin() + static_cast<std::ptrdiff_t>(b * data.output_size));
      }
      const double l = model.loss_and_gradient(std::span<const double>(bx).first(bs * data.input_size),
                                               std::span<const double>(by).first(bs * data.output_size),
                                               bs, grad, ws);
      if (!std::isfinite(l)) throw DivergenceError(epoch, "training diverged at epoch " + std::to_string(epoch));
      sum += l * static_cast<double>(bs);
      adam.step(model.params(), grad);
    }
    const double train_loss = sum / static_cast<double>(n_train);
    report.train_loss.push_back(train_loss);

    double monitored = train_loss;
    if (n_val > 0) {
      const double v = model.loss(std::span<const double>(data.inputs).subspan(n_train * data.input_size),
                                  std::span<const double>(data.targets).subspan(n_train * data.output_size),
                                  n_val);
      report.validation_loss.push_back(v);
      monitored = v;
    }
    if (!std::isfinite(monitored))
      throw DivergenceError(epoch, "training diverged at epoch " + std::to_string(epoch));
    if (monitored < report.best_loss) {
      report.best_loss = monitored;
      report.best_epoch = epoch;
      std::copy(model.params().begin(), model.params().end(), best.begin());
      since_best = 0;
    } else if (++since_best > cfg.patience) {
      break;
    }
  }
  std::copy(best.begin(), best.end(), model.params().begin());
  return report;
}

}  // namespace eqlab::neural
