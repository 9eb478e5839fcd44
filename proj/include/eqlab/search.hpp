#pragma once

// Complexity-budgeted topology search.
//
// For a family and an RMpS budget the feasible space is an integer box
// [1, hi] per hyperparameter (odd values only for the kernel) whose maximal
// corner is the balanced topology_for_budget() result. Every hyperparameter
// enters the RMpS formulas monotonically, so every point of the box fits.
// Random search samples the box uniformly; trial i uses derive_seed(seed, i)
// for both sampling and training, which makes the trial list a pure function
// of (seed, i) and any run with N trials a prefix of a run with N' > N.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "complexity.hpp"
#include "errors.hpp"
#include "io.hpp"
#include "neural/equalizer.hpp"
#include "neural/families.hpp"
#include "rng.hpp"
#include "txrx/dataset.hpp"
#include "txrx/metrics.hpp"

namespace eqlab::search {

using complexity::Count;
using neural::ArchFamily;
using neural::Topology;

inline constexpr std::string_view kSweepCsvVersion = "1.0";

struct Budget {
  Count max = 0;
  std::string label;
};

/// Accepts "1e5", "100000", "2.5e4". The label is the text as given.
inline Budget parse_budget(const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ConfigError("invalid budget '" + text + "'");
  }
  if (used != text.size() || !(v >= 1.0) || v > 1e18 || v != std::floor(v))
    throw ConfigError("budget must be a positive integer RMpS value, got '" + text + "'");
  return {static_cast<Count>(v), text};
}

/// Number of worker threads from EQLAB_WORKERS (default 1). Affects speed only.
inline unsigned workers_from_env() {
  if (const char* s = std::getenv("EQLAB_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(s, &end, 10);
    if (end != s && *end == '\0' && v >= 1) return static_cast<unsigned>(std::min<long>(v, 256));
  }
  return 1;
}

struct FeasibleSpace {
  ArchFamily family = ArchFamily::MLP3;
  std::size_t memory = neural::kDefaultMemory;
  Budget budget;
  bool feasible = false;
  std::string reason;
  std::vector<std::size_t> lo;
  std::vector<std::size_t> hi;

  Topology corner(bool maximal) const { return {family, memory, maximal ? hi : lo}; }
};

inline FeasibleSpace feasible_space(ArchFamily family, const Budget& budget,
                                    std::size_t memory = neural::kDefaultMemory) {
  if (budget.max == 0) throw ConfigError("budget must be > 0");
  FeasibleSpace s;
  s.family = family;
  s.memory = memory;
  s.budget = budget;
  try {
    const Topology top = neural::topology_for_budget(family, budget.max, memory);
    s.hi = top.values;
    s.lo.assign(s.hi.size(), 1);
    s.feasible = true;
    if (neural::topology_rmps(s.corner(true)) > budget.max)
      throw std::logic_error("maximal corner exceeds the budget");
  } catch (const InfeasibleError& e) {
    s.reason = e.what();
  }
  return s;
}

inline Topology sample_topology(const FeasibleSpace& s, Rng& rng) {
  if (!s.feasible) throw InfeasibleError(s.reason);
  Topology t{s.family, s.memory, std::vector<std::size_t>(s.hi.size())};
  const auto ki = neural::kernel_index(s.family);
  for (std::size_t i = 0; i < s.hi.size(); ++i) {
    if (static_cast<std::ptrdiff_t>(i) == ki) {
      const auto odd_count = (s.hi[i] + 1) / 2;  // 1, 3, ..., hi
      t.values[i] = 2 * static_cast<std::size_t>(rng.uniform_int(0, odd_count - 1)) + 1;
    } else {
      t.values[i] = static_cast<std::size_t>(rng.uniform_int(s.lo[i], s.hi[i]));
    }
  }
  return t;
}

struct SearchOptions {
  std::size_t memory = neural::kDefaultMemory;
  neural::TrainConfig train;
  unsigned workers = 1;

  SearchOptions() {
    train.epochs = 10;
    train.patience = 3;
    train.batch_size = 64;
    train.learning_rate = 1e-3;
  }
};

struct Trial {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  Topology topology;
  Count rmps = 0;
  std::size_t params = 0;
  bool diverged = false;
  std::string diagnostic;
  txrx::EvalResult eval;
  neural::EqualizerTrainReport report;
};

struct SearchResult {
  FeasibleSpace space;
  std::vector<Trial> trials;
  std::optional<std::size_t> best;  // index into trials

  const Trial& best_trial() const { return trials.at(best.value()); }
};

/// Strict "a is better than b": fewer bit errors (higher Q on the same test
/// frame), then smaller RMpS, fewer parameters, lower trial index.
inline bool better(const Trial& a, const Trial& b) {
  if (a.diverged != b.diverged) return !a.diverged;
  if (a.eval.bit_errors != b.eval.bit_errors) return a.eval.bit_errors < b.eval.bit_errors;
  if (a.rmps != b.rmps) return a.rmps < b.rmps;
  if (a.params != b.params) return a.params < b.params;
  return a.index < b.index;
}

inline Trial run_trial(const FeasibleSpace& space, const txrx::Dataset& data, std::size_t index,
                       std::uint64_t seed, const SearchOptions& opt) {
  Trial t;
  t.index = index;
  t.seed = derive_seed(seed, index);
  Rng rng(derive_seed(t.seed, 0x5a4d));
  t.topology = sample_topology(space, rng);
  t.rmps = neural::topology_rmps(t.topology);
  if (t.rmps > space.budget.max) throw std::logic_error("sampled topology exceeds the budget");
  auto eq = neural::make_equalizer(t.topology, t.seed);
  t.params = eq.model_x.parameter_count();
  neural::TrainConfig cfg = opt.train;
  cfg.seed = t.seed;
  try {
    t.report = neural::train_equalizer(eq, data.train, cfg);
    t.eval = neural::evaluate(eq, data.test);
  } catch (const DivergenceError& e) {
    t.diverged = true;
    t.diagnostic = "trial " + std::to_string(index) + " (" + neural::describe(t.topology) +
                   ") diverged at epoch " + std::to_string(e.epoch());
  }
  return t;
}

/// Best of `trials` uniformly sampled topologies. Results do not depend on
/// the worker count.
inline SearchResult random_search(ArchFamily family, const Budget& budget, const txrx::Dataset& data,
                                  std::size_t trials, std::uint64_t seed, const SearchOptions& opt = {}) {
  if (trials == 0) throw ConfigError("trials must be >= 1");
  if (data.train.size() == 0 || data.test.size() == 0)
    throw ConfigError("search needs a dataset with both train and test symbols");
  SearchResult r;
  r.space = feasible_space(family, budget, opt.memory);
  if (!r.space.feasible) throw InfeasibleError(r.space.reason);

  r.trials.resize(trials);
  std::vector<std::exception_ptr> errors(trials);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < trials; i = next++) {
      try {
        r.trials[i] = run_trial(r.space, data, i, seed, opt);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(opt.workers, static_cast<unsigned>(trials)));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  for (std::size_t i = 0; i < trials; ++i)
    if (!r.trials[i].diverged && (!r.best || better(r.trials[i], r.trials[*r.best]))) r.best = i;
  if (!r.best) {
    std::string diag = "all " + std::to_string(trials) + " trials diverged:";
    for (const auto& t : r.trials) diag += "\n  " + t.diagnostic;
    throw DivergenceError(0, diag);
  }
  return r;
}

struct SweepRow {
  std::string family;  // family name, "unequalized" or "dbp"
  std::string budget;  // budget label; empty for baselines
  std::optional<Count> rmps;
  std::optional<std::size_t> params;
  double q_db = std::numeric_limits<double>::quiet_NaN();
  double q_gain_db = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t bit_errors = 0;
  std::uint64_t bits = 0;
  std::string latency_ref;  // key shared with bench rows and the sweep JSON
  std::string hparams;
  std::string status;       // ok | infeasible | diverged
  std::vector<double> loss_x, loss_y;
};

struct SweepTable {
  std::vector<SweepRow> rows;
  std::string manifest_hash;
};

inline std::string latency_key(std::string_view family, std::string_view budget) {
  return std::string(family) + "@" + std::string(budget);
}

/// Grid of best-of-N results plus the unequalized and DBP baseline rows.
inline SweepTable sweep(const std::vector<ArchFamily>& families, const std::vector<Budget>& budgets,
                        const txrx::Dataset& data, std::size_t trials, std::uint64_t seed,
                        const SearchOptions& opt = {}) {
  SweepTable table;
  for (auto family : families) {
    for (const auto& b : budgets) {
      SweepRow row;
      row.family = std::string(neural::to_string(family));
      row.budget = b.label;
      row.latency_ref = latency_key(row.family, b.label);
      try {
        const auto r = random_search(family, b, data, trials, seed, opt);
        const Trial& t = r.best_trial();
        row.rmps = t.rmps;
        row.params = t.params;
        row.q_db = t.eval.q_db;
        row.q_gain_db = t.eval.q_gain_db;
        row.bit_errors = t.eval.bit_errors;
        row.bits = t.eval.bits;
        row.hparams = neural::describe(t.topology);
        row.status = "ok";
        row.loss_x = t.report.x.validation_loss.empty() ? t.report.x.train_loss : t.report.x.validation_loss;
        row.loss_y = t.report.y.validation_loss.empty() ? t.report.y.train_loss : t.report.y.validation_loss;
      } catch (const InfeasibleError&) {
        row.status = "infeasible";
      } catch (const DivergenceError&) {
        row.status = "diverged";
      }
      table.rows.push_back(std::move(row));
    }
  }

  const std::size_t memory = opt.memory;
  const auto base = neural::unequalized_baseline(data.test, memory);
  SweepRow u;
  u.family = "unequalized";
  u.rmps = 0;
  u.q_db = base.q_db;
  u.q_gain_db = 0.0;
  u.bit_errors = base.bit_errors;
  u.bits = base.bits;
  u.status = "ok";
  table.rows.push_back(u);

  // DBP scored on the same symbol range as the equalizers.
  txrx::ReceiverOptions ro;
  ro.compensation = txrx::Compensation::DBP;
  ro.dbp_steps_per_span = txrx::kDbpStepsPerSpan;
  const auto rx = txrx::propagate(txrx::transmit(data.link, data.test.size(), data.test_seed), data.link);
  const auto dbp_frame = txrx::receive(rx, data.link, ro);
  const auto d = neural::unequalized_baseline(dbp_frame, memory);
  SweepRow r;
  r.family = "dbp";
  r.q_db = d.q_db;
  r.q_gain_db = txrx::q_gain_db(d.q_db, base.q_db);
  r.bit_errors = d.bit_errors;
  r.bits = d.bits;
  r.hparams = "steps_per_span=" + std::to_string(txrx::kDbpStepsPerSpan);
  r.status = "ok";
  table.rows.push_back(r);
  return table;
}

namespace detail {

inline std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace detail

/// CSV: a version comment line, a header row, one row per result.
inline std::string sweep_csv(const SweepTable& t) {
  std::ostringstream os;
  os << "# eqlab-sweep version " << kSweepCsvVersion;
  if (!t.manifest_hash.empty()) os << " manifest " << t.manifest_hash;
  os << "\n";
  os << "family,budget,rmps,params,q_db,q_gain_db,latency_ref,bit_errors,bits,hparams,status\n";
  for (const auto& r : t.rows) {
    os << r.family << ',' << r.budget << ',' << (r.rmps ? std::to_string(*r.rmps) : "") << ','
       << (r.params ? std::to_string(*r.params) : "") << ','
       << (r.status == "ok" ? detail::fmt_double(r.q_db) : "") << ','
       << (r.status == "ok" ? detail::fmt_double(r.q_gain_db) : "") << ',' << r.latency_ref << ','
       << r.bit_errors << ',' << r.bits << ',' << r.hparams << ',' << r.status << "\n";
  }
  return os.str();
}

inline io::Json sweep_json(const SweepTable& t) {
  io::Json rows = io::Json::array();
  for (const auto& r : t.rows) {
    io::Json j{{"family", r.family},
               {"budget", r.budget},
               {"q_db", txrx::q_to_json(r.q_db)},
               {"q_gain_db", txrx::q_to_json(r.q_gain_db)},
               {"bit_errors", r.bit_errors},
               {"bits", r.bits},
               {"hparams", r.hparams},
               {"status", r.status},
               {"latency_ref", r.latency_ref}};
    j["rmps"] = r.rmps ? io::Json(*r.rmps) : io::Json(nullptr);
    j["params"] = r.params ? io::Json(*r.params) : io::Json(nullptr);
    if (!r.loss_x.empty()) j["loss_curve"] = {{"x", r.loss_x}, {"y", r.loss_y}};
    rows.push_back(std::move(j));
  }
  io::Json out{{"format", "eqlab-sweep"}, {"version", std::string(kSweepCsvVersion)}, {"rows", rows}};
  if (!t.manifest_hash.empty()) out["manifest_hash"] = t.manifest_hash;
  return out;
}

}  // namespace eqlab::search
