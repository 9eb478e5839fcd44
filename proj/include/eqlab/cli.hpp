#pragma once

// Command-line front end. `run` is the whole program minus main(), so tests
// can drive it in-process.
//
// Exit codes: 0 ok, 1 internal error, 2 usage/configuration, 3 missing input,
// 4 infeasible budget, 5 training diverged, 6 malformed file.

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bench.hpp"
#include "complexity.hpp"
#include "errors.hpp"
#include "io.hpp"
#include "manifest.hpp"
#include "model_config.hpp"
#include "neural/equalizer.hpp"
#include "neural/families.hpp"
#include "search.hpp"
#include "txrx/dataset.hpp"

namespace eqlab::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kMissingInput = 3,
  kInfeasible = 4,
  kDiverged = 5,
  kBadFormat = 6,
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, ','))
    if (!cur.empty()) out.push_back(cur);
  return out;
}

inline std::vector<neural::ArchFamily> parse_families(const std::string& s) {
  std::vector<neural::ArchFamily> out;
  for (const auto& f : split_list(s)) out.push_back(neural::parse_family(f));
  if (out.empty()) throw ConfigError("no families given");
  return out;
}

inline std::vector<search::Budget> parse_budgets(const std::string& s) {
  std::vector<search::Budget> out;
  for (const auto& b : split_list(s)) out.push_back(search::parse_budget(b));
  return out;
}

/// "n1=10,n2=20,n3=5" (';' also accepted) -> values in family order.
inline neural::Topology parse_hparams(neural::ArchFamily family, std::size_t memory, const std::string& text) {
  std::string normalized = text;
  for (auto& c : normalized)
    if (c == ';') c = ',';
  std::map<std::string, std::size_t> kv;
  for (const auto& item : split_list(normalized)) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("hyperparameter '" + item + "' is not name=value");
    const std::string name = item.substr(0, eq);
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item.substr(eq + 1), &used);
      if (used != item.size() - eq - 1 || v < 1) throw std::invalid_argument(name);
      kv[name] = static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      throw ConfigError("hyperparameter '" + name + "' needs a positive integer");
    }
  }
  neural::Topology t{family, memory, {}};
  for (const auto& name : neural::hyperparameter_names(family)) {
    const auto it = kv.find(name);
    if (it == kv.end()) throw ConfigError("missing hyperparameter '" + name + "'");
    t.values.push_back(it->second);
    kv.erase(it);
  }
  if (!kv.empty()) throw ConfigError("unknown hyperparameter '" + kv.begin()->first + "'");
  neural::validate(t);
  return t;
}

inline std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

inline void print_rmps_table(std::ostream& out, const complexity::RmpsReport& r) {
  out << pad("#", 4) << pad("layer", 9) << pad("input", 14) << pad("output", 14) << pad("rmps", 14)
      << pad("params", 12) << "big-o\n";
  for (const auto& l : r.layers) {
    out << pad(std::to_string(l.index), 4) << pad(std::string(complexity::to_string(l.kind)), 9)
        << pad(complexity::to_string(l.input), 14) << pad(complexity::to_string(l.output), 14)
        << pad(std::to_string(l.multiplications), 14) << pad(std::to_string(l.parameters), 12) << l.big_o << "\n";
  }
  out << "total rmps " << r.total << ", parameters " << r.parameters << "\n";
}

inline void write_outputs(RunManifest& m, const std::string& primary) {
  m.outputs.push_back(primary);
  m.write(manifest_path(primary));
}

}  // namespace detail

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

inline int run(int argc, const char* const* argv, Streams io_streams = {std::cout, std::cerr}) {
  std::ostream& out = io_streams.out;
  std::ostream& err = io_streams.err;

  CLI::App app{"eqlab: neural equalizer complexity workbench", "eqlab"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  // rmps
  auto* rmps = app.add_subcommand("rmps", "Real multiplications per symbol of a model config");
  std::string rmps_config;
  bool rmps_json_only = false;
  rmps->add_option("config,--config", rmps_config, "Model config JSON")->required();
  rmps->add_flag("--json", rmps_json_only, "Print only the JSON report");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Simulate the fiber link and write a train/test dataset");
  std::string sim_fiber = "ssmf", sim_out, sim_link_config;
  std::optional<double> sim_power, sim_gamma;
  std::optional<std::size_t> sim_spans, sim_steps;
  std::size_t sim_train = 65536, sim_test = 32768;
  std::uint64_t sim_seed = 1;
  bool sim_no_ase = false, sim_no_dbp = false;
  sim->add_option("--fiber", sim_fiber, "ssmf or twc")->check(CLI::IsMember({"ssmf", "twc"}));
  sim->add_option("--config", sim_link_config, "Link config JSON (overrides --fiber defaults)");
  sim->add_option("--power-dbm", sim_power, "Launch power in dBm");
  sim->add_option("--spans", sim_spans, "Number of spans");
  sim->add_option("--gamma", sim_gamma, "Nonlinear coefficient 1/(W km); 0 gives a linear channel");
  sim->add_option("--steps-per-span", sim_steps, "Split-step steps per span");
  sim->add_flag("--no-ase", sim_no_ase, "Disable amplifier noise");
  sim->add_flag("--no-dbp", sim_no_dbp, "Skip the DBP baseline");
  sim->add_option("--train-syms", sim_train, "Training symbols");
  sim->add_option("--test-syms", sim_test, "Test symbols");
  sim->add_option("--seed", sim_seed, "Seed (train/test PRBS seeds and ASE noise derive from it)");
  sim->add_option("--out", sim_out, "Dataset path")->required();

  // train
  auto* tr = app.add_subcommand("train", "Train a twin-model equalizer");
  std::string tr_dataset, tr_family, tr_hparams, tr_budget, tr_out;
  std::size_t tr_memory = neural::kDefaultMemory;
  neural::TrainConfig tr_cfg;
  tr->add_option("--dataset", tr_dataset, "Dataset path")->required();
  tr->add_option("--family", tr_family, "mlp | cnn-mlp | bilstm | cnn-bilstm")->required();
  tr->add_option("--hparams", tr_hparams, "Hyperparameters, e.g. n1=64,n2=64,n3=32");
  tr->add_option("--budget", tr_budget, "Largest balanced topology within this RMpS budget");
  tr->add_option("--memory", tr_memory, "Window length M (odd)");
  tr->add_option("--epochs", tr_cfg.epochs, "Epochs");
  tr->add_option("--lr", tr_cfg.learning_rate, "Adam learning rate");
  tr->add_option("--batch", tr_cfg.batch_size, "Batch size");
  tr->add_option("--patience", tr_cfg.patience, "Early-stopping patience (epochs)");
  tr->add_option("--val-fraction", tr_cfg.validation_fraction, "Validation fraction");
  tr->add_option("--seed", tr_cfg.seed, "Initialization and shuffling seed");
  tr->add_option("--out", tr_out, "Model path")->required();

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Evaluate a trained model on the test frame");
  std::string ev_dataset, ev_model, ev_out;
  ev->add_option("--dataset", ev_dataset, "Dataset path")->required();
  ev->add_option("--model", ev_model, "Model path");
  ev->add_option("--out", ev_out, "Write the JSON report here as well");

  // sweep
  auto* sw = app.add_subcommand("sweep", "Budget-constrained random search over families");
  std::string sw_dataset, sw_families = "mlp,cnn-mlp,bilstm,cnn-bilstm", sw_budgets = "1e3,1e4,1e5,1e6", sw_out;
  std::size_t sw_trials = 20;
  std::uint64_t sw_seed = 1;
  search::SearchOptions sw_opt;
  sw->add_option("--dataset", sw_dataset, "Dataset path")->required();
  sw->add_option("--families", sw_families, "Comma-separated families");
  sw->add_option("--budgets", sw_budgets, "Comma-separated RMpS budgets");
  sw->add_option("--trials", sw_trials, "Random-search trials per (family, budget)");
  sw->add_option("--seed", sw_seed, "Search seed");
  sw->add_option("--memory", sw_opt.memory, "Window length M (odd)");
  sw->add_option("--epochs", sw_opt.train.epochs, "Epochs per trial");
  sw->add_option("--lr", sw_opt.train.learning_rate, "Adam learning rate");
  sw->add_option("--batch", sw_opt.train.batch_size, "Batch size");
  sw->add_option("--patience", sw_opt.train.patience, "Early-stopping patience");
  sw->add_option("--out", sw_out, "CSV path (a .json sidecar holds loss curves)")->required();

  // bench
  auto* be = app.add_subcommand("bench", "Inference latency versus RMpS");
  std::string be_families = "mlp,cnn-mlp,bilstm,cnn-bilstm", be_decades = "1e4,1e5,1e6,1e7", be_batches = "1,256",
              be_out;
  bench::BenchOptions be_opt;
  be->add_option("--families", be_families, "Comma-separated families");
  be->add_option("--decades", be_decades, "Comma-separated RMpS levels");
  be->add_option("--batches", be_batches, "Comma-separated batch sizes");
  be->add_option("--warmup", be_opt.warmup, "Discarded warmup iterations");
  be->add_option("--iters", be_opt.iterations, "Timed iterations (>= 100)");
  be->add_option("--memory", be_opt.memory, "Window length M (odd)");
  be->add_option("--seed", be_opt.seed, "Weight/input seed");
  be->add_option("--out", be_out, "CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "eqlab: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (*rmps) {
      const auto text = io::read_file(rmps_config);
      const auto spec = complexity::parse_model_config(std::string_view(reinterpret_cast<const char*>(text.data()), text.size()));
      const auto report = complexity::rmps_model(spec);
      if (!rmps_json_only) detail::print_rmps_table(out, report);
      out << complexity::report_to_json(report).dump(2) << "\n";
      return kOk;
    }

    if (*sim) {
      txrx::LinkConfig link = sim_fiber == "twc" ? txrx::LinkConfig::twc() : txrx::LinkConfig::ssmf();
      RunManifest m;
      m.subcommand = "simulate";
      if (!sim_link_config.empty()) {
        const auto bytes = io::read_file(sim_link_config);
        try {
          link = txrx::link_from_json(io::Json::parse(bytes.begin(), bytes.end()));
        } catch (const io::Json::exception& e) {
          throw FormatError("link config '" + sim_link_config + "': " + e.what());
        }
        m.add_input(sim_link_config);
      }
      if (sim_power) link.launch_power_dbm = *sim_power;
      if (sim_spans) link.fiber.span_count = *sim_spans;
      if (sim_gamma) link.fiber.gamma_per_w_km = *sim_gamma;
      if (sim_steps) link.steps_per_span_sim = *sim_steps;
      if (sim_no_ase) link.edfa_noise_figure_db = -std::numeric_limits<double>::infinity();
      link.rng_seed = sim_seed;
      link.validate();
      const std::uint64_t train_seed = derive_seed(sim_seed, 1), test_seed = derive_seed(sim_seed, 2);
      m.config = {{"link", txrx::to_json(link)},
                  {"train_symbols", sim_train},
                  {"test_symbols", sim_test},
                  {"dbp_baseline", !sim_no_dbp}};
      m.seeds = {{"seed", sim_seed}, {"train", train_seed}, {"test", test_seed}};
      txrx::DatasetOptions dopt;
      dopt.workers = search::workers_from_env();
      dopt.with_dbp = !sim_no_dbp;
      const auto ds = txrx::make_dataset(link, sim_train, sim_test, train_seed, test_seed, dopt);
      txrx::write_dataset(sim_out, ds, m.hash());
      detail::write_outputs(m, sim_out);
      io::Json summary = txrx::dataset_header(ds, m.hash());
      summary.erase("layout");
      out << summary.dump(2) << "\n";
      return kOk;
    }

    if (*tr) {
      if (tr_hparams.empty() == tr_budget.empty()) throw ConfigError("give exactly one of --hparams or --budget");
      const auto family = neural::parse_family(tr_family);
      const auto topo = tr_hparams.empty()
                            ? neural::topology_for_budget(family, search::parse_budget(tr_budget).max, tr_memory)
                            : detail::parse_hparams(family, tr_memory, tr_hparams);
      tr_cfg.validate();
      RunManifest m;
      m.subcommand = "train";
      m.add_input(tr_dataset);
      const auto ds = txrx::read_dataset(tr_dataset);
      if (ds.train.size() == 0) throw ConfigError("dataset has no training symbols");
      m.config = {{"topology", neural::to_json(topo)}, {"train_config", neural::to_json(tr_cfg)}};
      m.seeds = {{"seed", tr_cfg.seed}};
      auto eq = neural::make_equalizer(topo, tr_cfg.seed);
      const auto report = neural::train_equalizer(eq, ds.train, tr_cfg);
      neural::save_equalizer(tr_out, eq, m.hash());
      io::Json rep{{"format", "eqlab-train-report"},
                   {"version", "1.0"},
                   {"manifest_hash", m.hash()},
                   {"topology", neural::to_json(topo)},
                   {"rmps", neural::topology_rmps(topo)},
                   {"parameters_per_model", eq.model_x.parameter_count()},
                   {"x", neural::to_json(report.x)},
                   {"y", neural::to_json(report.y)}};
      const std::string rep_path = tr_out + ".report.json";
      io::write_text(rep_path, rep.dump(2) + "\n");
      m.outputs.push_back(rep_path);
      detail::write_outputs(m, tr_out);
      out << rep.dump(2) << "\n";
      return kOk;
    }

    if (*ev) {
      if (ev_model.empty()) throw InputError("evaluate needs --model");
      RunManifest m;
      m.subcommand = "evaluate";
      m.add_input(ev_dataset);
      m.add_input(ev_model);
      const auto ds = txrx::read_dataset(ev_dataset);
      const auto eq = neural::load_equalizer(ev_model);
      if (ds.test.size() == 0) throw ConfigError("dataset has no test symbols");
      const auto r = neural::evaluate(eq, ds.test);
      const auto base = neural::unequalized_baseline(ds.test, eq.memory());
      io::Json rep{{"format", "eqlab-eval-report"},
                   {"version", "1.0"},
                   {"manifest_hash", m.hash()},
                   {"topology", neural::to_json(eq.topology)},
                   {"rmps", neural::topology_rmps(eq.topology)},
                   {"equalized", txrx::to_json(r)},
                   {"unequalized", txrx::to_json(base)},
                   {"dbp_full_frame", txrx::to_json(ds.dbp)}};
      if (!ev_out.empty()) {
        io::write_text(ev_out, rep.dump(2) + "\n");
        detail::write_outputs(m, ev_out);
      }
      out << rep.dump(2) << "\n";
      return kOk;
    }

    if (*sw) {
      const auto families = detail::parse_families(sw_families);
      const auto budgets = detail::parse_budgets(sw_budgets);
      if (budgets.empty()) throw ConfigError("no budgets given");
      sw_opt.train.validate();
      sw_opt.workers = search::workers_from_env();
      RunManifest m;
      m.subcommand = "sweep";
      m.add_input(sw_dataset);
      io::Json fam = io::Json::array(), bud = io::Json::array();
      for (auto f : families) fam.push_back(std::string(neural::to_string(f)));
      for (const auto& b : budgets) bud.push_back(b.label);
      m.config = {{"families", fam},
                  {"budgets", bud},
                  {"trials", sw_trials},
                  {"memory", sw_opt.memory},
                  {"train_config", neural::to_json(sw_opt.train)}};
      m.seeds = {{"seed", sw_seed}};
      const auto ds = txrx::read_dataset(sw_dataset);
      auto table = search::sweep(families, budgets, ds, sw_trials, sw_seed, sw_opt);
      table.manifest_hash = m.hash();
      const std::string csv = search::sweep_csv(table);
      io::write_text(sw_out, csv);
      const std::string side = sw_out + ".json";
      io::write_text(side, search::sweep_json(table).dump(2) + "\n");
      m.outputs.push_back(side);
      detail::write_outputs(m, sw_out);
      out << csv;
      return kOk;
    }

    if (*be) {
      const auto families = detail::parse_families(be_families);
      std::vector<bench::Decade> decades;
      for (const auto& b : detail::parse_budgets(be_decades)) decades.push_back({b.max, b.label});
      be_opt.batches.clear();
      for (const auto& b : detail::split_list(be_batches)) {
        const auto v = search::parse_budget(b);
        be_opt.batches.push_back(static_cast<std::size_t>(v.max));
      }
      if (be_opt.batches.empty()) throw ConfigError("no batch sizes given");
      if (be_opt.iterations < bench::kMinIterations)
        throw ConfigError("--iters must be >= " + std::to_string(bench::kMinIterations));
      RunManifest m;
      m.subcommand = "bench";
      io::Json fam = io::Json::array(), dec = io::Json::array();
      for (auto f : families) fam.push_back(std::string(neural::to_string(f)));
      for (const auto& d : decades) dec.push_back(d.label);
      m.config = {{"families", fam},          {"decades", dec},
                  {"batches", be_opt.batches}, {"warmup", be_opt.warmup},
                  {"iterations", be_opt.iterations}, {"memory", be_opt.memory}};
      m.seeds = {{"seed", be_opt.seed}};
      auto table = bench::latency_vs_rmps(families, decades, be_opt);
      table.manifest_hash = m.hash();
      const std::string csv = bench::latency_csv(table);
      io::write_text(be_out, csv);
      detail::write_outputs(m, be_out);
      out << csv;
      for (const auto& c : table.correlations) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "spearman %s batch=%zu rho=%.3f\n", c.family.c_str(), c.batch, c.rho);
        out << buf;
      }
      return kOk;
    }
  } catch (const ConfigError& e) {
    err << "eqlab: configuration error: " << e.what() << "\n";
    return kUsage;
  } catch (const InputError& e) {
    err << "eqlab: missing input: " << e.what() << "\n";
    return kMissingInput;
  } catch (const InfeasibleError& e) {
    err << "eqlab: infeasible: " << e.what() << "\n";
    return kInfeasible;
  } catch (const DivergenceError& e) {
    err << "eqlab: training diverged: " << e.what() << "\n";
    return kDiverged;
  } catch (const FormatError& e) {
    err << "eqlab: bad file: " << e.what() << "\n";
    return kBadFormat;
  } catch (const std::exception& e) {
    err << "eqlab: internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}

}  // namespace eqlab::cli
