#pragma once

// Inference latency harness. Times Model::predict_batch on one thread with
// std::chrono::steady_clock; per-symbol latency is batch time / batch size,
// one symbol being one forward pass of one polarization model.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "complexity.hpp"
#include "errors.hpp"
#include "neural/families.hpp"
#include "neural/model.hpp"
#include "rng.hpp"

#if defined(__unix__) || defined(__APPLE__)
#include <sys/utsname.h>
#endif

namespace eqlab::bench {

using complexity::Count;

inline constexpr std::string_view kLatencyCsvVersion = "1.0";
inline constexpr std::size_t kMinIterations = 100;

struct LatencyReport {
  std::string family;
  std::string decade;
  Count rmps = 0;
  std::size_t params = 0;
  std::size_t batch = 1;
  std::size_t warmup = 0;
  std::size_t iterations = 0;
  double mean_s = 0.0;  // per symbol
  double median_s = 0.0;
  double p95_s = 0.0;
  double timer_resolution_s = 0.0;
  bool reliable = true;
  std::string host;
  std::string ref;
};

/// Smallest observable positive steady_clock increment.
inline double timer_resolution() {
  using clock = std::chrono::steady_clock;
  double best = 1.0;
  for (int i = 0; i < 64; ++i) {
    const auto a = clock::now();
    auto b = clock::now();
    while (b == a) b = clock::now();
    best = std::min(best, std::chrono::duration<double>(b - a).count());
  }
  return best;
}

inline std::string host_descriptor() {
  std::string cpu = "unknown-cpu";
  std::ifstream in("/proc/cpuinfo");
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("model name", 0) == 0) {
      const auto pos = line.find(':');
      if (pos != std::string::npos) cpu = line.substr(pos + 2);
      break;
    }
  }
  std::string os = "unknown-os";
#if defined(__unix__) || defined(__APPLE__)
  utsname u{};
  if (uname(&u) == 0) os = std::string(u.sysname) + " " + u.release + " " + u.machine;
#endif
  return cpu + "; " + os + "; hw_threads=" + std::to_string(std::thread::hardware_concurrency());
}

/// Nearest-rank percentile of a sorted sample, q in (0, 1].
inline double percentile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
  return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Times `iters` forward passes over `input_batch` after `warmup` discarded ones.
inline LatencyReport measure_latency(const neural::Model& model, std::span<const double> input_batch,
                                     std::size_t batch, std::size_t warmup, std::size_t iters) {
  if (iters < kMinIterations)
    throw ConfigError("latency measurement needs at least " + std::to_string(kMinIterations) + " iterations");
  if (batch == 0) throw ConfigError("batch size must be >= 1");
  if (model.intra_op_threads() != 1)
    throw ConfigError("latency measurement requires single-threaded inference (intra-op threads = " +
                      std::to_string(model.intra_op_threads()) + ")");
  std::vector<double> out(batch * model.output_size());
  std::vector<neural::Workspace> ws;
  for (std::size_t i = 0; i < warmup; ++i) model.predict_batch(input_batch, batch, out, ws);

  using clock = std::chrono::steady_clock;
  std::vector<double> samples(iters);
  volatile double sink = 0.0;
  for (std::size_t i = 0; i < iters; ++i) {
    const auto t0 = clock::now();
    model.predict_batch(input_batch, batch, out, ws);
    const auto t1 = clock::now();
    sink = sink + out[0];
    samples[i] = std::chrono::duration<double>(t1 - t0).count();
  }

  LatencyReport r;
  r.rmps = complexity::rmps_model(model.spec()).total;
  r.params = model.parameter_count();
  r.batch = batch;
  r.warmup = warmup;
  r.iterations = iters;
  r.timer_resolution_s = timer_resolution();
  std::vector<double> sorted = samples;
  std::sort(sorted.begin(), sorted.end());
  const double mean_batch = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(iters);
  const double b = static_cast<double>(batch);
  r.mean_s = mean_batch / b;
  r.median_s = median(sorted) / b;
  r.p95_s = percentile(sorted, 0.95) / b;
  r.reliable = r.timer_resolution_s <= 0.01 * mean_batch && sorted.front() > 0.0;
  r.host = host_descriptor();
  return r;
}

/// Spearman rank correlation with average ranks for ties. NaN if either
/// input is constant or shorter than 2.
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ConfigError("spearman needs equal-length inputs");
  const std::size_t n = a.size();
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  auto ranks = [n](const std::vector<double>& v) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / static_cast<double>(n);
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sab / std::sqrt(saa * sbb);
}

struct Decade {
  Count rmps = 0;
  std::string label;
};

struct BenchOptions {
  std::size_t memory = neural::kDefaultMemory;
  std::vector<std::size_t> batches{1, 256};
  std::size_t warmup = 10;
  std::size_t iterations = kMinIterations;
  std::uint64_t seed = 1;
};

struct LatencyTable {
  std::vector<LatencyReport> rows;
  // Spearman rho of (rmps, mean latency) per (family, batch).
  struct Correlation {
    std::string family;
    std::size_t batch = 1;
    double rho = 0.0;
  };
  std::vector<Correlation> correlations;
  std::string manifest_hash;
};

inline std::string latency_key(std::string_view family, std::string_view decade) {
  return std::string(family) + "@" + std::string(decade);
}

/// Random-weight models sized by topology_for_budget at each decade.
inline LatencyTable latency_vs_rmps(const std::vector<neural::ArchFamily>& families,
                                    const std::vector<Decade>& decades, const BenchOptions& opt = {}) {
  LatencyTable t;
  if (decades.empty()) return t;
  const std::string host = host_descriptor();
  for (auto family : families) {
    const std::string name(neural::to_string(family));
    for (std::size_t batch : opt.batches) {
      std::vector<double> rmps, mean;
      for (const auto& d : decades) {
        const auto topo = neural::topology_for_budget(family, d.rmps, opt.memory);
        neural::Model model(neural::build_spec(topo));
        model.initialize(derive_seed(opt.seed, d.rmps));
        Rng rng(derive_seed(opt.seed, 0x494e));
        std::vector<double> inputs(batch * model.input_size());
        for (auto& v : inputs) v = rng.normal();
        auto r = measure_latency(model, inputs, batch, opt.warmup, opt.iterations);
        r.family = name;
        r.decade = d.label;
        r.host = host;
        r.ref = latency_key(name, d.label);
        rmps.push_back(static_cast<double>(r.rmps));
        mean.push_back(r.mean_s);
        t.rows.push_back(std::move(r));
      }
      t.correlations.push_back({name, batch, spearman(rmps, mean)});
    }
  }
  return t;
}

inline std::string latency_csv(const LatencyTable& t) {
  std::ostringstream os;
  os << "# eqlab-latency version " << kLatencyCsvVersion;
  if (!t.manifest_hash.empty()) os << " manifest " << t.manifest_hash;
  os << "\n";
  os << "family,decade,rmps,params,batch,warmup,iterations,mean_s,median_s,p95_s,timer_resolution_s,reliable,ref,host\n";
  char buf[512];
  for (const auto& r : t.rows) {
    std::snprintf(buf, sizeof buf, "%s,%s,%llu,%zu,%zu,%zu,%zu,%.9e,%.9e,%.9e,%.3e,%s,%s,\"%s\"\n",
                  r.family.c_str(), r.decade.c_str(), static_cast<unsigned long long>(r.rmps), r.params, r.batch,
                  r.warmup, r.iterations, r.mean_s, r.median_s, r.p95_s, r.timer_resolution_s,
                  r.reliable ? "true" : "false", r.ref.c_str(), r.host.c_str());
    os << buf;
  }
  return os.str();
}

}  // namespace eqlab::bench
