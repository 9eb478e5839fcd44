#include <gtest/gtest.h>

#include <cmath>

#include "eqlab/bench.hpp"

using namespace eqlab;
using namespace eqlab::bench;

namespace {

neural::Model small_mlp() {
  neural::Model m(neural::build_spec({neural::ArchFamily::MLP3, 21, {32, 32, 16}}));
  m.initialize(1);
  return m;
}

std::vector<double> inputs_for(const neural::Model& m, std::size_t batch) {
  Rng rng(5);
  std::vector<double> v(batch * m.input_size());
  for (auto& x : v) x = rng.normal();
  return v;
}

}  // namespace

TEST(Latency, RejectsTooFewIterations) {
  const auto m = small_mlp();
  const auto in = inputs_for(m, 1);
  EXPECT_THROW(measure_latency(m, in, 1, 0, 99), ConfigError);
  EXPECT_THROW(measure_latency(m, in, 1, 0, 0), ConfigError);
  EXPECT_THROW(measure_latency(m, in, 0, 0, 100), ConfigError);
}

TEST(Latency, RefusesIntraOpParallelism) {
  auto m = small_mlp();
  m.set_intra_op_threads(2);
  const auto in = inputs_for(m, 1);
  EXPECT_THROW(measure_latency(m, in, 1, 0, 100), ConfigError);
}

TEST(Latency, ReportFields) {
  const auto m = small_mlp();
  const auto in = inputs_for(m, 8);
  const auto r = measure_latency(m, in, 8, 5, 100);
  EXPECT_GT(r.mean_s, 0.0);
  EXPECT_GT(r.median_s, 0.0);
  EXPECT_GE(r.p95_s, r.median_s);
  EXPECT_GT(r.timer_resolution_s, 0.0);
  EXPECT_EQ(r.rmps, complexity::rmps_model(m.spec()).total);
  EXPECT_EQ(r.params, m.parameter_count());
  EXPECT_EQ(r.batch, 8u);
  EXPECT_EQ(r.iterations, 100u);
  EXPECT_FALSE(r.host.empty());
}

TEST(Latency, RepeatedMeasurementsAgree) {
  neural::Model m(neural::build_spec({neural::ArchFamily::MLP3, 41, {128, 128, 64}}));
  m.initialize(2);
  const auto in = inputs_for(m, 64);
  measure_latency(m, in, 64, 10, 200);  // primes caches and page mappings
  const auto a = measure_latency(m, in, 64, 10, 500);
  const auto b = measure_latency(m, in, 64, 10, 500);
  EXPECT_LT(std::abs(a.median_s - b.median_s) / std::min(a.median_s, b.median_s), 0.2);
}

TEST(Spearman, Properties) {
  EXPECT_DOUBLE_EQ(spearman({1, 2, 3, 4}, {10, 20, 30, 40}), 1.0);
  EXPECT_DOUBLE_EQ(spearman({1, 2, 3, 4}, {4, 3, 2, 1}), -1.0);
  EXPECT_DOUBLE_EQ(spearman({1, 2, 3, 4}, {1, 8, 27, 1000}), 1.0);
  EXPECT_TRUE(std::isnan(spearman({1}, {2})));
  EXPECT_TRUE(std::isnan(spearman({1, 1, 1}, {1, 2, 3})));
  EXPECT_THROW(spearman({1, 2}, {1}), ConfigError);
  // Ties use average ranks: x ranks (1, 2.5, 2.5, 4), y ranks (1, 2, 3, 4).
  EXPECT_NEAR(spearman({1, 2, 2, 3}, {1, 2, 3, 4}), 4.5 / std::sqrt(4.5 * 5.0), 1e-12);
}

TEST(LatencyTable, EmptyDecadeListGivesEmptyTable) {
  const auto t = latency_vs_rmps({neural::ArchFamily::MLP3}, {});
  EXPECT_TRUE(t.rows.empty());
  EXPECT_TRUE(t.correlations.empty());
}

TEST(LatencyTable, RowsAndCsv) {
  BenchOptions opt;
  opt.memory = 11;
  opt.batches = {1, 16};
  opt.warmup = 2;
  const auto t = latency_vs_rmps({neural::ArchFamily::MLP3, neural::ArchFamily::BiLSTM1},
                                 {{2000, "2e3"}, {20000, "2e4"}}, opt);
  ASSERT_EQ(t.rows.size(), 8u);
  ASSERT_EQ(t.correlations.size(), 4u);
  for (const auto& r : t.rows) {
    EXPECT_LE(r.rmps, r.decade == "2e3" ? 2000u : 20000u);
    EXPECT_EQ(r.ref, latency_key(r.family, r.decade));
    EXPECT_GT(r.mean_s, 0.0);
  }
  const auto csv = latency_csv(t);
  EXPECT_EQ(csv.rfind("# eqlab-latency version 1.0\n", 0), 0u);
  EXPECT_NE(csv.find("\nfamily,decade,rmps,params,batch,warmup,iterations,mean_s,median_s,p95_s,"), std::string::npos);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 10);
}
