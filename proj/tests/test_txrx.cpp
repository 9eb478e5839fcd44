#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>
#include <random>
#include <set>

#include "eqlab/txrx/dataset.hpp"
#include "eqlab/txrx/fiber.hpp"
#include "eqlab/txrx/metrics.hpp"
#include "eqlab/txrx/prbs.hpp"
#include "eqlab/txrx/qam.hpp"
#include "eqlab/txrx/receiver.hpp"
#include "eqlab/txrx/rrc.hpp"
#include "oracles.hpp"

using namespace eqlab;
using namespace eqlab::txrx;

namespace {

constexpr double kNoiseOff = -std::numeric_limits<double>::infinity();

LinkConfig quiet(LinkConfig link) {
  link.edfa_noise_figure_db = kNoiseOff;
  return link;
}

double relative_error(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += std::norm(a[i] - b[i]);
    den += std::norm(b[i]);
  }
  return std::sqrt(num / den);
}

std::vector<double> spectrum_magnitude(std::vector<cplx> v) {
  Fft fft(v.size());
  fft.forward(v);
  std::vector<double> m(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) m[i] = std::abs(v[i]);
  return m;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("eqlab_txrx_" + name);
}

}  // namespace

TEST(Prbs, MatchesRecurrenceOracle) {
  for (std::uint64_t seed : {1ull, 2ull, 12345ull, 0xdeadbeefull}) {
    const auto bits = prbs32(seed, 5000);
    const std::uint64_t fill = 0xffffffffull ^ (seed & 0xffffffffull);
    const auto ref = oracle::lfsr_bits(32, {0, 1, 2, 22}, fill, 5000);
    for (std::size_t i = 0; i < bits.size(); ++i) ASSERT_EQ(bits[i], ref[i]) << "seed " << seed << " bit " << i;
  }
}

TEST(Prbs, MaximalLengthSmallRegisterHasFullPeriod) {
  // x^7 + x^6 + 1 is primitive: period 2^7 - 1.
  Lfsr lfsr(7, {0, 6}, 1);
  std::set<std::uint64_t> states;
  for (int i = 0; i < 127; ++i) {
    states.insert(lfsr.state());
    lfsr.next();
  }
  EXPECT_EQ(states.size(), 127u);
  EXPECT_EQ(lfsr.state(), 1u);
}

TEST(Prbs, RejectsDegenerateSeeds) {
  EXPECT_THROW(prbs32(0, 8), ConfigError);
  EXPECT_THROW(prbs32(0xffffffffull, 8), ConfigError);
  EXPECT_THROW(Lfsr(8, {8}, 1), ConfigError);
}

TEST(Prbs, BalancedOutput) {
  const auto bits = prbs32(7, 1 << 20);
  double ones = 0;
  for (auto b : bits) ones += b;
  EXPECT_NEAR(ones / static_cast<double>(bits.size()), 0.5, 0.005);
}

TEST(Qam16, UnitAverageEnergy) {
  double e = 0.0;
  for (const auto& p : qam16_constellation()) e += std::norm(p);
  EXPECT_NEAR(e / 16.0, 1.0, 1e-15);
}

TEST(Qam16, RoundTripNoiseFree) {
  std::mt19937_64 g(1);
  std::vector<std::uint8_t> bits(4096);
  for (auto& b : bits) b = static_cast<std::uint8_t>(g() & 1u);
  const auto sym = qam16_map(bits);
  EXPECT_EQ(qam16_demap_hard(sym), bits);
  EXPECT_EQ(ber_count(qam16_demap_hard(sym), bits).bit_errors, 0u);
}

TEST(Qam16, NeighboursDifferInOneBit) {
  const auto& pts = qam16_constellation();
  const double step = 2.0 / std::sqrt(10.0);
  int adjacencies = 0;
  for (unsigned a = 0; a < 16; ++a)
    for (unsigned b = 0; b < 16; ++b) {
      if (a == b) continue;
      if (std::abs(std::abs(pts[a] - pts[b]) - step) > 1e-12) continue;
      ++adjacencies;
      EXPECT_EQ(std::popcount(a ^ b), 1) << a << " vs " << b;
    }
  EXPECT_EQ(adjacencies, 48);  // 24 undirected edges of a 4x4 grid, both directions
}

TEST(Qam16, RejectsPartialSymbols) {
  std::vector<std::uint8_t> bits(6, 0);
  EXPECT_THROW(qam16_map(bits), ConfigError);
}

TEST(Rrc, CascadeMatchesDirectConvolutionAndIsNyquist) {
  const std::size_t sps = 8, taps = default_rrc_taps(sps), n_sym = 256;
  std::vector<cplx> impulse(n_sym);
  impulse[n_sym / 2] = 1.0;
  const auto shaped = rrc_shape(impulse, 0.1, sps, taps);
  const auto out = rrc_matched(shaped, 0.1, sps, taps);

  const auto h = rrc_taps(0.1, sps, taps);
  const auto rc = oracle::convolve(h, h);  // centred at index taps - 1
  const std::size_t centre = n_sym / 2 * sps;
  for (std::ptrdiff_t d = -static_cast<std::ptrdiff_t>(taps - 1); d <= static_cast<std::ptrdiff_t>(taps - 1); ++d)
    EXPECT_NEAR(out[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(centre) + d)].real(),
                rc[static_cast<std::size_t>(d + static_cast<std::ptrdiff_t>(taps) - 1)], 1e-12);

  const auto sym = decimate(out, sps);
  EXPECT_NEAR(sym[n_sym / 2].real(), 1.0, 1e-9);
  for (std::size_t k = 0; k < n_sym; ++k)
    if (k != n_sym / 2) EXPECT_LT(std::abs(sym[k]), 5e-3) << "ISI at symbol offset " << int(k) - int(n_sym / 2);
}

TEST(Rrc, CascadeApproachesAnalyticRaisedCosine) {
  const std::size_t sps = 8, taps = 64 * sps + 1;
  const auto h = rrc_taps(0.1, sps, taps);
  const auto rc = oracle::convolve(h, h);
  for (std::size_t n = 0; n < 4 * sps; ++n) {
    const double t = static_cast<double>(n) / static_cast<double>(sps);
    EXPECT_NEAR(rc[taps - 1 + n], oracle::raised_cosine(t, 0.1), 1e-2) << "t=" << t;
  }
}

TEST(Rrc, ZeroRolloffIsSinc) {
  for (double t : {0.1, 0.37, 1.5, 2.25, 7.9}) {
    const double sinc = std::sin(std::numbers::pi * t) / (std::numbers::pi * t);
    EXPECT_NEAR(rrc_impulse(t, 0.0), sinc, 1e-12);
  }
  EXPECT_DOUBLE_EQ(rrc_impulse(0.0, 0.0), 1.0);
}

TEST(Rrc, UnitEnergyPreservesSymbolPower) {
  const std::size_t sps = 4, taps = 32 * sps + 1;
  std::vector<cplx> impulse(64);
  impulse[10] = qam16_point(5);
  const auto y = rrc_shape(impulse, 0.1, sps, taps);
  double e = 0.0;
  for (const auto& v : y) e += std::norm(v);
  EXPECT_NEAR(e, std::norm(impulse[10]), 1e-6);
}

TEST(Rrc, RejectsBadArguments) {
  EXPECT_THROW(rrc_taps(0.1, 8, 64), ConfigError);
  EXPECT_THROW(rrc_taps(0.1, 1, 65), ConfigError);
  EXPECT_THROW(rrc_taps(1.5, 8, 65), ConfigError);
}

TEST(Fiber, BetaTwoFromDispersion) {
  const auto ssmf = LinkConfig::ssmf();
  // -D lambda^2 / (2 pi c): 17 ps/(nm km) at 1550 nm is about -21.7 ps^2/km.
  EXPECT_NEAR(ssmf.beta2_ps2_per_km(), -17.0 * 1550.0 * 1550.0 / (2 * std::numbers::pi * 299792.458), 1e-12);
  EXPECT_NEAR(ssmf.beta2_ps2_per_km(), -21.68, 0.01);
}

TEST(Fiber, LinearStepIsAllPassWithoutLoss) {
  LinkConfig link = quiet(LinkConfig::ssmf());
  const auto f = transmit(link, 512, 3);
  SplitStep ss(f.x.size(), f.sample_rate_ghz);
  auto x = f.x, y = f.y;
  const double e0 = mean_power(x, y);
  ss.run(x, y, 50.0, 10, 0.0, link.beta2_ps2_per_km(), 0.0);
  EXPECT_NEAR(mean_power(x, y) / e0, 1.0, 1e-9);
  ss.run(x, y, 50.0, 10, 0.0, link.beta2_ps2_per_km(), 1.2);
  EXPECT_NEAR(mean_power(x, y) / e0, 1.0, 1e-9);
}

TEST(Fiber, LinearSpanPreservesSpectrumMagnitude) {
  LinkConfig link = quiet(LinkConfig::ssmf());
  link.fiber.gamma_per_w_km = 0.0;
  link.fiber.span_count = 1;
  const auto in = transmit(link, 1024, 9);
  const auto out = propagate(in, link);
  const auto a = spectrum_magnitude(in.x), b = spectrum_magnitude(out.x);
  double peak = 0.0;
  for (double v : a) peak = std::max(peak, v);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(b[k], a[k], 1e-9 * peak);
}

TEST(Fiber, EdfaRestoresLaunchPowerEverySpan) {
  for (double gamma : {0.0, 1.2}) {
    LinkConfig link = quiet(LinkConfig::ssmf());
    link.fiber.gamma_per_w_km = gamma;
    link.steps_per_span_sim = 10;
    PropagationTrace trace;
    const auto in = transmit(link, 1024, 4);
    EXPECT_NEAR(mean_power(in.x, in.y) / link.launch_power_w(), 1.0, 1e-12);
    propagate(in, link, &trace);
    ASSERT_EQ(trace.span_output_power_w.size(), 5u);
    for (double p : trace.span_output_power_w) EXPECT_NEAR(p / link.launch_power_w(), 1.0, 1e-9);
  }
}

TEST(Fiber, ContinuousWaveNonlinearPhase) {
  const double gamma = 1.3, dz = 0.7, px = 0.004, py = 0.001;
  std::vector<cplx> x(256, cplx(std::sqrt(px), 0.0)), y(256, cplx(0.0, std::sqrt(py)));
  SplitStep ss(256, 275.2);
  ss.run(x, y, dz, 1, 0.0, 0.0, gamma);
  const double expected = 8.0 / 9.0 * gamma * (px + py) * dz;
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_NEAR(std::arg(x[i]), expected, 1e-9);
    EXPECT_NEAR(std::arg(y[i]) - std::numbers::pi / 2, expected, 1e-9);
  }
}

TEST(Fiber, AseVarianceMatchesPsd) {
  LinkConfig link = LinkConfig::ssmf();
  link.fiber.gamma_per_w_km = 0.0;
  link.fiber.span_count = 1;
  const auto in = transmit(link, 1 << 16, 21);
  LinkConfig clean = link;
  clean.edfa_noise_figure_db = kNoiseOff;
  const auto noisy = propagate(in, link);
  const auto ref = propagate(in, clean);
  double var = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < ref.x.size(); ++i) {
    var += std::norm(noisy.x[i] - ref.x[i]) + std::norm(noisy.y[i] - ref.y[i]);
    n += 2;
  }
  var /= static_cast<double>(n);
  // Independent evaluation of rho = (G - 1) h nu n_sp over the simulation bandwidth.
  const double g = std::pow(10.0, 0.2 * 50.0 / 10.0);
  const double nf = std::pow(10.0, 4.5 / 10.0);
  const double nsp = nf * g / (2.0 * (g - 1.0));
  const double nu = 299792458.0 / 1550e-9;
  const double rho = (g - 1.0) * 6.62607015e-34 * nu * nsp;
  const double expected = rho * 34.4e9 * 8.0;
  EXPECT_GE(n, 1000000u);
  EXPECT_NEAR(var / expected, 1.0, 0.05);
}

TEST(Fiber, PowerGuardAborts) {
  LinkConfig link = quiet(LinkConfig::ssmf());
  link.launch_power_dbm = 31.0;
  link.fiber.gamma_per_w_km = 0.0;
  EXPECT_THROW(propagate(transmit(link, 256, 1), link), Error);
}

TEST(Fiber, ValidationRejectsBadLinks) {
  LinkConfig link;
  link.rrc_rolloff = 1.2;
  EXPECT_THROW(link.validate(), ConfigError);
  link = {};
  link.samples_per_symbol_sim = 2;
  EXPECT_THROW(link.validate(), ConfigError);
  link = {};
  link.fiber.alpha_db_per_km = 0.0;
  EXPECT_THROW(link.validate(), ConfigError);
  link = {};
  link.fiber.span_count = 0;
  EXPECT_NO_THROW(link.validate());
}

TEST(Fiber, DeterministicPerSeed) {
  const LinkConfig link = LinkConfig::twc();
  const auto a = propagate(transmit(link, 512, 5), link);
  const auto b = propagate(transmit(link, 512, 5), link);
  const auto c = propagate(transmit(link, 512, 6), link);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.y, b.y);
  EXPECT_NE(a.x, c.x);
}

TEST(Cdc, ZeroDispersionIsIdentity) {
  std::vector<cplx> w{{1, 2}, {3, 4}, {-1, 0.5}};
  EXPECT_EQ(cd_compensate(w, 0.0, 100.0), w);
}

TEST(Cdc, LinearLoopBackRecoversWaveform) {
  for (auto link : {LinkConfig::ssmf(), LinkConfig::twc()}) {
    link = quiet(link);
    link.fiber.gamma_per_w_km = 0.0;
    const auto in = transmit(link, 2048, 8);
    auto out = propagate(in, link);
    const auto x = cd_compensate(out.x, link.accumulated_dispersion_ps_per_nm(), out.sample_rate_ghz);
    const auto y = cd_compensate(out.y, link.accumulated_dispersion_ps_per_nm(), out.sample_rate_ghz);
    EXPECT_LT(relative_error(x, in.x), 1e-6);
    EXPECT_LT(relative_error(y, in.y), 1e-6);
  }
}

TEST(Receiver, LinearNoiseFreeChainIsErrorFree) {
  for (auto link : {LinkConfig::ssmf(), LinkConfig::twc()}) {
    link = quiet(link);
    link.fiber.gamma_per_w_km = 0.0;
    const auto f = simulate_frame(link, 8192, 3);
    EXPECT_EQ(evaluate_hard(f).bit_errors, 0u);
    EXPECT_GT(std::abs(f.gain_x), 0.0);
    double err = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) err = std::max(err, std::abs(f.x[k] - qam16_point(f.truth_x[k])));
    EXPECT_LT(err, 1e-2);  // residual ISI of the truncated filter pair
  }
}

TEST(Receiver, ResampleRoundTrip) {
  // A waveform with content only in |k| <= 40 of 512 bins survives 8 -> 2 -> 8 sps.
  const std::size_t n = 512;
  std::mt19937_64 g(4);
  std::normal_distribution<double> nd;
  std::vector<cplx> w(n);
  for (int k = -40; k <= 40; ++k) {
    const cplx c(nd(g), nd(g));
    for (std::size_t t = 0; t < n; ++t)
      w[t] += c * std::polar(1.0, 2.0 * std::numbers::pi * k * static_cast<double>(t) / static_cast<double>(n));
  }
  const auto down = resample(w, 8, 2);
  ASSERT_EQ(down.size(), n / 4);
  for (std::size_t t = 0; t < down.size(); ++t) EXPECT_NEAR(std::abs(down[t] - w[4 * t]), 0.0, 1e-9);
  EXPECT_LT(relative_error(resample(down, 2, 8), w), 1e-12);
}

TEST(Dbp, LinearLinkEqualsCdc) {
  LinkConfig link = quiet(LinkConfig::twc());
  link.fiber.gamma_per_w_km = 0.0;
  auto rx = propagate(transmit(link, 1024, 4), link);
  SignalFrame f;
  f.x = resample(rx.x, 8, 2);
  f.y = resample(rx.y, 8, 2);
  f.samples_per_symbol = 2;
  f.sample_rate_ghz = 2 * link.symbol_rate_gbd;
  const auto cdc = cd_compensate(f.x, link.accumulated_dispersion_ps_per_nm(), f.sample_rate_ghz);
  const auto dbp = dbp_equalize(f, link, 3);
  EXPECT_LT(relative_error(dbp.x, cdc), 1e-9);
}

TEST(Dbp, InvertsNoiseFreeNonlinearLink) {
  LinkConfig link = quiet(LinkConfig::twc());
  link.launch_power_dbm = 4.0;
  link.steps_per_span_sim = 20;
  const auto rx = propagate(transmit(link, 4096, 12), link);
  ReceiverOptions dbp;
  dbp.compensation = Compensation::DBP;
  dbp.dbp_steps_per_span = link.steps_per_span_sim;
  dbp.dsp_samples_per_symbol = link.samples_per_symbol_sim;
  const auto eq = evaluate_hard(receive(rx, link, dbp));
  const auto cdc = evaluate_hard(receive(rx, link));
  EXPECT_EQ(eq.bit_errors, 0u);
  EXPECT_GT(cdc.bit_errors, 0u);
}

TEST(Dbp, RejectsZeroSteps) {
  EXPECT_THROW(dbp_equalize(SignalFrame{}, LinkConfig::twc(), 0), ConfigError);
}

TEST(Metrics, QFactorMatchesBisectionOracle) {
  EXPECT_NEAR(q_factor_db(1e-3), 9.80, 0.01);
  for (double ber : {1e-6, 1e-4, 1e-3, 1.741e-2, 0.1, 0.3, 0.49})
    EXPECT_NEAR(q_factor_db(ber), oracle::q_db_from_ber(ber), 1e-9) << ber;
}

TEST(Metrics, QFactorSentinels) {
  EXPECT_TRUE(std::isnan(q_factor_db(0.5)));
  EXPECT_TRUE(std::isnan(q_factor_db(0.7)));
  EXPECT_TRUE(std::isinf(q_factor_db(0.0)));
  EXPECT_GT(q_factor_db(0.0), 0.0);
  EXPECT_THROW(q_factor_db(-0.1), ConfigError);
  EXPECT_EQ(q_status(q_factor_db(0.5)), "undefined");
  EXPECT_EQ(q_status(q_factor_db(0.0)), "infinite");
}

TEST(Metrics, IdenticalStreams) {
  std::vector<std::uint8_t> a{1, 0, 1, 1, 0, 0, 1, 0};
  const auto r = ber_count(a, a);
  EXPECT_EQ(r.bit_errors, 0u);
  EXPECT_EQ(r.ber, 0.0);
  EXPECT_TRUE(std::isinf(r.q_db));
  EXPECT_TRUE(to_json(r)["q_db"].is_null());
  auto b = a;
  b[3] ^= 1;
  EXPECT_EQ(ber_count(a, b).bit_errors, 1u);
  EXPECT_THROW(ber_count(a, std::vector<std::uint8_t>(3)), ConfigError);
}

TEST(Metrics, SymbolBitErrorsCountsGrayBits) {
  std::vector<std::uint8_t> a{0, 15, 5}, b{1, 0, 5};
  EXPECT_EQ(symbol_bit_errors(a, b), 1u + 4u);
}

TEST(Dataset, RejectsIdenticalSeeds) {
  EXPECT_THROW(make_dataset(LinkConfig::twc(), 64, 64, 5, 5), ConfigError);
}

TEST(Dataset, TrainOnlyIsValid) {
  const auto ds = make_dataset(LinkConfig::twc(), 256, 0, 1, 2);
  EXPECT_EQ(ds.train.size(), 256u);
  EXPECT_EQ(ds.test.size(), 0u);
  const auto path = temp_file("train_only.bin");
  write_dataset(path, ds);
  const auto back = read_dataset(path);
  EXPECT_EQ(back.train.x, ds.train.x);
  EXPECT_EQ(back.test.size(), 0u);
  std::filesystem::remove(path);
}

TEST(Dataset, IndependentSeedsAreUncorrelated) {
  const LinkConfig link = LinkConfig::twc();
  std::vector<cplx> a = truth_symbols(transmit(link, 1 << 16, 11).truth_x);
  std::vector<cplx> b = truth_symbols(transmit(link, 1 << 16, 12).truth_x);
  EXPECT_LT(max_normalized_xcorr(a, b), 0.02);
  EXPECT_NEAR(max_normalized_xcorr(a, a), 1.0, 1e-9);
}

TEST(Dataset, FileRoundTripIsExact) {
  const auto ds = make_dataset(LinkConfig::twc(), 512, 512, 3, 4);
  const auto path = temp_file("roundtrip.bin");
  write_dataset(path, ds, "abc");
  const auto back = read_dataset(path);
  EXPECT_EQ(back.train.x, ds.train.x);
  EXPECT_EQ(back.test.y, ds.test.y);
  EXPECT_EQ(back.test.truth_y, ds.test.truth_y);
  EXPECT_EQ(back.train.gain_x, ds.train.gain_x);
  EXPECT_EQ(back.unequalized.bit_errors, ds.unequalized.bit_errors);
  EXPECT_EQ(back.dbp.bit_errors, ds.dbp.bit_errors);
  EXPECT_EQ(link_hash(back.link), link_hash(ds.link));
  EXPECT_EQ(encode_dataset(back, "abc"), encode_dataset(ds, "abc"));
  std::filesystem::remove(path);
}

TEST(Dataset, RejectsUnknownMajorVersionAndCorruption) {
  const auto ds = make_dataset(LinkConfig::twc(), 64, 64, 3, 4);
  auto bytes = encode_dataset(ds);
  std::string text(bytes.begin(), bytes.end());
  const auto pos = text.find("\"version\":\"1.0\"");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 15, "\"version\":\"2.0\"");
  const auto path = temp_file("v2.bin");
  io::write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
  EXPECT_THROW(read_dataset(path), FormatError);

  bytes.resize(bytes.size() - 3);
  io::write_file(path, bytes);
  EXPECT_THROW(read_dataset(path), FormatError);

  bytes.assign({'N', 'O', 'P', 'E'});
  io::write_file(path, bytes);
  EXPECT_THROW(read_dataset(path), FormatError);
  std::filesystem::remove(path);
  EXPECT_THROW(read_dataset(path), InputError);
}

TEST(Dataset, WorkerCountDoesNotChangeBytes) {
  const LinkConfig link = LinkConfig::twc();
  const auto a = make_dataset(link, 512, 512, 1, 2, {1, true});
  const auto b = make_dataset(link, 512, 512, 1, 2, {2, true});
  EXPECT_EQ(encode_dataset(a), encode_dataset(b));
}
