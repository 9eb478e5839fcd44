#pragma once

// Train/test datasets of received symbols.
//
// File layout (see io.hpp for the container):
//   magic "EQLABDAT", JSON header with format "eqlab-dataset", version "1.0",
//   link config + hash, seeds, counts, normalization gains, measured
//   train/test cross-correlation and baseline results; then for each section
//   in order (train, test):
//     x[n]        complex samples, little-endian f64 (re, im) interleaved
//     y[n]        same for the Y polarization
//     truth_x[n]  u8 16-QAM symbol indices
//     truth_y[n]  u8

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include "../errors.hpp"
#include "../io.hpp"
#include "fft.hpp"
#include "fiber.hpp"
#include "metrics.hpp"
#include "receiver.hpp"

namespace eqlab::txrx {

inline constexpr std::string_view kDatasetMagic = "EQLABDAT";
inline constexpr std::string_view kDatasetFormat = "eqlab-dataset";
inline constexpr int kDatasetMajor = 1;
inline constexpr std::size_t kDbpStepsPerSpan = 3;

struct Dataset {
  LinkConfig link;
  std::uint64_t train_seed = 1;
  std::uint64_t test_seed = 2;
  SymbolFrame train;
  SymbolFrame test;
  double max_xcorr = 0.0;
  EvalResult unequalized;  // CDC-only chain on the test frame
  EvalResult dbp;          // DBP at kDbpStepsPerSpan steps per span on the test frame
  std::size_t dbp_steps_per_span = kDbpStepsPerSpan;
};

/// Largest |normalized cross-correlation| over all lags between two
/// mean-removed complex sequences (linear correlation, FFT-based).
inline double max_normalized_xcorr(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  if (a.empty() || b.empty()) return 0.0;
  auto centered = [](const std::vector<cplx>& v) {
    cplx mean{};
    for (const auto& s : v) mean += s;
    mean /= static_cast<double>(v.size());
    std::vector<cplx> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] - mean;
    return out;
  };
  const auto ac = centered(a), bc = centered(b);
  double ea = 0.0, eb = 0.0;
  for (const auto& s : ac) ea += std::norm(s);
  for (const auto& s : bc) eb += std::norm(s);
  if (ea == 0.0 || eb == 0.0) return 0.0;
  std::size_t n = 1;
  while (n < ac.size() + bc.size() - 1) n <<= 1;
  std::vector<cplx> fa(n), fb(n);
  std::copy(ac.begin(), ac.end(), fa.begin());
  std::copy(bc.begin(), bc.end(), fb.begin());
  const Fft fft(n);
  fft.forward(fa);
  fft.forward(fb);
  for (std::size_t k = 0; k < n; ++k) fa[k] *= std::conj(fb[k]);
  fft.inverse(fa);
  double peak = 0.0;
  for (const auto& v : fa) peak = std::max(peak, std::abs(v));
  return peak / std::sqrt(ea * eb);
}

inline std::vector<cplx> truth_symbols(const std::vector<std::uint8_t>& idx) {
  std::vector<cplx> s(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) s[k] = qam16_point(idx[k]);
  return s;
}

/// Simulates one frame end to end: transmit -> propagate -> receiver chain.
inline SymbolFrame simulate_frame(const LinkConfig& link, std::size_t n_symbols, std::uint64_t seed,
                                  const ReceiverOptions& opt = {}) {
  return receive(propagate(transmit(link, n_symbols, seed), link), link, opt);
}

struct DatasetOptions {
  unsigned workers = 1;
  bool with_dbp = true;
};

/// Independent train and test frames from distinct PRBS seeds.
inline Dataset make_dataset(const LinkConfig& link, std::size_t n_train, std::size_t n_test,
                            std::uint64_t train_seed, std::uint64_t test_seed, const DatasetOptions& opt = {}) {
  link.validate();
  if (train_seed == test_seed) throw ConfigError("train and test seeds must differ");
  Dataset ds;
  ds.link = link;
  ds.train_seed = train_seed;
  ds.test_seed = test_seed;

  SignalFrame test_rx;
  auto run_train = [&] {
    if (n_train > 0) ds.train = simulate_frame(link, n_train, train_seed);
  };
  auto run_test = [&] {
    if (n_test > 0) {
      test_rx = propagate(transmit(link, n_test, test_seed), link);
      ds.test = receive(test_rx, link);
    }
  };
  if (opt.workers > 1) {
    std::jthread t(run_train);
    run_test();
  } else {
    run_train();
    run_test();
  }

  if (n_test > 0) {
    ds.unequalized = evaluate_hard(ds.test);
    if (opt.with_dbp) {
      ReceiverOptions dbp;
      dbp.compensation = Compensation::DBP;
      dbp.dbp_steps_per_span = ds.dbp_steps_per_span;
      ds.dbp = evaluate_hard(receive(test_rx, link, dbp));
      ds.dbp.q_gain_db = q_gain_db(ds.dbp.q_db, ds.unequalized.q_db);
    }
  }
  if (n_train > 0 && n_test > 0) {
    ds.max_xcorr = std::max(max_normalized_xcorr(truth_symbols(ds.train.truth_x), truth_symbols(ds.test.truth_x)),
                            max_normalized_xcorr(truth_symbols(ds.train.truth_y), truth_symbols(ds.test.truth_y)));
  }
  return ds;
}

namespace detail {

inline io::Json gains_json(const SymbolFrame& f) {
  return {{"x", {f.gain_x.real(), f.gain_x.imag()}}, {"y", {f.gain_y.real(), f.gain_y.imag()}}};
}

inline void write_section(io::ByteWriter& w, const SymbolFrame& f) {
  for (const auto& v : f.x) {
    w.f64(v.real());
    w.f64(v.imag());
  }
  for (const auto& v : f.y) {
    w.f64(v.real());
    w.f64(v.imag());
  }
  for (auto s : f.truth_x) w.u8(s);
  for (auto s : f.truth_y) w.u8(s);
}

inline SymbolFrame read_section(io::ByteReader& r, std::size_t n, const io::Json& gains, std::uint64_t seed) {
  SymbolFrame f;
  f.seed = seed;
  f.x.resize(n);
  f.y.resize(n);
  f.truth_x.resize(n);
  f.truth_y.resize(n);
  auto read_complex = [&r] {
    const double re = r.f64();
    const double im = r.f64();
    return cplx(re, im);
  };
  for (auto& v : f.x) v = read_complex();
  for (auto& v : f.y) v = read_complex();
  for (auto& s : f.truth_x) s = r.u8();
  for (auto& s : f.truth_y) s = r.u8();
  for (auto s : f.truth_x)
    if (s > 15) throw FormatError("symbol index out of range");
  for (auto s : f.truth_y)
    if (s > 15) throw FormatError("symbol index out of range");
  f.gain_x = cplx(gains.at("x").at(0).get<double>(), gains.at("x").at(1).get<double>());
  f.gain_y = cplx(gains.at("y").at(0).get<double>(), gains.at("y").at(1).get<double>());
  return f;
}

inline EvalResult eval_from_json(const io::Json& j) {
  return make_result(j.at("bit_errors").get<std::uint64_t>(), j.at("bits").get<std::uint64_t>());
}

}  // namespace detail

inline io::Json dataset_header(const Dataset& ds, const std::string& manifest_hash = "") {
  io::Json h;
  h["format"] = kDatasetFormat;
  h["version"] = "1.0";
  h["link"] = to_json(ds.link);
  h["config_hash"] = link_hash(ds.link);
  h["seeds"] = {{"train", ds.train_seed}, {"test", ds.test_seed}};
  h["counts"] = {{"train", ds.train.size()}, {"test", ds.test.size()}};
  h["normalization"] = {{"train", detail::gains_json(ds.train)}, {"test", detail::gains_json(ds.test)}};
  h["max_xcorr"] = ds.max_xcorr;
  io::Json dbp = to_json(ds.dbp);
  dbp["steps_per_span"] = ds.dbp_steps_per_span;
  h["baselines"] = {{"unequalized", to_json(ds.unequalized)}, {"dbp", dbp}};
  h["samples_per_symbol"] = 1;
  h["layout"] = "sections train,test: x[n] f64le(re,im), y[n] f64le(re,im), truth_x[n] u8, truth_y[n] u8";
  if (!manifest_hash.empty()) h["manifest_hash"] = manifest_hash;
  return h;
}

inline std::vector<std::uint8_t> encode_dataset(const Dataset& ds, const std::string& manifest_hash = "") {
  auto w = io::begin_container(kDatasetMagic, dataset_header(ds, manifest_hash));
  detail::write_section(w, ds.train);
  detail::write_section(w, ds.test);
  return w.bytes();
}

inline void write_dataset(const std::filesystem::path& path, const Dataset& ds, const std::string& manifest_hash = "") {
  io::write_file(path, encode_dataset(ds, manifest_hash));
}

inline Dataset read_dataset(const std::filesystem::path& path) {
  auto c = io::open_container(io::read_file(path), kDatasetMagic);
  io::check_header(c.header, kDatasetFormat, kDatasetMajor);
  try {
    Dataset ds;
    const auto& h = c.header;
    ds.link = link_from_json(h.at("link"));
    ds.train_seed = h.at("seeds").at("train").get<std::uint64_t>();
    ds.test_seed = h.at("seeds").at("test").get<std::uint64_t>();
    const auto n_train = h.at("counts").at("train").get<std::size_t>();
    const auto n_test = h.at("counts").at("test").get<std::size_t>();
    ds.train = detail::read_section(c.payload, n_train, h.at("normalization").at("train"), ds.train_seed);
    ds.test = detail::read_section(c.payload, n_test, h.at("normalization").at("test"), ds.test_seed);
    ds.max_xcorr = h.at("max_xcorr").get<double>();
    ds.unequalized = detail::eval_from_json(h.at("baselines").at("unequalized"));
    ds.dbp = detail::eval_from_json(h.at("baselines").at("dbp"));
    ds.dbp.q_gain_db = q_gain_db(ds.dbp.q_db, ds.unequalized.q_db);
    ds.dbp_steps_per_span = h.at("baselines").at("dbp").value("steps_per_span", kDbpStepsPerSpan);
    if (c.payload.remaining() != 0) throw FormatError("trailing bytes after dataset payload");
    return ds;
  } catch (const io::Json::exception& e) {
    throw FormatError(std::string("malformed dataset header: ") + e.what());
  }
}

}  // namespace eqlab::txrx
