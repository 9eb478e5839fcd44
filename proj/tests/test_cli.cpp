#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "eqlab/cli.hpp"

using namespace eqlab;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "eqlab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), {out, err});
  return {code, out.str(), err.str()};
}

std::string config(const std::string& name) { return std::string(EQLAB_SOURCE_DIR) + "/configs/" + name; }

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("eqlab_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  const auto b = io::read_file(p);
  return {b.begin(), b.end()};
}

io::Json last_json(const std::string& out) { return io::Json::parse(out.substr(out.find('{'))); }

}  // namespace

TEST(Cli, RmpsOfShippedConfigs) {
  const auto r = run({"rmps", config("mlp3.json"), "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(last_json(r.out)["total_rmps"], 24200);
  const auto table = run({"rmps", config("cnn_mlp.json")});
  ASSERT_EQ(table.code, 0) << table.err;
  EXPECT_NE(table.out.find("total rmps 12520"), std::string::npos) << table.out;
  const auto flat = run({"rmps", config("flatten_only.json"), "--json"});
  ASSERT_EQ(flat.code, 0) << flat.err;
  EXPECT_EQ(last_json(flat.out)["total_rmps"], 0);
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("codes");
  io::write_text(dir / "bad.json", "{\n  \"version\": \"1.0\",\n  \"memory\": ,\n}\n");
  const auto bad = run({"rmps", (dir / "bad.json").string()});
  EXPECT_EQ(bad.code, 6);
  EXPECT_NE(bad.err.find("line 3"), std::string::npos) << bad.err;
  EXPECT_EQ(run({"rmps", (dir / "absent.json").string()}).code, 3);
  EXPECT_EQ(run({"nonsense"}).code, 2);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"evaluate", "--dataset", (dir / "absent.eqd").string()}).code, 3);
  EXPECT_EQ(run({"--version"}).code, 0);
}

TEST(Cli, SimulateTrainEvaluateOnLinearLink) {
  const auto dir = scratch("pipeline");
  const auto ds = (dir / "lin.eqd").string(), model = (dir / "m.eqm").string();
  auto r = run({"simulate", "--fiber", "twc", "--gamma", "0", "--no-ase", "--train-syms", "8000", "--test-syms",
                "3000", "--seed", "3", "--out", ds});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(ds + ".manifest.json"));

  r = run({"train", "--dataset", ds, "--family", "mlp", "--hparams", "n1=16,n2=16,n3=16", "--memory", "3",
           "--epochs", "30", "--lr", "3e-3", "--out", model});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(last_json(r.out)["rmps"], 3 * 4 * 16 + 16 * 16 + 16 * 16 + 16 * 2);

  r = run({"evaluate", "--dataset", ds, "--model", model});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = last_json(r.out);
  EXPECT_EQ(j["equalized"]["bit_errors"], 0);
  EXPECT_EQ(j["unequalized"]["bit_errors"], 0);

  EXPECT_EQ(run({"train", "--dataset", ds, "--family", "mlp", "--out", model}).code, 2);
  EXPECT_EQ(run({"train", "--dataset", ds, "--family", "bilstm", "--budget", "1e2", "--out", model}).code, 4);
}

TEST(Cli, SweepIsByteIdenticalAcrossRuns) {
  const auto dir = scratch("sweep");
  const auto ds = (dir / "d.eqd").string();
  ASSERT_EQ(run({"simulate", "--fiber", "twc", "--train-syms", "2000", "--test-syms", "2000", "--out", ds}).code, 0);
  const std::vector<std::string> args{"sweep", "--dataset", ds, "--families", "mlp", "--budgets", "1e3",
                                      "--trials", "1", "--memory", "5", "--epochs", "2"};
  auto a = args, b = args;
  a.insert(a.end(), {"--out", (dir / "a.csv").string()});
  b.insert(b.end(), {"--out", (dir / "b.csv").string()});
  const auto ra = run(a), rb = run(b);
  ASSERT_EQ(ra.code, 0) << ra.err;
  ASSERT_EQ(rb.code, 0) << rb.err;
  const auto csv = slurp(dir / "a.csv");
  EXPECT_EQ(csv, slurp(dir / "b.csv"));
  EXPECT_EQ(slurp(dir / "a.csv.json"), slurp(dir / "b.csv.json"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2 + 3);
  const auto manifest = io::Json::parse(slurp(dir / "a.csv.manifest.json"));
  EXPECT_NE(csv.find(manifest["manifest_hash"].get<std::string>()), std::string::npos);
}

TEST(Cli, SimulateIsByteIdentical) {
  const auto dir = scratch("simdet");
  for (const char* name : {"a.eqd", "b.eqd"})
    ASSERT_EQ(run({"simulate", "--fiber", "ssmf", "--train-syms", "1024", "--test-syms", "1024", "--seed", "7",
                   "--out", (dir / name).string()})
                  .code,
              0);
  EXPECT_EQ(slurp(dir / "a.eqd"), slurp(dir / "b.eqd"));
}
