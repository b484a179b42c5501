#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "bacon/analysis.hpp"
#include "bacon/bench.hpp"
#include "bacon/cli.hpp"
#include "bacon/config.hpp"

using namespace bacon;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "bacon");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  set_thread_limit(1);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("bacon_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string l; std::getline(ss, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST(Config, IniSectionsAndTypes) {
  const auto dir = scratch("ini");
  std::ofstream(dir / "a.ini") << "[sdf]\nsteps = 12\nlambda = 0.5\nnormalize = off\n[bench]\nsizes = 512, 1024\n";
  const auto c = Config::load((dir / "a.ini").string(), {"sdf.steps", "sdf.lambda", "sdf.normalize", "bench.sizes"});
  EXPECT_EQ(c.get("sdf.steps", 0), 12);
  EXPECT_DOUBLE_EQ(c.get("sdf.lambda", 0.0), 0.5);
  EXPECT_FALSE(c.get("sdf.normalize", true));
  EXPECT_EQ(c.get_list<std::size_t>("bench.sizes", {}), (std::vector<std::size_t>{512, 1024}));
  EXPECT_EQ(c.get("sdf.missing", 3), 3);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  Config c({"a.b"});
  EXPECT_THROW(c.set("a.c", "1"), ConfigError);
  c.set("a.b", "x1");
  EXPECT_THROW(c.get("a.b", 0), ConfigError);
  c.set("a.b", "maybe");
  EXPECT_THROW(c.get("a.b", false), ConfigError);
  EXPECT_EQ(c.text("a.b", ""), "maybe");
  EXPECT_THROW(Config::load("/nonexistent/x.ini", {}), ConfigError);
}

TEST(Config, HashFollowsContent) {
  Config a({"x.y", "x.z"}), b({"x.y", "x.z"});
  a.set("x.y", "1");
  a.set("x.z", "2");
  b.set("x.z", "2");
  b.set("x.y", "1");
  EXPECT_EQ(a.hash(), b.hash());
  b.set("x.y", "3");
  EXPECT_NE(a.hash(), b.hash());
}

TEST(Bench, NaiveIdftMatchesDirectSum) {
  std::vector<std::complex<double>> c = {{1, 0.5}, {-0.2, 0.1}, {0.3, -0.7}, {0.4, 0.2}};
  std::vector<double> x = {-0.31, 0.0, 0.12, 0.49};
  const auto y = bench::naive_idft(c, x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::complex<double> s = 0.0;
    for (long k = -2; k < 2; ++k) s += c[static_cast<std::size_t>(k + 2)] * std::polar(1.0, 2 * std::numbers::pi * k * x[i]);
    EXPECT_NEAR(y[i], s.real(), 1e-12);
  }
}

TEST(Bench, RowsAndGuards) {
  bench::BenchConfig c;
  c.spectrum_sizes = {64, 128};
  c.sample_counts = {0, 16};
  c.repeats = 1;
  const auto rows = bench::run(c);
  ASSERT_EQ(rows.size(), 6u);  // n = 0 is skipped
  EXPECT_EQ(rows[0].method, "bacon");
  EXPECT_EQ(rows[2].method, "fft");
  EXPECT_EQ(rows[5].spectrum_size, 128u);
  c.spectrum_sizes = {96};
  EXPECT_THROW(bench::run(c), InvalidInput);
  c.spectrum_sizes = {64};
  c.sample_counts = {0};
  EXPECT_TRUE(bench::run(c).empty());
  EXPECT_EQ(lines(bench::table({}).str()).size(), 1u);
}

TEST(Bench, SlopeOfSyntheticRows) {
  std::vector<bench::Timing> rows;
  for (std::size_t n : {512, 1024, 2048, 4096}) rows.push_back({"naive_idft", n, 10, 1e-6 * static_cast<double>(n)});
  EXPECT_NEAR(bench::log_log_slope(rows, "naive_idft"), 1.0, 1e-12);
  EXPECT_NEAR(bench::spread_about_median(rows, "naive_idft"), 4096.0 / 1536.0 - 1.0, 1e-12);
  EXPECT_THROW(bench::log_log_slope(rows, "fft"), InvalidInput);
}

TEST(Analysis, PeriodicGridOrder) {
  const auto x = analysis::periodic_grid(2, 4);
  ASSERT_EQ(x.cols(), 16);
  EXPECT_DOUBLE_EQ(x(0, 0), -0.5);
  EXPECT_DOUBLE_EQ(x(1, 1), -0.25);  // last axis fastest
  EXPECT_DOUBLE_EQ(x(0, 4), -0.25);
  EXPECT_THROW(analysis::periodic_grid(4, 4), InvalidInput);
}

TEST(Analysis, InitTableShape) {
  analysis::InitConfig c;
  c.hidden_dim = 16;
  c.layers = 3;
  c.samples = 512;
  const auto t = analysis::init_table(analysis::init_report(c));
  // per init: 3 sine + 2 post_linear + 3 hidden rows
  EXPECT_EQ(lines(t.str()).size(), 1u + 2 * 8);
}

TEST(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_EQ(run({}).code, 2);
  auto r = run({"fit-sdf", "--bogus"});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(nlohmann::json::parse(r.err)["error"], "usage");
  // Flag values are typed when read, so a bad number is a config error.
  r = run({"fit-sdf", "--steps", "abc", "--out", scratch("badsteps").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(nlohmann::json::parse(r.err)["error"], "config");
}

TEST(Cli, ConfigErrorsExitTwoWithJson) {
  auto r = run({"verify-init", "--set", "init.nonsense=1"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(nlohmann::json::parse(r.err)["message"].get<std::string>().find("init.nonsense"), std::string::npos);
  r = run({"verify-init", "--config", "/nonexistent/cfg.ini"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("/nonexistent/cfg.ini"), std::string::npos);
  r = run({"extract-mesh", "--out", scratch("nockpt").string()});
  EXPECT_EQ(r.code, 2);
  r = run({"extract-mesh", "--checkpoint", "/nonexistent.ckpt", "--out", scratch("badckpt").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(nlohmann::json::parse(r.err)["error"], "runtime");
}

TEST(Cli, FlagsOverrideConfigFile) {
  const auto dir = scratch("precedence");
  std::ofstream(dir / "c.ini") << "[init]\nhidden_dim = 8\nlayers = 3\nsamples = 64\n[run]\nseed = 4\n";
  auto r = run({"verify-init", "--config", (dir / "c.ini").string(), "--layers", "2", "--out", (dir / "a").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = slurp(dir / "a" / "init_statistics.csv");
  EXPECT_NE(csv.find("seed=4 "), std::string::npos);
  EXPECT_EQ(csv.find("bacon,2,"), std::string::npos);  // only layers 0 and 1
  EXPECT_NE(csv.find("bacon,1,"), std::string::npos);
  r = run({"verify-init", "--config", (dir / "c.ini").string(), "--seed", "9", "--out", (dir / "b").string()});
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(slurp(dir / "b" / "init_statistics.csv").find("seed=9 "), std::string::npos);
}

TEST(Cli, SdfPipelineIsDeterministic) {
  const auto dir = scratch("sdf");
  for (const char* sub : {"a", "b"}) {
    const auto r = run({"fit-sdf", "--steps", "3", "--resolution", "16", "--set", "sdf.chamfer_points=500", "--set", "sdf.hidden_dim=8", "--out",
                        (dir / sub).string()});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  for (const char* f : {"sdf_metrics.csv", "loss_curve.csv"}) EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  const auto metrics = lines(slurp(dir / "a" / "sdf_metrics.csv"));
  ASSERT_EQ(metrics.size(), 2u + 4u);
  EXPECT_EQ(metrics[0].rfind("# bacon ", 0), 0u);
  EXPECT_EQ(metrics[1], "layer,bandwidth,resolution,iou,chamfer,vertices,faces");

  const auto e = run({"extract-mesh", "--checkpoint", (dir / "a" / "model.ckpt").string(), "--strategy", "all", "--resolution", "16",
                      "--levels", "2", "--out", (dir / "x").string()});
  ASSERT_EQ(e.code, 0) << e.err;
  for (const char* s : {"dense", "adaptive", "multiscale", "combined"}) EXPECT_TRUE(fs::exists(dir / "x" / (std::string("mesh_") + s + ".obj")));
  EXPECT_EQ(run({"extract-mesh", "--checkpoint", (dir / "a" / "model.ckpt").string(), "--strategy", "fastest", "--out", (dir / "y").string()}).code, 2);
}

TEST(Cli, SpectrumOfFreshNetworkIsBandLimited) {
  const auto dir = scratch("spectrum");
  const auto r = run({"analyze-spectrum", "--bandwidth", "8", "--set", "spectrum.hidden_dim=8", "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(slurp(dir / "spectrum_summary.csv"));
  ASSERT_EQ(rows.size(), 2u + 4u);
  for (std::size_t i = 2; i < rows.size(); ++i) EXPECT_LT(std::stod(rows[i].substr(rows[i].rfind(',') + 1)), 1e-9) << rows[i];
  EXPECT_TRUE(fs::exists(dir / "spectrum_head3_out0.csv"));
}

TEST(Cli, BenchWithNoSamplesWritesHeaderOnly) {
  const auto dir = scratch("bench");
  const auto r = run({"bench-idft", "--sizes", "512", "--samples", "0", "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines(slurp(dir / "bench_idft.csv")).size(), 2u);
  EXPECT_EQ(run({"bench-idft", "--sizes", "500", "--out", dir.string()}).code, 2);
}
