#include <gtest/gtest.h>

#include <stocon/cli/config.hpp>
#include <stocon/cli/experiment.hpp>
#include <stocon/cli/report.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using namespace stocon::cli;

namespace {

const fs::path kConfigs = STOCON_EXAMPLES_DIR;

std::string slurp(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const std::string& text) { return text.substr(0, text.find('\n')); }

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("stocon_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter_++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  static inline int counter_ = 0;
  fs::path path_;
};

int run_binary(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " '" + std::string(STOCON_BINARY) + "' " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

bool mentions(const ConfigError& e, const std::string& needle) {
  return std::any_of(e.errors().begin(), e.errors().end(),
                     [&](const std::string& s) { return s.find(needle) != std::string::npos; });
}

ConfigError parse_error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e;
  }
  ADD_FAILURE() << "config was accepted: " << text;
  return ConfigError({});
}

const char* kSmallSa = R"({
  "kind": "sa",
  "problem": {"family": "linear", "slope": 1.0},
  "schedule": {"family": "power", "c": 1.0, "gamma": 1.0},
  "noise": {"family": "gaussian", "sd": 0.1},
  "x0": 1.0,
  "ensemble": {"seeds": 3, "root_seed": 11, "horizon": 50}
})";

}  // namespace

TEST(Config, ShippedConfigsValidate) {
  std::size_t count = 0;
  for (const auto& entry : fs::directory_iterator(kConfigs)) {
    if (entry.path().extension() != ".json") continue;
    ++count;
    EXPECT_NO_THROW(load_config(entry.path())) << entry.path();
  }
  EXPECT_GE(count, 10u);
}

TEST(Config, MinimalScalarConfig) {
  const auto c = parse_config(kSmallSa);
  EXPECT_EQ(c.kind, ExperimentKind::sa);
  EXPECT_EQ(c.ensemble.seeds, 3u);
  EXPECT_EQ(c.ensemble.horizon, 50u);
  EXPECT_EQ(c.problem.family, "linear");
  EXPECT_EQ(c.output.dir, "out");
  EXPECT_FALSE(c.output.traces);
}

TEST(Config, SummableStepsAreValidButWarned) {
  std::string text = kSmallSa;
  text.replace(text.find("\"gamma\": 1.0"), 12, "\"gamma\": 1.5");
  const auto c = parse_config(text);
  EXPECT_DOUBLE_EQ(c.schedule.gamma, 1.5);
  const auto r = run_experiment(c);
  ASSERT_FALSE(r.warnings.empty());
  EXPECT_NE(r.warnings.front().find("B6"), std::string::npos);
  EXPECT_EQ(r.summary["warnings"].size(), r.warnings.size());
}

TEST(Config, NegativeHorizonNamesTheField) {
  std::string text = kSmallSa;
  text.replace(text.find("\"horizon\": 50"), 13, "\"horizon\": -5");
  const auto e = parse_error_of(text);
  EXPECT_TRUE(mentions(e, "ensemble.horizon")) << e.what();
}

TEST(Config, UnknownKeyRejected) {
  std::string text = kSmallSa;
  text.replace(text.find("\"x0\""), 4, "\"x_0\": 2, \"x0\"");
  const auto e = parse_error_of(text);
  EXPECT_TRUE(mentions(e, "x_0")) << e.what();
}

TEST(Config, UnknownKindRejected) {
  const auto e = parse_error_of(R"({"kind": "annealing"})");
  EXPECT_TRUE(mentions(e, "kind")) << e.what();
}

TEST(Config, ErrorsAreAggregated) {
  const auto e = parse_error_of(R"({
    "kind": "sa",
    "problem": {"family": "quartic"},
    "schedule": {"family": "power", "c": -1},
    "noise": {"family": "gaussian"},
    "x0": 1.0,
    "ensemble": {"seeds": 0, "horizon": 10}
  })");
  EXPECT_GE(e.errors().size(), 3u);
  EXPECT_TRUE(mentions(e, "problem.family"));
  EXPECT_TRUE(mentions(e, "schedule.c"));
  EXPECT_TRUE(mentions(e, "ensemble.seeds"));
}

TEST(Config, MissingRequiredGroup) {
  const auto e = parse_error_of(R"({"kind": "ls", "ensemble": {"seeds": 2, "horizon": 10}})");
  EXPECT_TRUE(mentions(e, "model")) << e.what();
}

TEST(Config, MalformedJson) {
  const auto e = parse_error_of("{\"kind\": \"sa\",");
  EXPECT_TRUE(mentions(e, "malformed JSON"));
}

TEST(Config, OverridesRevalidate) {
  auto c = parse_config(kSmallSa);
  apply_overrides(c, Overrides{7, 20, std::string("elsewhere"), true});
  EXPECT_EQ(c.ensemble.seeds, 7u);
  EXPECT_EQ(c.ensemble.horizon, 20u);
  EXPECT_EQ(c.output.dir, "elsewhere");
  EXPECT_TRUE(c.output.traces);
  EXPECT_THROW(apply_overrides(c, Overrides{0, {}, {}, false}), ConfigError);
}

TEST(Schemas, ScalarTraceAndCurveHeaders) {
  auto c = parse_config(kSmallSa);
  c.output.traces = true;
  const auto r = run_experiment(c);
  EXPECT_EQ(r.trace_header, "seed,n,x,m,eps,u_flag");
  ASSERT_EQ(r.traces.size(), 3u);
  // One row per step n = 1..horizon.
  EXPECT_EQ(std::count(r.traces[0].begin(), r.traces[0].end(), '\n'), 50);
  EXPECT_EQ(first_line(curve_csv(r.stats)), "n,q05,q50,q95");
}

TEST(Schemas, VectorTraceHeader) {
  auto c = load_config(kConfigs / "sa_nd_rotation.json");
  apply_overrides(c, Overrides{2, 20, {}, true});
  const auto r = run_experiment(c);
  EXPECT_EQ(r.trace_header, "seed,n,x_1,x_2,x_3,m_1,m_2,m_3,eps_1,eps_2,eps_3,u_flag");
}

TEST(Schemas, RegressionTraceHeader) {
  auto c = load_config(kConfigs / "ls_persistent.json");
  apply_overrides(c, Overrides{2, 20, {}, true});
  const auto r = run_experiment(c);
  EXPECT_EQ(r.trace_header, "seed,n,x_1,x_2,y,u,b_1,b_2");
}

TEST(Schemas, SummaryTopLevelKeys) {
  const auto r = run_experiment(parse_config(kSmallSa));
  std::vector<std::string> keys;
  for (const auto& [k, v] : r.summary.items()) keys.push_back(k);
  ASSERT_GE(keys.size(), 4u);
  EXPECT_EQ(keys.front(), "ExperimentConfig");
  EXPECT_EQ(keys.back(), "passed");
  EXPECT_NE(std::find(keys.begin(), keys.end(), "EnsembleStats"), keys.end());
  EXPECT_NE(std::find(keys.begin(), keys.end(), "assertions"), keys.end());
}

TEST(Schemas, WrittenFiles) {
  TempDir dir;
  auto c = parse_config(kSmallSa);
  c.output.traces = true;
  write_outputs(run_experiment(c), dir.path());
  for (const char* name : {"summary.json", "summary.txt", "curve.csv", "traces.csv"})
    EXPECT_TRUE(fs::exists(dir.path() / name)) << name;
  EXPECT_EQ(first_line(slurp(dir.path() / "traces.csv")), "seed,n,x,m,eps,u_flag");
}

TEST(Formatting, DoublesRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(1e300), "1e+300");
  EXPECT_EQ(format_double(std::numeric_limits<double>::quiet_NaN()), "nan");
  EXPECT_EQ(format_double(-std::numeric_limits<double>::infinity()), "-inf");
  const double v = 0.1 + 0.2;
  EXPECT_EQ(std::stod(format_double(v)), v);
}

TEST(Determinism, SummaryIndependentOfParallelism) {
  auto c = load_config(kConfigs / "sa_linear_sin.json");
  apply_overrides(c, Overrides{16, 2000, {}, false});
  c.ensemble.parallelism = 1;
  const auto serial = summary_json(run_experiment(c));
  c.ensemble.parallelism = 4;
  const auto parallel = summary_json(run_experiment(c));
  EXPECT_EQ(serial, parallel);
}

TEST(ExitCodes, PassingRun) {
  TempDir dir;
  EXPECT_EQ(run_binary("run '" + (kConfigs / "sa_minimal.json").string() +
                       "' --seeds 20 --horizon 2000 --out '" + dir.path().string() + "'"),
            kExitPass);
  EXPECT_TRUE(fs::exists(dir.path() / "summary.json"));
}

TEST(ExitCodes, FailedAssertion) {
  TempDir dir;
  EXPECT_EQ(run_binary("run '" + (kConfigs / "sa_misdeclared_envelope.json").string() +
                       "' --out '" + dir.path().string() + "'"),
            kExitAssertion);
  // Reports are still written when an assertion fails.
  EXPECT_TRUE(fs::exists(dir.path() / "summary.json"));
}

TEST(ExitCodes, InvalidConfig) {
  TempDir dir;
  const auto bad = dir.path() / "bad.json";
  std::ofstream(bad) << R"({"kind": "sa", "ensemble": {"horizon": -1}})";
  EXPECT_EQ(run_binary("run '" + bad.string() + "'"), kExitEnvironment);
  EXPECT_EQ(run_binary("check '" + bad.string() + "'"), kExitEnvironment);
  EXPECT_EQ(run_binary("run '" + (dir.path() / "missing.json").string() + "'"), kExitEnvironment);
}

TEST(ExitCodes, CheckAcceptsValidConfig) {
  EXPECT_EQ(run_binary("check '" + (kConfigs / "ls_persistent.json").string() + "'"), kExitPass);
}

TEST(ExitCodes, UnwritableOutputDirectory) {
  TempDir dir;
  const auto file = dir.path() / "plain_file";
  std::ofstream(file) << "x";
  const std::string cfg = (kConfigs / "sa_minimal.json").string();
  EXPECT_EQ(run_binary("run '" + cfg + "' --horizon 10 --out '" + file.string() + "'"),
            kExitEnvironment);
  EXPECT_EQ(run_binary("run '" + cfg + "' --horizon 10 --out /proc/stocon_cannot_exist"),
            kExitEnvironment);
}

TEST(ExitCodes, UnknownSubcommand) { EXPECT_EQ(run_binary("frobnicate"), kExitEnvironment); }

TEST(Determinism, RerunsAreByteIdentical) {
  TempDir a, b;
  const std::string args = "run '" + (kConfigs / "sa_blum.json").string() +
                           "' --seeds 10 --horizon 5000 --out ";
  const int first = run_binary(args + "'" + a.path().string() + "'");
  const int second = run_binary(args + "'" + b.path().string() + "'", "STOCON_MAX_THREADS=1");
  ASSERT_NE(first, kExitEnvironment);
  EXPECT_EQ(first, second);
  EXPECT_EQ(slurp(a.path() / "summary.json"), slurp(b.path() / "summary.json"));
  EXPECT_EQ(slurp(a.path() / "curve.csv"), slurp(b.path() / "curve.csv"));
}
