#pragma once

#include <stocon/cli/config.hpp>
#include <stocon/harness.hpp>
#include <stocon/verdict.hpp>

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace stocon::cli {

struct AssertionResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// A per-seed check folded over the ensemble.
struct PathCheckSummary {
  std::string name;
  std::size_t holding = 0;
  std::size_t total = 0;
  std::optional<std::size_t> first_failing_seed;
  double worst_margin = std::numeric_limits<double>::infinity();
  std::string first_detail;

  void add(std::size_t seed_index, const ConditionVerdict& v);
  bool all_hold() const { return total > 0 && holding == total; }
};

/// Everything an experiment produced. `summary` is the machine-readable
/// report; `trace_header` and `traces` (one block of rows per seed, in seed
/// order) are filled only when traces are enabled.
struct ExperimentResult {
  nlohmann::ordered_json summary;
  EnsembleStats stats;
  std::vector<AssertionResult> assertions;
  std::vector<std::string> warnings;
  std::string trace_header;
  std::vector<std::string> traces;

  bool passed() const;
  std::vector<std::string> failing_assertions() const;
};

ExperimentResult run_experiment(const ExperimentConfig& config);

nlohmann::ordered_json to_json(const ConditionVerdict& v);
nlohmann::ordered_json to_json(const ConvergenceVerdict& v);
nlohmann::ordered_json to_json(const EnsembleStats& s);
nlohmann::ordered_json to_json(const PathCheckSummary& s);
nlohmann::ordered_json to_json(const ExperimentConfig& c);

/// Shortest round-trip decimal form; "nan", "inf" and "-inf" for
/// non-finite values.
std::string format_double(double v);

}  // namespace stocon::cli
