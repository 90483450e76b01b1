#pragma once

#include <stocon/cli/config.hpp>
#include <stocon/cli/experiment.hpp>

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

namespace stocon::cli {

enum ExitCode : int { kExitPass = 0, kExitAssertion = 1, kExitEnvironment = 2 };

class OutputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Machine-readable summary (pretty-printed JSON, trailing newline).
std::string summary_json(const ExperimentResult& result);

/// Human-readable summary.
std::string summary_text(const ExperimentResult& result);

/// Quantile curve of |error| at log-spaced steps: n,q05,q50,q95.
std::string curve_csv(const EnsembleStats& stats);

/// Creates `dir` if needed and checks that a file can be written there.
void ensure_writable(const std::filesystem::path& dir);

/// Writes summary.json, summary.txt, curve.csv and, when the result carries
/// traces, traces.csv.
void write_outputs(const ExperimentResult& result, const std::filesystem::path& dir);

/// Runs a validated config end to end. Returns the exit code; progress and
/// failures go to `out` and `err`.
int execute(const ExperimentConfig& config, std::ostream& out, std::ostream& err);

}  // namespace stocon::cli
