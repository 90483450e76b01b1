#pragma once

// Experiment configuration: a JSON document validated into ExperimentConfig.
// Validation collects every error before failing.

#include <stocon/harness.hpp>
#include <stocon/least_squares.hpp>
#include <stocon/sa.hpp>

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace stocon::cli {

enum class ExperimentKind { sa, sa_nd, sa_nonuniform, ls, kronecker, custom_path_check };

const char* to_string(ExperimentKind kind);
std::optional<ExperimentKind> parse_kind(std::string_view text);

/// Scalar root-finding problem g with root x*:
///   linear       g = slope (x - x*)
///   linear_sin   g = slope (x - x*) + amplitude sin(x - x*)
///   signed_sqrt  g = scale sign(x - x*) |x - x*|^(1/2)
///   cubic        g = scale (x - x*)^3
struct ScalarProblemSpec {
  std::string family = "linear";
  double slope = 1.0;
  double amplitude = 0.0;
  double scale = 1.0;
  double root = 0.0;
};

/// g(x) = A (x - x*).
struct MatrixProblemSpec {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd root;
};

struct ScheduleSpec {
  std::string family = "power";  // power: c / (n + offset)^gamma; explicit: values
  double c = 1.0;
  double gamma = 1.0;
  double offset = 0.0;
  std::vector<double> values;
};

struct NoiseSpec {
  std::string family = "gaussian";  // gaussian, uniform, rademacher, none
  double sd = 0.1;
};

struct DomainSpec {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  DomainPolicy policy = DomainPolicy::unbounded;
};

/// Scalar envelope grid (symmetric log grid around the root) and the
/// multivariate sphere grid.
struct GridSpec {
  double min_magnitude = 1e-3;
  double max_magnitude = 1e3;
  std::size_t per_decade = 50;
  std::size_t directions = 200;
  std::vector<double> radii = {1e-3, 1.0, 1e3};
  std::uint64_t seed = 0;
};

struct TruncationSpec {
  double delta = 0.05;
  double tau = 0.01;
  std::optional<double> kappa;  // defaults to delta
};

struct BlumSpec {
  double c = 1.0;
  double d = 1.0;
  std::vector<std::pair<double, double>> delta_pairs = {{0.1, 1.0}, {1.0, 10.0}};
};

struct IncrementSpec {
  std::string family = "rademacher";  // rademacher, gaussian, alternating
  double scale = 1.0;
};

struct WeightSpec {
  double exponent = 1.0;  // a_n = n^exponent
};

/// Generated or loaded single paths for the custom path check:
///   halving  m_n = X_{n-1} / 2, eps_n = residual_sd xi_n / n^residual_decay
///   file     CSV with header n,x,m and rows n = 0..N (m ignored on row 0)
struct PathSpec {
  std::string family = "halving";
  double x0 = 1.0;
  double residual_sd = 1.0;
  double residual_decay = 1.0;
  std::string file;
};

struct Envelope {
  double m = 0.0;
  double M = 0.0;
};

struct Threshold {
  double tol = 0.0;
  double fraction = 0.95;
};

/// Configured assertions; absent entries are not checked.
struct AssertionSpec {
  std::optional<double> min_converged_fraction;
  std::optional<double> max_median_abs_final;
  std::optional<double> max_converged_fraction;  // for control runs
  std::optional<Envelope> envelope;
  bool sandwich = false;
  bool contraction = false;
  std::optional<Threshold> norm_below;
  bool blum = false;
  bool truncated_A1 = false;
  bool derived_u_bound = false;
  std::optional<Threshold> consistent;
  std::optional<std::size_t> partition_q;
  bool finite_random_limit = false;
  std::optional<double> oracle_tol;
  std::optional<double> e_conditions_fraction;
  bool A1 = false;
  bool wj_bound = false;
};

struct OutputSpec {
  std::string dir = "out";
  bool traces = false;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::sa;
  std::string name;
  ScalarProblemSpec problem;
  MatrixProblemSpec matrix_problem;
  ScheduleSpec schedule;
  NoiseSpec noise;
  double x0 = 1.0;
  Eigen::VectorXd x0_vector;
  DomainSpec domain;
  GridSpec grid;
  TruncationSpec truncation;
  BlumSpec blum;
  RegressionModel model;
  std::string gweight = "identity";
  PartitionOptions partition;
  IncrementSpec increments;
  WeightSpec weights;
  PathSpec path;
  EnsembleConfig ensemble;
  AssertionSpec assertions;
  OutputSpec output;
};

/// All validation errors of one document, each prefixed with its key path.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  std::vector<std::string> errors_;
};

ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& file);

/// Command-line overrides applied after parsing. Re-validates the result.
struct Overrides {
  std::optional<std::size_t> seeds;
  std::optional<std::size_t> horizon;
  std::optional<std::string> out;
  bool traces = false;
};

void apply_overrides(ExperimentConfig& config, const Overrides& overrides);

// Model builders shared by the experiments and the acceptance suite.
RootProblem<double> make_problem(const ScalarProblemSpec& spec, const DomainSpec& domain = {});
VectorRootProblem<double> make_problem(const MatrixProblemSpec& spec);
Schedule<double> make_schedule(const ScheduleSpec& spec, std::size_t horizon);
NoiseModel make_noise(const NoiseSpec& spec);
GWeight<double> make_gweight(const std::string& name);

}  // namespace stocon::cli
