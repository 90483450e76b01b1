#include <stocon/cli/experiment.hpp>

#include <stocon/conditions.hpp>
#include <stocon/crossing.hpp>
#include <stocon/kronecker.hpp>
#include <stocon/least_squares.hpp>
#include <stocon/nonuniform.hpp>
#include <stocon/sa.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace stocon::cli {

using nlohmann::ordered_json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

/// Finite values stay numbers; non-finite ones become "inf", "-inf", "nan".
ordered_json num(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

ordered_json index_or_null(const std::optional<std::size_t>& i) {
  return i ? ordered_json(*i) : ordered_json(nullptr);
}

ordered_json vec_json(const Eigen::VectorXd& v) {
  auto out = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(num(v(i)));
  return out;
}

ordered_json vec_json(const std::vector<double>& v) {
  auto out = ordered_json::array();
  for (double x : v) out.push_back(num(x));
  return out;
}

ConditionVerdict failed_verdict(const std::string& name, const std::string& why) {
  VerdictBuilder vb(name);
  vb.violate(0, why);
  return vb.finish();
}

ConditionVerdict envelope_verdict(const char* name, const EnvelopeReport<double>& env) {
  VerdictBuilder vb(name);
  std::ostringstream os;
  os << "grid m_hat " << format_double(env.m_hat) << ", M_hat " << format_double(env.M_hat);
  vb.note(os.str());
  for (const auto& v : env.violations) vb.violate(0, v);
  return vb.finish();
}

struct SeedOutput {
  std::vector<double> trajectory;
  std::vector<ConditionVerdict> checks;  // in the order of the experiment's check names
  std::string trace;
};

void append_row(std::string& out, std::initializer_list<std::string> cells) {
  bool first = true;
  for (const auto& c : cells) {
    if (!first) out += ',';
    out += c;
    first = false;
  }
  out += '\n';
}

std::string scalar_trace(std::size_t seed_index, const ProcessPath<double>& path) {
  std::string out;
  const auto s = std::to_string(seed_index);
  for (std::size_t n = 1; n <= path.horizon(); ++n) {
    const auto& st = path.step(n);
    append_row(out, {s, std::to_string(n), format_double(st.x), format_double(st.m),
                     format_double(st.eps), path.is_zero(n - 1) ? "1" : "0"});
  }
  return out;
}

constexpr const char* kScalarTraceHeader = "seed,n,x,m,eps,u_flag";

std::string component_header(const char* prefix, Eigen::Index p) {
  std::string out;
  for (Eigen::Index t = 1; t <= p; ++t) {
    if (!out.empty()) out += ',';
    out += prefix + std::to_string(t);
  }
  return out;
}

void append_vector(std::string& out, const Eigen::VectorXd& v) {
  for (Eigen::Index t = 0; t < v.size(); ++t) {
    out += ',';
    out += format_double(v(t));
  }
}

/// Schedule diagnostics. Divergence of sum alpha and summability of
/// sum alpha^2 are decided analytically for the power family only.
ordered_json schedule_report(const ScheduleSpec& spec, const Schedule<double>& s,
                             std::vector<std::string>& warnings) {
  ordered_json j;
  j["family"] = spec.family;
  j["sum_alpha"] = num(s.sum());
  j["sum_alpha_sq"] = num(s.sum_sq());
  if (spec.family == "power") {
    const bool b6 = spec.gamma <= 1.0;
    const bool sq = spec.gamma > 0.5;
    j["B6"] = b6;
    j["sum_alpha_sq_finite"] = sq;
    if (!b6)
      warnings.push_back("B6 unmet: sum of alpha_n converges for gamma = " +
                         format_double(spec.gamma) + " > 1");
    if (!sq)
      warnings.push_back("B5 not guaranteed: sum of alpha_n^2 diverges for gamma = " +
                         format_double(spec.gamma) + " <= 1/2");
  } else {
    j["B6"] = nullptr;
    j["sum_alpha_sq_finite"] = nullptr;
  }
  return j;
}

/// Collects per-seed outputs in seed order into path-check summaries,
/// traces and ensemble statistics.
void fold(std::vector<SeedResult<SeedOutput>>& seeds, const std::vector<std::string>& names,
          const EnsembleConfig& ensemble, ExperimentResult& res,
          std::vector<PathCheckSummary>& checks) {
  checks.clear();
  for (const auto& n : names) {
    PathCheckSummary c;
    c.name = n;
    checks.push_back(std::move(c));
  }
  std::vector<SeedResult<std::vector<double>>> trajectories(seeds.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    auto& s = seeds[i];
    auto& t = trajectories[i];
    t.index = s.index;
    t.seed = s.seed;
    t.error = s.error;
    if (s.value) {
      for (std::size_t k = 0; k < names.size(); ++k) checks[k].add(i, s.value->checks.at(k));
      t.value = std::move(s.value->trajectory);
      res.traces.push_back(std::move(s.value->trace));
    } else {
      for (auto& c : checks) c.add(i, failed_verdict(c.name, "seed failed: " + s.error));
    }
  }
  res.stats = summarize(trajectories, ensemble);
}

void assert_path_check(ExperimentResult& res, const PathCheckSummary& c) {
  std::ostringstream os;
  os << c.holding << "/" << c.total << " seeds hold";
  if (c.first_failing_seed) os << "; first failing seed " << *c.first_failing_seed;
  if (!c.first_detail.empty()) os << " (" << c.first_detail << ")";
  res.assertions.push_back({c.name, c.all_hold(), os.str()});
}

void assert_fraction_bounds(ExperimentResult& res, const AssertionSpec& a) {
  const double f = res.stats.fraction(ConvergenceClass::converged_to_zero);
  if (a.min_converged_fraction)
    res.assertions.push_back({"min_converged_fraction", f >= *a.min_converged_fraction,
                              "converged_to_zero fraction " + format_double(f) + " (need >= " +
                                  format_double(*a.min_converged_fraction) + ")"});
  if (a.max_converged_fraction)
    res.assertions.push_back({"max_converged_fraction", f <= *a.max_converged_fraction,
                              "converged_to_zero fraction " + format_double(f) + " (need <= " +
                                  format_double(*a.max_converged_fraction) + ")"});
  if (a.max_median_abs_final) {
    const double med = res.stats.final_abs_quantiles[2];
    res.assertions.push_back({"max_median_abs_final", med <= *a.max_median_abs_final,
                              "median final |error| " + format_double(med) + " (need <= " +
                                  format_double(*a.max_median_abs_final) + ")"});
  }
}

void assert_envelope(ExperimentResult& res, const EnvelopeReport<double>& env,
                     const Envelope& declared) {
  const double slack_m = rounding_slack(declared.m);
  const double slack_M = rounding_slack(declared.M);
  const bool ok = env.holds() && env.m_hat >= declared.m - slack_m &&
                  env.M_hat <= declared.M + slack_M;
  res.assertions.push_back({"envelope", ok,
                            "declared [" + format_double(declared.m) + ", " +
                                format_double(declared.M) + "], grid [" +
                                format_double(env.m_hat) + ", " + format_double(env.M_hat) +
                                "]"});
}

struct Collected {
  ordered_json conditions = ordered_json::array();
  std::vector<PathCheckSummary> checks;
  ordered_json extra = ordered_json::object();
};

std::size_t horizon_of(const ExperimentConfig& c) { return c.ensemble.horizon; }

void run_sa(const ExperimentConfig& c, ExperimentResult& res, Collected& col) {
  const auto problem = make_problem(c.problem, c.domain);
  const std::size_t horizon = horizon_of(c);
  const auto schedule = make_schedule(c.schedule, horizon);
  const auto noise = make_noise(c.noise);
  const double root = c.problem.root;
  col.extra["schedule"] = schedule_report(c.schedule, schedule, res.warnings);

  const auto grid =
      symmetric_log_grid(root, c.grid.min_magnitude, c.grid.max_magnitude, c.grid.per_decade);
  const auto env = check_envelope_B3(problem, grid);
  col.conditions.push_back(to_json(envelope_verdict("B3", env)));
  col.extra["EnvelopeReport"] = {{"m_hat", num(env.m_hat)}, {"M_hat", num(env.M_hat)}};
  const double m_use = c.assertions.envelope ? c.assertions.envelope->m : env.m_hat;
  const double M_use = c.assertions.envelope ? c.assertions.envelope->M : env.M_hat;

  std::vector<std::string> names;
  if (c.assertions.sandwich) names.push_back("ratio_sandwich");
  const bool traces = c.output.traces;
  auto seeds = map_seeds(c.ensemble.seeds, c.ensemble.root_seed, c.ensemble.parallelism,
                         [&](std::uint64_t seed, std::size_t idx) {
                           SeedOutput out;
                           const auto path = rm_solve(problem, noise, schedule, c.x0, horizon,
                                                      seed, c.domain.policy);
                           out.trajectory = path.values();
                           for (auto& v : out.trajectory) v -= root;
                           if (c.assertions.sandwich)
                             out.checks.push_back(
                                 check_sandwich(path, root, schedule, m_use, M_use));
                           if (traces) out.trace = scalar_trace(idx, path);
                           return out;
                         });
  res.trace_header = kScalarTraceHeader;
  fold(seeds, names, c.ensemble, res, col.checks);

  assert_fraction_bounds(res, c.assertions);
  if (c.assertions.envelope) assert_envelope(res, env, *c.assertions.envelope);
  for (const auto& chk : col.checks) assert_path_check(res, chk);
}

void run_sa_nd(const ExperimentConfig& c, ExperimentResult& res, Collected& col) {
  const auto problem = make_problem(c.matrix_problem);
  const std::size_t horizon = horizon_of(c);
  const auto schedule = make_schedule(c.schedule, horizon);
  const auto noise = make_noise(c.noise);
  const Eigen::VectorXd root = c.matrix_problem.root;
  const Eigen::Index p = root.size();
  col.extra["schedule"] = schedule_report(c.schedule, schedule, res.warnings);

  auto grid = sphere_grid<double>(p, c.grid.directions, c.grid.radii, c.grid.seed);
  for (auto& g : grid) g += root;
  const auto env = check_envelope_B3a(problem, grid);
  col.conditions.push_back(to_json(envelope_verdict("B3a", env)));
  col.extra["EnvelopeReport"] = {{"m_hat", num(env.m_hat)}, {"M_hat", num(env.M_hat)}};
  const double m_use = c.assertions.envelope ? c.assertions.envelope->m : env.m_hat;
  const double M_use = c.assertions.envelope ? c.assertions.envelope->M : env.M_hat;

  std::vector<std::string> names;
  if (c.assertions.contraction) names.push_back("contraction_factor");
  const bool traces = c.output.traces;
  auto seeds = map_seeds(
      c.ensemble.seeds, c.ensemble.root_seed, c.ensemble.parallelism,
      [&](std::uint64_t seed, std::size_t idx) {
        SeedOutput out;
        const auto path = rm_solve_nd(problem, noise, schedule, c.x0_vector, horizon, seed);
        out.trajectory.reserve(horizon + 1);
        for (std::size_t n = 0; n <= horizon; ++n)
          out.trajectory.push_back((path.x(n) - root).norm());
        if (c.assertions.contraction)
          out.checks.push_back(check_contraction_nd(path, root, schedule, m_use, M_use));
        if (traces) {
          const auto s = std::to_string(idx);
          for (std::size_t n = 1; n <= horizon; ++n) {
            const auto& st = path.step(n);
            out.trace += s + ',' + std::to_string(n);
            append_vector(out.trace, st.x);
            append_vector(out.trace, st.m);
            append_vector(out.trace, st.eps);
            out.trace += path.x(n - 1).norm() == 0.0 ? ",1\n" : ",0\n";
          }
        }
        return out;
      });
  res.trace_header = "seed,n," + component_header("x_", p) + "," + component_header("m_", p) +
                     "," + component_header("eps_", p) + ",u_flag";
  fold(seeds, names, c.ensemble, res, col.checks);

  assert_fraction_bounds(res, c.assertions);
  if (c.assertions.envelope) assert_envelope(res, env, *c.assertions.envelope);
  if (c.assertions.norm_below) {
    const auto& t = *c.assertions.norm_below;
    std::size_t below = 0;
    for (const auto& v : res.stats.per_seed)
      if (v.final_value < t.tol) ++below;
    const double f = double(below) / double(res.stats.per_seed.size());
    res.assertions.push_back({"norm_below", f >= t.fraction,
                              "fraction with final norm below " + format_double(t.tol) +
                                  " is " + format_double(f) + " (need >= " +
                                  format_double(t.fraction) + ")"});
  }
  for (const auto& chk : col.checks) assert_path_check(res, chk);
}

void run_sa_nonuniform(const ExperimentConfig& c, ExperimentResult& res, Collected& col) {
  const auto problem = make_problem(c.problem, c.domain);
  const std::size_t horizon = horizon_of(c);
  const auto schedule = make_schedule(c.schedule, horizon);
  const auto noise = make_noise(c.noise);
  const double root = c.problem.root;
  const double delta = c.truncation.delta, tau = c.truncation.tau;
  const double kappa = c.truncation.kappa.value_or(delta);
  col.extra["schedule"] = schedule_report(c.schedule, schedule, res.warnings);
  if (!(tau < delta)) res.warnings.push_back("truncation: tau is not below delta");

  const auto grid =
      symmetric_log_grid(root, c.grid.min_magnitude, c.grid.max_magnitude, c.grid.per_decade);
  const auto env = check_envelope_B3(problem, grid);
  col.conditions.push_back(to_json(envelope_verdict("B3", env)));
  const auto blum = check_blum_C(problem, grid, c.blum.c, c.blum.d, c.blum.delta_pairs);
  col.conditions.push_back(to_json(blum.c1));
  col.conditions.push_back(to_json(blum.c2));
  col.conditions.push_back(to_json(blum.c3));
  auto ks = ordered_json::array();
  for (const auto& k : blum.k_values)
    ks.push_back({{"delta1", num(k.delta1)}, {"delta2", num(k.delta2)}, {"K", num(k.k)}});
  col.extra["BlumVerdict"] = {{"holds", blum.holds()}, {"k_values", ks}};
  col.extra["EnvelopeReport"] = {{"m_hat", num(env.m_hat)}, {"M_hat", num(env.M_hat)}};
  col.extra["truncation"] = {{"delta", num(delta)}, {"tau", num(tau)}, {"kappa", num(kappa)}};

  const std::vector<std::string> names = {"A1_truncated", "derived_u_bound"};
  const std::vector<double> zero_alphas(horizon, 0.0);
  const bool traces = c.output.traces;
  auto seeds = map_seeds(c.ensemble.seeds, c.ensemble.root_seed, c.ensemble.parallelism,
                         [&](std::uint64_t seed, std::size_t idx) {
                           SeedOutput out;
                           const auto path = rm_solve(problem, noise, schedule, c.x0, horizon,
                                                      seed, c.domain.policy);
                           out.trajectory = path.values();
                           for (auto& v : out.trajectory) v -= root;
                           try {
                             const auto d = derive_truncated(shifted(path, root), delta, tau);
                             auto a1 = check_truncated_A1(d, zero_alphas);
                             a1.name = "A1_truncated";
                             a1.detail += (a1.detail.empty() ? "" : "; ") +
                                          std::string("n0 = ") + std::to_string(d.n0);
                             out.checks.push_back(std::move(a1));
                             out.checks.push_back(check_derived_u_bound(d, kappa));
                           } catch (const Error& e) {
                             for (const auto& n : names) out.checks.push_back(failed_verdict(n, e.what()));
                           }
                           if (traces) out.trace = scalar_trace(idx, path);
                           return out;
                         });
  res.trace_header = kScalarTraceHeader;
  fold(seeds, names, c.ensemble, res, col.checks);

  assert_fraction_bounds(res, c.assertions);
  if (c.assertions.blum)
    res.assertions.push_back({"blum", blum.holds(),
                              std::string("C1 ") + (blum.c1.holds ? "holds" : "fails") +
                                  ", C2 " + (blum.c2.holds ? "holds" : "fails") + ", C3 " +
                                  (blum.c3.holds ? "holds" : "fails")});
  if (c.assertions.truncated_A1) assert_path_check(res, col.checks[0]);
  if (c.assertions.derived_u_bound) assert_path_check(res, col.checks[1]);
}

void run_kronecker(const ExperimentConfig& c, ExperimentResult& res, Collected& col) {
  const std::size_t horizon = horizon_of(c);
  std::vector<double> weights(horizon);
  for (std::size_t i = 0; i < horizon; ++i)
    weights[i] = std::pow(double(i + 1), c.weights.exponent);
  bool growth_warning = false;
  kronecker_path(std::vector<double>(horizon, 0.0), weights, &growth_warning);
  if (growth_warning) res.warnings.push_back("kronecker: a_n / a_1 < 10 over the horizon");
  col.extra["weights"] = {{"exponent", num(c.weights.exponent)},
                          {"a_N", num(weights.empty() ? 0.0 : weights.back())}};

  const bool traces = c.output.traces;
  auto seeds = map_seeds(c.ensemble.seeds, c.ensemble.root_seed, c.ensemble.parallelism,
                         [&](std::uint64_t seed, std::size_t idx) {
                           SeedOutput out;
                           Rng rng(seed);
                           std::vector<double> y(horizon);
                           for (std::size_t i = 0; i < horizon; ++i) {
                             const auto& f = c.increments.family;
                             const double e = f == "rademacher" ? rng.rademacher()
                                              : f == "gaussian" ? rng.normal()
                                                  : ((i + 1) % 2 ? -1.0 : 1.0);
                             y[i] = c.increments.scale * e;
                           }
                           const auto path = kronecker_path(y, weights);
                           out.trajectory = path.values();
                           if (traces) out.trace = scalar_trace(idx, path);
                           return out;
                         });
  res.trace_header = kScalarTraceHeader;
  fold(seeds, {}, c.ensemble, res, col.checks);
  assert_fraction_bounds(res, c.assertions);
}

ProcessPath<double> load_path_csv(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot read path file " + file);
  std::string line;
  std::getline(in, line);
  if (line.rfind("n,x,m", 0) != 0) throw Error("path file must start with header n,x,m");
  std::vector<double> xs, ms;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string n, x, m;
    std::getline(ss, n, ',');
    std::getline(ss, x, ',');
    std::getline(ss, m, ',');
    try {
      if (std::stoul(n) != row) throw Error("path file rows must be consecutive from 0", row);
      xs.push_back(std::stod(x));
      if (row > 0) ms.push_back(std::stod(m));
    } catch (const std::logic_error&) {
      throw Error("path file: malformed row", row);
    }
    ++row;
  }
  if (xs.empty()) throw Error("path file has no rows");
  return doob_decompose(xs, ms);
}

void run_custom(const ExperimentConfig& c, ExperimentResult& res, Collected& col) {
  const bool from_file = c.path.family == "file";
  std::optional<ProcessPath<double>> file_path;
  EnsembleConfig ensemble = c.ensemble;
  if (from_file) {
    file_path = load_path_csv(c.path.file);
    if (ensemble.seeds != 1) res.warnings.push_back("path from file: a single path is checked");
    ensemble.seeds = 1;
    ensemble.horizon = file_path->horizon();
  }
  const std::size_t horizon = ensemble.horizon;
  const auto schedule = make_schedule(c.schedule, horizon);
  col.extra["schedule"] = {{"family", c.schedule.family}, {"sum_alpha", num(schedule.sum())}};

  std::vector<std::string> names = {"A1", "Wj_bound"};
  const bool traces = c.output.traces;
  auto seeds = map_seeds(
      ensemble.seeds, ensemble.root_seed, ensemble.parallelism,
      [&](std::uint64_t seed, std::size_t idx) {
        SeedOutput out;
        ProcessPath<double> path;
        if (from_file) {
          path = *file_path;
        } else {
          Rng rng(seed);
          std::vector<double> xs{c.path.x0}, ms;
          for (std::size_t n = 1; n <= horizon; ++n) {
            const double m = xs.back() / 2;
            const double e =
                c.path.residual_sd * rng.normal() / std::pow(double(n), c.path.residual_decay);
            ms.push_back(m);
            xs.push_back(m + e);
          }
          path = doob_decompose(xs, ms);
        }
        out.trajectory = path.values();
        out.checks.push_back(check_A1(path, NonexpansiveProfile<double>{schedule.alphas}));
        out.checks.push_back(wj_bound_check(path, schedule.alphas));
        if (traces) out.trace = scalar_trace(idx, path);
        return out;
      });
  res.trace_header = kScalarTraceHeader;
  fold(seeds, names, ensemble, res, col.checks);
  assert_fraction_bounds(res, c.assertions);
  if (c.assertions.A1) assert_path_check(res, col.checks[0]);
  if (c.assertions.wj_bound) assert_path_check(res, col.checks[1]);
}

struct LsSeedOutput {
  SeedOutput base;
  EVerdicts e;
  LsSeedSummary summary;
  double oracle_diff = 0.0;
  double final_error = std::numeric_limits<double>::quiet_NaN();
};

void run_ls(const ExperimentConfig& c, ExperimentResult& res, Collected& col) {
  const std::size_t horizon = horizon_of(c);
  const auto& model = c.model;
  const Eigen::Index p = model.dim();
  const auto gw = make_gweight(c.gweight);
  const double sigma2 = model.noise.cond_var_bound();

  const auto growth = check_sqrt_growth(gw);
  col.conditions.push_back(to_json(growth));
  const auto tail = gw.integral_tail(1.0);
  if (!tail) res.warnings.push_back("g-weight: tail integral of g^-2 diverges");
  if (!growth.holds) res.warnings.push_back("g-weight: g(x)/sqrt(x) does not grow");
  col.extra["gweight"] = {{"name", gw.name},
                          {"integral_tail_at_1", tail ? ordered_json(*tail) : ordered_json(nullptr)}};

  EOptions eopts;
  eopts.energy_threshold = c.partition.energy_threshold;
  const std::vector<std::string> names = {"E1", "E2", "E3", "E4", "E5"};
  const bool traces = c.output.traces;
  auto raw = map_seeds(
      c.ensemble.seeds, c.ensemble.root_seed, c.ensemble.parallelism,
      [&](std::uint64_t seed, std::size_t idx) {
        LsSeedOutput out;
        Rng rng(seed);
        const auto run = simulate_ls(model, horizon, rng);
        LsState<double> st(p);
        const auto checkpoints = log_checkpoints(horizon);
        std::size_t next_cp = 0;
        auto& traj = out.base.trajectory;
        traj.assign(horizon + 1, std::numeric_limits<double>::quiet_NaN());
        const auto s = std::to_string(idx);
        for (std::size_t n = 1; n <= horizon; ++n) {
          const auto r = Eigen::Index(n - 1);
          st.update(run.X.row(r).transpose(), run.y(r));
          if (!st.singular()) traj[n] = (st.b() - model.beta).cwiseAbs().maxCoeff();
          while (next_cp < checkpoints.size() && checkpoints[next_cp] < n) ++next_cp;
          if (next_cp < checkpoints.size() && checkpoints[next_cp] == n && !st.singular()) {
            const Eigen::VectorXd direct =
                run.X.topRows(r + 1).colPivHouseholderQr().solve(run.y.head(r + 1));
            out.oracle_diff = std::max(out.oracle_diff, (st.b() - direct).cwiseAbs().maxCoeff());
          }
          if (traces) {
            out.base.trace += s + ',' + std::to_string(n);
            append_vector(out.base.trace, run.X.row(r).transpose());
            out.base.trace += ',' + format_double(run.y(r)) + ',' + format_double(run.u(r));
            append_vector(out.base.trace, st.b());
            out.base.trace += '\n';
          }
        }
        out.final_error = traj.back();
        out.e = check_E(run, gw, sigma2, eopts);
        for (const auto* v : {&out.e.e1, &out.e.e2, &out.e.e3, &out.e.e4, &out.e.e5})
          out.base.checks.push_back(*v);
        out.summary = ls_seed_summary(run, c.ensemble.tail_fraction);
        return out;
      });

  std::vector<SeedResult<SeedOutput>> seeds(raw.size());
  std::vector<LsSeedSummary> summaries;
  double oracle_max = 0.0;
  std::size_t e_ok = 0, consistent_ok = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    seeds[i].index = raw[i].index;
    seeds[i].seed = raw[i].seed;
    seeds[i].error = raw[i].error;
    if (!raw[i].value) continue;
    auto& v = *raw[i].value;
    oracle_max = std::max(oracle_max, v.oracle_diff);
    if (v.e.e3.holds && v.e.e4.holds && v.e.e5.holds) ++e_ok;
    if (c.assertions.consistent && v.final_error < c.assertions.consistent->tol) ++consistent_ok;
    summaries.push_back(v.summary);
    seeds[i].value = std::move(v.base);
  }
  res.trace_header = "seed,n," + component_header("x_", p) + ",y,u," + component_header("b_", p);
  fold(seeds, names, c.ensemble, res, col.checks);
  col.extra["oracle_max_diff"] = num(oracle_max);

  std::optional<PartitionReport> part;
  std::string part_error;
  try {
    part = partition_analysis(summaries, c.partition);
  } catch (const Error& e) {
    part_error = e.what();
  }
  if (part) {
    auto verdicts = ordered_json::array();
    for (auto v : part->component_verdicts) verdicts.push_back(to_string(v));
    auto finite = ordered_json::array();
    for (bool b : part->finite_energy) finite.push_back(b);
    col.extra["PartitionReport"] = {{"q", part->q},
                                    {"finite_energy", finite},
                                    {"component_verdicts", verdicts},
                                    {"dispersion", vec_json(part->dispersion)},
                                    {"consistent_fraction", vec_json(part->consistent_fraction)},
                                    {"cauchy_fraction", vec_json(part->cauchy_fraction)}};
  } else {
    col.extra["PartitionReport"] = {{"error", part_error}};
  }

  const double total = double(raw.size());
  if (c.assertions.consistent) {
    const auto& t = *c.assertions.consistent;
    const double f = double(consistent_ok) / total;
    res.assertions.push_back({"consistent", f >= t.fraction,
                              "fraction with final max error below " + format_double(t.tol) +
                                  " is " + format_double(f) + " (need >= " +
                                  format_double(t.fraction) + ")"});
  }
  if (c.assertions.e_conditions_fraction) {
    const double f = double(e_ok) / total;
    res.assertions.push_back({"e_conditions", f >= *c.assertions.e_conditions_fraction,
                              "E3-E5 hold on fraction " + format_double(f) + " (need >= " +
                                  format_double(*c.assertions.e_conditions_fraction) + ")"});
  }
  if (c.assertions.oracle_tol)
    res.assertions.push_back({"oracle", oracle_max <= *c.assertions.oracle_tol,
                              "max recursive-vs-direct difference " + format_double(oracle_max) +
                                  " (need <= " + format_double(*c.assertions.oracle_tol) + ")"});
  if (c.assertions.partition_q)
    res.assertions.push_back({"partition_q", part && part->q == *c.assertions.partition_q,
                              part ? "q = " + std::to_string(part->q) + " (expected " +
                                         std::to_string(*c.assertions.partition_q) + ")"
                                   : "partition analysis failed: " + part_error});
  if (c.assertions.finite_random_limit) {
    bool ok = part.has_value();
    std::string detail = part ? "" : "partition analysis failed: " + part_error;
    if (part) {
      for (std::size_t t = 0; t < part->component_verdicts.size(); ++t) {
        const auto want = part->finite_energy[t] ? ComponentClass::finite_random_limit
                                                 : ComponentClass::consistent;
        ok = ok && part->component_verdicts[t] == want;
        detail += (t ? ", " : "") + std::string("b(") + std::to_string(t + 1) + ") " +
                  to_string(part->component_verdicts[t]);
      }
    }
    res.assertions.push_back({"finite_random_limit", ok, detail});
  }
}

}  // namespace

void PathCheckSummary::add(std::size_t seed_index, const ConditionVerdict& v) {
  ++total;
  if (v.holds) ++holding;
  else if (!first_failing_seed) {
    first_failing_seed = seed_index;
    first_detail = v.detail;
  }
  worst_margin = std::min(worst_margin, v.worst_margin);
}

bool ExperimentResult::passed() const {
  for (const auto& a : assertions)
    if (!a.passed) return false;
  return true;
}

std::vector<std::string> ExperimentResult::failing_assertions() const {
  std::vector<std::string> out;
  for (const auto& a : assertions)
    if (!a.passed) out.push_back(a.name);
  return out;
}

ordered_json to_json(const ConditionVerdict& v) {
  return {{"name", v.name},
          {"holds", v.holds},
          {"applicable", v.applicable},
          {"first_violation", index_or_null(v.first_violation)},
          {"worst_margin", num(v.worst_margin)},
          {"coverage", num(v.coverage)},
          {"detail", v.detail}};
}

ordered_json to_json(const ConvergenceVerdict& v) {
  ordered_json j = {{"class", to_string(v.cls)},
                    {"tail_sup", num(v.tail_sup)},
                    {"tail_oscillation", num(v.tail_oscillation)},
                    {"final_value", num(v.final_value)}};
  if (!v.reason.empty()) j["reason"] = v.reason;
  return j;
}

ordered_json to_json(const EnsembleStats& s) {
  ordered_json fractions = ordered_json::object();
  for (auto cls : kConvergenceClasses) fractions[to_string(cls)] = num(s.fraction(cls));
  ordered_json quantiles = ordered_json::object();
  for (std::size_t i = 0; i < kFinalQuantileLevels.size(); ++i)
    quantiles[format_double(kFinalQuantileLevels[i])] = num(s.final_abs_quantiles[i]);
  auto per_seed = ordered_json::array();
  for (const auto& v : s.per_seed) per_seed.push_back(to_json(v));
  return {{"fraction_by_class", fractions},
          {"final_abs_quantiles", quantiles},
          {"dispersion", num(s.dispersion)},
          {"per_seed", per_seed}};
}

ordered_json to_json(const PathCheckSummary& s) {
  return {{"name", s.name},
          {"seeds_holding", s.holding},
          {"seeds_total", s.total},
          {"first_failing_seed", index_or_null(s.first_failing_seed)},
          {"worst_margin", num(s.worst_margin)},
          {"first_detail", s.first_detail}};
}

ordered_json to_json(const ExperimentConfig& c) {
  using K = ExperimentKind;
  ordered_json j;
  j["kind"] = to_string(c.kind);
  j["name"] = c.name;
  auto schedule = [&] {
    ordered_json s = {{"family", c.schedule.family}};
    if (c.schedule.family == "power") {
      s["c"] = num(c.schedule.c);
      s["gamma"] = num(c.schedule.gamma);
      s["offset"] = num(c.schedule.offset);
    } else if (c.schedule.family == "explicit") {
      s["values"] = vec_json(c.schedule.values);
    }
    return s;
  };
  auto noise = [](const NoiseSpec& n) { return ordered_json{{"family", n.family}, {"sd", num(n.sd)}}; };
  if (c.kind == K::sa || c.kind == K::sa_nonuniform) {
    j["problem"] = {{"family", c.problem.family}, {"slope", num(c.problem.slope)},
                    {"amplitude", num(c.problem.amplitude)}, {"scale", num(c.problem.scale)},
                    {"root", num(c.problem.root)}};
    j["schedule"] = schedule();
    j["noise"] = noise(c.noise);
    j["x0"] = num(c.x0);
    j["grid"] = {{"min_magnitude", num(c.grid.min_magnitude)},
                 {"max_magnitude", num(c.grid.max_magnitude)},
                 {"per_decade", c.grid.per_decade}};
  }
  if (c.kind == K::sa_nonuniform) {
    j["truncation"] = {{"delta", num(c.truncation.delta)}, {"tau", num(c.truncation.tau)},
                       {"kappa", num(c.truncation.kappa.value_or(c.truncation.delta))}};
    auto pairs = ordered_json::array();
    for (const auto& [a, b] : c.blum.delta_pairs) pairs.push_back({num(a), num(b)});
    j["blum"] = {{"c", num(c.blum.c)}, {"d", num(c.blum.d)}, {"delta_pairs", pairs}};
  }
  if (c.kind == K::sa_nd) {
    auto rows = ordered_json::array();
    for (Eigen::Index i = 0; i < c.matrix_problem.matrix.rows(); ++i)
      rows.push_back(vec_json(Eigen::VectorXd(c.matrix_problem.matrix.row(i).transpose())));
    j["problem"] = {{"family", "matrix"}, {"matrix", rows}, {"root", vec_json(c.matrix_problem.root)}};
    j["schedule"] = schedule();
    j["noise"] = noise(c.noise);
    j["x0"] = vec_json(c.x0_vector);
    j["grid"] = {{"directions", c.grid.directions}, {"radii", vec_json(c.grid.radii)},
                 {"seed", c.grid.seed}};
  }
  if (c.kind == K::ls) {
    const char* design = c.model.design == DesignFamily::constant          ? "constant"
                         : c.model.design == DesignFamily::geometric_first ? "geometric_first"
                         : c.model.design == DesignFamily::adaptive        ? "adaptive"
                                                                           : "persistent";
    j["model"] = {{"beta", vec_json(c.model.beta)},
                  {"design", design},
                  {"design_noise", num(c.model.design_noise)},
                  {"noise_sd", num(c.model.noise.scale)}};
    j["gweight"] = c.gweight;
    j["partition"] = {{"energy_threshold", num(c.partition.energy_threshold)},
                      {"tol_consistent", num(c.partition.tol_consistent)},
                      {"tol_cauchy", num(c.partition.tol_cauchy)},
                      {"fraction", num(c.partition.fraction)},
                      {"dispersion_ratio", num(c.partition.dispersion_ratio)}};
  }
  if (c.kind == K::kronecker) {
    j["increments"] = {{"family", c.increments.family}, {"scale", num(c.increments.scale)}};
    j["weights"] = {{"exponent", num(c.weights.exponent)}};
  }
  if (c.kind == K::custom_path_check) {
    j["path"] = {{"family", c.path.family}, {"x0", num(c.path.x0)},
                 {"residual_sd", num(c.path.residual_sd)},
                 {"residual_decay", num(c.path.residual_decay)}, {"file", c.path.file}};
    j["schedule"] = schedule();
  }
  const auto& e = c.ensemble;
  j["EnsembleConfig"] = {{"seeds", e.seeds},
                         {"root_seed", e.root_seed},
                         {"horizon", e.horizon},
                         {"tail_fraction", num(e.tail_fraction)},
                         {"tol_zero", num(e.tol_zero)},
                         {"tol_cauchy", num(e.tol_cauchy)},
                         {"divergence_cap", num(e.divergence_cap)}};
  j["output"] = {{"traces", c.output.traces}};
  return j;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  ExperimentResult res;
  Collected col;
  switch (config.kind) {
    case ExperimentKind::sa:
      run_sa(config, res, col);
      break;
    case ExperimentKind::sa_nd:
      run_sa_nd(config, res, col);
      break;
    case ExperimentKind::sa_nonuniform:
      run_sa_nonuniform(config, res, col);
      break;
    case ExperimentKind::ls:
      run_ls(config, res, col);
      break;
    case ExperimentKind::kronecker:
      run_kronecker(config, res, col);
      break;
    case ExperimentKind::custom_path_check:
      run_custom(config, res, col);
      break;
  }

  auto path_checks = ordered_json::array();
  for (const auto& chk : col.checks) path_checks.push_back(to_json(chk));
  auto assertions = ordered_json::array();
  for (const auto& a : res.assertions)
    assertions.push_back({{"name", a.name}, {"passed", a.passed}, {"detail", a.detail}});

  auto& s = res.summary;
  s["ExperimentConfig"] = to_json(config);
  s["warnings"] = res.warnings;
  s["conditions"] = col.conditions;
  s["path_checks"] = path_checks;
  for (auto it = col.extra.begin(); it != col.extra.end(); ++it) s[it.key()] = it.value();
  s["EnsembleStats"] = to_json(res.stats);
  s["assertions"] = assertions;
  s["passed"] = res.passed();
  return res;
}

}  // namespace stocon::cli
