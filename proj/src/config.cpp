#include <stocon/cli/config.hpp>

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace stocon::cli {

using nlohmann::json;

const char* to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::sa:
      return "sa";
    case ExperimentKind::sa_nd:
      return "sa_nd";
    case ExperimentKind::sa_nonuniform:
      return "sa_nonuniform";
    case ExperimentKind::ls:
      return "ls";
    case ExperimentKind::kronecker:
      return "kronecker";
    case ExperimentKind::custom_path_check:
      return "custom_path_check";
  }
  return "unknown";
}

std::optional<ExperimentKind> parse_kind(std::string_view text) {
  for (auto k : {ExperimentKind::sa, ExperimentKind::sa_nd, ExperimentKind::sa_nonuniform,
                 ExperimentKind::ls, ExperimentKind::kronecker,
                 ExperimentKind::custom_path_check})
    if (text == to_string(k)) return k;
  return std::nullopt;
}

namespace {

std::string join_errors(const std::vector<std::string>& errors) {
  std::string out = "invalid configuration:";
  for (const auto& e : errors) out += "\n  " + e;
  return out;
}

/// Typed access to one JSON object. Every key read is remembered so that
/// finish() can report the rest as unknown.
class Reader {
 public:
  Reader(const json& obj, std::string path, std::vector<std::string>& errors)
      : obj_(obj), path_(std::move(path)), errors_(errors) {
    if (!obj_.is_object()) {
      fail("", "must be an object");
      valid_ = false;
    }
  }

  bool valid() const { return valid_; }
  bool has(const std::string& key) const { return valid_ && obj_.contains(key); }

  void fail(const std::string& key, const std::string& what) {
    errors_.push_back(qualified(key) + ": " + what);
  }

  std::string qualified(const std::string& key) const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  const json* get(const std::string& key, bool required) {
    if (!valid_) return nullptr;
    used_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) {
      if (required) fail(key, "missing required key");
      return nullptr;
    }
    return &*it;
  }

  void number(const std::string& key, double& out, bool required = false,
              double lo = -std::numeric_limits<double>::infinity(),
              double hi = std::numeric_limits<double>::infinity(), bool open_lo = false) {
    const json* v = get(key, required);
    if (!v) return;
    if (!v->is_number()) {
      fail(key, "must be a number");
      return;
    }
    const double x = v->get<double>();
    const bool below = open_lo ? !(x > lo) : !(x >= lo);
    if (!std::isfinite(x) || below || !(x <= hi)) {
      std::ostringstream os;
      os << "out of range (got " << v->dump() << ", allowed " << (open_lo ? "(" : "[") << lo
         << ", " << hi << "])";
      fail(key, os.str());
      return;
    }
    out = x;
  }

  void number(const std::string& key, std::optional<double>& out, double lo, double hi,
              bool open_lo = false) {
    if (!has(key)) {
      used_.insert(key);
      return;
    }
    double x = 0;
    const std::size_t before = errors_.size();
    number(key, x, true, lo, hi, open_lo);
    if (errors_.size() == before) out = x;
  }

  template <typename Int>
  void integer(const std::string& key, Int& out, bool required = false, long double lo = 0,
               long double hi = 1e18L) {
    const json* v = get(key, required);
    if (!v) return;
    if (v->is_number_float()) {
      const double d = v->get<double>();
      if (std::floor(d) != d) {
        fail(key, "must be an integer");
        return;
      }
    } else if (!v->is_number_integer()) {
      fail(key, "must be an integer");
      return;
    }
    const long double x = v->is_number_unsigned()   ? (long double)v->get<std::uint64_t>()
                          : v->is_number_integer() ? (long double)v->get<std::int64_t>()
                                                   : (long double)v->get<double>();
    if (x < lo || x > hi) {
      std::ostringstream os;
      os << "out of range (got " << v->dump() << ", allowed [" << (double)lo << ", "
         << (double)hi << "])";
      fail(key, os.str());
      return;
    }
    out = static_cast<Int>(x);
  }

  void boolean(const std::string& key, bool& out) {
    const json* v = get(key, false);
    if (!v) return;
    if (!v->is_boolean()) {
      fail(key, "must be true or false");
      return;
    }
    out = v->get<bool>();
  }

  void string(const std::string& key, std::string& out, bool required = false,
              std::initializer_list<const char*> allowed = {}) {
    const json* v = get(key, required);
    if (!v) return;
    if (!v->is_string()) {
      fail(key, "must be a string");
      return;
    }
    const auto s = v->get<std::string>();
    if (allowed.size()) {
      bool ok = false;
      std::string list;
      for (const char* a : allowed) {
        ok = ok || s == a;
        list += list.empty() ? a : std::string(", ") + a;
      }
      if (!ok) {
        fail(key, "unknown value \"" + s + "\" (expected one of " + list + ")");
        return;
      }
    }
    out = s;
  }

  void number_list(const std::string& key, std::vector<double>& out, bool required = false) {
    const json* v = get(key, required);
    if (!v) return;
    if (!v->is_array()) {
      fail(key, "must be an array of numbers");
      return;
    }
    std::vector<double> values;
    for (std::size_t i = 0; i < v->size(); ++i) {
      const auto& e = (*v)[i];
      if (!e.is_number() || !std::isfinite(e.get<double>())) {
        fail(key + "[" + std::to_string(i) + "]", "must be a finite number");
        return;
      }
      values.push_back(e.get<double>());
    }
    out = std::move(values);
  }

  /// Opens a nested object, or returns nullopt when absent.
  std::optional<Reader> child(const std::string& key, bool required = false) {
    const json* v = get(key, required);
    if (!v) return std::nullopt;
    return Reader(*v, qualified(key), errors_);
  }

  void finish() {
    if (!valid_) return;
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!used_.count(it.key())) fail(it.key(), "unknown key");
  }

 private:
  const json& obj_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::set<std::string> used_;
  bool valid_ = true;
};

void read_problem(Reader& r, ScalarProblemSpec& p) {
  r.string("family", p.family, true, {"linear", "linear_sin", "signed_sqrt", "cubic"});
  r.number("slope", p.slope);
  r.number("amplitude", p.amplitude);
  r.number("scale", p.scale);
  r.number("root", p.root);
  r.finish();
}

void read_matrix_problem(Reader& r, MatrixProblemSpec& p) {
  std::string family;
  r.string("family", family, true, {"matrix"});
  const json* m = r.get("matrix", true);
  if (m) {
    bool ok = m->is_array() && !m->empty();
    const std::size_t rows = ok ? m->size() : 0;
    for (std::size_t i = 0; ok && i < rows; ++i) {
      const auto& row = (*m)[i];
      ok = row.is_array() && row.size() == rows;
      for (std::size_t j = 0; ok && j < rows; ++j) ok = row[j].is_number();
    }
    if (!ok) {
      r.fail("matrix", "must be a nonempty square array of numbers");
    } else {
      p.matrix.resize(Eigen::Index(rows), Eigen::Index(rows));
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < rows; ++j)
          p.matrix(Eigen::Index(i), Eigen::Index(j)) = (*m)[i][j].get<double>();
    }
  }
  std::vector<double> root;
  r.number_list("root", root);
  if (p.matrix.size()) {
    if (root.empty()) {
      p.root = Eigen::VectorXd::Zero(p.matrix.rows());
    } else if (Eigen::Index(root.size()) != p.matrix.rows()) {
      r.fail("root", "length must match the matrix dimension");
    } else {
      p.root = Eigen::Map<Eigen::VectorXd>(root.data(), Eigen::Index(root.size()));
    }
  }
  r.finish();
}

void read_schedule(Reader& r, ScheduleSpec& s) {
  r.string("family", s.family, true, {"power", "explicit"});
  if (s.family == "power") {
    r.number("c", s.c, false, 0.0, std::numeric_limits<double>::infinity(), true);
    r.number("gamma", s.gamma, false, 0.0, std::numeric_limits<double>::infinity(), true);
    r.number("offset", s.offset, false, 0.0);
  } else if (s.family == "explicit") {
    r.number_list("values", s.values, true);
    for (std::size_t i = 0; i < s.values.size(); ++i)
      if (!(s.values[i] >= 0.0)) {
        r.fail("values[" + std::to_string(i) + "]", "step sizes must be nonnegative");
        break;
      }
  }
  r.finish();
}

void read_noise(Reader& r, NoiseSpec& n) {
  r.string("family", n.family, true, {"gaussian", "uniform", "rademacher", "none"});
  r.number("sd", n.sd, false, 0.0);
  r.finish();
}

void read_domain(Reader& r, DomainSpec& d) {
  r.number("lo", d.lo);
  r.number("hi", d.hi);
  std::string policy = "unbounded";
  r.string("policy", policy, false, {"unbounded", "project", "reject"});
  d.policy = policy == "project"  ? DomainPolicy::project
             : policy == "reject" ? DomainPolicy::reject
                                  : DomainPolicy::unbounded;
  if (!(d.lo < d.hi)) r.fail("", "lo must be below hi");
  r.finish();
}

void read_grid(Reader& r, GridSpec& g) {
  r.number("min_magnitude", g.min_magnitude, false, 0.0,
           std::numeric_limits<double>::infinity(), true);
  r.number("max_magnitude", g.max_magnitude, false, 0.0,
           std::numeric_limits<double>::infinity(), true);
  r.integer("per_decade", g.per_decade, false, 1, 1e6);
  r.integer("directions", g.directions, false, 1, 1e7);
  r.number_list("radii", g.radii);
  r.integer("seed", g.seed);
  if (!(g.min_magnitude < g.max_magnitude)) r.fail("", "min_magnitude must be below max_magnitude");
  for (double rad : g.radii)
    if (!(rad > 0)) {
      r.fail("radii", "radii must be positive");
      break;
    }
  r.finish();
}

void read_truncation(Reader& r, TruncationSpec& t) {
  const double inf = std::numeric_limits<double>::infinity();
  r.number("delta", t.delta, true, 0.0, inf, true);
  r.number("tau", t.tau, true, 0.0, inf, true);
  r.number("kappa", t.kappa, 0.0, inf);
  r.finish();
}

void read_blum(Reader& r, BlumSpec& b) {
  r.number("c", b.c, false, 0.0);
  r.number("d", b.d, false, 0.0);
  const json* pairs = r.get("delta_pairs", false);
  if (pairs) {
    bool ok = pairs->is_array() && !pairs->empty();
    std::vector<std::pair<double, double>> out;
    for (std::size_t i = 0; ok && i < pairs->size(); ++i) {
      const auto& p = (*pairs)[i];
      ok = p.is_array() && p.size() == 2 && p[0].is_number() && p[1].is_number();
      if (ok) {
        const double d1 = p[0].get<double>(), d2 = p[1].get<double>();
        ok = d1 > 0 && d1 < d2;
        out.emplace_back(d1, d2);
      }
    }
    if (!ok) r.fail("delta_pairs", "must be a nonempty list of [delta1, delta2] with 0 < delta1 < delta2");
    else b.delta_pairs = std::move(out);
  }
  r.finish();
}

void read_model(Reader& r, RegressionModel& m) {
  std::vector<double> beta;
  r.number_list("beta", beta, true);
  if (r.has("beta") && beta.empty()) r.fail("beta", "must be nonempty");
  m.beta = Eigen::Map<Eigen::VectorXd>(beta.data(), Eigen::Index(beta.size()));
  std::string design = "persistent";
  r.string("design", design, false, {"constant", "geometric_first", "persistent", "adaptive"});
  m.design = design == "constant"          ? DesignFamily::constant
             : design == "geometric_first" ? DesignFamily::geometric_first
             : design == "adaptive"        ? DesignFamily::adaptive
                                           : DesignFamily::persistent;
  r.number("design_noise", m.design_noise, false, 0.0);
  NoiseSpec noise{"gaussian", 1.0};
  if (auto n = r.child("noise")) read_noise(*n, noise);
  m.noise = make_noise(noise);
  if (m.beta.size()) {
    try {
      m.validate();
    } catch (const Error& e) {
      r.fail("design", e.what());
    }
  }
  r.finish();
}

void read_partition(Reader& r, PartitionOptions& p) {
  const double inf = std::numeric_limits<double>::infinity();
  r.number("energy_threshold", p.energy_threshold, false, 0.0, inf, true);
  r.number("tol_consistent", p.tol_consistent, false, 0.0, inf, true);
  r.number("tol_cauchy", p.tol_cauchy, false, 0.0);
  r.number("fraction", p.fraction, false, 0.0, 1.0);
  r.number("dispersion_ratio", p.dispersion_ratio, false, 0.0);
  r.finish();
}

void read_ensemble(Reader& r, EnsembleConfig& e) {
  r.integer("seeds", e.seeds, false, 1, 1e9);
  r.integer("root_seed", e.root_seed, false, 0, 1.8446744073709551615e19L);
  r.integer("horizon", e.horizon, false, 1, 1e10);
  r.number("tail_fraction", e.tail_fraction, false, 0.0, 1.0, true);
  if (e.tail_fraction >= 1.0) r.fail("tail_fraction", "must lie in (0, 1)");
  r.number("tol_zero", e.tol_zero, false, 0.0);
  r.number("tol_cauchy", e.tol_cauchy, false, 0.0);
  r.number("divergence_cap", e.divergence_cap, false, 0.0,
           std::numeric_limits<double>::infinity(), true);
  r.integer("parallelism", e.parallelism, false, 0, 4096);
  r.finish();
}

std::optional<Threshold> read_threshold(Reader& parent, const std::string& key) {
  auto r = parent.child(key);
  if (!r) return std::nullopt;
  Threshold t;
  r->number("tol", t.tol, true, 0.0, std::numeric_limits<double>::infinity(), true);
  r->number("fraction", t.fraction, false, 0.0, 1.0);
  r->finish();
  return t;
}

void read_assertions(Reader& r, AssertionSpec& a, ExperimentKind kind) {
  using K = ExperimentKind;
  const bool scalar_like = kind != K::ls;
  if (scalar_like) {
    r.number("min_converged_fraction", a.min_converged_fraction, 0.0, 1.0);
    r.number("max_converged_fraction", a.max_converged_fraction, 0.0, 1.0);
    r.number("max_median_abs_final", a.max_median_abs_final, 0.0,
             std::numeric_limits<double>::infinity());
  }
  if (kind == K::sa || kind == K::sa_nd) {
    if (auto e = r.child("envelope")) {
      Envelope env;
      e->number("m", env.m, true);
      e->number("M", env.M, true);
      if (!(env.m <= env.M)) e->fail("", "m must not exceed M");
      e->finish();
      a.envelope = env;
    }
  }
  if (kind == K::sa) r.boolean("sandwich", a.sandwich);
  if (kind == K::sa_nd) {
    r.boolean("contraction", a.contraction);
    a.norm_below = read_threshold(r, "norm_below");
  }
  if (kind == K::sa_nonuniform) {
    r.boolean("blum", a.blum);
    r.boolean("truncated_A1", a.truncated_A1);
    r.boolean("derived_u_bound", a.derived_u_bound);
  }
  if (kind == K::ls) {
    a.consistent = read_threshold(r, "consistent");
    constexpr auto unset = std::numeric_limits<std::size_t>::max();
    std::size_t q = unset;
    r.integer("partition_q", q, false, 0, 1e6);
    if (q != unset) a.partition_q = q;
    r.boolean("finite_random_limit", a.finite_random_limit);
    r.number("oracle_tol", a.oracle_tol, 0.0, std::numeric_limits<double>::infinity());
    r.number("e_conditions_fraction", a.e_conditions_fraction, 0.0, 1.0);
  }
  if (kind == K::custom_path_check) {
    r.boolean("A1", a.A1);
    r.boolean("wj_bound", a.wj_bound);
  }
  r.finish();
}

void read_output(Reader& r, OutputSpec& o) {
  r.string("dir", o.dir);
  r.boolean("traces", o.traces);
  if (o.dir.empty()) r.fail("dir", "must be nonempty");
  r.finish();
}

void read_x0_vector(Reader& r, Eigen::VectorXd& out) {
  std::vector<double> v;
  r.number_list("x0", v, true);
  out = Eigen::Map<Eigen::VectorXd>(v.data(), Eigen::Index(v.size()));
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> errors)
    : std::runtime_error(join_errors(errors)), errors_(std::move(errors)) {}

ExperimentConfig parse_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError({std::string("malformed JSON: ") + e.what()});
  }

  std::vector<std::string> errors;
  ExperimentConfig c;
  Reader root(doc, "", errors);
  if (!root.valid()) throw ConfigError(errors);

  std::string kind_text;
  root.string("kind", kind_text, true);
  const auto kind = parse_kind(kind_text);
  if (!kind) {
    if (!kind_text.empty())
      root.fail("kind", "unknown experiment kind \"" + kind_text +
                            "\" (expected sa, sa_nd, sa_nonuniform, ls, kronecker, "
                            "custom_path_check)");
    throw ConfigError(errors);
  }
  c.kind = *kind;
  root.string("name", c.name);

  using K = ExperimentKind;
  switch (c.kind) {
    case K::sa:
    case K::sa_nonuniform:
      if (auto r = root.child("problem", true)) read_problem(*r, c.problem);
      if (auto r = root.child("schedule", true)) read_schedule(*r, c.schedule);
      if (auto r = root.child("noise", true)) read_noise(*r, c.noise);
      root.number("x0", c.x0, true);
      if (auto r = root.child("domain")) read_domain(*r, c.domain);
      if (c.kind == K::sa_nonuniform) {
        c.grid.min_magnitude = 1e-14;
        if (auto r = root.child("truncation", true)) read_truncation(*r, c.truncation);
        if (auto r = root.child("blum")) read_blum(*r, c.blum);
      }
      if (auto r = root.child("grid")) read_grid(*r, c.grid);
      break;
    case K::sa_nd:
      if (auto r = root.child("problem", true)) read_matrix_problem(*r, c.matrix_problem);
      if (auto r = root.child("schedule", true)) read_schedule(*r, c.schedule);
      if (auto r = root.child("noise", true)) read_noise(*r, c.noise);
      read_x0_vector(root, c.x0_vector);
      if (c.matrix_problem.matrix.size() && c.x0_vector.size() != c.matrix_problem.matrix.rows())
        root.fail("x0", "length must match the matrix dimension");
      if (auto r = root.child("grid")) read_grid(*r, c.grid);
      break;
    case K::ls:
      if (auto r = root.child("model", true)) read_model(*r, c.model);
      root.string("gweight", c.gweight, false, {"identity", "sqrt_log"});
      if (auto r = root.child("partition")) read_partition(*r, c.partition);
      break;
    case K::kronecker:
      if (auto r = root.child("increments", true)) {
        r->string("family", c.increments.family, true, {"rademacher", "gaussian", "alternating"});
        r->number("scale", c.increments.scale, false, 0.0);
        r->finish();
      }
      if (auto r = root.child("weights", true)) {
        r->number("exponent", c.weights.exponent, true, 0.0,
                  std::numeric_limits<double>::infinity(), true);
        r->finish();
      }
      break;
    case K::custom_path_check:
      if (auto r = root.child("path", true)) {
        r->string("family", c.path.family, true, {"halving", "file"});
        r->number("x0", c.path.x0);
        r->number("residual_sd", c.path.residual_sd, false, 0.0);
        r->number("residual_decay", c.path.residual_decay, false, 0.0);
        r->string("file", c.path.file, c.path.family == "file");
        r->finish();
      }
      // Without a schedule the nonexpansive checks use alpha_n = 0.
      if (auto r = root.child("schedule")) read_schedule(*r, c.schedule);
      else c.schedule.family = "zero";
      break;
  }

  if (auto r = root.child("ensemble")) read_ensemble(*r, c.ensemble);
  if (auto r = root.child("assertions")) read_assertions(*r, c.assertions, c.kind);
  if (auto r = root.child("output")) read_output(*r, c.output);
  root.finish();

  if (c.schedule.family == "explicit" && c.schedule.values.size() < c.ensemble.horizon &&
      c.kind != K::ls && c.kind != K::kronecker)
    errors.push_back("schedule.values: fewer step sizes than the horizon");
  if (!errors.empty()) throw ConfigError(errors);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError({"cannot read config file " + file.string()});
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void apply_overrides(ExperimentConfig& config, const Overrides& o) {
  if (o.seeds) config.ensemble.seeds = *o.seeds;
  if (o.horizon) config.ensemble.horizon = *o.horizon;
  if (o.out) config.output.dir = *o.out;
  if (o.traces) config.output.traces = true;
  auto errors = config.ensemble.validate();
  if (config.output.dir.empty()) errors.emplace_back("output directory must be nonempty");
  if (config.schedule.family == "explicit" &&
      config.schedule.values.size() < config.ensemble.horizon &&
      config.kind != ExperimentKind::ls && config.kind != ExperimentKind::kronecker)
    errors.emplace_back("schedule.values: fewer step sizes than the horizon");
  if (!errors.empty()) throw ConfigError(errors);
}

RootProblem<double> make_problem(const ScalarProblemSpec& s, const DomainSpec& domain) {
  const double r = s.root;
  std::function<double(double)> g;
  if (s.family == "linear") {
    g = [r, a = s.slope](double x) { return a * (x - r); };
  } else if (s.family == "linear_sin") {
    g = [r, a = s.slope, b = s.amplitude](double x) { return a * (x - r) + b * std::sin(x - r); };
  } else if (s.family == "signed_sqrt") {
    g = [r, k = s.scale](double x) {
      const double d = x - r;
      return d > 0 ? k * std::sqrt(d) : (d < 0 ? -k * std::sqrt(-d) : 0.0);
    };
  } else if (s.family == "cubic") {
    g = [r, k = s.scale](double x) { return k * (x - r) * (x - r) * (x - r); };
  } else {
    throw Error("unknown problem family " + s.family);
  }
  return RootProblem<double>(std::move(g), Interval<double>{domain.lo, domain.hi}, r);
}

VectorRootProblem<double> make_problem(const MatrixProblemSpec& s) {
  return VectorRootProblem<double>(
      [A = s.matrix, root = s.root](const Eigen::VectorXd& x) -> Eigen::VectorXd {
        return A * (x - root);
      },
      s.matrix.rows(), s.root);
}

Schedule<double> make_schedule(const ScheduleSpec& s, std::size_t horizon) {
  if (s.family == "power") return Schedule<double>::power(s.c, s.gamma, s.offset, horizon);
  if (s.family == "explicit") {
    if (s.values.size() < horizon) throw Error("explicit schedule shorter than the horizon");
    return Schedule<double>::explicit_values(
        std::vector<double>(s.values.begin(), s.values.begin() + std::ptrdiff_t(horizon)));
  }
  if (s.family == "zero") return Schedule<double>::explicit_values(std::vector<double>(horizon));
  throw Error("unknown schedule family " + s.family);
}

NoiseModel make_noise(const NoiseSpec& s) {
  if (s.family == "gaussian") return NoiseModel::gaussian(s.sd);
  if (s.family == "uniform") return NoiseModel::uniform(s.sd);
  if (s.family == "rademacher") return NoiseModel::rademacher(s.sd);
  return NoiseModel::none();
}

GWeight<double> make_gweight(const std::string& name) {
  if (name == "sqrt_log") return GWeight<double>::sqrt_log();
  return GWeight<double>::identity();
}

}  // namespace stocon::cli
