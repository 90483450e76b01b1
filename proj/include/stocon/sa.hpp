#pragma once

// Robbins-Monro iterations X_n = X_{n-1} - alpha_n U_n with conditionally
// unbiased oracle samples U_n, in one and p dimensions, plus grid checks of
// the regularity conditions placed on the target map.

#include <stocon/process.hpp>
#include <stocon/random.hpp>
#include <stocon/verdict.hpp>

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace stocon {

enum class DomainPolicy { unbounded, project, reject };

template <typename Scalar>
struct Interval {
  Scalar lo = -std::numeric_limits<Scalar>::infinity();
  Scalar hi = std::numeric_limits<Scalar>::infinity();
  bool contains(Scalar x) const { return x >= lo && x <= hi; }
};

/// Deterministic scalar target g with its domain and (optionally) its root.
template <typename Scalar>
struct RootProblem {
  std::function<Scalar(Scalar)> g;
  Interval<Scalar> domain{};
  std::optional<Scalar> x_star{};

  RootProblem() = default;
  explicit RootProblem(std::function<Scalar(Scalar)> map, Interval<Scalar> dom = {},
                       std::optional<Scalar> root = std::nullopt)
      : g(std::move(map)), domain(dom), x_star(root) {
    using std::abs;
    if (x_star && !(abs(g(*x_star)) <= Scalar(1e-12)))
      throw Error("RootProblem: supplied root does not satisfy |g(x*)| <= 1e-12");
  }

  Scalar root() const { return x_star.value_or(Scalar(0)); }
};

/// Target map on R^p (or a box in it).
template <typename Scalar>
struct VectorRootProblem {
  std::function<Vector<Scalar>(const Vector<Scalar>&)> g;
  Eigen::Index dim = 1;
  std::optional<Vector<Scalar>> x_star{};

  VectorRootProblem() = default;
  VectorRootProblem(std::function<Vector<Scalar>(const Vector<Scalar>&)> map,
                    Eigen::Index p, std::optional<Vector<Scalar>> root = std::nullopt)
      : g(std::move(map)), dim(p), x_star(std::move(root)) {
    if (p < 1) throw Error("VectorRootProblem: dimension must be positive");
    if (x_star) {
      if (x_star->size() != p) throw Error("VectorRootProblem: root dimension mismatch");
      if (!(g(*x_star).norm() <= Scalar(1e-12)))
        throw Error("VectorRootProblem: supplied root does not satisfy |g(x*)| <= 1e-12");
    }
  }

  Vector<Scalar> root() const {
    return x_star.value_or(Vector<Scalar>::Zero(dim));
  }
};

/// Additive, conditionally unbiased oracle noise: U = g(x) + scale * xi.
/// `scale` is the standard deviation of xi in every family.
struct NoiseModel {
  enum class Kind { none, gaussian, uniform, rademacher };
  Kind kind = Kind::none;
  double scale = 0.0;

  static NoiseModel none() { return {Kind::none, 0.0}; }
  static NoiseModel gaussian(double sd) { return {Kind::gaussian, sd}; }
  static NoiseModel uniform(double sd) { return {Kind::uniform, sd}; }
  static NoiseModel rademacher(double sd) { return {Kind::rademacher, sd}; }

  double cond_var_bound() const { return kind == Kind::none ? 0.0 : scale * scale; }

  double draw(Rng& rng) const {
    switch (kind) {
      case Kind::gaussian:
        return scale * rng.normal();
      case Kind::uniform:
        return scale * std::sqrt(3.0) * (2.0 * rng.uniform() - 1.0);
      case Kind::rademacher:
        return scale * rng.rademacher();
      default:
        return 0.0;
    }
  }
};

/// Step sizes alpha_1..alpha_N, materialized for a horizon.
template <typename Scalar>
struct Schedule {
  std::vector<Scalar> alphas;
  std::string kind;
  // Known summability of the infinite series when the family determines it.
  std::optional<bool> sum_finite;
  std::optional<bool> sum_sq_finite;

  /// alpha_n = c / (n + offset)^gamma.
  static Schedule power(Scalar c, Scalar gamma, Scalar offset, std::size_t horizon) {
    using std::pow;
    if (!(c > Scalar(0))) throw Error("Schedule: c must be positive");
    if (!(gamma >= Scalar(0))) throw Error("Schedule: gamma must be nonnegative");
    if (!(Scalar(1) + offset > Scalar(0))) throw Error("Schedule: 1 + offset must be positive");
    Schedule s;
    s.alphas.reserve(horizon);
    for (std::size_t n = 1; n <= horizon; ++n)
      s.alphas.push_back(c / pow(Scalar(n) + offset, gamma));
    std::ostringstream os;
    os << "c/(n+" << offset << ")^" << gamma;
    s.kind = os.str();
    s.sum_finite = gamma > Scalar(1);
    s.sum_sq_finite = gamma > Scalar(0.5);
    return s;
  }

  static Schedule explicit_values(std::vector<Scalar> values) {
    for (std::size_t i = 0; i < values.size(); ++i)
      if (!(values[i] >= Scalar(0))) throw Error("Schedule: negative step size", i + 1);
    Schedule s;
    s.alphas = std::move(values);
    s.kind = "explicit";
    return s;
  }

  std::size_t horizon() const { return alphas.size(); }
  Scalar alpha(std::size_t n) const { return alphas.at(n - 1); }
  Scalar sum() const {
    Scalar t = Scalar(0);
    for (auto a : alphas) t += a;
    return t;
  }
  Scalar sum_sq() const {
    Scalar t = Scalar(0);
    for (auto a : alphas) t += a * a;
    return t;
  }
};

namespace detail {

template <typename Scalar>
Scalar place_in_domain(Scalar x, const Interval<Scalar>& dom, DomainPolicy policy,
                       std::size_t n) {
  using std::isfinite;
  if (!isfinite(x)) throw Error("rm_solve: non-finite iterate", n);
  if (dom.contains(x) || policy == DomainPolicy::unbounded) return x;
  if (policy == DomainPolicy::project) return std::clamp(x, dom.lo, dom.hi);
  throw Error("rm_solve: iterate left the domain", n);
}

}  // namespace detail

/// Scalar Robbins-Monro run. The stored mean is the exact predictable mean
/// x_{n-1} - alpha_n g(x_{n-1}); under DomainPolicy::project the projection
/// correction is absorbed by the residual.
template <typename Scalar>
ProcessPath<Scalar> rm_solve(const RootProblem<Scalar>& problem, const NoiseModel& noise,
                             const Schedule<Scalar>& schedule, Scalar x0,
                             std::size_t horizon, Rng& rng,
                             DomainPolicy policy = DomainPolicy::unbounded) {
  if (schedule.horizon() < horizon) throw Error("rm_solve: schedule shorter than horizon");
  if (!problem.domain.contains(x0)) throw Error("rm_solve: x0 outside the domain");
  std::vector<StepRecord<Scalar>> steps;
  steps.reserve(horizon);
  Scalar prev = x0;
  for (std::size_t n = 1; n <= horizon; ++n) {
    const Scalar alpha = schedule.alphas[n - 1];
    const Scalar gx = problem.g(prev);
    const Scalar sample = gx + Scalar(noise.draw(rng));
    const Scalar mean = prev - alpha * gx;
    const Scalar x = detail::place_in_domain(prev - alpha * sample, problem.domain, policy, n);
    steps.push_back({x, mean, x - mean});
    prev = x;
  }
  return ProcessPath<Scalar>(x0, std::move(steps));
}

template <typename Scalar>
ProcessPath<Scalar> rm_solve(const RootProblem<Scalar>& problem, const NoiseModel& noise,
                             const Schedule<Scalar>& schedule, Scalar x0,
                             std::size_t horizon, std::uint64_t seed,
                             DomainPolicy policy = DomainPolicy::unbounded) {
  Rng rng(seed);
  return rm_solve(problem, noise, schedule, x0, horizon, rng, policy);
}

/// Multivariate run; one noise draw per component per step, in component
/// order, so p = 1 consumes the stream exactly like rm_solve.
template <typename Scalar>
VectorProcessPath<Scalar> rm_solve_nd(const VectorRootProblem<Scalar>& problem,
                                      const NoiseModel& noise,
                                      const Schedule<Scalar>& schedule,
                                      const Vector<Scalar>& x0, std::size_t horizon,
                                      Rng& rng) {
  if (x0.size() != problem.dim) throw Error("rm_solve_nd: x0 dimension mismatch");
  if (schedule.horizon() < horizon) throw Error("rm_solve_nd: schedule shorter than horizon");
  std::vector<VectorStep<Scalar>> steps;
  steps.reserve(horizon);
  Vector<Scalar> prev = x0;
  Vector<Scalar> sample(problem.dim);
  for (std::size_t n = 1; n <= horizon; ++n) {
    const Scalar alpha = schedule.alphas[n - 1];
    const Vector<Scalar> gx = problem.g(prev);
    if (gx.size() != problem.dim) throw Error("rm_solve_nd: g returned wrong dimension", n);
    for (Eigen::Index t = 0; t < problem.dim; ++t) sample(t) = gx(t) + Scalar(noise.draw(rng));
    VectorStep<Scalar> step;
    step.m = prev - alpha * gx;
    step.x = prev - alpha * sample;
    if (!step.x.allFinite()) throw Error("rm_solve_nd: non-finite iterate", n);
    step.eps = step.x - step.m;
    prev = step.x;
    steps.push_back(std::move(step));
  }
  return VectorProcessPath<Scalar>(x0, std::move(steps));
}

template <typename Scalar>
VectorProcessPath<Scalar> rm_solve_nd(const VectorRootProblem<Scalar>& problem,
                                      const NoiseModel& noise,
                                      const Schedule<Scalar>& schedule,
                                      const Vector<Scalar>& x0, std::size_t horizon,
                                      std::uint64_t seed) {
  Rng rng(seed);
  return rm_solve_nd(problem, noise, schedule, x0, horizon, rng);
}

/// Points center +/- 10^e for e on a uniform grid of `points_per_decade`
/// steps per decade between min_magnitude and max_magnitude (inclusive).
template <typename Scalar>
std::vector<Scalar> symmetric_log_grid(Scalar center, Scalar min_magnitude,
                                       Scalar max_magnitude, std::size_t points_per_decade) {
  using std::log10;
  using std::pow;
  if (!(min_magnitude > Scalar(0)) || !(max_magnitude >= min_magnitude))
    throw Error("symmetric_log_grid: need 0 < min_magnitude <= max_magnitude");
  if (points_per_decade == 0) throw Error("symmetric_log_grid: points_per_decade must be > 0");
  const Scalar lo = log10(min_magnitude), hi = log10(max_magnitude);
  const auto count =
      static_cast<std::size_t>(std::ceil((hi - lo) * Scalar(points_per_decade))) + 1;
  std::vector<Scalar> grid;
  grid.reserve(2 * count);
  for (std::size_t i = 0; i < count; ++i) {
    const Scalar e = count == 1 ? lo : lo + (hi - lo) * Scalar(i) / Scalar(count - 1);
    const Scalar mag = pow(Scalar(10), e);
    grid.push_back(center - mag);
    grid.push_back(center + mag);
  }
  return grid;
}

template <typename Scalar>
struct EnvelopeReport {
  Scalar m_hat = std::numeric_limits<Scalar>::infinity();
  Scalar M_hat = -std::numeric_limits<Scalar>::infinity();
  std::vector<Scalar> grid_points;  // scalar case: the evaluated points
  std::vector<std::string> violations;
  bool holds() const { return violations.empty() && m_hat <= M_hat; }
};

/// Lipschitz envelope m <= g(x)/(x - x*) <= M over the grid. On each side of
/// the root the grid extrema are then polished by Brent's method between
/// their neighbouring grid points, so a smooth ratio is not under-resolved
/// by the grid spacing. A ratio <= 0 or above `ratio_cap` is a violation.
template <typename Scalar>
EnvelopeReport<Scalar> check_envelope_B3(const RootProblem<Scalar>& problem,
                                         const std::vector<Scalar>& grid,
                                         Scalar ratio_cap = Scalar(1e6)) {
  const Scalar root = problem.root();
  EnvelopeReport<Scalar> r;
  r.grid_points = grid;
  std::size_t nonpositive = 0, capped = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Scalar x = grid[i];
    if (x == root) throw Error("check_envelope_B3: grid contains the root", i);
    const Scalar ratio = problem.g(x) / (x - root);
    r.m_hat = std::min(r.m_hat, ratio);
    r.M_hat = std::max(r.M_hat, ratio);
    if (!(ratio > Scalar(0))) ++nonpositive;
    if (ratio > ratio_cap) ++capped;
  }
  auto ratio_at = [&](Scalar x) { return problem.g(x) / (x - root); };
  for (int side : {-1, 1}) {
    std::vector<Scalar> pts;
    for (auto x : grid)
      if ((x - root) * Scalar(side) > Scalar(0)) pts.push_back(x);
    if (pts.size() < 2) continue;
    std::sort(pts.begin(), pts.end());
    auto polish = [&](Scalar sign) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < pts.size(); ++i)
        if (sign * ratio_at(pts[i]) < sign * ratio_at(pts[best])) best = i;
      const Scalar a = pts[best == 0 ? 0 : best - 1];
      const Scalar b = pts[std::min(best + 1, pts.size() - 1)];
      const auto res = boost::math::tools::brent_find_minima(
          [&](Scalar x) { return sign * ratio_at(x); }, a, b,
          std::numeric_limits<Scalar>::digits / 2);
      return sign * res.second;
    };
    r.m_hat = std::min(r.m_hat, polish(Scalar(1)));
    r.M_hat = std::max(r.M_hat, polish(Scalar(-1)));
  }
  if (nonpositive) {
    std::ostringstream os;
    os << nonpositive << " grid points with g(x)/(x-x*) <= 0";
    r.violations.push_back(os.str());
  }
  if (capped) {
    std::ostringstream os;
    os << "unbounded growth: " << capped << " grid points with ratio above cap " << ratio_cap;
    r.violations.push_back(os.str());
  }
  return r;
}

/// Multivariate envelope: m_hat = inf <g(x), x>/|x|^2, M_hat = sup |g(x)|/|x|,
/// both measured relative to the root.
template <typename Scalar>
EnvelopeReport<Scalar> check_envelope_B3a(const VectorRootProblem<Scalar>& problem,
                                          const std::vector<Vector<Scalar>>& grid,
                                          Scalar ratio_cap = Scalar(1e6)) {
  const Vector<Scalar> root = problem.root();
  EnvelopeReport<Scalar> r;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Vector<Scalar> d = grid[i] - root;
    const Scalar sq = d.squaredNorm();
    if (sq == Scalar(0)) throw Error("check_envelope_B3a: grid contains the root", i);
    const Vector<Scalar> gx = problem.g(grid[i]);
    r.m_hat = std::min(r.m_hat, gx.dot(d) / sq);
    r.M_hat = std::max(r.M_hat, gx.norm() / std::sqrt(sq));
  }
  if (!(r.m_hat > Scalar(0))) {
    std::ostringstream os;
    os << "inner-product lower bound m_hat = " << r.m_hat << " is not positive";
    r.violations.push_back(os.str());
  }
  if (r.M_hat > ratio_cap) r.violations.push_back("norm ratio exceeds cap");
  return r;
}

/// Directions spread over the unit sphere (deterministic from `seed`), scaled
/// by each radius.
template <typename Scalar>
std::vector<Vector<Scalar>> sphere_grid(Eigen::Index p, std::size_t directions,
                                        const std::vector<Scalar>& radii,
                                        std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Vector<Scalar>> out;
  out.reserve(directions * radii.size());
  for (std::size_t k = 0; k < directions; ++k) {
    Vector<Scalar> d(p);
    do {
      for (Eigen::Index t = 0; t < p; ++t) d(t) = Scalar(rng.normal());
    } while (d.norm() == Scalar(0));
    d.normalize();
    for (auto r : radii) out.push_back(r * d);
  }
  return out;
}

/// Per-step contraction factor (1 - 2 alpha m + alpha^2 M^2)^(1/2).
template <typename Scalar>
Scalar contraction_factor(Scalar alpha, Scalar m, Scalar M) {
  using std::sqrt;
  if (!(m > Scalar(0)) || !(m <= M)) throw Error("contraction_factor: need 0 < m <= M");
  if (!(alpha >= Scalar(0))) throw Error("contraction_factor: alpha must be nonnegative");
  const Scalar radicand = Scalar(1) - Scalar(2) * alpha * m + alpha * alpha * M * M;
  if (radicand < Scalar(0))
    throw Error("contraction_factor: step size too large for the envelope");
  return sqrt(radicand);
}

/// The ratio sandwich 1 - M alpha_n <= m_n/(x_{n-1} - x*) <= 1 - m alpha_n,
/// checked from the first step with M alpha_n <= 1.
template <typename Scalar>
ConditionVerdict check_sandwich(const ProcessPath<Scalar>& path, Scalar root,
                                const Schedule<Scalar>& schedule, Scalar m_hat,
                                Scalar M_hat) {
  VerdictBuilder vb("ratio_sandwich");
  std::size_t start = 0, exercised = 0;
  for (std::size_t n = 1; n <= path.horizon(); ++n) {
    const Scalar alpha = schedule.alpha(n);
    if (!start) {
      if (M_hat * alpha > Scalar(1)) continue;
      start = n;
    }
    const Scalar dev = path.x(n - 1) - root;
    if (dev == Scalar(0)) continue;
    ++exercised;
    const Scalar ratio = (path.m(n) - root) / dev;
    const Scalar lo = Scalar(1) - M_hat * alpha;
    const Scalar hi = Scalar(1) - m_hat * alpha;
    vb.observe(n, static_cast<double>(std::min(ratio - lo, hi - ratio)),
               static_cast<double>(rounding_slack(Scalar(1))));
  }
  std::ostringstream os;
  os << "checked from step " << start;
  vb.note(os.str());
  vb.set_coverage(path.horizon() ? double(exercised) / double(path.horizon()) : 1.0);
  return vb.finish();
}

/// |m_n - x*| / |x_{n-1} - x*| <= contraction_factor(alpha_n, m, M) at every
/// step with a nonzero predecessor.
template <typename Scalar>
ConditionVerdict check_contraction_nd(const VectorProcessPath<Scalar>& path,
                                      const Vector<Scalar>& root,
                                      const Schedule<Scalar>& schedule, Scalar m, Scalar M) {
  VerdictBuilder vb("contraction_factor");
  for (std::size_t n = 1; n <= path.horizon(); ++n) {
    const Scalar prev = (path.x(n - 1) - root).norm();
    if (prev == Scalar(0)) continue;
    const Scalar ratio = (path.m(n) - root).norm() / prev;
    const Scalar k = contraction_factor(schedule.alpha(n), m, M);
    vb.observe(n, static_cast<double>(k - ratio), static_cast<double>(rounding_slack(k)));
  }
  return vb.finish();
}

struct BlumK {
  double delta1;
  double delta2;
  double k;  // inf |g| over delta1 <= |x - x*| <= delta2 (grid plus endpoints)
};

struct BlumVerdict {
  ConditionVerdict c1, c2, c3;
  std::vector<BlumK> k_values;
  bool holds() const { return c1.holds && c2.holds && c3.holds; }
};

/// Linear growth, sign agreement and positive infimum on annuli, on grid.
/// An annulus infimum at or below `k_floor` counts as zero.
template <typename Scalar>
BlumVerdict check_blum_C(const RootProblem<Scalar>& problem, const std::vector<Scalar>& grid,
                         Scalar c, Scalar d,
                         const std::vector<std::pair<Scalar, Scalar>>& delta_pairs,
                         Scalar k_floor = Scalar(1e-6)) {
  using std::abs;
  for (const auto& [d1, d2] : delta_pairs)
    if (!(d1 > Scalar(0)) || !(d1 < d2)) throw Error("check_blum_C: need 0 < delta1 < delta2");
  const Scalar root = problem.root();
  BlumVerdict out;
  VerdictBuilder c1("C1"), c2("C2"), c3("C3");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Scalar dev = grid[i] - root;
    const Scalar gx = problem.g(grid[i]);
    c1.observe(i, static_cast<double>(c + d * abs(dev) - abs(gx)));
    if (dev != Scalar(0)) {
      const bool agree = (dev > Scalar(0) && gx > Scalar(0)) || (dev < Scalar(0) && gx < Scalar(0));
      if (!agree) c2.violate(i, "sign of g disagrees with sign of x - x*");
    }
  }
  for (std::size_t j = 0; j < delta_pairs.size(); ++j) {
    const auto [d1, d2] = delta_pairs[j];
    Scalar inf = std::numeric_limits<Scalar>::infinity();
    auto visit = [&](Scalar dev) { inf = std::min(inf, abs(problem.g(root + dev))); };
    for (const Scalar x : grid) {
      const Scalar mag = abs(x - root);
      if (mag >= d1 && mag <= d2) visit(x - root);
    }
    for (const Scalar e : {d1, -d1, d2, -d2}) visit(e);
    out.k_values.push_back({double(d1), double(d2), double(inf)});
    c3.observe(j, static_cast<double>(inf - k_floor));
    if (!(inf > k_floor)) c3.violate(j, "annulus infimum of |g| is zero on grid");
  }
  out.c1 = c1.finish();
  out.c2 = c2.finish();
  out.c3 = c3.finish();
  return out;
}

}  // namespace stocon
