#pragma once

// Recursive least squares for controlled linear models y_n = x_n' beta + u_n,
// the G-weighted score process z_n = G_n^{-1} v_n, and the conditions that
// decide per-component consistency.

#include <stocon/process.hpp>
#include <stocon/random.hpp>
#include <stocon/sa.hpp>
#include <stocon/stats.hpp>
#include <stocon/verdict.hpp>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace stocon {

/// Running least-squares state. `b` is meaningful once `singular` is false.
template <typename Scalar>
class LsState {
 public:
  static constexpr std::size_t kRebaseInterval = 512;

  explicit LsState(Eigen::Index p)
      : A_(Matrix<Scalar>::Zero(p, p)),
        A_inv_(Matrix<Scalar>::Zero(p, p)),
        xty_(Vector<Scalar>::Zero(p)),
        d2_(Vector<Scalar>::Zero(p)),
        b_(Vector<Scalar>::Constant(p, std::numeric_limits<Scalar>::quiet_NaN())) {
    if (p < 1) throw Error("LsState: dimension must be positive");
  }

  void update(const Vector<Scalar>& x, Scalar y) {
    if (x.size() != dim()) throw Error("ls_update: regressor dimension mismatch", n_ + 1);
    ++n_;
    A_.noalias() += x * x.transpose();
    d2_ += x.cwiseAbs2();
    xty_ += y * x;
    if (singular_) {
      Eigen::FullPivLU<Matrix<Scalar>> lu(A_);
      if (lu.rank() < dim()) return;
      singular_ = false;
      n0_ = n_;
      rebase();
    } else if (++since_rebase_ >= kRebaseInterval) {
      rebase();
    } else {
      // Sherman-Morrison: (A + x x')^{-1} = B - (B x)(B x)' / (1 + x' B x),
      // then the gain form b += A^{-1} x (y - x' b) of b = A^{-1} X'Y.
      const Vector<Scalar> bx = A_inv_ * x;
      A_inv_.noalias() -= (bx * bx.transpose()) / (Scalar(1) + x.dot(bx));
      b_.noalias() += (A_inv_ * x) * (y - x.dot(b_));
    }
  }

  Eigen::Index dim() const { return A_.rows(); }
  std::size_t n() const { return n_; }
  bool singular() const { return singular_; }
  /// First index at which A_n became nonsingular.
  std::optional<std::size_t> n0() const { return n0_; }

  const Matrix<Scalar>& A() const { return A_; }
  const Matrix<Scalar>& A_inv() const { return A_inv_; }
  const Vector<Scalar>& xty() const { return xty_; }
  const Vector<Scalar>& d2() const { return d2_; }
  const Vector<Scalar>& b() const { return b_; }

  /// ||A A_inv - I|| in the max-entry sense; zero while singular.
  Scalar inverse_residual() const {
    if (singular_) return Scalar(0);
    return (A_ * A_inv_ - Matrix<Scalar>::Identity(dim(), dim())).cwiseAbs().maxCoeff();
  }

 private:
  void rebase() {
    const auto ldlt = A_.ldlt();
    A_inv_ = ldlt.solve(Matrix<Scalar>::Identity(dim(), dim()));
    A_inv_ = (A_inv_ + A_inv_.transpose()) / Scalar(2);
    b_ = ldlt.solve(xty_);
    since_rebase_ = 0;
  }

  Matrix<Scalar> A_;
  Matrix<Scalar> A_inv_;
  Vector<Scalar> xty_;
  Vector<Scalar> d2_;
  Vector<Scalar> b_;
  std::size_t n_ = 0;
  std::size_t since_rebase_ = 0;
  bool singular_ = true;
  std::optional<std::size_t> n0_;
};

template <typename Scalar>
LsState<Scalar> ls_update(LsState<Scalar> state, const Vector<Scalar>& x, Scalar y) {
  state.update(x, y);
  return state;
}

/// ||C||_inf = p * max |c_ij| for a p x p matrix.
template <typename Derived>
typename Derived::Scalar matrix_norm_inf(const Eigen::MatrixBase<Derived>& C) {
  if (C.rows() != C.cols()) throw Error("matrix_norm_inf: matrix must be square");
  if (C.rows() == 0) return typename Derived::Scalar(0);
  return typename Derived::Scalar(C.rows()) * C.cwiseAbs().maxCoeff();
}

/// int_c^inf h(x) dx, given xh(x) = x h(x). With x = c e^s the integral is
/// int_0^inf xh(c e^s) ds; the body up to the overflow limit of x uses
/// adaptive Gauss-Kronrod and the remainder is extrapolated from the local
/// power-law decay of the integrand in log x. Returns nullopt when the quadrature
/// fails or the integrand decays no faster than s^-1.05.
template <typename Scalar>
std::optional<Scalar> tail_integral_scaled(const std::function<Scalar(Scalar)>& xh, Scalar c) {
  using std::exp;
  using std::isfinite;
  using std::log;
  if (!(c > Scalar(0))) throw Error("tail_integral: lower limit must be positive");
  const Scalar s_max = log(std::numeric_limits<Scalar>::max()) - log(c) - Scalar(2);
  if (!(s_max > Scalar(1))) throw Error("tail_integral: lower limit too large");
  const Scalar log_c = log(c);
  auto phi = [&](Scalar s) {
    const Scalar x = exp(log_c + s);
    const Scalar v = xh(x);
    if (!isfinite(v)) throw Error("tail_integral: non-finite integrand");
    return v;
  };
  try {
    Scalar error = 0;
    const Scalar body = boost::math::quadrature::gauss_kronrod<Scalar, 31>::integrate(
        phi, Scalar(0), s_max, 25, Scalar(1e-12), &error);
    if (!isfinite(body) || !(error <= Scalar(1e-8) * (Scalar(1) + std::abs(body))))
      return std::nullopt;
    // Local power law in u = log x between 0.9 u_max and u_max.
    const Scalar u_max = log_c + s_max;
    const Scalar u_near = Scalar(0.9) * u_max;
    const Scalar f_near = phi(u_near - log_c);
    const Scalar f_end = phi(s_max);
    if (f_end == Scalar(0)) return body;
    if (!(f_near > Scalar(0)) || f_end < Scalar(0)) return std::nullopt;
    const Scalar decay = log(f_near / f_end) / log(u_max / u_near);
    if (!(decay > Scalar(1.05))) return std::nullopt;
    return body + f_end * u_max / (decay - Scalar(1));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

/// int_c^inf h(x) dx for a plain integrand h.
template <typename Scalar>
std::optional<Scalar> tail_integral(const std::function<Scalar(Scalar)>& h, Scalar c) {
  return tail_integral_scaled<Scalar>([&](Scalar x) { return x * h(x); }, c);
}

/// int_c^inf g(x)^-2 dx, evaluated as (sqrt(x) / g(x))^2 on the log scale so
/// that neither x nor g(x)^2 overflows.
template <typename Scalar>
std::optional<Scalar> inverse_square_tail(const std::function<Scalar(Scalar)>& g, Scalar c) {
  return tail_integral_scaled<Scalar>(
      [&](Scalar x) {
        const Scalar r = std::sqrt(x) / g(x);
        return r * r;
      },
      c);
}

/// Nondecreasing positive weight g with c -> int_c^inf g(x)^-2 dx.
template <typename Scalar>
struct GWeight {
  std::string name;
  std::function<Scalar(Scalar)> g;
  std::function<std::optional<Scalar>(Scalar)> integral_tail;

  /// g(x) = x; the tail integral is 1/c.
  static GWeight identity() {
    return {"identity", [](Scalar x) { return x; },
            [](Scalar c) -> std::optional<Scalar> { return Scalar(1) / c; }};
  }

  /// g(x) = sqrt(x) (1 + log(1 + x)); tail integral by quadrature.
  static GWeight sqrt_log() {
    auto g = [](Scalar x) { return std::sqrt(x) * (Scalar(1) + std::log1p(x)); };
    return {"sqrt_log", g, [g](Scalar c) {
              return inverse_square_tail<Scalar>(g, c);
            }};
  }

  /// Arbitrary g; tail integral by quadrature.
  static GWeight custom(std::string name, std::function<Scalar(Scalar)> g) {
    return {std::move(name), g, [g](Scalar c) {
              return inverse_square_tail<Scalar>(g, c);
            }};
  }
};

/// Checks g is positive and nondecreasing on a log grid of [lo, hi] and
/// that its tail integral is finite at c.
template <typename Scalar>
ConditionVerdict check_gweight(const GWeight<Scalar>& gw, Scalar lo, Scalar hi, Scalar c,
                               std::size_t points = 2000) {
  VerdictBuilder vb("g_weight");
  Scalar prev = -std::numeric_limits<Scalar>::infinity();
  for (std::size_t i = 0; i < points; ++i) {
    const Scalar x = lo * std::pow(hi / lo, Scalar(i) / Scalar(points - 1));
    const Scalar v = gw.g(x);
    if (!(v > Scalar(0))) vb.violate(i, "g not positive");
    if (v < prev) vb.violate(i, "g decreases on grid");
    prev = v;
  }
  const auto tail = gw.integral_tail(c);
  if (!tail) vb.violate(points, "tail integral of g^-2 diverges");
  else {
    std::ostringstream os;
    os << "int_" << c << "^inf g^-2 = " << *tail;
    vb.note(os.str());
  }
  return vb.finish();
}

/// Numerical check that g(x) = sqrt(x) g*(x) with g* growing: g* must be
/// nondecreasing on a log grid of [lo, hi] and gain at least a factor 10.
template <typename Scalar>
ConditionVerdict check_sqrt_growth(const GWeight<Scalar>& gw, Scalar lo = Scalar(1),
                                   Scalar hi = Scalar(1e12), std::size_t points = 200) {
  VerdictBuilder vb("g_over_sqrt_growth");
  Scalar first = 0, prev = 0;
  for (std::size_t i = 0; i < points; ++i) {
    const Scalar x = lo * std::pow(hi / lo, Scalar(i) / Scalar(points - 1));
    const Scalar gs = gw.g(x) / std::sqrt(x);
    if (i == 0) first = gs;
    else if (gs < prev) vb.violate(i, "g(x)/sqrt(x) decreases on grid");
    prev = gs;
  }
  vb.observe(points, static_cast<double>(prev - Scalar(10) * first));
  std::ostringstream os;
  os << "g*(" << lo << ") = " << first << ", g*(" << hi << ") = " << prev;
  vb.note(os.str());
  return vb.finish();
}

template <typename Scalar>
struct IntegralBound {
  Scalar s_n;              // sum_{n<=N} a_n / f(A_n)
  Scalar bound;            // a_1 / f(A_1) + int_{a_1}^inf 1/f
  Scalar displayed_bound;  // a_1 / A_1 + int_{a_1}^inf 1/f
  Scalar tail;             // int_{a_1}^inf 1/f
  bool holds() const { return s_n <= bound; }
};

/// Partial sum S_N and its integral bound. `tail` overrides the quadrature
/// of int_{a_1}^inf 1/f when supplied.
template <typename Scalar>
IntegralBound<Scalar> integral_bound(const std::vector<Scalar>& a,
                                     const std::function<Scalar(Scalar)>& f, std::size_t N,
                                     std::optional<Scalar> tail = std::nullopt) {
  if (a.empty() || !(a[0] > Scalar(0))) throw Error("integral_bound: a_1 must be positive");
  if (N > a.size()) throw Error("integral_bound: N exceeds sequence length");
  for (std::size_t i = 0; i < N; ++i)
    if (a[i] < Scalar(0)) throw Error("integral_bound: negative term", i + 1);
  if (!tail) tail = tail_integral_scaled<Scalar>([&](Scalar x) { return x / f(x); }, a[0]);
  if (!tail) throw Error("integral_bound: tail integral of 1/f diverges");
  IntegralBound<Scalar> r{};
  Scalar running = Scalar(0);
  for (std::size_t i = 0; i < N; ++i) {
    running += a[i];
    r.s_n += a[i] / f(running);
  }
  r.tail = *tail;
  r.bound = a[0] / f(a[0]) + *tail;
  r.displayed_bound = a[0] / a[0] + *tail;
  return r;
}

/// Observed history of a regression run.
struct LsRun {
  MatrixXd X;     // n x p, row i is x_{i+1}'
  VectorXd y;
  VectorXd u;
  VectorXd beta;
  std::size_t n() const { return static_cast<std::size_t>(X.rows()); }
};

/// Named regressor families. Every family draws x_n before u_n, so x_n is
/// predictable with respect to the noise.
enum class DesignFamily {
  constant,        // p = 1: x_n = 1
  geometric_first, // p = 2: x_n = (2^{-n}, 1)
  persistent,      // x_n(t) = cos(n w + t pi / p) + s xi, w the golden angle
  adaptive         // p = 2: x_n = (1, tanh(y_{n-1}) + s xi)
};

struct RegressionModel {
  VectorXd beta;
  DesignFamily design = DesignFamily::persistent;
  double design_noise = 0.1;
  NoiseModel noise = NoiseModel::gaussian(1.0);

  Eigen::Index dim() const { return beta.size(); }

  void validate() const {
    const auto p = dim();
    if (p < 1) throw Error("RegressionModel: beta must be nonempty");
    if (design == DesignFamily::constant && p != 1)
      throw Error("RegressionModel: constant design needs p = 1");
    if ((design == DesignFamily::geometric_first || design == DesignFamily::adaptive) && p != 2)
      throw Error("RegressionModel: this design needs p = 2");
  }

  VectorXd regressor(std::size_t n, double last_y, Rng& rng) const {
    const auto p = dim();
    VectorXd x(p);
    switch (design) {
      case DesignFamily::constant:
        x(0) = 1.0;
        break;
      case DesignFamily::geometric_first:
        x(0) = std::ldexp(1.0, -static_cast<int>(std::min<std::size_t>(n, 1074)));
        x(1) = 1.0;
        break;
      case DesignFamily::persistent: {
        const double w = std::numbers::pi * (3.0 - std::sqrt(5.0));
        for (Eigen::Index t = 0; t < p; ++t)
          x(t) = std::cos(double(n) * w + double(t) * std::numbers::pi / double(p)) +
                 design_noise * rng.normal();
        break;
      }
      case DesignFamily::adaptive:
        x(0) = 1.0;
        x(1) = std::tanh(last_y) + design_noise * rng.normal();
        break;
    }
    return x;
  }
};

/// Streams one regression run through `visit(n, x, y, u)`.
template <typename Visit>
void simulate_ls_stream(const RegressionModel& model, std::size_t horizon, Rng& rng,
                        Visit&& visit) {
  model.validate();
  double last_y = 0.0;
  for (std::size_t n = 1; n <= horizon; ++n) {
    const VectorXd x = model.regressor(n, last_y, rng);
    const double u = model.noise.draw(rng);
    const double y = x.dot(model.beta) + u;
    visit(n, x, y, u);
    last_y = y;
  }
}

inline LsRun simulate_ls(const RegressionModel& model, std::size_t horizon, Rng& rng) {
  LsRun run;
  run.beta = model.beta;
  run.X.resize(static_cast<Eigen::Index>(horizon), model.dim());
  run.y.resize(static_cast<Eigen::Index>(horizon));
  run.u.resize(static_cast<Eigen::Index>(horizon));
  simulate_ls_stream(model, horizon, rng, [&](std::size_t n, const VectorXd& x, double y, double u) {
    const auto i = static_cast<Eigen::Index>(n - 1);
    run.X.row(i) = x.transpose();
    run.y(i) = y;
    run.u(i) = u;
  });
  return run;
}

/// z_n(t) = v_n(t) / g(d^2_{n,t}) with v_n = v_{n-1} + u_n x_n. The stored
/// mean is v_{n-1}(t) / g(d^2_{n,t}); components with zero energy stay at 0.
template <typename Scalar>
VectorProcessPath<Scalar> z_process(const Matrix<Scalar>& X, const Vector<Scalar>& u,
                                    const GWeight<Scalar>& gw) {
  const auto n = X.rows();
  const auto p = X.cols();
  if (n == 0) throw Error("z_process: empty history");
  if (u.size() != n) throw Error("z_process: one noise value per row required");
  Vector<Scalar> v = Vector<Scalar>::Zero(p);
  Vector<Scalar> d2 = Vector<Scalar>::Zero(p);
  std::vector<VectorStep<Scalar>> steps;
  steps.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    VectorStep<Scalar> s{Vector<Scalar>::Zero(p), Vector<Scalar>::Zero(p),
                         Vector<Scalar>::Zero(p)};
    for (Eigen::Index t = 0; t < p; ++t) {
      const Scalar prev_v = v(t);
      v(t) += u(i) * X(i, t);
      d2(t) += X(i, t) * X(i, t);
      if (d2(t) == Scalar(0)) continue;
      const Scalar gd = gw.g(d2(t));
      s.x(t) = v(t) / gd;
      s.m(t) = prev_v / gd;
    }
    s.eps = s.x - s.m;
    steps.push_back(std::move(s));
  }
  return VectorProcessPath<Scalar>(Vector<Scalar>::Zero(p), std::move(steps));
}

/// sigma^2 sum_t x_{nt}^2 / g^2(d^2_{n,t}) per step: the bound on
/// E[eps_n' eps_n | F_{n-1}] for the z-process.
template <typename Scalar>
std::vector<Scalar> z_variance_bounds(const Matrix<Scalar>& X, const GWeight<Scalar>& gw,
                                      Scalar sigma2) {
  const auto p = X.cols();
  Vector<Scalar> d2 = Vector<Scalar>::Zero(p);
  std::vector<Scalar> out;
  out.reserve(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    Scalar total = Scalar(0);
    for (Eigen::Index t = 0; t < p; ++t) {
      d2(t) += X(i, t) * X(i, t);
      if (d2(t) == Scalar(0)) continue;
      const Scalar gd = gw.g(d2(t));
      total += X(i, t) * X(i, t) / (gd * gd);
    }
    out.push_back(sigma2 * total);
  }
  return out;
}

/// sigma^2 times the sum over components of the integral bound applied to
/// the column energies (leading zero-energy rows of a column are dropped).
template <typename Scalar>
Scalar z_variance_total_bound(const Matrix<Scalar>& X, const GWeight<Scalar>& gw,
                              Scalar sigma2) {
  Scalar total = Scalar(0);
  for (Eigen::Index t = 0; t < X.cols(); ++t) {
    std::vector<Scalar> a;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const Scalar e = X(i, t) * X(i, t);
      if (a.empty() && e == Scalar(0)) continue;
      a.push_back(e);
    }
    if (a.empty()) continue;
    auto g2 = [&](Scalar x) { return gw.g(x) * gw.g(x); };
    const auto tail = gw.integral_tail(a[0]);
    total += integral_bound<Scalar>(a, g2, a.size(), tail).bound;
  }
  return sigma2 * total;
}

struct EVerdicts {
  ConditionVerdict e1, e2, e3, e4, e5;
  std::optional<std::size_t> n0;
  double kappa = std::numeric_limits<double>::quiet_NaN();  // sup ||A^-1 G||_inf
};

struct EOptions {
  double kappa_cap = 1e6;
  double energy_threshold = 10.0;
  double tail_c = 1.0;  // lower limit for the g^-2 tail integral
};

/// E1/E2 are spot checks of the declared noise against the realized u:
/// |mean u| <= 4 sqrt(sigma2 / n) and sample variance <= sigma2 (1 + 4 sqrt(2/n)).
inline EVerdicts check_E(const LsRun& run, const GWeight<double>& gw, double sigma2,
                         const EOptions& opts = {}) {
  EVerdicts out;
  const auto n = run.n();
  const auto p = run.X.cols();
  if (n == 0) throw Error("check_E: empty run");

  VerdictBuilder e1("E1"), e2("E2"), e3("E3"), e4("E4"), e5("E5");
  const double mean = run.u.mean();
  const double var = n > 1 ? (run.u.array() - mean).square().sum() / double(n - 1) : 0.0;
  e1.observe(n, 4.0 * std::sqrt(sigma2 / double(n)) - std::abs(mean));
  if (!run.u.allFinite()) e1.violate(n, "non-finite noise");
  e2.observe(n, sigma2 * (1.0 + 4.0 * std::sqrt(2.0 / double(n))) - var);

  LsState<double> state(p);
  double kappa = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    state.update(run.X.row(r).transpose(), run.y(r));
    if (state.singular()) continue;
    VectorXd gdiag(p);
    for (Eigen::Index t = 0; t < p; ++t) gdiag(t) = gw.g(state.d2()(t));
    const double norm = matrix_norm_inf(state.A_inv() * gdiag.asDiagonal());
    kappa = std::max(kappa, norm);
  }
  out.n0 = state.n0();
  if (!out.n0) e3.violate(n, "A_n singular over the whole horizon");
  else {
    std::ostringstream os;
    os << "nonsingular from n0 = " << *out.n0;
    e3.note(os.str());
  }

  if (out.n0) {
    out.kappa = kappa;
    e4.observe(n, opts.kappa_cap - kappa);
    std::ostringstream os;
    os << "sup ||A^-1 G||_inf = " << kappa;
    e4.note(os.str());
  } else {
    e4.not_applicable(n, "no nonsingular A_n");
  }
  if (!gw.integral_tail(opts.tail_c)) e4.violate(n, "tail integral of g^-2 diverges");

  for (Eigen::Index t = 0; t < p; ++t)
    e5.observe(static_cast<std::size_t>(t), state.d2()(t) - opts.energy_threshold);

  out.e1 = e1.finish();
  out.e2 = e2.finish();
  out.e3 = e3.finish();
  out.e4 = e4.finish();
  out.e5 = e5.finish();
  return out;
}

/// Per-seed summary of a regression run used by the partition analysis.
struct LsSeedSummary {
  VectorXd d2_final;
  VectorXd b_final;
  VectorXd tail_max_abs_error;  // max over the final window of |b_n(t) - beta_t|
  VectorXd tail_oscillation;    // max - min of b_n(t) over the final window
};

/// Replays a run through LsState and records the final energies, the final
/// estimate, and the per-component error and oscillation of b_n over the
/// last `tail_fraction` of the horizon (steps before n0 are skipped).
inline LsSeedSummary ls_seed_summary(const LsRun& run, double tail_fraction) {
  if (!(tail_fraction > 0.0 && tail_fraction < 1.0))
    throw Error("ls_seed_summary: tail_fraction must lie in (0, 1)");
  const auto n = run.n();
  const auto p = run.X.cols();
  const auto tail = static_cast<std::size_t>(std::ceil(tail_fraction * double(n)));
  const std::size_t tail_start = n - std::min(tail, n) + 1;
  LsState<double> state(p);
  VectorXd hi = VectorXd::Constant(p, -std::numeric_limits<double>::infinity());
  VectorXd lo = VectorXd::Constant(p, std::numeric_limits<double>::infinity());
  VectorXd err = VectorXd::Zero(p);
  bool seen = false;
  for (std::size_t i = 1; i <= n; ++i) {
    const auto r = static_cast<Eigen::Index>(i - 1);
    state.update(run.X.row(r).transpose(), run.y(r));
    if (i < tail_start || state.singular()) continue;
    seen = true;
    hi = hi.cwiseMax(state.b());
    lo = lo.cwiseMin(state.b());
    err = err.cwiseMax((state.b() - run.beta).cwiseAbs());
  }
  LsSeedSummary s;
  s.d2_final = state.d2();
  s.b_final = state.b();
  if (seen) {
    s.tail_max_abs_error = err;
    s.tail_oscillation = hi - lo;
  } else {
    s.tail_max_abs_error = VectorXd::Constant(p, std::numeric_limits<double>::infinity());
    s.tail_oscillation = VectorXd::Constant(p, std::numeric_limits<double>::infinity());
  }
  return s;
}

enum class ComponentClass { consistent, finite_random_limit, undetermined };

inline const char* to_string(ComponentClass c) {
  switch (c) {
    case ComponentClass::consistent:
      return "consistent";
    case ComponentClass::finite_random_limit:
      return "finite_random_limit";
    default:
      return "undetermined";
  }
}

struct PartitionOptions {
  double energy_threshold = 10.0;
  double tol_consistent = 0.05;
  double tol_cauchy = 1e-3;
  double fraction = 0.95;
  double dispersion_ratio = 3.0;
};

struct PartitionReport {
  std::size_t q = 0;                       // number of finite-energy components
  std::vector<bool> finite_energy;         // per component
  std::vector<ComponentClass> component_verdicts;
  std::vector<double> dispersion;          // cross-seed sd of b_final(t)
  std::vector<double> consistent_fraction; // seeds with tail error <= tol_consistent
  std::vector<double> cauchy_fraction;     // seeds with tail oscillation <= tol_cauchy
};

inline PartitionReport partition_analysis(const std::vector<LsSeedSummary>& seeds,
                                          const PartitionOptions& opts = {}) {
  if (seeds.size() < 30) throw Error("partition_analysis: need at least 30 seeds");
  const auto p = seeds.front().d2_final.size();
  PartitionReport r;
  r.finite_energy.assign(static_cast<std::size_t>(p), false);
  for (Eigen::Index t = 0; t < p; ++t)
    r.finite_energy[t] = seeds.front().d2_final(t) < opts.energy_threshold;
  for (std::size_t s = 1; s < seeds.size(); ++s)
    for (Eigen::Index t = 0; t < p; ++t)
      if ((seeds[s].d2_final(t) < opts.energy_threshold) != r.finite_energy[t])
        throw Error("partition_analysis: design not energy-stable", s);
  for (bool f : r.finite_energy) r.q += f ? 1 : 0;

  const double count = double(seeds.size());
  for (Eigen::Index t = 0; t < p; ++t) {
    std::vector<double> finals;
    double ok = 0, cauchy = 0;
    for (const auto& s : seeds) {
      finals.push_back(s.b_final(t));
      if (s.tail_max_abs_error(t) <= opts.tol_consistent) ok += 1;
      if (s.tail_oscillation(t) <= opts.tol_cauchy) cauchy += 1;
    }
    r.dispersion.push_back(limit_dispersion(finals));
    r.consistent_fraction.push_back(ok / count);
    r.cauchy_fraction.push_back(cauchy / count);
  }

  double consistent_dispersion = 0.0;
  bool any_consistent = false;
  r.component_verdicts.resize(static_cast<std::size_t>(p), ComponentClass::undetermined);
  for (Eigen::Index t = 0; t < p; ++t) {
    if (r.finite_energy[t]) continue;
    if (r.consistent_fraction[t] >= opts.fraction) {
      r.component_verdicts[t] = ComponentClass::consistent;
      consistent_dispersion = std::max(consistent_dispersion, r.dispersion[t]);
      any_consistent = true;
    }
  }
  for (Eigen::Index t = 0; t < p; ++t) {
    if (!r.finite_energy[t]) continue;
    const bool cauchy = r.cauchy_fraction[t] == 1.0;
    const bool spread = any_consistent
                            ? r.dispersion[t] > opts.dispersion_ratio * consistent_dispersion
                            : r.dispersion[t] > 0.0;
    if (cauchy && spread) r.component_verdicts[t] = ComponentClass::finite_random_limit;
  }
  return r;
}

}  // namespace stocon
