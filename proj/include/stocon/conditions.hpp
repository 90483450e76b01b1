#pragma once

// Pathwise checks of the nonexpansive / contractive conditions against the
// exact predictable means stored on a path. Violations are verdicts, never
// exceptions.

#include <stocon/process.hpp>
#include <stocon/verdict.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <variant>
#include <vector>

namespace stocon {

/// 0 <= m_n / x_{n-1} <= 1 + alpha_n with summable alphas.
template <typename Scalar>
struct NonexpansiveProfile {
  std::vector<Scalar> alphas;  // alphas[0] is alpha_1
  Scalar alpha_sum_cap = std::numeric_limits<Scalar>::infinity();

  static NonexpansiveProfile constant(Scalar alpha, std::size_t horizon,
                                      Scalar cap = std::numeric_limits<Scalar>::infinity()) {
    return {std::vector<Scalar>(horizon, alpha), cap};
  }
};

/// 0 <= m_n / x_{n-1} <= k_n with sum (1 - k_i) reaching divergence_target.
template <typename Scalar>
struct ContractiveProfile {
  std::vector<Scalar> ks;
  Scalar divergence_target = Scalar(5);

  static ContractiveProfile constant(Scalar k, std::size_t horizon,
                                     Scalar target = Scalar(5)) {
    return {std::vector<Scalar>(horizon, k), target};
  }
};

namespace detail {

template <typename Scalar>
void require_cover(std::size_t profile_len, std::size_t horizon, const char* who) {
  if (profile_len < horizon) {
    std::ostringstream os;
    os << who << ": profile covers " << profile_len << " steps, path has " << horizon;
    throw Error(os.str());
  }
}

/// Ratio clause shared by the scalar conditions: lower <= m_n/x_{n-1} <= upper_n
/// at every step whose predecessor is nonzero-class.
template <typename Scalar, typename Upper>
void check_ratio(const ProcessPath<Scalar>& path, Upper upper_at, VerdictBuilder& vb) {
  std::size_t exercised = 0;
  for (std::size_t n = 1; n <= path.horizon(); ++n) {
    if (path.is_zero(n - 1)) continue;
    ++exercised;
    const Scalar ratio = path.m(n) / path.x(n - 1);
    const Scalar upper = upper_at(n);
    const double margin = static_cast<double>(std::min(ratio, upper - ratio));
    vb.observe(n, margin, static_cast<double>(rounding_slack(upper)));
  }
  vb.set_coverage(path.horizon() ? double(exercised) / double(path.horizon()) : 1.0);
}

}  // namespace detail

template <typename Scalar>
ConditionVerdict check_A1(const ProcessPath<Scalar>& path,
                          const NonexpansiveProfile<Scalar>& profile) {
  detail::require_cover<Scalar>(profile.alphas.size(), path.horizon(), "check_A1");
  VerdictBuilder vb("A1");
  Scalar total = Scalar(0);
  for (std::size_t i = 0; i < path.horizon(); ++i) {
    if (profile.alphas[i] < Scalar(0)) throw Error("check_A1: negative alpha", i + 1);
    total += profile.alphas[i];
  }
  detail::check_ratio(path, [&](std::size_t n) { return Scalar(1) + profile.alphas[n - 1]; },
                      vb);
  if (total > profile.alpha_sum_cap) {
    std::ostringstream os;
    os << "sum of alphas " << total << " exceeds cap " << profile.alpha_sum_cap;
    vb.violate(path.horizon(), os.str());
  }
  return vb.finish();
}

template <typename Scalar>
ConditionVerdict check_A2(const ProcessPath<Scalar>& path,
                          const ContractiveProfile<Scalar>& profile) {
  detail::require_cover<Scalar>(profile.ks.size(), path.horizon(), "check_A2");
  VerdictBuilder vb("A2");
  Scalar divergence = Scalar(0);
  for (std::size_t i = 0; i < path.horizon(); ++i) {
    const Scalar k = profile.ks[i];
    if (k < Scalar(0) || k > Scalar(1)) throw Error("check_A2: k outside [0, 1]", i + 1);
    divergence += Scalar(1) - k;
  }
  detail::check_ratio(path, [&](std::size_t n) { return profile.ks[n - 1]; }, vb);
  std::ostringstream os;
  os << "sum(1-k) = " << divergence << " (target " << profile.divergence_target << ")";
  if (divergence < profile.divergence_target)
    vb.violate(path.horizon(), "divergence clause unmet: " + os.str());
  else
    vb.note(os.str());
  return vb.finish();
}

/// max |U_n| over the last `tail_window` steps whose predecessor is
/// zero-class must not exceed `tol`. Vacuous when no such step exists.
template <typename Scalar>
ConditionVerdict check_A3(const ProcessPath<Scalar>& path, std::size_t tail_window,
                          Scalar tol) {
  using std::abs;
  if (tail_window > path.horizon()) throw Error("check_A3: tail window exceeds horizon");
  VerdictBuilder vb("A3");
  const std::size_t first = path.horizon() - tail_window + 1;
  std::size_t exercised = 0;
  for (std::size_t n = first; n <= path.horizon(); ++n) {
    if (!path.is_zero(n - 1)) continue;
    ++exercised;
    vb.observe(n, static_cast<double>(tol - abs(path.m(n))));
  }
  vb.set_coverage(tail_window ? double(exercised) / double(tail_window) : 0.0);
  if (exercised == 0) vb.note("vacuous: no zero-class predecessors in the tail");
  return vb.finish();
}

/// Convergence surrogate for sum of conditional variances: the sum over the
/// last half of the horizon must not exceed `tol`.
template <typename Scalar>
ConditionVerdict check_A4_surrogate(const std::vector<Scalar>& cond_vars, Scalar tol,
                                    const char* name = "A4") {
  VerdictBuilder vb(name);
  for (std::size_t i = 0; i < cond_vars.size(); ++i)
    if (cond_vars[i] < Scalar(0)) throw Error("check_A4: negative variance", i + 1);
  const std::size_t half = cond_vars.size() / 2;
  Scalar tail = Scalar(0), total = Scalar(0);
  for (std::size_t i = 0; i < cond_vars.size(); ++i) {
    total += cond_vars[i];
    if (i >= half) tail += cond_vars[i];
  }
  vb.observe(cond_vars.size(), static_cast<double>(tol - tail));
  std::ostringstream os;
  os << "tail sum " << tail << ", total " << total;
  vb.note(os.str());
  return vb.finish();
}

struct MultivariateVerdicts {
  std::optional<ConditionVerdict> a5;  // present for a nonexpansive profile
  std::optional<ConditionVerdict> a6;  // present for a contractive profile
  ConditionVerdict a7;
  ConditionVerdict a8;
};

/// Norm-ratio analogues of the scalar checks for a path in R^p.
/// `cond_var_bounds[i]` bounds max_t Var(eps_{i+1}(t) | F_i).
template <typename Scalar>
MultivariateVerdicts check_multivariate(
    const VectorProcessPath<Scalar>& path,
    const std::variant<NonexpansiveProfile<Scalar>, ContractiveProfile<Scalar>>& profile,
    std::size_t tail_window, Scalar tol, const std::vector<Scalar>& cond_var_bounds,
    Scalar summable_tol) {
  if (cond_var_bounds.size() != path.horizon())
    throw Error("check_multivariate: one variance bound per step required");
  if (tail_window > path.horizon())
    throw Error("check_multivariate: tail window exceeds horizon");

  MultivariateVerdicts out;
  const bool contractive = std::holds_alternative<ContractiveProfile<Scalar>>(profile);
  VerdictBuilder vb(contractive ? "A6" : "A5");
  Scalar divergence = Scalar(0);
  std::size_t exercised = 0;
  for (std::size_t n = 1; n <= path.horizon(); ++n) {
    Scalar upper;
    if (contractive) {
      const auto& p = std::get<ContractiveProfile<Scalar>>(profile);
      detail::require_cover<Scalar>(p.ks.size(), path.horizon(), "check_multivariate");
      upper = p.ks[n - 1];
      if (upper < Scalar(0) || upper > Scalar(1))
        throw Error("check_multivariate: k outside [0, 1]", n);
      divergence += Scalar(1) - upper;
    } else {
      const auto& p = std::get<NonexpansiveProfile<Scalar>>(profile);
      detail::require_cover<Scalar>(p.alphas.size(), path.horizon(), "check_multivariate");
      upper = Scalar(1) + p.alphas[n - 1];
      divergence += p.alphas[n - 1];  // used as the alpha sum below
    }
    const Scalar prev = path.x(n - 1).norm();
    if (prev == Scalar(0)) continue;
    ++exercised;
    const Scalar ratio = path.m(n).norm() / prev;
    vb.observe(n, static_cast<double>(upper - ratio),
               static_cast<double>(rounding_slack(upper)));
  }
  vb.set_coverage(path.horizon() ? double(exercised) / double(path.horizon()) : 1.0);
  if (contractive) {
    const auto& p = std::get<ContractiveProfile<Scalar>>(profile);
    if (divergence < p.divergence_target)
      vb.violate(path.horizon(), "divergence clause unmet");
    out.a6 = vb.finish();
  } else {
    const auto& p = std::get<NonexpansiveProfile<Scalar>>(profile);
    if (divergence > p.alpha_sum_cap) vb.violate(path.horizon(), "alpha sum exceeds cap");
    out.a5 = vb.finish();
  }

  VerdictBuilder a7("A7");
  std::size_t zero_steps = 0;
  for (std::size_t n = path.horizon() - tail_window + 1; n <= path.horizon(); ++n) {
    if (path.x(n - 1).norm() != Scalar(0)) continue;
    ++zero_steps;
    a7.observe(n, static_cast<double>(tol - path.m(n).norm()));
  }
  if (zero_steps == 0) a7.note("vacuous: no zero-norm predecessors in the tail");
  out.a7 = a7.finish();

  out.a8 = check_A4_surrogate(cond_var_bounds, summable_tol, "A8");
  return out;
}

}  // namespace stocon
