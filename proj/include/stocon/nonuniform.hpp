#pragma once

// Processes that contract only outside a neighbourhood of zero, analysed
// through the truncated process
//   X^{d+t}_n = X_n I{|E[X_n | F_{n-1}]| >= d + t}.

#include <stocon/conditions.hpp>
#include <stocon/process.hpp>
#include <stocon/verdict.hpp>

#include <cmath>
#include <sstream>
#include <vector>

namespace stocon {

template <typename Scalar>
struct DerivedProcessPath {
  ProcessPath<Scalar> base;
  Scalar delta{};
  Scalar tau{};
  std::size_t n0 = 1;                 // |eps_i| < tau for every i >= n0
  ProcessPath<Scalar> truncated;      // values, means and residuals of X^{d+t}
  std::vector<Scalar> u_derived;      // u_derived[n-1] = m^{d+t}_n I{X^{d+t}_{n-1} = 0}
  bool tau_not_below_delta = false;   // the truncation argument wants tau < delta
};

/// Builds the truncated process. The initial value is carried over
/// unchanged since no mean exists for index 0.
template <typename Scalar>
DerivedProcessPath<Scalar> derive_truncated(const ProcessPath<Scalar>& base, Scalar delta,
                                            Scalar tau) {
  using std::abs;
  if (!(delta > Scalar(0))) throw Error("derive_truncated: delta must be positive");
  if (!(tau > Scalar(0))) throw Error("derive_truncated: tau must be positive");
  DerivedProcessPath<Scalar> d;
  d.base = base;
  d.delta = delta;
  d.tau = tau;
  d.tau_not_below_delta = !(tau < delta);

  const std::size_t n = base.horizon();
  std::size_t last_bad = 0;
  for (std::size_t i = 1; i <= n; ++i)
    if (!(abs(base.eps(i)) < tau)) last_bad = i;
  if (n > 0 && last_bad == n) throw Error("derive_truncated: residuals never settle below tau");
  d.n0 = last_bad + 1;

  const Scalar threshold = delta + tau;
  std::vector<StepRecord<Scalar>> steps;
  steps.reserve(n);
  d.u_derived.reserve(n);
  Scalar prev = base.x0();
  for (std::size_t i = 1; i <= n; ++i) {
    const auto& s = base.step(i);
    const bool keep = abs(s.m) >= threshold;
    const Scalar x = keep ? s.x : Scalar(0);
    const Scalar m = keep ? s.m : Scalar(0);
    const Scalar eps = keep ? s.eps : Scalar(0);
    steps.push_back({x, m, eps});
    d.u_derived.push_back(classify(prev, base.zero_tol()) == SignClass::zero ? m : Scalar(0));
    prev = x;
  }
  d.truncated = ProcessPath<Scalar>(base.x0(), std::move(steps), base.zero_tol());
  return d;
}

/// The truncated process from n0 onward, {X^{d+t}_{n0+n} : n >= 0}.
template <typename Scalar>
ProcessPath<Scalar> truncated_tail(const DerivedProcessPath<Scalar>& d) {
  return offset_path(d.truncated, d.n0);
}

/// |u_derived_n| <= |U_n| + delta + 2 tau + kappa for every step of the
/// offset process (indices n > n0, whose predecessors already have settled
/// residuals).
template <typename Scalar>
ConditionVerdict check_derived_u_bound(const DerivedProcessPath<Scalar>& d, Scalar kappa) {
  using std::abs;
  VerdictBuilder vb("derived_u_bound");
  const std::size_t n = d.truncated.horizon();
  if (d.u_derived.size() != n) throw Error("check_derived_u_bound: u_derived length mismatch");
  for (std::size_t i = d.n0 + 1; i <= n; ++i) {
    const Scalar base_u = u_value(d.base, i);
    const Scalar bound = abs(base_u) + d.delta + Scalar(2) * d.tau + kappa;
    vb.observe(i, static_cast<double>(bound - abs(d.u_derived[i - 1])),
               static_cast<double>(rounding_slack(bound)));
  }
  return vb.finish();
}

/// Nonexpansive ratio clause on the offset truncated process.
template <typename Scalar>
ConditionVerdict check_truncated_A1(const DerivedProcessPath<Scalar>& d,
                                    const std::vector<Scalar>& alphas) {
  const auto tail = truncated_tail(d);
  if (alphas.size() < d.truncated.horizon())
    throw Error("check_truncated_A1: alphas shorter than the horizon");
  NonexpansiveProfile<Scalar> profile{
      std::vector<Scalar>(alphas.begin() + d.n0, alphas.begin() + d.truncated.horizon()),
      std::numeric_limits<Scalar>::infinity()};
  auto v = check_A1(tail, profile);
  if (v.first_violation) *v.first_violation += d.n0;
  return v;
}

/// Contractive ratio clause on the offset truncated process, restricted to
/// steps whose predecessor satisfies |X^{d+t}_{n-1}| < delta2. Coverage is
/// the fraction of nonzero-predecessor steps that fell inside the band.
template <typename Scalar>
ConditionVerdict check_truncated_A2(const DerivedProcessPath<Scalar>& d,
                                    const std::vector<Scalar>& ks, Scalar delta2) {
  using std::abs;
  VerdictBuilder vb("A2_truncated");
  const auto& tr = d.truncated;
  if (ks.size() < tr.horizon()) throw Error("check_truncated_A2: ks shorter than the horizon");
  std::size_t nonzero = 0, inside = 0;
  for (std::size_t n = d.n0 + 1; n <= tr.horizon(); ++n) {
    const Scalar prev = tr.x(n - 1);
    if (tr.is_zero(n - 1)) continue;
    ++nonzero;
    if (!(abs(prev) < delta2)) continue;
    ++inside;
    const Scalar ratio = tr.m(n) / prev;
    const Scalar k = ks[n - 1];
    vb.observe(n, static_cast<double>(std::min(ratio, k - ratio)),
               static_cast<double>(rounding_slack(k)));
  }
  vb.set_coverage(nonzero ? double(inside) / double(nonzero) : 0.0);
  return vb.finish();
}

}  // namespace stocon
