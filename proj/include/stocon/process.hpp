#pragma once

// Filtered processes stored together with their predictable means, and the
// Doob decomposition X_n = X_{n-1} + (m_n - X_{n-1}) + eps_n.

#include <stocon/types.hpp>

#include <cmath>
#include <span>
#include <utility>
#include <vector>

namespace stocon {

template <typename Scalar>
struct StepRecord {
  Scalar x;    // realized value X_n
  Scalar m;    // predictable mean E[X_n | F_{n-1}]
  Scalar eps;  // residual x - m
};

/// A realized scalar trajectory. Index 0 is the initial value; steps are
/// indexed 1..horizon().
template <typename Scalar>
class ProcessPath {
 public:
  ProcessPath() = default;

  ProcessPath(Scalar x0, std::vector<StepRecord<Scalar>> steps,
              Scalar zero_tol = Scalar(0))
      : x0_(x0), steps_(std::move(steps)), zero_tol_(zero_tol) {
    if (!(zero_tol_ >= Scalar(0))) throw Error("zero_tol must be nonnegative");
  }

  /// Builds a path from (x, m) pairs, computing eps = x - m.
  static ProcessPath from_means(Scalar x0, std::span<const Scalar> xs,
                                std::span<const Scalar> ms,
                                Scalar zero_tol = Scalar(0)) {
    std::vector<StepRecord<Scalar>> steps;
    steps.reserve(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i)
      steps.push_back({xs[i], ms[i], xs[i] - ms[i]});
    return ProcessPath(x0, std::move(steps), zero_tol);
  }

  std::size_t horizon() const { return steps_.size(); }
  Scalar zero_tol() const { return zero_tol_; }
  Scalar x0() const { return x0_; }

  /// X_n for 0 <= n <= horizon().
  Scalar x(std::size_t n) const {
    if (n == 0) return x0_;
    return step(n).x;
  }
  Scalar m(std::size_t n) const { return step(n).m; }
  Scalar eps(std::size_t n) const { return step(n).eps; }

  const StepRecord<Scalar>& step(std::size_t n) const {
    if (n == 0 || n > steps_.size()) throw Error("step index out of horizon", n);
    return steps_[n - 1];
  }

  const std::vector<StepRecord<Scalar>>& steps() const { return steps_; }

  SignClass sign_class(std::size_t n) const { return classify(x(n), zero_tol_); }
  bool is_zero(std::size_t n) const { return sign_class(n) == SignClass::zero; }

  /// All realized values X_0..X_n.
  std::vector<Scalar> values() const {
    std::vector<Scalar> out;
    out.reserve(steps_.size() + 1);
    out.push_back(x0_);
    for (const auto& s : steps_) out.push_back(s.x);
    return out;
  }

 private:
  Scalar x0_{};
  std::vector<StepRecord<Scalar>> steps_;
  Scalar zero_tol_{};
};

template <typename Scalar>
struct VectorStep {
  Vector<Scalar> x;
  Vector<Scalar> m;
  Vector<Scalar> eps;
};

/// A realized trajectory in R^p.
template <typename Scalar>
class VectorProcessPath {
 public:
  VectorProcessPath() = default;

  VectorProcessPath(Vector<Scalar> x0, std::vector<VectorStep<Scalar>> steps)
      : x0_(std::move(x0)), steps_(std::move(steps)) {
    const auto p = x0_.size();
    if (p < 1) throw Error("vector path dimension must be positive");
    for (std::size_t i = 0; i < steps_.size(); ++i) {
      const auto& s = steps_[i];
      if (s.x.size() != p || s.m.size() != p || s.eps.size() != p)
        throw Error("vector path dimension mismatch", i + 1);
    }
  }

  Eigen::Index dim() const { return x0_.size(); }
  std::size_t horizon() const { return steps_.size(); }

  const Vector<Scalar>& x(std::size_t n) const {
    if (n == 0) return x0_;
    return step(n).x;
  }
  const Vector<Scalar>& m(std::size_t n) const { return step(n).m; }
  const Vector<Scalar>& eps(std::size_t n) const { return step(n).eps; }

  const VectorStep<Scalar>& step(std::size_t n) const {
    if (n == 0 || n > steps_.size()) throw Error("step index out of horizon", n);
    return steps_[n - 1];
  }

  const std::vector<VectorStep<Scalar>>& steps() const { return steps_; }

  /// Euclidean norms ||X_0||..||X_n||.
  std::vector<Scalar> norms() const {
    std::vector<Scalar> out;
    out.reserve(steps_.size() + 1);
    out.push_back(x0_.norm());
    for (const auto& s : steps_) out.push_back(s.x.norm());
    return out;
  }

  /// Component t of the trajectory as a scalar path (means and residuals
  /// carried over).
  ProcessPath<Scalar> component(Eigen::Index t, Scalar zero_tol = Scalar(0)) const {
    if (t < 0 || t >= dim()) throw Error("component index out of range");
    std::vector<StepRecord<Scalar>> out;
    out.reserve(steps_.size());
    for (const auto& s : steps_) out.push_back({s.x(t), s.m(t), s.eps(t)});
    return ProcessPath<Scalar>(x0_(t), std::move(out), zero_tol);
  }

 private:
  Vector<Scalar> x0_;
  std::vector<VectorStep<Scalar>> steps_;
};

/// Doob decomposition of realized values `xs` (X_0..X_n) against supplied
/// predictable means `ms` (m_1..m_n).
template <typename Scalar>
ProcessPath<Scalar> doob_decompose(std::span<const Scalar> xs,
                                   std::span<const Scalar> ms,
                                   Scalar zero_tol = Scalar(0)) {
  using std::isfinite;
  if (xs.empty()) throw Error("doob_decompose: empty value sequence");
  if (ms.size() + 1 != xs.size())
    throw Error("doob_decompose: need exactly one mean per step (length(xs) - 1)");
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (!isfinite(xs[i])) throw Error("doob_decompose: non-finite value", i);
  for (std::size_t i = 0; i < ms.size(); ++i)
    if (!isfinite(ms[i])) throw Error("doob_decompose: non-finite mean", i + 1);
  return ProcessPath<Scalar>::from_means(xs[0], xs.subspan(1), ms, zero_tol);
}

template <typename Scalar>
ProcessPath<Scalar> doob_decompose(const std::vector<Scalar>& xs,
                                   const std::vector<Scalar>& ms,
                                   Scalar zero_tol = Scalar(0)) {
  return doob_decompose(std::span<const Scalar>(xs), std::span<const Scalar>(ms),
                        zero_tol);
}

/// Rebuilds X_0..X_n from x0, the means and the residuals via
/// x_n = x_0 + sum_i (m_i - x_{i-1}) + M_{1,n}.
template <typename Scalar>
std::vector<Scalar> reconstruct(const ProcessPath<Scalar>& path) {
  std::vector<Scalar> out;
  out.reserve(path.horizon() + 1);
  out.push_back(path.x0());
  Scalar drift = Scalar(0);
  Scalar martingale = Scalar(0);
  for (std::size_t n = 1; n <= path.horizon(); ++n) {
    drift += path.m(n) - out.back();
    martingale += path.eps(n);
    out.push_back(path.x0() + drift + martingale);
  }
  return out;
}

template <typename Scalar>
struct PartialSums {
  Scalar sum;      // M_{s,t}
  Scalar abs_sum;  // M^abs_{s,t}
};

/// (M_{s,t}, M^abs_{s,t}); both zero when t < s.
template <typename Scalar>
PartialSums<Scalar> partial_sums(const ProcessPath<Scalar>& path, std::size_t s,
                                 std::size_t t) {
  using std::abs;
  if (s < 1) throw Error("partial_sums: s must be >= 1");
  if (t < s) return {Scalar(0), Scalar(0)};
  if (t > path.horizon()) throw Error("partial_sums: t beyond horizon", t);
  PartialSums<Scalar> r{Scalar(0), Scalar(0)};
  for (std::size_t i = s; i <= t; ++i) {
    r.sum += path.eps(i);
    r.abs_sum += abs(path.eps(i));
  }
  return r;
}

template <typename Scalar>
struct UEntry {
  std::size_t index;
  Scalar u;
};

/// The zero-conditioned mean sequence U_n = m_n I{X_{n-1} = 0}; only the
/// indices whose predecessor is zero-class are emitted.
template <typename Scalar>
std::vector<UEntry<Scalar>> u_sequence(const ProcessPath<Scalar>& path) {
  std::vector<UEntry<Scalar>> out;
  for (std::size_t n = 1; n <= path.horizon(); ++n)
    if (path.is_zero(n - 1)) out.push_back({n, path.m(n)});
  return out;
}

/// U_n as a dense value: m_n when X_{n-1} is zero-class, otherwise 0.
template <typename Scalar>
Scalar u_value(const ProcessPath<Scalar>& path, std::size_t n) {
  return path.is_zero(n - 1) ? path.m(n) : Scalar(0);
}

/// The path recentred at `center` (values and means shifted, residuals kept).
template <typename Scalar>
ProcessPath<Scalar> shifted(const ProcessPath<Scalar>& path, Scalar center) {
  std::vector<StepRecord<Scalar>> out;
  out.reserve(path.horizon());
  for (const auto& s : path.steps()) out.push_back({s.x - center, s.m - center, s.eps});
  return ProcessPath<Scalar>(path.x0() - center, std::move(out), path.zero_tol());
}

/// The offset process {X_{start+n} : n >= 0}.
template <typename Scalar>
ProcessPath<Scalar> offset_path(const ProcessPath<Scalar>& path, std::size_t start) {
  if (start > path.horizon()) throw Error("offset_path: start beyond horizon", start);
  std::vector<StepRecord<Scalar>> out(path.steps().begin() + start, path.steps().end());
  return ProcessPath<Scalar>(path.x(start), std::move(out), path.zero_tol());
}

}  // namespace stocon
