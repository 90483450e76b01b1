#pragma once

// Crossing times, per-segment suprema and the pathwise segment bound
//   W_j <= lambda_max * (M^abs over segment j + |U_{T_j}|)
// that holds for every nonexpansive path.

#include <stocon/process.hpp>
#include <stocon/verdict.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

namespace stocon {

template <typename Scalar>
struct CrossingReport {
  std::vector<SignClass> sign_classes;     // classes of X_0..X_n
  std::vector<std::size_t> crossing_times; // T_1 < T_2 < ...
  std::size_t n_t = 0;                     // crossings observed in the horizon
  std::vector<Scalar> w;                   // W_j, one per crossing time
  Scalar initial_w = Scalar(0);            // sup |X_i| over [0, T_1)
  bool last_segment_open = false;          // final segment runs to the horizon

  /// Half-open index range [begin, end) of segment j (0-based into `w`).
  std::pair<std::size_t, std::size_t> segment(std::size_t j, std::size_t horizon) const {
    const std::size_t begin = crossing_times.at(j);
    const std::size_t end =
        j + 1 < crossing_times.size() ? crossing_times[j + 1] : horizon + 1;
    return {begin, end};
  }
};

template <typename Scalar>
CrossingReport<Scalar> crossing_report(const ProcessPath<Scalar>& path) {
  using std::abs;
  CrossingReport<Scalar> r;
  const std::size_t n = path.horizon();
  r.sign_classes.reserve(n + 1);
  for (std::size_t i = 0; i <= n; ++i) r.sign_classes.push_back(path.sign_class(i));
  for (std::size_t i = 1; i <= n; ++i)
    if (r.sign_classes[i] != r.sign_classes[i - 1]) r.crossing_times.push_back(i);
  r.n_t = r.crossing_times.size();
  r.last_segment_open = r.n_t > 0;

  const std::size_t first_end = r.n_t ? r.crossing_times.front() : n + 1;
  for (std::size_t i = 0; i < first_end; ++i)
    r.initial_w = std::max(r.initial_w, abs(path.x(i)));

  r.w.reserve(r.n_t);
  for (std::size_t j = 0; j < r.n_t; ++j) {
    const auto [begin, end] = r.segment(j, n);
    Scalar sup = Scalar(0);
    for (std::size_t i = begin; i < end; ++i) sup = std::max(sup, abs(path.x(i)));
    r.w.push_back(sup);
  }
  return r;
}

/// Products lambda^k_t = prod_{i=t-k+1..t} (1 + alpha_i) over a finite
/// horizon. alphas[0] is alpha_1.
template <typename Scalar>
class LambdaKernel {
 public:
  LambdaKernel(std::vector<Scalar> alphas, Scalar alpha_sum_cap)
      : alphas_(std::move(alphas)) {
    Scalar total = Scalar(0);
    for (std::size_t i = 0; i < alphas_.size(); ++i) {
      if (!(alphas_[i] >= Scalar(0))) throw Error("lambda kernel: negative alpha", i + 1);
      total += alphas_[i];
    }
    if (total > alpha_sum_cap)
      throw Error("lambda kernel: sum of alphas exceeds the configured cap");
    // Every factor is >= 1, so the largest product over realized (t, k) is the
    // product over the whole horizon.
    lambda_max_ = Scalar(1);
    for (const auto a : alphas_) lambda_max_ *= Scalar(1) + a;
  }

  Scalar operator()(std::size_t t, std::size_t k) const {
    if (k > t) throw Error("lambda kernel: k > t");
    if (t > alphas_.size()) throw Error("lambda kernel: t beyond horizon", t);
    Scalar prod = Scalar(1);
    for (std::size_t i = t - k + 1; i <= t; ++i) prod *= Scalar(1) + alphas_[i - 1];
    return prod;
  }

  Scalar lambda_max() const { return lambda_max_; }
  const std::vector<Scalar>& alphas() const { return alphas_; }

 private:
  std::vector<Scalar> alphas_;
  Scalar lambda_max_ = Scalar(1);
};

template <typename Scalar>
Scalar lambda_kernel(const std::vector<Scalar>& alphas, std::size_t t, std::size_t k) {
  return LambdaKernel<Scalar>(alphas, std::numeric_limits<Scalar>::infinity())(t, k);
}

template <typename Scalar>
Scalar lambda_max(const std::vector<Scalar>& alphas) {
  return LambdaKernel<Scalar>(alphas, std::numeric_limits<Scalar>::infinity())
      .lambda_max();
}

/// Checks the segment bound on every observed crossing segment, plus the
/// initial segment [0, T_1) where X_0 plays the role of |U_{T_j}|.
///
/// The nonexpansive ratio condition is re-evaluated along the way; if it
/// fails the verdict is marked inapplicable at that step.
template <typename Scalar>
ConditionVerdict wj_bound_check(const ProcessPath<Scalar>& path,
                                const std::vector<Scalar>& alphas) {
  using std::abs;
  VerdictBuilder vb("Wj_bound");
  if (alphas.size() < path.horizon())
    throw Error("wj_bound_check: alphas shorter than the horizon");

  for (std::size_t n = 1; n <= path.horizon(); ++n) {
    if (path.is_zero(n - 1)) continue;
    const Scalar ratio = path.m(n) / path.x(n - 1);
    const Scalar upper = Scalar(1) + alphas[n - 1];
    if (ratio < -rounding_slack(Scalar(1)) || ratio > upper + rounding_slack(upper)) {
      std::ostringstream os;
      os << "nonexpansive ratio condition fails at step " << n << " (ratio " << ratio
         << ")";
      vb.not_applicable(n, os.str());
      return vb.finish();
    }
  }

  const LambdaKernel<Scalar> kernel(
      std::vector<Scalar>(alphas.begin(), alphas.begin() + path.horizon()),
      std::numeric_limits<Scalar>::infinity());
  const Scalar lmax = kernel.lambda_max();
  const auto report = crossing_report(path);
  const std::size_t n = path.horizon();

  auto check_segment = [&](std::size_t begin, std::size_t end, Scalar anchor, Scalar w,
                           std::size_t label) {
    // M^abs over the residuals inside the segment (index 0 has none).
    const auto sums = partial_sums(path, std::max<std::size_t>(begin, 1), end - 1);
    const Scalar bound = lmax * (sums.abs_sum + anchor);
    vb.observe(label, static_cast<double>(bound - w),
               static_cast<double>(rounding_slack(bound)));
  };

  const std::size_t first_end = report.n_t ? report.crossing_times.front() : n + 1;
  check_segment(0, first_end, abs(path.x0()), report.initial_w, 0);
  for (std::size_t j = 0; j < report.n_t; ++j) {
    const auto [begin, end] = report.segment(j, n);
    check_segment(begin, end, abs(u_value(path, begin)), report.w[j], begin);
  }
  std::ostringstream os;
  os << report.n_t << " crossing segments, lambda_max " << lmax;
  vb.note(os.str());
  return vb.finish();
}

}  // namespace stocon
