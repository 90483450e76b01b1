#pragma once

// Seeded Monte Carlo ensembles: per-seed convergence classification and a
// deterministic fold of the results in seed-index order.

#include <stocon/random.hpp>
#include <stocon/stats.hpp>
#include <stocon/types.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <type_traits>
#include <limits>
#include <vector>

namespace stocon {

struct EnsembleConfig {
  std::size_t seeds = 100;
  std::uint64_t root_seed = 0;
  std::size_t horizon = 1000;
  double tail_fraction = 0.2;
  double tol_zero = 0.05;
  double tol_cauchy = 1e-3;
  double divergence_cap = 1e6;
  std::size_t parallelism = 0;  // 0 selects the hardware concurrency

  std::vector<std::string> validate() const {
    std::vector<std::string> errors;
    if (seeds < 1) errors.emplace_back("seeds must be at least 1");
    if (horizon < 1) errors.emplace_back("horizon must be at least 1");
    if (!(tail_fraction > 0.0 && tail_fraction < 1.0))
      errors.emplace_back("tail_fraction must lie in (0, 1)");
    if (!(tol_zero >= 0.0)) errors.emplace_back("tol_zero must be nonnegative");
    if (!(tol_cauchy >= 0.0)) errors.emplace_back("tol_cauchy must be nonnegative");
    if (!(divergence_cap > 0.0)) errors.emplace_back("divergence_cap must be positive");
    return errors;
  }
};

enum class ConvergenceClass { converged_to_zero, finite_limit, diverged, inconclusive };

inline constexpr std::array<ConvergenceClass, 4> kConvergenceClasses = {
    ConvergenceClass::converged_to_zero, ConvergenceClass::finite_limit,
    ConvergenceClass::diverged, ConvergenceClass::inconclusive};

inline const char* to_string(ConvergenceClass c) {
  switch (c) {
    case ConvergenceClass::converged_to_zero:
      return "converged_to_zero";
    case ConvergenceClass::finite_limit:
      return "finite_limit";
    case ConvergenceClass::diverged:
      return "diverged";
    default:
      return "inconclusive";
  }
}

struct ConvergenceVerdict {
  ConvergenceClass cls = ConvergenceClass::inconclusive;
  double tail_sup = std::numeric_limits<double>::quiet_NaN();
  double tail_oscillation = std::numeric_limits<double>::quiet_NaN();
  double final_value = std::numeric_limits<double>::quiet_NaN();
  std::string reason;
};

struct ConvergenceTolerances {
  double tol_zero = 0.05;
  double tol_cauchy = 1e-3;
  double divergence_cap = 1e6;
};

/// Classifies a tail window. Precedence: any non-finite value means
/// diverged; then converged_to_zero, finite_limit, diverged (tail_sup above
/// the cap), inconclusive.
inline ConvergenceVerdict convergence_verdict(std::span<const double> tail,
                                              const ConvergenceTolerances& tol) {
  ConvergenceVerdict v;
  if (tail.empty()) {
    v.reason = "empty tail window";
    return v;
  }
  v.final_value = tail.back();
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  double sup = 0.0;
  bool finite = true;
  for (double x : tail) {
    if (!std::isfinite(x)) finite = false;
    lo = std::min(lo, x);
    hi = std::max(hi, x);
    sup = std::max(sup, std::abs(x));
  }
  if (!finite) {
    v.tail_sup = std::numeric_limits<double>::infinity();
    v.tail_oscillation = std::numeric_limits<double>::infinity();
    v.cls = ConvergenceClass::diverged;
    v.reason = "non-finite value in tail";
    return v;
  }
  v.tail_sup = sup;
  v.tail_oscillation = hi - lo;
  if (sup <= tol.tol_zero) v.cls = ConvergenceClass::converged_to_zero;
  else if (v.tail_oscillation <= tol.tol_cauchy) v.cls = ConvergenceClass::finite_limit;
  else if (sup > tol.divergence_cap) v.cls = ConvergenceClass::diverged;
  else v.cls = ConvergenceClass::inconclusive;
  return v;
}

/// Number of trailing entries of a length-`len` trajectory in the tail window.
inline std::size_t tail_length(std::size_t len, double tail_fraction) {
  if (len == 0) return 0;
  const auto k = static_cast<std::size_t>(std::ceil(tail_fraction * double(len)));
  return std::clamp<std::size_t>(k, 1, len);
}

inline ConvergenceVerdict convergence_verdict(const std::vector<double>& trajectory,
                                              const EnsembleConfig& config) {
  const std::size_t k = tail_length(trajectory.size(), config.tail_fraction);
  return convergence_verdict(
      std::span<const double>(trajectory).subspan(trajectory.size() - k),
      {config.tol_zero, config.tol_cauchy, config.divergence_cap});
}

/// Worker count: `requested` (0 = hardware), capped by STOCON_MAX_THREADS
/// and by the number of tasks.
inline std::size_t effective_parallelism(std::size_t requested, std::size_t tasks) {
  std::size_t n = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("STOCON_MAX_THREADS")) {
    char* end = nullptr;
    const unsigned long long cap = std::strtoull(env, &end, 10);
    if (end != env && cap > 0) n = std::min<std::size_t>(n, cap);
  }
  return std::clamp<std::size_t>(n, 1, std::max<std::size_t>(tasks, 1));
}

template <typename R>
struct SeedResult {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  std::optional<R> value;
  std::string error;
};

/// Evaluates fn(child_seed(root, i), i) for every i < count on up to
/// `parallelism` threads. Results are stored by index, so the outcome does
/// not depend on scheduling. Exceptions are captured per seed.
template <typename Fn>
auto map_seeds(std::size_t count, std::uint64_t root_seed, std::size_t parallelism, Fn&& fn)
    -> std::vector<SeedResult<std::invoke_result_t<Fn&, std::uint64_t, std::size_t>>> {
  using R = std::invoke_result_t<Fn&, std::uint64_t, std::size_t>;
  std::vector<SeedResult<R>> out(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      auto& slot = out[i];
      slot.index = i;
      slot.seed = child_seed(root_seed, i);
      try {
        slot.value.emplace(fn(slot.seed, i));
      } catch (const std::exception& e) {
        slot.error = e.what();
      } catch (...) {
        slot.error = "unknown failure";
      }
    }
  };
  const std::size_t threads = effective_parallelism(parallelism, count);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  return out;
}

struct CurvePoint {
  std::size_t n = 0;
  std::array<double, 3> quantiles{};  // 0.05, 0.5, 0.95 of |value_n|
};

struct EnsembleStats {
  std::vector<ConvergenceVerdict> per_seed;
  std::array<double, 4> fraction_by_class{};  // indexed by ConvergenceClass
  std::array<double, 5> final_abs_quantiles{};  // 0.05, 0.25, 0.5, 0.75, 0.95
  double dispersion = std::numeric_limits<double>::quiet_NaN();
  std::vector<CurvePoint> curve;

  double fraction(ConvergenceClass c) const {
    return fraction_by_class[static_cast<std::size_t>(c)];
  }
};

inline constexpr std::array<double, 5> kFinalQuantileLevels = {0.05, 0.25, 0.5, 0.75, 0.95};
inline constexpr std::array<double, 3> kCurveQuantileLevels = {0.05, 0.5, 0.95};

/// Logarithmically spaced checkpoints 1..horizon, `per_decade` per decade,
/// always including the horizon.
inline std::vector<std::size_t> log_checkpoints(std::size_t horizon, std::size_t per_decade = 10) {
  std::vector<std::size_t> out;
  if (horizon == 0) return out;
  for (std::size_t k = 0;; ++k) {
    const double v = std::pow(10.0, double(k) / double(per_decade));
    const auto n = static_cast<std::size_t>(std::llround(v));
    if (n > horizon) break;
    if (out.empty() || out.back() != n) out.push_back(n);
  }
  if (out.back() != horizon) out.push_back(horizon);
  return out;
}

/// Folds per-seed trajectories (entry n is the value at step n, entry 0 the
/// initial value) in index order. Failed seeds count as inconclusive and are
/// left out of the quantiles and dispersion; NaN entries (undefined values)
/// are left out of the curve.
inline EnsembleStats summarize(const std::vector<SeedResult<std::vector<double>>>& results,
                               const EnsembleConfig& config) {
  EnsembleStats s;
  std::array<std::size_t, 4> counts{};
  std::vector<double> finals;
  std::size_t longest = 0;
  for (const auto& r : results) {
    ConvergenceVerdict v;
    if (!r.value) {
      v.reason = "factory failure: " + r.error;
    } else {
      v = convergence_verdict(*r.value, config);
      if (!r.value->empty()) {
        finals.push_back(r.value->back());
        longest = std::max(longest, r.value->size() - 1);
      }
    }
    ++counts[static_cast<std::size_t>(v.cls)];
    s.per_seed.push_back(std::move(v));
  }
  const double total = double(results.size());
  for (std::size_t c = 0; c < counts.size(); ++c)
    s.fraction_by_class[c] = total > 0 ? double(counts[c]) / total : 0.0;

  std::vector<double> abs_finals;
  for (double f : finals) abs_finals.push_back(std::abs(f));
  std::sort(abs_finals.begin(), abs_finals.end());
  for (std::size_t i = 0; i < kFinalQuantileLevels.size(); ++i)
    s.final_abs_quantiles[i] = sorted_quantile(abs_finals, kFinalQuantileLevels[i]);
  if (finals.size() >= 2) s.dispersion = limit_dispersion(finals);

  for (std::size_t n : log_checkpoints(longest)) {
    std::vector<double> column;
    for (const auto& r : results)
      if (r.value && n < r.value->size() && !std::isnan((*r.value)[n]))
        column.push_back(std::abs((*r.value)[n]));
    std::sort(column.begin(), column.end());
    CurvePoint p;
    p.n = n;
    for (std::size_t i = 0; i < kCurveQuantileLevels.size(); ++i)
      p.quantiles[i] = sorted_quantile(column, kCurveQuantileLevels[i]);
    s.curve.push_back(p);
  }
  return s;
}

/// Runs factory(child_seed, index) -> trajectory for every seed and
/// summarizes the ensemble.
template <typename Factory>
EnsembleStats run_ensemble(Factory&& factory, const EnsembleConfig& config) {
  auto results = map_seeds(config.seeds, config.root_seed, config.parallelism,
                           [&](std::uint64_t seed, std::size_t index) -> std::vector<double> {
                             return factory(seed, index);
                           });
  return summarize(results, config);
}

}  // namespace stocon
