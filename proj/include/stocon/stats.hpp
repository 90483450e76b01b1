#pragma once

#include <stocon/types.hpp>

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace stocon {

/// Sample standard deviation (n - 1 denominator) of per-seed final values.
inline double limit_dispersion(std::span<const double> finals) {
  if (finals.size() < 2) throw Error("limit_dispersion: need at least 2 values");
  double mean = 0.0;
  for (double v : finals) mean += v;
  mean /= double(finals.size());
  double ss = 0.0;
  for (double v : finals) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / double(finals.size() - 1));
}

inline double limit_dispersion(const std::vector<double>& finals) {
  return limit_dispersion(std::span<const double>(finals));
}

/// Linear-interpolation quantile of already sorted data (q in [0, 1]).
inline double sorted_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) return std::nan("");
  const double pos = q * double(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - double(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline double quantile(std::vector<double> data, double q) {
  std::sort(data.begin(), data.end());
  return sorted_quantile(data, q);
}

}  // namespace stocon
