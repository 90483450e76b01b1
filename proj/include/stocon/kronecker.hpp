#pragma once

#include <stocon/process.hpp>

#include <span>
#include <vector>

namespace stocon {

/// X_n = S_n / a_n with S_n = y_1 + ... + y_n and X_0 = 0.
///
/// The predictable mean is S_{n-1} / a_n, so the residual is y_n / a_n.
/// weights[i] is a_{i+1}; it must be strictly positive and nondecreasing.
/// `growth_warning` is set when a_n / a_1 < 10 over the horizon.
template <typename Scalar>
ProcessPath<Scalar> kronecker_path(std::span<const Scalar> increments,
                                   std::span<const Scalar> weights,
                                   bool* growth_warning = nullptr) {
  if (increments.size() != weights.size())
    throw Error("kronecker_path: one weight per increment required");
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] > Scalar(0))) throw Error("kronecker_path: nonpositive weight", i + 1);
    if (i > 0 && weights[i] < weights[i - 1])
      throw Error("kronecker_path: decreasing weight", i + 1);
  }
  if (growth_warning)
    *growth_warning = !weights.empty() && weights.back() / weights.front() < Scalar(10);

  std::vector<StepRecord<Scalar>> steps;
  steps.reserve(increments.size());
  Scalar s = Scalar(0);
  for (std::size_t i = 0; i < increments.size(); ++i) {
    const Scalar m = s / weights[i];
    s += increments[i];
    const Scalar x = s / weights[i];
    steps.push_back({x, m, x - m});
  }
  return ProcessPath<Scalar>(Scalar(0), std::move(steps));
}

template <typename Scalar>
ProcessPath<Scalar> kronecker_path(const std::vector<Scalar>& increments,
                                   const std::vector<Scalar>& weights,
                                   bool* growth_warning = nullptr) {
  return kronecker_path(std::span<const Scalar>(increments),
                        std::span<const Scalar>(weights), growth_warning);
}

}  // namespace stocon
