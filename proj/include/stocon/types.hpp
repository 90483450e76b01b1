#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

namespace stocon {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using VectorXd = Vector<double>;
using MatrixXd = Matrix<double>;

/// Thrown on contract violations (bad input, out-of-range indices).
/// Carries the offending step index when one exists.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what,
                 std::optional<std::size_t> index = std::nullopt)
      : std::runtime_error(index ? what + " (index " + std::to_string(*index) + ")"
                                 : what),
        index_(index) {}

  std::optional<std::size_t> index() const { return index_; }

 private:
  std::optional<std::size_t> index_;
};

enum class SignClass { minus, zero, plus };

template <typename Scalar>
SignClass classify(Scalar x, Scalar zero_tol) {
  using std::abs;
  if (abs(x) <= zero_tol) return SignClass::zero;
  return x > Scalar(0) ? SignClass::plus : SignClass::minus;
}

inline char symbol(SignClass c) {
  switch (c) {
    case SignClass::plus:
      return '+';
    case SignClass::minus:
      return '-';
    default:
      return '0';
  }
}

/// Allowance for floating-point rounding when an inequality that holds
/// exactly in real arithmetic is checked on computed values. Scaled by the
/// magnitude of the bound.
template <typename Scalar>
Scalar rounding_slack(Scalar bound_magnitude) {
  using std::abs;
  return Scalar(64) * std::numeric_limits<Scalar>::epsilon() *
         (Scalar(1) + abs(bound_magnitude));
}

}  // namespace stocon
