#include <stocon/conditions.hpp>
#include <stocon/kronecker.hpp>
#include <stocon/random.hpp>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <boost/math/constants/constants.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace stocon;

namespace {

ProcessPath<double> ratio_path(double x0, double ratio, std::size_t horizon, double noise,
                               std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> xs{x0}, ms;
  for (std::size_t n = 1; n <= horizon; ++n) {
    ms.push_back(ratio * xs.back());
    xs.push_back(ms.back() + noise * rng.normal());
  }
  return doob_decompose(xs, ms);
}

ProcessPath<double> kronecker_harmonic(std::size_t horizon, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> ys, as;
  for (std::size_t i = 1; i <= horizon; ++i) {
    ys.push_back(rng.rademacher());
    as.push_back(double(i));
  }
  return kronecker_path(ys, as);
}

VectorProcessPath<double> rotation_path(double k, std::size_t horizon) {
  Eigen::Matrix2d R;
  R << 0, -1, 1, 0;
  Eigen::VectorXd x(2);
  x << 1.0, 0.5;
  Rng rng(5);
  std::vector<VectorStep<double>> steps;
  Eigen::VectorXd prev = x;
  for (std::size_t n = 0; n < horizon; ++n) {
    VectorStep<double> s;
    s.m = k * (R * prev);
    s.x = s.m + 0.01 * Eigen::VectorXd::NullaryExpr(2, [&] { return rng.normal(); });
    s.eps = s.x - s.m;
    prev = s.x;
    steps.push_back(s);
  }
  return VectorProcessPath<double>(x, steps);
}

}  // namespace

TEST(CheckA1, HalvingHoldsWithMarginHalf) {
  const auto p = ratio_path(1.0, 0.5, 30, 0.0, 0);
  const auto v = check_A1(p, NonexpansiveProfile<double>::constant(0.0, 30));
  EXPECT_TRUE(v.holds);
  EXPECT_FALSE(v.first_violation.has_value());
  EXPECT_DOUBLE_EQ(v.worst_margin, 0.5);
}

TEST(CheckA1, NegativeRatioFailsAtFirstStep) {
  const auto p = ratio_path(1.0, -1.0, 10, 0.0, 0);
  const auto v = check_A1(p, NonexpansiveProfile<double>::constant(0.0, 10));
  EXPECT_FALSE(v.holds);
  ASSERT_TRUE(v.first_violation.has_value());
  EXPECT_EQ(*v.first_violation, 1u);
}

TEST(CheckA1, KroneckerHoldsWithZeroAlpha) {
  const auto p = kronecker_harmonic(2000, 1);
  EXPECT_TRUE(check_A1(p, NonexpansiveProfile<double>::constant(0.0, 2000)).holds);
}

TEST(CheckA1, AlphaSumCapViolation) {
  const auto p = ratio_path(1.0, 0.5, 10, 0.0, 0);
  const auto v = check_A1(p, NonexpansiveProfile<double>::constant(0.5, 10, 1.0));
  EXPECT_FALSE(v.holds);
  EXPECT_EQ(*v.first_violation, 10u);
}

TEST(CheckA1, ProfileMustCoverHorizon) {
  const auto p = ratio_path(1.0, 0.5, 10, 0.0, 0);
  EXPECT_THROW(check_A1(p, NonexpansiveProfile<double>::constant(0.0, 5)), Error);
}

TEST(CheckA2, HarmonicDivergenceClause) {
  const std::size_t n = 10000;
  const auto p = kronecker_harmonic(n, 2);
  ContractiveProfile<double> profile{{}, 9.0};
  profile.ks.push_back(0.0);  // a_0 is undefined; X_0 = 0 so step 1 is never exercised
  for (std::size_t i = 2; i <= n; ++i) profile.ks.push_back(double(i - 1) / double(i));
  const auto v = check_A2(p, profile);
  EXPECT_TRUE(v.holds) << v.detail;

  // sum_{i<=n} (1 - k_i) = H_n = digamma(n + 1) + euler gamma.
  const double harmonic =
      boost::math::digamma(double(n) + 1.0) + boost::math::constants::euler<double>();
  EXPECT_NEAR(harmonic, 9.7876, 1e-4);
  double sum = 0.0;
  for (double k : profile.ks) sum += 1.0 - k;
  EXPECT_NEAR(sum, harmonic, 1e-10);
  EXPECT_GE(sum, 9.0);
}

TEST(CheckA2, UnitKCannotDiverge) {
  const auto p = ratio_path(1.0, 0.5, 100, 0.0, 0);
  const auto v = check_A2(p, ContractiveProfile<double>::constant(1.0, 100, 1.0));
  EXPECT_FALSE(v.holds);
  EXPECT_NE(v.detail.find("divergence"), std::string::npos);
}

TEST(CheckA2, ConstantContraction) {
  const std::size_t n = 100;
  const auto p = ratio_path(1.0, 0.9, n, 0.1, 3);
  const auto v = check_A2(p, ContractiveProfile<double>::constant(0.9, n, 5.0));
  EXPECT_TRUE(v.holds) << v.detail;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += 1.0 - 0.9;
  EXPECT_NEAR(sum, 0.1 * n, 1e-10);
}

TEST(CheckA2, KOutsideUnitIntervalThrows) {
  const auto p = ratio_path(1.0, 0.5, 5, 0.0, 0);
  EXPECT_THROW(check_A2(p, ContractiveProfile<double>::constant(1.5, 5)), Error);
}

TEST(CheckA3, KroneckerHoldsAtZeroTolerance) {
  const auto p = kronecker_harmonic(2000, 4);
  const auto v = check_A3(p, 1000, 0.0);
  EXPECT_TRUE(v.holds);
}

TEST(CheckA3, UnitMeanFromZeroFails) {
  // m_n = 1 whenever x_{n-1} = 0, then the process drops to 0 again.
  std::vector<double> xs{0.0}, ms;
  for (int n = 0; n < 20; ++n) {
    const bool zero = xs.back() == 0.0;
    ms.push_back(zero ? 1.0 : 0.0);
    xs.push_back(zero ? 1.0 : 0.0);
  }
  const auto p = doob_decompose(xs, ms);
  EXPECT_FALSE(check_A3(p, 10, 0.99).holds);
  EXPECT_TRUE(check_A3(p, 10, 1.0).holds);
}

TEST(CheckA3, VacuousWithoutZeroStates) {
  const auto p = ratio_path(1.0, 0.5, 20, 0.0, 0);
  const auto v = check_A3(p, 10, 0.0);
  EXPECT_TRUE(v.holds);
  EXPECT_NE(v.detail.find("vacuous"), std::string::npos);
}

TEST(CheckA4, InverseSquaresHaveSmallTail) {
  std::vector<double> v;
  for (int i = 1; i <= 2000; ++i) v.push_back(1.0 / (double(i) * i));
  // Tail sum_{i=1001}^{2000} 1/i^2 = trigamma(1001) - trigamma(2001).
  const double tail = boost::math::trigamma(1001.0) - boost::math::trigamma(2001.0);
  EXPECT_LT(tail, 1e-3);
  const auto verdict = check_A4_surrogate(v, 1e-3);
  EXPECT_TRUE(verdict.holds);
  EXPECT_NEAR(verdict.worst_margin, 1e-3 - tail, 1e-12);
}

TEST(CheckA4, ConstantVarianceFails) {
  EXPECT_FALSE(check_A4_surrogate(std::vector<double>(1000, 1.0), 1e-3).holds);
}

TEST(CheckA4, NoiselessHolds) {
  EXPECT_TRUE(check_A4_surrogate(std::vector<double>(1000, 0.0), 0.0).holds);
}

TEST(CheckA4, NegativeVarianceThrows) {
  EXPECT_THROW(check_A4_surrogate(std::vector<double>{1.0, -1.0}, 1.0), Error);
}

TEST(CheckMultivariate, RotationPassesNormContractionButNotComponentwise) {
  const std::size_t n = 200;
  const auto path = rotation_path(0.8, n);
  const auto r = check_multivariate<double>(path, ContractiveProfile<double>::constant(0.8, n),
                                            n / 2, 1e-6, std::vector<double>(n, 0.0), 1e-6);
  ASSERT_TRUE(r.a6.has_value());
  EXPECT_TRUE(r.a6->holds) << r.a6->detail;
  EXPECT_FALSE(r.a5.has_value());
  EXPECT_TRUE(r.a7.holds);
  EXPECT_TRUE(r.a8.holds);
  // Componentwise the ratio changes sign, so the scalar condition fails.
  const auto c0 = path.component(0);
  EXPECT_FALSE(check_A1(c0, NonexpansiveProfile<double>::constant(0.0, n)).holds);
}

TEST(CheckMultivariate, OneDimensionalSignFlipPassesNormCondition) {
  const std::size_t n = 50;
  const auto scalar = ratio_path(1.0, -0.5, n, 0.0, 0);
  std::vector<VectorStep<double>> steps;
  for (const auto& s : scalar.steps())
    steps.push_back({Eigen::VectorXd::Constant(1, s.x), Eigen::VectorXd::Constant(1, s.m),
                     Eigen::VectorXd::Constant(1, s.eps)});
  const VectorProcessPath<double> vec(Eigen::VectorXd::Constant(1, scalar.x0()), steps);
  const auto r = check_multivariate<double>(vec, NonexpansiveProfile<double>::constant(0.0, n),
                                            n / 2, 1e-6, std::vector<double>(n, 0.0), 1e-6);
  ASSERT_TRUE(r.a5.has_value());
  EXPECT_TRUE(r.a5->holds);
  EXPECT_FALSE(check_A1(scalar, NonexpansiveProfile<double>::constant(0.0, n)).holds);
}

TEST(CheckMultivariate, SummableBoundsHoldForPSeries) {
  const std::size_t n = 10000;
  std::vector<double> v;
  for (std::size_t i = 1; i <= n; ++i) v.push_back(std::pow(double(i), -1.5));
  // Integral comparison for the tail sum over i = 5001..10000.
  const double upper = 2.0 * (1.0 / std::sqrt(5000.0) - 1.0 / std::sqrt(10000.0));
  EXPECT_LT(upper, 1e-2);
  const auto path = rotation_path(0.5, n);
  const auto r = check_multivariate<double>(path, ContractiveProfile<double>::constant(0.5, n),
                                            n / 2, 1e-6, v, 1e-2);
  EXPECT_TRUE(r.a8.holds);
  EXPECT_GE(r.a8.worst_margin, 1e-2 - upper);
}

TEST(CheckMultivariate, ZeroNormPredecessorsExerciseA7) {
  std::vector<VectorStep<double>> steps;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd bump(2);
  bump << 0.3, 0.0;
  for (int n = 0; n < 10; ++n) steps.push_back({zero, bump, -bump});
  const VectorProcessPath<double> path(zero, steps);
  const auto r = check_multivariate<double>(path, NonexpansiveProfile<double>::constant(0.0, 10),
                                            5, 0.1, std::vector<double>(10, 0.0), 1e-6);
  EXPECT_FALSE(r.a7.holds);
  EXPECT_TRUE(r.a5->holds);
}

TEST(CheckMultivariate, DimensionMismatchThrows) {
  const auto path = rotation_path(0.5, 10);
  EXPECT_THROW(check_multivariate<double>(path, ContractiveProfile<double>::constant(0.5, 10), 5,
                                          1e-6, std::vector<double>(9, 0.0), 1e-6),
               Error);
}

TEST(ConditionInvariants, ContractiveImpliesNonexpansive) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto p = ratio_path(2.0, 0.7, 200, 0.3, seed);
    const auto a2 = check_A2(p, ContractiveProfile<double>::constant(0.7, 200));
    const auto a1 = check_A1(p, NonexpansiveProfile<double>::constant(0.0, 200));
    if (a2.holds) {
      EXPECT_TRUE(a1.holds);
    }
  }
}

TEST(ConditionInvariants, ScalarEmbeddingAgreesWhenRatiosNonnegative) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    // Ratios alternate between 0.5 and 1.05 so that some seeds violate alpha = 0.02.
    Rng rng(seed);
    std::vector<double> xs{1.0}, ms;
    for (int n = 1; n <= 100; ++n) {
      ms.push_back((n % 2 ? 0.5 : (rng.uniform() < 0.5 ? 1.05 : 1.0)) * xs.back());
      xs.push_back(ms.back() + 0.1 * rng.normal());
    }
    const auto p = doob_decompose(xs, ms);
    bool nonnegative = true;
    for (std::size_t n = 1; n <= p.horizon(); ++n)
      if (!p.is_zero(n - 1) && p.m(n) / p.x(n - 1) < 0) nonnegative = false;
    ASSERT_TRUE(nonnegative);
    std::vector<VectorStep<double>> steps;
    for (const auto& s : p.steps())
      steps.push_back({Eigen::VectorXd::Constant(1, s.x), Eigen::VectorXd::Constant(1, s.m),
                       Eigen::VectorXd::Constant(1, s.eps)});
    const VectorProcessPath<double> vec(Eigen::VectorXd::Constant(1, p.x0()), steps);
    const auto profile = NonexpansiveProfile<double>::constant(0.02, 100);
    const auto scalar = check_A1(p, profile);
    const auto multi =
        check_multivariate<double>(vec, profile, 50, 1e-6, std::vector<double>(100, 0.0), 1e-6);
    EXPECT_EQ(scalar.holds, multi.a5->holds) << seed;
  }
}

TEST(ConditionInvariants, VerdictsAreDeterministic) {
  const auto p = ratio_path(1.0, 0.8, 100, 0.2, 9);
  const auto a = check_A1(p, NonexpansiveProfile<double>::constant(0.0, 100));
  const auto b = check_A1(p, NonexpansiveProfile<double>::constant(0.0, 100));
  EXPECT_EQ(a.holds, b.holds);
  EXPECT_EQ(a.worst_margin, b.worst_margin);
  EXPECT_EQ(a.first_violation, b.first_violation);
  EXPECT_EQ(a.detail, b.detail);
}

TEST(ConditionInvariants, ZeroPathIsVacuous) {
  const auto p = doob_decompose<double>(std::vector<double>(11, 0.0), std::vector<double>(10, 0.0));
  EXPECT_TRUE(check_A1(p, NonexpansiveProfile<double>::constant(0.0, 10)).holds);
  EXPECT_TRUE(check_A2(p, ContractiveProfile<double>::constant(0.5, 10, 5.0)).holds);
  const auto a3 = check_A3(p, 10, 0.0);
  EXPECT_TRUE(a3.holds);
  EXPECT_EQ(a3.coverage, 1.0);
}
