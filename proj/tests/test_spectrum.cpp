#include <gtest/gtest.h>

#include "pqspectra/error.hpp"
#include "pqspectra/spectrum.hpp"
#include "support.hpp"

using namespace pqs_test;

namespace {

struct Fixture {
  ProblemSpec spec;
  ThresholdResult threshold;
};

Fixture make_fixture(double p) {
  auto spec = neumann(interval(256), p, 3.0);
  auto threshold = solve_lambda1(spec);
  return {std::move(spec), std::move(threshold)};
}

// p = 1.5 exercises the Nehari case, p = 4 the coercive one.
const Fixture& fixture(double p) {
  static const Fixture nehari = make_fixture(1.5);
  static const Fixture coercive = make_fixture(4.0);
  return p < 3.0 ? nehari : coercive;
}

void expect_eigenpair(const ProblemSpec& spec, const EigenPair& e, double lambda1) {
  EXPECT_GT(e.lambda, lambda1);
  EXPECT_LE(e.weak_residual_norm, 1e-8);
  EXPECT_LE(e.cone_residual, 1e-10);
  EXPECT_LE(e.mass_identity_defect, 1e-8);
  const auto& v = e.values;
  EXPECT_LE(rel(e.lambda - v.T2 / v.T3, v.T1 / v.T3), 1e-8);
  EXPECT_GT(v.T1 / v.T3, 0.0);
  const auto check = kkt_check(spec, e.lambda, e.field);
  EXPECT_TRUE(check.passed);
  EXPECT_TRUE(check.nonconstant);
  // The weak form is odd in u.
  EXPECT_TRUE(kkt_check(spec, e.lambda, e.field.scaled(-1.0)).passed);
}

}  // namespace

TEST(Nehari, EigenpairAtTwiceThreshold) {
  const auto& f = fixture(1.5);
  const auto e = solve_nehari(f.spec, 2.0 * f.threshold.lambda1, f.threshold);
  EXPECT_EQ(e.case_tag, CaseTag::Nehari);
  expect_eigenpair(f.spec, e, f.threshold.lambda1);
  const double p = 1.5, q = 3.0;
  EXPECT_LE(rel(e.values.J_lambda, (q - p) / (p * q) * e.values.T1), 1e-10);
  EXPECT_GT(e.m_lambda, 0.0);
  EXPECT_LE(e.nehari_residual, 1e-12);
  ASSERT_EQ(e.kkt.multipliers.size(), 3u);
  // Both constraint multipliers vanish at a Nehari minimizer.
  EXPECT_LE(std::abs(e.kkt.multipliers[1]), 1e-8);
  EXPECT_LE(std::abs(e.kkt.multipliers[2]), 1e-6);
  EXPECT_LE(e.kkt.stationarity_residual, 1e-8);
}

TEST(Nehari, EigenpairJustAboveThreshold) {
  const auto& f = fixture(1.5);
  const auto e = solve_nehari(f.spec, 1.05 * f.threshold.lambda1, f.threshold);
  expect_eigenpair(f.spec, e, f.threshold.lambda1);
  EXPECT_GT(e.m_lambda, 0.0);
}

TEST(Nehari, NoWitnessBelowThreshold) {
  const auto& f = fixture(1.5);
  EXPECT_THROW(solve_nehari(f.spec, 0.5 * f.threshold.lambda1, f.threshold), NoScalingWitness);
  EXPECT_THROW(solve_nehari(fixture(4.0).spec, 2.0 * f.threshold.lambda1, f.threshold), InvalidInput);
}

TEST(Coercive, EigenpairWithNegativeEnergy) {
  const auto& f = fixture(4.0);
  for (double m : {2.0, 10.0}) {
    const auto e = solve_coercive(f.spec, m * f.threshold.lambda1, f.threshold);
    EXPECT_EQ(e.case_tag, CaseTag::Coercive);
    EXPECT_LT(e.values.J_lambda, 0.0);
    expect_eigenpair(f.spec, e, f.threshold.lambda1);
    ASSERT_EQ(e.kkt.multipliers.size(), 2u);
    EXPECT_LE(std::abs(e.kkt.multipliers[1]), 1e-6);
  }
}

TEST(Coercive, RejectsZeroAndSubthresholdLambda) {
  const auto& f = fixture(4.0);
  EXPECT_THROW(solve_coercive(f.spec, 0.0, f.threshold), InvalidInput);
  EXPECT_THROW(solve_coercive(f.spec, 0.9 * f.threshold.lambda1, f.threshold), InvalidInput);
  EXPECT_THROW(solve_coercive(fixture(1.5).spec, 2.0 * f.threshold.lambda1, f.threshold), InvalidInput);
}

TEST(ZeroEigenpair, ConstantsAreEigenfunctions) {
  const auto& f = fixture(1.5);
  const auto z = zero_eigenpair(f.spec);
  EXPECT_EQ(z.lambda, 0.0);
  EXPECT_EQ(z.case_tag, CaseTag::Zero);
  EXPECT_LE(z.weak_residual_norm, 1e-15);
  for (double x : z.field.values()) EXPECT_EQ(x, 1.0);
  EXPECT_TRUE(kkt_check(f.spec, 0.0, DiscreteField::constant(f.spec.domain(), -3.0)).passed);
  EXPECT_THROW(kkt_check(f.spec, 0.0, DiscreteField::constant(f.spec.domain(), 0.0)), InvalidInput);
}

TEST(KktCheck, RejectsGenericFields) {
  const auto& f = fixture(1.5);
  std::mt19937_64 rng(21);
  const auto u = project_to_cone(f.spec, random_field(f.spec.domain(), rng)).field;
  const auto r = kkt_check(f.spec, 2.0 * f.threshold.lambda1, u);
  EXPECT_FALSE(r.passed);
  EXPECT_GT(r.weak_residual_norm, 1e-3);
  // A constant is an eigenfunction only for lambda = 0.
  EXPECT_FALSE(kkt_check(f.spec, 2.0 * f.threshold.lambda1, DiscreteField::constant(f.spec.domain(), 1.0)).passed);
}

TEST(Certificate, BelowAndAtThreshold) {
  for (double p : {1.5, 4.0}) {
    const auto& f = fixture(p);
    const double l1 = f.threshold.lambda1;
    const auto half = certify_nonexistence(f.spec, 0.5 * l1, f.threshold);
    EXPECT_NEAR(half.margin, 0.5 * l1, 1e-12 * l1);
    EXPECT_FALSE(half.boundary_case);
    EXPECT_GE(half.min_probe_rayleigh, l1 * (1 - 1e-6));
    EXPECT_GE(half.probe_count, 32);
    EXPECT_EQ(half.evidence, "quotient_bound");
    const auto edge = certify_nonexistence(f.spec, l1, f.threshold);
    EXPECT_TRUE(edge.boundary_case);
    EXPECT_EQ(edge.margin, 0.0);
    EXPECT_THROW(certify_nonexistence(f.spec, 1.5 * l1, f.threshold), InvalidInput);
    EXPECT_THROW(certify_nonexistence(f.spec, 0.0, f.threshold), InvalidInput);
  }
}

TEST(Certificate, WrongThresholdIsCaught) {
  const auto& f = fixture(1.5);
  ThresholdResult inflated = f.threshold;
  inflated.lambda1 *= 1.5;
  EXPECT_THROW(certify_nonexistence(f.spec, inflated.lambda1 * 0.9, inflated), CertificationFailure);
}

TEST(Trichotomy, ExactlyOneOutcomePerLambda) {
  for (double p : {1.5, 4.0}) {
    const auto& f = fixture(p);
    const double l1 = f.threshold.lambda1;
    for (double m : {0.5, 1.0, 1.05, 2.0}) {
      const double lambda = m * l1;
      bool certified = false, solved = false;
      try {
        certify_nonexistence(f.spec, lambda, f.threshold);
        certified = true;
      } catch (const Error&) {
      }
      try {
        solve_eigenpair(f.spec, lambda, f.threshold);
        solved = true;
      } catch (const Error&) {
      }
      EXPECT_NE(certified, solved) << "p=" << p << " m=" << m;
      EXPECT_EQ(solved, m > 1.0);
    }
  }
}
