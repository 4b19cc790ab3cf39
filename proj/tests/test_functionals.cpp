#include <gtest/gtest.h>

#include <numeric>

#include "pqspectra/error.hpp"
#include "pqspectra/functionals.hpp"
#include "support.hpp"

using namespace pqs_test;

namespace {

DiscreteField x_field(const Mesh& m, double slope = 1.0, double offset = 0.0) {
  return interpolate(m, [=](const Point& p) { return slope * p[0] + offset; });
}

// Plain bisection on s -> g(u - s), the root-finder oracle for the cone shift.
double bisect_shift(const ProblemSpec& spec, const DiscreteField& u) {
  const auto& v = u.values();
  double lo = *std::min_element(v.begin(), v.end()) - 1.0, hi = *std::max_element(v.begin(), v.end()) + 1.0;
  auto g = [&](double s) {
    std::vector<double> w(v.begin(), v.end());
    for (double& x : w) x -= s;
    return cone_residual(spec, DiscreteField(spec.domain(), w));
  };
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST(ConeResidual, Examples) {
  const auto spec = neumann(interval(32), 1.5, 3.0);
  const Mesh& m = spec.domain();
  EXPECT_EQ(cone_residual(spec, DiscreteField::constant(m, 0.0)), 0.0);
  EXPECT_NEAR(cone_residual(spec, DiscreteField::constant(m, 1.0)), 1.0, 1e-14);
  EXPECT_NEAR(cone_residual(spec, x_field(m, 1.0, -0.5)), 0.0, 1e-14);
}

TEST(Energy, Examples) {
  const auto spec = neumann(interval(32), 1.5, 3.0);
  const Mesh& m = spec.domain();
  const double c = 1.7;
  EXPECT_NEAR(energy_J_lambda(spec, 1.0, DiscreteField::constant(m, c)), -c * c * c / 3.0, 1e-13);
  EXPECT_EQ(energy_J_lambda(spec, 1.0, DiscreteField::constant(m, 0.0)), 0.0);
  EXPECT_NEAR(energy_J_lambda(spec, 0.0, x_field(m)), 1.0, 1e-13);
  const auto v = evaluate_functionals(spec, 2.5, x_field(m));
  EXPECT_NEAR(v.J_lambda, v.T1 / 1.5 + v.T2 / 3.0 - 2.5 / 3.0 * v.T3, 1e-12 * std::abs(v.J_lambda));
}

TEST(WeakResidual, ConstantsAtZero) {
  const auto spec = neumann(interval(32), 1.5, 3.0);
  const auto r = weak_residual(spec, 0.0, DiscreteField::constant(spec.domain(), -3.0));
  for (double x : r) EXPECT_EQ(x, 0.0);
  EXPECT_THROW(weak_residual(spec, 1.0, DiscreteField::constant(spec.domain(), 0.0)), InvalidInput);
}

TEST(WeakResidual, SumsToMinusLambdaTimesConeResidual) {
  std::mt19937_64 rng(3);
  const auto spec = neumann(interval(64), 2.5, 3.0);
  const auto u = project_to_cone(spec, random_field(spec.domain(), rng)).field;
  const auto r = weak_residual(spec, 7.0, u);
  const double total = std::accumulate(r.begin(), r.end(), 0.0);
  const double scale = std::accumulate(r.begin(), r.end(), 0.0, [](double s, double x) { return s + std::abs(x); });
  EXPECT_LE(std::abs(total), 1e-12 * scale);
}

TEST(WeakResidual, LinearFieldIsBoundaryFlux) {
  // u = x: |u'| = 1, so entry i is (1 + 1) * (phi_i(1) - phi_i(0)).
  const int n = 16;
  const auto spec = neumann(interval(n), 1.5, 3.0);
  const auto r = weak_residual(spec, 0.0, x_field(spec.domain()));
  EXPECT_NEAR(r[0], -2.0, 1e-12);
  EXPECT_NEAR(r[n], 2.0, 1e-12);
  for (int i = 1; i < n; ++i) EXPECT_NEAR(r[i], 0.0, 1e-12);
}

TEST(WeakResidual, MatchesFiniteDifferences) {
  std::mt19937_64 rng(17);
  struct Config {
    double p, q;
    bool square;
  };
  const std::vector<Config> configs{{2.5, 3.0, false}, {4.0, 3.0, false}, {3.0, 4.0, true}, {1.5, 3.0, false},
                                    {1.5, 3.0, true}};
  int trials = 0;
  for (const auto& c : configs) {
    const auto spec = c.square ? make_problem(square(6), c.p, c.q, ConstantWeight{1.0}, ConstantWeight{0.5})
                               : neumann(interval(24), c.p, c.q);
    for (int k = 0; k < 4; ++k, ++trials) {
      const auto u = random_field(spec.domain(), rng);
      const auto v = random_field(spec.domain(), rng);
      const double lambda = 3.0 + k;
      const auto r = weak_residual(spec, lambda, u);
      const double analytic = std::inner_product(r.begin(), r.end(), v.values().begin(), 0.0);
      const double h = 1e-6 * u.max_abs();
      std::vector<double> plus(u.values().begin(), u.values().end()), minus = plus;
      for (std::size_t i = 0; i < plus.size(); ++i) {
        plus[i] += h * v[i];
        minus[i] -= h * v[i];
      }
      const double fd = (energy_J_lambda(spec, lambda, DiscreteField(spec.domain(), plus)) -
                         energy_J_lambda(spec, lambda, DiscreteField(spec.domain(), minus))) /
                        (2 * h);
      EXPECT_LE(std::abs(fd - analytic), 1e-5 * std::max(std::abs(fd), std::abs(analytic)))
          << "p=" << c.p << " q=" << c.q << " trial " << k;
    }
  }
  EXPECT_EQ(trials, 20);
}

TEST(Rayleigh, CosineModeOracle) {
  const auto spec = neumann(interval(512), 3.0, 2.0);
  const auto u = interpolate(spec.domain(), [](const Point& x) { return std::cos(std::numbers::pi * x[0]); });
  EXPECT_LE(rel(rayleigh_q(spec, u), std::numbers::pi * std::numbers::pi), 5e-3);
}

TEST(Rayleigh, InfiniteWhenMassVanishes) {
  const auto mesh = interval(16);
  const auto spec = make_problem(mesh, 1.5, 3.0, IndicatorWeight{{-1e9, -1e9}, {0.5, 1e9}, 1.0, 0.0},
                                 ConstantWeight{0.0});
  const auto u = interpolate(*mesh, [](const Point& x) { return x[0] > 0.75 ? x[0] - 0.75 : 0.0; });
  EXPECT_TRUE(std::isinf(rayleigh_q(spec, u)));
  EXPECT_TRUE(std::isinf(rayleigh_pq(spec, u)));
}

TEST(Rayleigh, ZeroHomogeneousAndOrdered) {
  std::mt19937_64 rng(5);
  const auto spec = neumann(interval(40), 1.5, 3.0);
  for (int k = 0; k < 10; ++k) {
    const auto u = random_field(spec.domain(), rng);
    EXPECT_LE(rel(rayleigh_q(spec, u.scaled(7.0)), rayleigh_q(spec, u)), 1e-13);
    EXPECT_GE(rayleigh_pq(spec, u), rayleigh_q(spec, u));
  }
  EXPECT_THROW(rayleigh_q(spec, DiscreteField::constant(spec.domain(), 0.0)), InvalidInput);
  EXPECT_THROW(rayleigh_pq(spec, DiscreteField::constant(spec.domain(), 0.0)), InvalidInput);
}

TEST(Rayleigh, ScaledPQQuotientApproachesQQuotient) {
  std::mt19937_64 rng(6);
  const auto spec = neumann(interval(40), 1.5, 3.0);
  const auto v = project_to_cone(spec, random_field(spec.domain(), rng)).field;
  EXPECT_LE(rel(rayleigh_pq(spec, v.scaled(1e3)), rayleigh_q(spec, v)), 1e-3);
}

TEST(AbNorm, Examples) {
  const auto spec = neumann(interval(32), 1.5, 3.0);
  EXPECT_EQ(ab_norm(spec, DiscreteField::constant(spec.domain(), 0.0)), 0.0);
  EXPECT_NEAR(ab_norm(spec, DiscreteField::constant(spec.domain(), 1.0)), 1.0, 1e-13);
}

TEST(AbNorm, PositiveOnNonzeroFields) {
  std::mt19937_64 rng(8);
  const auto spec = make_problem(interval(20), 1.5, 3.0, IndicatorWeight{{-1e9, -1e9}, {0.3, 1e9}, 1.0, 0.0},
                                 ConstantWeight{0.0});
  for (int k = 0; k < 200; ++k) {
    auto u = random_field(spec.domain(), rng);
    if (k % 4 == 0) u = DiscreteField::constant(spec.domain(), 1e-3 * (k + 1));
    EXPECT_GT(ab_norm(spec, u), 0.0);
  }
}

TEST(Homogeneity, AllTerms) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> t_dist(-4.0, 4.0);
  const double p = 1.5, q = 3.3;
  const auto spec = make_problem(square(5), p, q, ConstantWeight{1.0}, ConstantWeight{2.0});
  for (int k = 0; k < 30; ++k) {
    const auto u = random_field(spec.domain(), rng);
    const double t = t_dist(rng);
    const auto a = terms::evaluate(spec, u.values());
    const auto b = terms::evaluate(spec, u.scaled(t).values());
    const double at = std::abs(t);
    EXPECT_LE(rel(b.T1, std::pow(at, p) * a.T1), 1e-12);
    EXPECT_LE(rel(b.T2, std::pow(at, q) * a.T2), 1e-12);
    EXPECT_LE(rel(b.T3, std::pow(at, q) * a.T3), 1e-12);
    EXPECT_LE(rel(b.g, std::pow(at, q - 2) * t * a.g), 1e-12);
  }
}

TEST(NehariResidual, Examples) {
  const auto spec = neumann(interval(32), 1.5, 3.0);
  EXPECT_LT(nehari_residual(spec, 2.0, DiscreteField::constant(spec.domain(), 1.0)), 0.0);
  EXPECT_THROW(nehari_residual(spec, 2.0, DiscreteField::constant(spec.domain(), 0.0)), InvalidInput);
}

TEST(NehariScale, FormulaFixedPoints) {
  // q - p = 2: choosing lambda so that lambda T3 - T2 = 2 T1 gives t = 2^(-1/2); = T1 gives t = 1.
  std::mt19937_64 rng(10);
  const auto spec = neumann(interval(32), 1.5, 3.5);
  const auto v = project_to_cone(spec, random_field(spec.domain(), rng)).field;
  const auto t = terms::evaluate(spec, v.values());
  EXPECT_NEAR(nehari_scale(spec, (t.T2 + 2 * t.T1) / t.T3, v).t, std::sqrt(0.5), 1e-13);
  EXPECT_NEAR(nehari_scale(spec, (t.T2 + t.T1) / t.T3, v).t, 1.0, 1e-13);
  EXPECT_THROW(nehari_scale(spec, 0.5 * t.T2 / t.T3, v), NoScalingWitness);
  const auto coercive = neumann(interval(8), 4.0, 3.0);
  EXPECT_THROW(nehari_scale(coercive, 1e3, DiscreteField::constant(coercive.domain(), 1.0)), InvalidInput);
}

TEST(NehariScale, LandsOnManifoldWithEnergyIdentity) {
  std::mt19937_64 rng(12);
  const double p = 1.5, q = 3.0;
  const auto spec = neumann(interval(64), p, q);
  for (int k = 0; k < 10; ++k) {
    const auto v = project_to_cone(spec, random_field(spec.domain(), rng)).field;
    const double lambda = 1.5 * rayleigh_q(spec, v);
    const auto s = nehari_scale(spec, lambda, v);
    const auto f = evaluate_functionals(spec, lambda, s.field);
    EXPECT_LE(std::abs(nehari_residual(spec, lambda, s.field)), 1e-12 * (f.T1 + f.T2 + lambda * f.T3));
    EXPECT_LE(rel(f.J_lambda, (q - p) / (p * q) * f.T1), 1e-10);
  }
}

TEST(ProjectToCone, ShiftMatchesBisectionAndClosedForm) {
  // u = x on (0,1), q = 3: int |x - s|(x - s) dx = ((1 - s)^3 - s^3) / 3 vanishes at s = 1/2.
  const auto spec = neumann(interval(64), 1.5, 3.0);
  const auto u = x_field(spec.domain());
  const auto proj = project_to_cone(spec, u);
  EXPECT_NEAR(proj.shift, 0.5, 1e-12);
  EXPECT_NEAR(proj.shift, bisect_shift(spec, u), 1e-12);
  EXPECT_LE(std::abs(cone_residual(spec, proj.field)), 1e-12);
}

TEST(ProjectToCone, RandomFieldsAgainstBisection) {
  std::mt19937_64 rng(13);
  const auto spec = make_problem(square(6), 1.5, 3.7, ConstantWeight{0.5}, ConstantWeight{1.0});
  for (int k = 0; k < 5; ++k) {
    const auto u = random_field(spec.domain(), rng, 3.0);
    EXPECT_NEAR(project_to_cone(spec, u).shift, bisect_shift(spec, u), 1e-11);
  }
}

TEST(ProjectToCone, IdempotentOddAndKillsConstants) {
  std::mt19937_64 rng(14);
  const auto spec = neumann(interval(50), 1.5, 3.0);
  for (int k = 0; k < 10; ++k) {
    const auto u = random_field(spec.domain(), rng, 2.0);
    const auto once = project_to_cone(spec, u).field;
    const auto twice = project_to_cone(spec, once);
    EXPECT_LE(std::abs(twice.shift), 1e-12 * once.max_abs());
    const auto neg = project_to_cone(spec, u.scaled(-1.0)).field;
    for (std::size_t i = 0; i < u.size(); ++i) EXPECT_NEAR(neg[i], -once[i], 1e-12 * once.max_abs());
  }
  const auto c = project_to_cone(spec, DiscreteField::constant(spec.domain(), 4.2)).field;
  EXPECT_LE(c.max_abs(), 1e-12);
}

TEST(NormalizeMass, Examples) {
  const auto spec = neumann(interval(16), 1.5, 4.0);
  const auto u = normalize_mass(spec, DiscreteField::constant(spec.domain(), 2.0));  // T3 = 16
  for (double x : u.values()) EXPECT_NEAR(x, 1.0, 1e-14);
  const auto again = normalize_mass(spec, u);
  for (double x : again.values()) EXPECT_NEAR(x, 1.0, 1e-14);
  EXPECT_THROW(normalize_mass(spec, DiscreteField::constant(spec.domain(), 0.0)), InvalidInput);
}
