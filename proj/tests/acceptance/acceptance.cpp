// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pqspectra/error.hpp"
#include "pqspectra/functionals.hpp"
#include "pqspectra/spectrum.hpp"
#include "pqspectra/sweep.hpp"
#include "pqspectra/threshold.hpp"

using namespace pqspectra;
namespace fs = std::filesystem;

namespace {

constexpr double kPi2 = std::numbers::pi * std::numbers::pi;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + std::string("FAILED ") + what;
    }
  }
  void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

ProblemSpec neumann(int n, double p, double q, bool square = false) {
  auto mesh = square ? std::make_shared<const Mesh>(build_rectangle_mesh(n, n, {0.0, 1.0, 0.0, 1.0}))
                     : std::make_shared<const Mesh>(build_interval_mesh(n, 0.0, 1.0));
  return make_problem(mesh, p, q, ConstantWeight{1.0}, ConstantWeight{0.0});
}

DiscreteField random_field(const Mesh& mesh, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<double> v(mesh.node_count());
  for (double& x : v) x = d(rng);
  return DiscreteField(mesh, std::move(v));
}

std::string sweep_toml(double p, const fs::path& dir, int workers) {
  std::ostringstream s;
  s << "[problem]\np = " << p << "\nq = 3.0\n"
    << "[domain]\nkind = \"interval\"\nbounds = [0.0, 1.0]\nelements = 256\n"
    << "[weights.a]\nkind = \"constant\"\nvalue = 1.0\n[weights.b]\nkind = \"constant\"\nvalue = 0.0\n"
    << "[lambda_grid]\nvalues = [0.0]\nmultipliers = [0.5, 1.0, 1.05, 2.0, 10.0]\n"
    << "[solver]\ntol = 1e-8\nseed = 7\nworkers = " << workers << "\n"
    << "[output]\ndir = \"" << dir.string() << "\"\n";
  return s.str();
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// ---------------------------------------------------------------- criteria

Outcome classical_oracle() {
  Outcome o;
  auto t0 = std::chrono::steady_clock::now();
  const double l1 = solve_lambda_1q(neumann(256, 3.0, 2.0)).lambda1;
  const double s1 = seconds_since(t0);
  o.require(rel(l1, kPi2) <= 0.01, "1D within 1%");
  o.require(s1 < 5.0, "1D under 5 s");
  o.note("1D " + fmt("%.8f", l1) + " err " + fmt("%.2e", rel(l1, kPi2)) + " in " + fmt("%.2fs", s1));
  t0 = std::chrono::steady_clock::now();
  const double l2 = solve_lambda_1q(neumann(32, 3.0, 2.0, true)).lambda1;
  const double s2 = seconds_since(t0);
  o.require(rel(l2, kPi2) <= 0.02, "square within 2%");
  o.require(s2 < 60.0, "square under 60 s");
  o.note("square " + fmt("%.8f", l2) + " err " + fmt("%.2e", rel(l2, kPi2)) + " in " + fmt("%.2fs", s2));
  return o;
}

Outcome p_independence() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> values{solve_lambda_1q(neumann(256, 1.5, 3.0)).lambda1};
  for (double p : {1.5, 2.0, 2.5}) values.push_back(solve_lambda1(neumann(256, p, 3.0)).lambda1);
  double worst = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    for (std::size_t j = i + 1; j < values.size(); ++j) worst = std::max(worst, rel(values[i], values[j]));
  }
  const double s = seconds_since(t0);
  o.require(worst <= 0.02, "pairwise within 2%");
  o.require(s < 60.0, "under 60 s");
  o.note("lambda_1q " + fmt("%.10f", values[0]) + ", worst pairwise " + fmt("%.2e", worst) + " in " + fmt("%.2fs", s));
  return o;
}

struct SweepRuns {
  std::vector<std::pair<ProblemSpec, SweepReport>> runs;
  double seconds = 0.0;
};

const SweepRuns& sweeps() {
  static const SweepRuns cached = [] {
    SweepRuns s;
    const auto t0 = std::chrono::steady_clock::now();
    for (double p : {1.5, 4.0}) {
      const auto plan = parse_config_text(sweep_toml(p, "unused", 1));
      auto spec = build_problem(plan);
      auto report = run_sweep(plan, spec);
      s.runs.emplace_back(std::move(spec), std::move(report));
    }
    s.seconds = seconds_since(t0);
    return s;
  }();
  return cached;
}

Outcome trichotomy() {
  Outcome o;
  const auto& s = sweeps();
  const std::vector<RowStatus> expected{RowStatus::EigenvalueZero, RowStatus::NoSolution, RowStatus::BoundaryExcluded,
                                        RowStatus::Eigenpair,      RowStatus::Eigenpair,  RowStatus::Eigenpair};
  int eigenpairs = 0;
  double worst_residual = 0.0, worst_identity = 0.0;
  for (const auto& [spec, report] : s.runs) {
    const std::string tag = "p=" + fmt("%g", spec.p);
    o.require(report.rows.size() == expected.size(), tag + " row count");
    for (std::size_t i = 0; i < std::min(expected.size(), report.rows.size()); ++i) {
      const auto& row = report.rows[i];
      o.require(row.status == expected[i], tag + " row " + std::to_string(i) + " is " + to_string(row.status) +
                                               (row.message.empty() ? "" : " (" + row.message + ")"));
      if (row.status != RowStatus::Eigenpair) continue;
      ++eigenpairs;
      SpectrumOptions strict;
      strict.tol = 1e-8;
      const auto check = kkt_check(spec, row.lambda, row.pair->field, strict);
      o.require(check.passed, tag + " kkt_check at lambda " + fmt("%.6g", row.lambda));
      const auto& v = row.pair->values;
      const double identity = rel(row.lambda - v.T2 / v.T3, v.T1 / v.T3);
      o.require(identity <= 1e-8, tag + " mass identity");
      worst_residual = std::max(worst_residual, check.weak_residual_norm);
      worst_identity = std::max(worst_identity, identity);
    }
  }
  o.require(s.seconds < 180.0, "under 3 min");
  o.note(std::to_string(eigenpairs) + " eigenpairs, worst weak residual " + fmt("%.2e", worst_residual) +
         ", worst identity defect " + fmt("%.2e", worst_identity) + " in " + fmt("%.2fs", s.seconds));
  return o;
}

Outcome nehari_identity_and_signs() {
  Outcome o;
  double worst = 0.0, min_m = INFINITY, max_j = -INFINITY;
  int nehari = 0, coercive = 0;
  for (const auto& [spec, report] : sweeps().runs) {
    for (const auto& row : report.rows) {
      if (row.status != RowStatus::Eigenpair) continue;
      const auto& e = *row.pair;
      if (e.case_tag == CaseTag::Nehari) {
        ++nehari;
        const double target = (spec.q - spec.p) / (spec.p * spec.q) * e.values.T1;
        worst = std::max(worst, rel(e.values.J_lambda, target));
        min_m = std::min(min_m, e.m_lambda);
      } else if (e.case_tag == CaseTag::Coercive) {
        ++coercive;
        max_j = std::max(max_j, e.values.J_lambda);
      }
    }
  }
  o.require(nehari > 0 && coercive > 0, "both cases present");
  o.require(worst <= 1e-10, "J = (q-p)/(pq) T1");
  o.require(min_m > 0.0, "m_lambda > 0");
  o.require(max_j < 0.0, "J < 0 in the coercive case");
  o.note(std::to_string(nehari) + " Nehari (worst identity " + fmt("%.2e", worst) + ", min m " + fmt("%.3e", min_m) +
         "), " + std::to_string(coercive) + " coercive (max J " + fmt("%.3e", max_j) + ")");
  return o;
}

Outcome scaling_formula() {
  Outcome o;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> above(1.01, 6.0), below(0.1, 1.0);
  int admissible = 0, rejected = 0, wrong = 0;
  double worst = 0.0;
  for (const auto& spec : {neumann(128, 1.5, 3.0), neumann(10, 2.5, 3.5, true)}) {
    for (int k = 0; k < 50; ++k) {
      const auto v = project_to_cone(spec, random_field(spec.domain(), rng)).field;
      const double rq = rayleigh_q(spec, v);
      const double lambda = rq * above(rng);
      const auto s = nehari_scale(spec, lambda, v);
      const auto t = terms::evaluate(spec, s.field.values());
      worst = std::max(worst, std::abs(t.T1 + t.T2 - lambda * t.T3) / (t.T1 + t.T2 + lambda * t.T3));
      ++admissible;
      try {
        nehari_scale(spec, rq * below(rng), v);
        ++wrong;
      } catch (const NoScalingWitness&) {
        ++rejected;
      }
    }
  }
  o.require(admissible == 100, "100 admissible samples");
  o.require(worst <= 1e-12, "|g1| <= 1e-12 scaled");
  o.require(wrong == 0, "non-positive denominators rejected");
  o.note(std::to_string(admissible) + " scaled, worst relative |g1| " + fmt("%.2e", worst) + ", " +
         std::to_string(rejected) + " inadmissible inputs raised");
  return o;
}

Outcome quotient_probe() {
  Outcome o;
  const auto spec = neumann(256, 1.5, 3.0);
  const double l1 = solve_lambda1(spec).lambda1;
  double worst_gap = 0.0, min_scaled = INFINITY;
  int samples = 0;
  for (int k = 0; k < 50; ++k) {
    const auto v = project_to_cone(spec, random_smooth_field(spec.domain(), mix_seed(31, k))).field;
    if (!(terms::evaluate(spec, v.values()).T3 > 0.0)) continue;
    ++samples;
    const double scaled = rayleigh_pq(spec, v.scaled(1e3));
    worst_gap = std::max(worst_gap, rel(scaled, rayleigh_q(spec, v)));
    min_scaled = std::min(min_scaled, scaled);
  }
  o.require(samples == 50, "50 samples with positive mass");
  o.require(worst_gap <= 1e-3, "within 1e-3 of R_q");
  o.require(min_scaled >= l1 - 1e-6, "above lambda1 - 1e-6");
  o.note("worst gap " + fmt("%.2e", worst_gap) + ", min scaled quotient " + fmt("%.6f", min_scaled) +
         " vs lambda1 " + fmt("%.6f", l1));
  return o;
}

Outcome gradient_consistency() {
  Outcome o;
  std::mt19937_64 rng(77);
  struct Case {
    double p, q;
    bool square;
  };
  const std::vector<Case> cases{{2.0, 3.0, false}, {4.0, 3.0, false}, {2.5, 3.5, true}, {3.0, 2.5, true},
                                {1.5, 3.0, false}};
  double worst = 0.0;
  int trials = 0;
  for (const auto& c : cases) {
    const auto spec = c.square ? make_problem(std::make_shared<const Mesh>(build_rectangle_mesh(6, 6, {0, 1, 0, 1})),
                                              c.p, c.q, ConstantWeight{1.0}, ConstantWeight{0.5})
                               : neumann(32, c.p, c.q);
    for (int k = 0; k < 4; ++k, ++trials) {
      // Random nodal values: no element has a zero gradient, which keeps p < 2 differentiable.
      const auto u = random_field(spec.domain(), rng);
      const auto v = random_field(spec.domain(), rng);
      const double lambda = 2.0 + k;
      const auto r = weak_residual(spec, lambda, u);
      const double analytic = std::inner_product(r.begin(), r.end(), v.values().begin(), 0.0);
      const double h = 1e-6 * u.max_abs();
      std::vector<double> a(u.values().begin(), u.values().end()), b = a;
      for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] += h * v[i];
        b[i] -= h * v[i];
      }
      const double fd = (energy_J_lambda(spec, lambda, DiscreteField(spec.domain(), a)) -
                         energy_J_lambda(spec, lambda, DiscreteField(spec.domain(), b))) /
                        (2 * h);
      worst = std::max(worst, std::abs(fd - analytic) / std::max(std::abs(fd), std::abs(analytic)));
    }
  }
  o.require(trials == 20, "20 trials");
  o.require(worst <= 1e-5, "relative 1e-5");
  o.note(std::to_string(trials) + " trials, worst relative mismatch " + fmt("%.2e", worst));
  return o;
}

Outcome homogeneity_and_projection() {
  Outcome o;
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> t_dist(-5.0, 5.0);
  double worst_h = 0.0, worst_idem = 0.0, worst_odd = 0.0;
  int positive = 0;
  for (const auto& spec : {neumann(64, 1.5, 3.0), make_problem(std::make_shared<const Mesh>(build_rectangle_mesh(
                                                                    8, 8, {0, 1, 0, 1})),
                                                                4.0, 3.3, ConstantWeight{0.5}, ConstantWeight{1.0})}) {
    const double p = spec.p, q = spec.q;
    for (int k = 0; k < 50; ++k) {
      const auto u = random_field(spec.domain(), rng);
      const double t = t_dist(rng), at = std::abs(t);
      const auto a = terms::evaluate(spec, u.values());
      const auto b = terms::evaluate(spec, u.scaled(t).values());
      worst_h = std::max({worst_h, rel(b.T1, std::pow(at, p) * a.T1), rel(b.T2, std::pow(at, q) * a.T2),
                          rel(b.T3, std::pow(at, q) * a.T3), rel(b.g, std::pow(at, q - 2) * t * a.g)});
      const auto once = project_to_cone(spec, u).field;
      const auto twice = project_to_cone(spec, once).field;
      const auto neg = project_to_cone(spec, u.scaled(-1.0)).field;
      for (std::size_t i = 0; i < u.size(); ++i) {
        worst_idem = std::max(worst_idem, std::abs(twice[i] - once[i]) / once.max_abs());
        worst_odd = std::max(worst_odd, std::abs(neg[i] + once[i]) / once.max_abs());
      }
    }
    for (int k = 0; k < 100; ++k) {
      auto u = random_field(spec.domain(), rng);
      if (k % 5 == 0) u = DiscreteField::constant(spec.domain(), 1e-3 * (k + 1));
      if (ab_norm(spec, u) > 0.0) ++positive;
    }
  }
  o.require(worst_h <= 1e-12, "homogeneity 1e-12");
  o.require(worst_idem <= 1e-12, "projection idempotent");
  o.require(worst_odd <= 1e-12, "projection odd");
  o.require(positive == 200, "ab_norm positive on 200 fields");
  o.note("homogeneity " + fmt("%.1e", worst_h) + ", idempotence " + fmt("%.1e", worst_idem) + ", oddness " +
         fmt("%.1e", worst_odd) + ", ab_norm > 0 on " + std::to_string(positive) + "/200");
  return o;
}

Outcome mesh_convergence() {
  Outcome o;
  const double a = solve_lambda1(neumann(512, 1.5, 3.0)).lambda1;
  const double b = solve_lambda1(neumann(1024, 1.5, 3.0)).lambda1;
  const double c = solve_lambda1(neumann(16, 1.5, 3.0, true)).lambda1;
  const double d = solve_lambda1(neumann(32, 1.5, 3.0, true)).lambda1;
  o.require(rel(a, b) < 0.01, "1D under 1%");
  o.require(rel(c, d) < 0.05, "2D under 5%");
  o.note("1D 512->1024 " + fmt("%.2e", rel(a, b)) + ", 2D 16->32 " + fmt("%.2e", rel(c, d)));
  return o;
}

Outcome determinism() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / "pqs_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directory(root);
  std::vector<std::string> csv;
  for (int workers : {1, 4, 1, 3}) {
    const fs::path dir = root / ("w" + std::to_string(csv.size()));
    const auto plan = parse_config_text(sweep_toml(1.5, dir, workers));
    emit_outputs(run_sweep(plan), plan);
    csv.push_back(read_file(dir / "sweep.csv"));
  }
  bool same = true;
  for (const auto& c : csv) same = same && c == csv.front();
  o.require(!csv.front().empty(), "sweep.csv written");
  o.require(same, "byte-identical sweep.csv");
  o.note(std::to_string(csv.size()) + " runs at workers {1,4,1,3}, " + std::to_string(csv.front().size()) +
         " bytes each");
  fs::remove_all(root);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"classical Neumann oracle (q = 2)", classical_oracle},
      {"threshold independent of p below q", p_independence},
      {"spectrum trichotomy on the lambda grid", trichotomy},
      {"Nehari energy identity and case signs", nehari_identity_and_signs},
      {"Nehari scaling formula", scaling_formula},
      {"scaled (p,q) quotient probe", quotient_probe},
      {"weak residual vs finite differences", gradient_consistency},
      {"homogeneity and cone projection", homogeneity_and_projection},
      {"mesh convergence of lambda1", mesh_convergence},
      {"deterministic sweep output", determinism},
  };
  int failures = 0;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome outcome;
    try {
      outcome = criteria[i].second();
    } catch (const std::exception& e) {
      outcome.pass = false;
      outcome.detail = std::string("exception: ") + e.what();
    }
    if (!outcome.pass) ++failures;
    std::printf("%s [%zu] %s: %s\n", outcome.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                outcome.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed in %.1fs\n", criteria.size() - static_cast<std::size_t>(failures),
              criteria.size(), seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
