#include "pqspectra/threshold.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pqspectra/error.hpp"

namespace pqspectra {
namespace {

std::optional<ObjectiveEvaluation> rayleigh_objective(const terms::Values& v) {
  if (!(v.T3 > 0.0)) return std::nullopt;
  ObjectiveEvaluation ev;
  ev.value = v.T2 / v.T3;
  ev.partials = {0.0, 1.0 / v.T3, -v.T2 / (v.T3 * v.T3)};
  ev.residual_coefficients = {0.0, 1.0, -ev.value};
  return ev;
}

double sup_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

struct NamedSeed {
  std::string name;
  std::vector<double> values;
};

std::vector<NamedSeed> threshold_seeds(const ProblemSpec& spec, const ThresholdOptions& options,
                                       const H1Preconditioner& preconditioner) {
  const Mesh& mesh = spec.domain();
  std::vector<NamedSeed> seeds;
  try {
    const auto bump = bump_pair_seed(spec);
    seeds.push_back({"bump_pair", {bump.values().begin(), bump.values().end()}});
  } catch (const InvalidInput&) {
    // Coarse meshes may have no disjoint supports; the other seeds still apply.
  }
  const auto random = random_smooth_field(mesh, mix_seed(options.seed, 1));
  seeds.push_back({"random_smooth", {random.values().begin(), random.values().end()}});
  seeds.push_back({"linear_mode", preconditioner.lowest_nonconstant_mode()});
  for (int k = 3; k < options.restarts; ++k) {
    const auto extra = random_smooth_field(mesh, mix_seed(options.seed, static_cast<std::uint64_t>(k) + 1));
    seeds.push_back({"random_smooth_" + std::to_string(k), {extra.values().begin(), extra.values().end()}});
  }
  if (static_cast<int>(seeds.size()) > options.restarts) seeds.resize(static_cast<std::size_t>(options.restarts));
  return seeds;
}

KktReport threshold_kkt(const ProblemSpec& spec, std::span<const double> u, double& identity_defect, double lambda) {
  terms::Gradients d;
  terms::gradients(spec, u, d);
  // lambda* dJ + mu1 dh1 + mu2 dh2 = 0 with lambda* = 1, J = T2, h1 = T3 - 1, h2 = g.
  const double mu1 = -dot(d.dT2, d.dT3) / dot(d.dT3, d.dT3);
  const double ones_t2 = std::accumulate(d.dT2.begin(), d.dT2.end(), 0.0);
  const double ones_t3 = std::accumulate(d.dT3.begin(), d.dT3.end(), 0.0);
  const double ones_g = std::accumulate(d.dg.begin(), d.dg.end(), 0.0);
  const double mu2 = ones_g != 0.0 ? -(ones_t2 + mu1 * ones_t3) / ones_g : 0.0;
  std::vector<double> r(u.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = d.dT2[i] + mu1 * d.dT3[i] + mu2 * d.dg[i];
  const double scale = sup_norm(d.dT2) + std::abs(mu1) * sup_norm(d.dT3) + std::abs(mu2) * sup_norm(d.dg);
  KktReport kkt;
  kkt.names = {"lambda_star", "mu1", "mu2"};
  kkt.multipliers = {1.0, mu1, mu2};
  kkt.stationarity_residual = scale > 0.0 ? sup_norm(r) / scale : sup_norm(r);
  identity_defect = std::abs(lambda + mu1) / lambda;
  return kkt;
}

ThresholdResult minimize_quotient(const ProblemSpec& spec, const ThresholdOptions& options) {
  const Mesh& mesh = spec.domain();
  H1Preconditioner preconditioner(mesh);
  ThresholdResult result;
  result.lambda1 = std::numeric_limits<double>::infinity();
  const ConeObjective objective = rayleigh_objective;
  DescentOptions descent = options.descent;
  if (descent.mass_drift == 0.0) descent.mass_drift = 16.0;

  int best = -1;
  std::vector<DescentResult> runs;
  for (auto& seed : threshold_seeds(spec, options, preconditioner)) {
    DescentResult run;
    try {
      // Start from unit mass so the gradient scale is comparable across seeds.
      const auto projected = project_to_cone(spec, DiscreteField(mesh, seed.values));
      if (projected.field.is_zero()) continue;
      const auto start = normalize_mass(spec, projected.field);
      run = minimize_on_cone(spec, objective, {start.values().begin(), start.values().end()}, descent,
                             preconditioner);
    } catch (const InvalidInput&) {
      continue;
    }
    RestartOutcome outcome;
    outcome.seed_name = seed.name;
    outcome.value = run.evaluation.value;
    outcome.iterations = run.iterations;
    outcome.stationarity = run.stationarity;
    outcome.converged = run.converged || (run.stagnated && run.stationarity <= options.accept_residual);
    outcome.field = normalize_mass(spec, DiscreteField(mesh, run.point));
    result.iterations += run.iterations;
    if (outcome.converged && outcome.value < result.lambda1) {
      result.lambda1 = outcome.value;
      best = static_cast<int>(result.restarts.size());
    }
    result.restarts.push_back(std::move(outcome));
    runs.push_back(std::move(run));
  }
  if (best < 0) throw ConvergenceFailure("lambda1: no restart converged");

  result.minimizer = result.restarts[static_cast<std::size_t>(best)].field;
  result.history = runs[static_cast<std::size_t>(best)].history;
  const auto values = terms::evaluate(spec, result.minimizer.values());
  result.lambda1 = values.T2 / values.T3;
  result.cone_residual = relative_cone_residual(spec, result.minimizer);
  result.mass_residual = std::abs(values.T3 - 1.0);
  result.kkt = threshold_kkt(spec, result.minimizer.values(), result.kkt_identity_defect, result.lambda1);
  return result;
}

}  // namespace

ThresholdResult solve_lambda_1q(const ProblemSpec& spec, const ThresholdOptions& options) {
  require_valid(spec, Hypotheses::QLaplacian);
  // p plays no role in the q-Laplacian quotient.
  ProblemSpec q_only = spec;
  q_only.p = spec.q;
  return minimize_quotient(q_only, options);
}

ThresholdResult solve_lambda1(const ProblemSpec& spec, const ThresholdOptions& options) {
  require_valid(spec, Hypotheses::Full);
  return minimize_quotient(spec, options);
}

ConsistencyReport check_consistency(const ProblemSpec& spec, const ThresholdResult& result,
                                    const ThresholdResult& q_laplacian, int samples, std::uint64_t seed,
                                    double tol) {
  const Mesh& mesh = spec.domain();
  ConsistencyReport report;
  report.lambda1 = result.lambda1;
  report.lambda_1q = q_laplacian.lambda1;
  report.p_below_q = spec.p < spec.q;
  report.scale_parameter = report.p_below_q ? 1e3 : 1e-3;
  report.min_rayleigh_pq = std::numeric_limits<double>::infinity();
  report.scaled_above_lambda1 = true;
  report.pointwise_order = true;

  for (int k = 0; k < samples; ++k) {
    const auto raw = random_smooth_field(mesh, mix_seed(seed, 1000 + static_cast<std::uint64_t>(k)));
    const auto projected = project_to_cone(spec, raw).field;
    if (projected.is_zero()) continue;
    const auto t = terms::evaluate(spec, projected.values());
    if (!(t.T3 > 0.0)) continue;
    const auto v = normalize_mass(spec, projected);
    const double rq = rayleigh_q(spec, v);
    const double rpq = rayleigh_pq(spec, v);
    const double scaled = rayleigh_pq(spec, v.scaled(report.scale_parameter));
    ++report.samples;
    report.min_rayleigh_pq = std::min(report.min_rayleigh_pq, scaled);
    report.max_relative_gap = std::max(report.max_relative_gap, std::abs(scaled - rq) / rq);
    if (scaled < result.lambda1 * (1.0 - tol)) report.scaled_above_lambda1 = false;
    if (rpq < rq) report.pointwise_order = false;
  }

  report.relative_difference = std::abs(report.lambda1 - report.lambda_1q) / report.lambda_1q;
  report.equal_when_p_below_q = report.p_below_q && report.relative_difference <= 0.02;
  report.lambda1_at_least_lambda_1q = report.lambda1 >= report.lambda_1q * (1.0 - tol);
  report.ok = report.samples > 0 && report.scaled_above_lambda1 && report.pointwise_order &&
              (report.p_below_q ? report.equal_when_p_below_q : report.lambda1_at_least_lambda_1q);
  return report;
}

ConsistencyReport check_consistency(const ProblemSpec& spec, const ThresholdResult& result, int samples,
                                    std::uint64_t seed, double tol) {
  ThresholdOptions options;
  options.seed = seed;
  return check_consistency(spec, result, solve_lambda_1q(spec, options), samples, seed, tol);
}

}  // namespace pqspectra
