#include "pqspectra/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pqspectra/error.hpp"

namespace pqspectra {

const char* to_string(CaseTag tag) {
  switch (tag) {
    case CaseTag::Zero: return "zero";
    case CaseTag::Nehari: return "nehari";
    case CaseTag::Coercive: return "coercive";
  }
  return "unknown";
}

namespace {

double sup_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double total(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); }

bool is_nonconstant(const DiscreteField& u) {
  const auto& v = u.values();
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *hi - *lo > 1e-6 * u.max_abs();
}

double mass_identity_defect(double lambda, const terms::Values& t) {
  if (!(t.T3 > 0.0)) return std::numeric_limits<double>::infinity();
  const double defect = std::abs(lambda - t.T2 / t.T3 - t.T1 / t.T3);
  return lambda > 0.0 ? defect / lambda : defect;
}

struct Seed {
  std::string name;
  DiscreteField field;  // on the cone, unit mass
};

// Candidate starting directions: every threshold restart (their quotient is
// close to lambda1, hence below any lambda > lambda1), then the bump pair and
// random smooth fields.
std::vector<Seed> spectrum_seeds(const ProblemSpec& spec, const ThresholdResult& threshold,
                                 const SpectrumOptions& options) {
  const Mesh& mesh = spec.domain();
  std::vector<Seed> seeds;
  auto add = [&](std::string name, const DiscreteField& raw) {
    try {
      const auto projected = project_to_cone(spec, raw).field;
      if (projected.is_zero()) return;
      seeds.push_back({std::move(name), normalize_mass(spec, projected)});
    } catch (const InvalidInput&) {
    }
  };
  if (threshold.minimizer.size() == mesh.node_count()) add("threshold_minimizer", threshold.minimizer);
  for (const auto& r : threshold.restarts) {
    if (r.converged && r.field.size() == mesh.node_count()) add("threshold_" + r.seed_name, r.field);
  }
  try {
    add("bump_pair", bump_pair_seed(spec));
  } catch (const InvalidInput&) {
  }
  for (int k = 0; k < options.random_seeds; ++k) {
    add("random_smooth_" + std::to_string(k),
        random_smooth_field(mesh, mix_seed(options.seed, 100 + static_cast<std::uint64_t>(k))));
  }
  return seeds;
}

KktReport nehari_kkt(const ProblemSpec& spec, double lambda, std::span<const double> u) {
  // J' + mu1 g1' + mu2 g' = 0 with g1 = T1 + T2 - lambda T3; the two multipliers
  // are fixed by testing with v = 1 and v = u.
  terms::Gradients d;
  terms::gradients(spec, u, d);
  const std::size_t n = u.size();
  const double p = spec.p, q = spec.q;
  std::vector<double> r(n), g1(n);
  for (std::size_t i = 0; i < n; ++i) {
    r[i] = d.dT1[i] / p + d.dT2[i] / q - lambda * d.dT3[i] / q;
    g1[i] = d.dT1[i] + d.dT2[i] - lambda * d.dT3[i];
  }
  const double a11 = total(g1), a12 = total(d.dg), b1 = -total(r);
  const double a21 = dot(u, g1), a22 = dot(u, d.dg), b2 = -dot(u, r);
  const double det = a11 * a22 - a12 * a21;
  double mu1 = 0.0, mu2 = 0.0;
  if (det != 0.0) {
    mu1 = (b1 * a22 - a12 * b2) / det;
    mu2 = (a11 * b2 - b1 * a21) / det;
  }
  std::vector<double> res(n);
  for (std::size_t i = 0; i < n; ++i) res[i] = r[i] + mu1 * g1[i] + mu2 * d.dg[i];
  const double scale = sup_norm(d.dT1) / p + sup_norm(d.dT2) / q + std::abs(lambda) * sup_norm(d.dT3) / q;
  KktReport kkt;
  kkt.names = {"lambda_star", "mu1", "mu2"};
  kkt.multipliers = {1.0, mu1, mu2};
  kkt.stationarity_residual = scale > 0.0 ? sup_norm(res) / scale : sup_norm(res);
  return kkt;
}

KktReport coercive_kkt(const ProblemSpec& spec, double lambda, std::span<const double> u) {
  terms::Gradients d;
  terms::gradients(spec, u, d);
  const std::size_t n = u.size();
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = d.dT1[i] / spec.p + d.dT2[i] / spec.q - lambda * d.dT3[i] / spec.q;
  const double dg = total(d.dg);
  const double mu = dg != 0.0 ? -total(r) / dg : 0.0;
  for (std::size_t i = 0; i < n; ++i) r[i] += mu * d.dg[i];
  const double scale =
      sup_norm(d.dT1) / spec.p + sup_norm(d.dT2) / spec.q + std::abs(lambda) * sup_norm(d.dT3) / spec.q;
  KktReport kkt;
  kkt.names = {"lambda_star", "mu"};
  kkt.multipliers = {1.0, mu};
  kkt.stationarity_residual = scale > 0.0 ? sup_norm(r) / scale : sup_norm(r);
  return kkt;
}

struct Candidate {
  std::string seed_name;
  DiscreteField field;
  double value = 0.0;
  int iterations = 0;
};

EigenPair finish(const ProblemSpec& spec, double lambda, const Candidate& best, CaseTag tag, int iterations,
                 const SpectrumOptions& options) {
  EigenPair pair;
  pair.lambda = lambda;
  pair.field = best.field;
  pair.case_tag = tag;
  pair.iterations = iterations;
  pair.seed_name = best.seed_name;
  pair.values = evaluate_functionals(spec, lambda, pair.field);
  const auto& v = pair.values;
  pair.weak_residual_norm = weak_residual_norm(spec, lambda, pair.field);
  pair.cone_residual = relative_cone_residual(spec, pair.field);
  pair.nehari_residual = std::abs(v.T1 + v.T2 - lambda * v.T3) / (v.T1 + v.T2 + lambda * v.T3);
  pair.mass_identity_defect = mass_identity_defect(lambda, {v.T1, v.T2, v.T3, v.g});
  pair.m_lambda = tag == CaseTag::Nehari ? v.J_lambda : best.value;
  pair.kkt = tag == CaseTag::Nehari ? nehari_kkt(spec, lambda, pair.field.values())
                                    : coercive_kkt(spec, lambda, pair.field.values());

  const auto check = kkt_check(spec, lambda, pair.field, options);
  if (!check.passed) {
    std::string msg = std::string(to_string(tag)) + " eigenpair at lambda=" + std::to_string(lambda) + " rejected:";
    for (const auto& f : check.failures) msg += " " + f + ";";
    throw ConvergenceFailure(msg);
  }
  return pair;
}

void require_positive_lambda(double lambda, const ThresholdResult& threshold, const char* who) {
  if (!(lambda > 0.0)) {
    throw InvalidInput(std::string(who) + ": lambda must be positive; use zero_eigenpair for lambda = 0");
  }
  if (!(lambda > threshold.lambda1)) {
    throw InvalidInput(std::string(who) + ": lambda must exceed lambda1 = " + std::to_string(threshold.lambda1));
  }
}

}  // namespace

EigenPair solve_nehari(const ProblemSpec& spec, double lambda, const ThresholdResult& threshold,
                       const SpectrumOptions& options) {
  require_valid(spec, Hypotheses::Full);
  if (!(spec.p < spec.q)) throw InvalidInput("solve_nehari: requires p < q");
  if (!(lambda > 0.0)) throw InvalidInput("solve_nehari: lambda must be positive; use zero_eigenpair for lambda = 0");
  const Mesh& mesh = spec.domain();
  const double p = spec.p, q = spec.q;
  const double c = (q - p) / (p * q);

  // m(w) = J_lambda(t(w) w) = c T1^(q/(q-p)) / D^(p/(q-p)), D = lambda T3 - T2; 0-homogeneous in w.
  const ConeObjective objective = [=](const terms::Values& t) -> std::optional<ObjectiveEvaluation> {
    const double D = lambda * t.T3 - t.T2;
    if (!(D > 0.0) || !(t.T1 > 0.0)) return std::nullopt;
    ObjectiveEvaluation ev;
    ev.value = c * std::exp((q * std::log(t.T1) - p * std::log(D)) / (q - p));
    const double k = ev.value / (q - p);
    ev.partials = {k * q / t.T1, k * p / D, -k * p * lambda / D};
    const double tau = t.T1 / D;
    ev.residual_coefficients = {1.0 / p, tau / q, -tau * lambda / q};
    return ev;
  };

  H1Preconditioner preconditioner(mesh);
  DescentOptions descent = options.descent;
  if (descent.mass_drift == 0.0) descent.mass_drift = 16.0;

  bool witnessed = false;
  int iterations = 0;
  std::optional<Candidate> best;
  for (const auto& seed : spectrum_seeds(spec, threshold, options)) {
    const auto t = terms::evaluate(spec, seed.field.values());
    if (!(lambda * t.T3 - t.T2 > 0.0) || !(t.T1 > 0.0)) continue;
    witnessed = true;
    DescentResult run;
    try {
      run = minimize_on_cone(spec, objective, {seed.field.values().begin(), seed.field.values().end()}, descent,
                             preconditioner);
    } catch (const InvalidInput&) {
      continue;
    }
    iterations += run.iterations;
    if (!run.converged && run.stationarity > options.tol) continue;
    if (best && run.evaluation.value >= best->value) continue;
    const auto scaled = nehari_scale(spec, lambda, DiscreteField(mesh, run.point));
    best = Candidate{seed.name, scaled.field, run.evaluation.value, run.iterations};
  }
  if (!witnessed) {
    throw NoScalingWitness("solve_nehari: lambda T3 - T2 <= 0 for every seed; lambda = " + std::to_string(lambda) +
                           " does not exceed the quotient of any cone field");
  }
  if (!best) throw ConvergenceFailure("solve_nehari: no restart converged at lambda = " + std::to_string(lambda));
  if (!(best->value > 0.0)) throw ConvergenceFailure("solve_nehari: non-positive Nehari minimum");
  return finish(spec, lambda, *best, CaseTag::Nehari, iterations, options);
}

EigenPair solve_coercive(const ProblemSpec& spec, double lambda, const ThresholdResult& threshold,
                         const SpectrumOptions& options) {
  require_valid(spec, Hypotheses::Full);
  if (!(spec.q < spec.p)) throw InvalidInput("solve_coercive: requires q < p");
  require_positive_lambda(lambda, threshold, "solve_coercive");
  const Mesh& mesh = spec.domain();
  const double p = spec.p, q = spec.q;

  const ConeObjective objective = [=](const terms::Values& t) -> std::optional<ObjectiveEvaluation> {
    ObjectiveEvaluation ev;
    ev.value = t.T1 / p + t.T2 / q - lambda * t.T3 / q;
    ev.partials = {1.0 / p, 1.0 / q, -lambda / q};
    ev.residual_coefficients = ev.partials;
    return ev;
  };

  H1Preconditioner preconditioner(mesh);
  int iterations = 0;
  bool negative_start = false;
  std::optional<Candidate> best;
  for (const auto& seed : spectrum_seeds(spec, threshold, options)) {
    // Start at the minimum of J along the ray through the seed, which is
    // negative exactly when the seed's quotient is below lambda.
    const auto t = terms::evaluate(spec, seed.field.values());
    const double D = lambda * t.T3 - t.T2;
    if (!(D > 0.0) || !(t.T1 > 0.0)) continue;
    negative_start = true;
    const auto start = seed.field.scaled(std::pow(D / t.T1, 1.0 / (p - q)));
    DescentResult run;
    try {
      run = minimize_on_cone(spec, objective, {start.values().begin(), start.values().end()}, options.descent,
                             preconditioner);
    } catch (const InvalidInput&) {
      continue;
    }
    iterations += run.iterations;
    if (!run.converged && run.stationarity > options.tol) continue;
    if (!(run.evaluation.value < 0.0)) continue;
    if (best && run.evaluation.value >= best->value) continue;
    best = Candidate{seed.name, DiscreteField(mesh, run.point), run.evaluation.value, run.iterations};
  }
  if (!negative_start) {
    throw NoScalingWitness("solve_coercive: no seed with J_lambda < 0; suspect lambda <= lambda1");
  }
  if (!best) {
    throw ConvergenceFailure("solve_coercive: every restart ended with J_lambda >= 0 or without converging");
  }
  return finish(spec, lambda, *best, CaseTag::Coercive, iterations, options);
}

EigenPair solve_eigenpair(const ProblemSpec& spec, double lambda, const ThresholdResult& threshold,
                          const SpectrumOptions& options) {
  if (spec.p < spec.q) {
    require_positive_lambda(lambda, threshold, "solve_nehari");
    return solve_nehari(spec, lambda, threshold, options);
  }
  return solve_coercive(spec, lambda, threshold, options);
}

EigenPair zero_eigenpair(const ProblemSpec& spec) {
  require_valid(spec, Hypotheses::QLaplacian);
  EigenPair pair;
  pair.lambda = 0.0;
  pair.field = DiscreteField::constant(spec.domain(), 1.0);
  pair.case_tag = CaseTag::Zero;
  pair.values = evaluate_functionals(spec, 0.0, pair.field);
  pair.weak_residual_norm = weak_residual_norm(spec, 0.0, pair.field);
  pair.cone_residual = relative_cone_residual(spec, pair.field);
  pair.mass_identity_defect = mass_identity_defect(0.0, {pair.values.T1, pair.values.T2, pair.values.T3, 0.0});
  pair.m_lambda = pair.values.J_lambda;
  pair.kkt.names = {"lambda_star"};
  pair.kkt.multipliers = {1.0};
  pair.kkt.stationarity_residual = pair.weak_residual_norm;
  return pair;
}

NonexistenceCertificate certify_nonexistence(const ProblemSpec& spec, double lambda, const ThresholdResult& threshold,
                                             const SpectrumOptions& options) {
  if (!(lambda > 0.0)) throw InvalidInput("certify_nonexistence: lambda must be positive");
  const double lambda1 = threshold.lambda1;
  if (lambda > lambda1 * (1.0 + options.boundary_tol)) {
    throw InvalidInput("certify_nonexistence: lambda = " + std::to_string(lambda) +
                       " is outside the certified interval (0, lambda1 = " + std::to_string(lambda1) + "]");
  }
  const Mesh& mesh = spec.domain();
  NonexistenceCertificate cert;
  cert.lambda = lambda;
  cert.lambda1_ref = lambda1;
  cert.margin = std::max(lambda1 - lambda, 0.0);
  cert.boundary_case = std::abs(lambda - lambda1) <= options.boundary_tol * lambda1;
  cert.min_probe_rayleigh = std::numeric_limits<double>::infinity();

  auto probe = [&](const DiscreteField& raw) {
    const auto v = project_to_cone(spec, raw).field;
    if (v.is_zero()) return;
    const double r = rayleigh_q(spec, v);
    ++cert.probe_count;
    cert.min_probe_rayleigh = std::min(cert.min_probe_rayleigh, r);
  };
  for (const auto& r : threshold.restarts) {
    if (r.field.size() == mesh.node_count()) probe(r.field);
  }
  for (int k = 0; k < options.probes; ++k) {
    probe(random_smooth_field(mesh, mix_seed(options.seed, 5000 + static_cast<std::uint64_t>(k))));
  }
  // A probe below lambda1 means the threshold itself is wrong, and with it the certificate.
  const double floor = lambda1 * (1.0 - std::max(options.tol, 1e-6));
  if (cert.probe_count == 0 || cert.min_probe_rayleigh < floor) {
    throw CertificationFailure("certify_nonexistence: probe quotient " + std::to_string(cert.min_probe_rayleigh) +
                               " below lambda1 = " + std::to_string(lambda1));
  }
  return cert;
}

VerificationReport kkt_check(const ProblemSpec& spec, double lambda, const DiscreteField& candidate,
                             const SpectrumOptions& options) {
  if (candidate.is_zero()) throw InvalidInput("kkt_check: the zero field is not an eigenfunction");
  VerificationReport report;
  report.lambda = lambda;
  report.weak_residual_norm = weak_residual_norm(spec, lambda, candidate);
  report.cone_residual = relative_cone_residual(spec, candidate);
  const auto t = terms::evaluate(spec, candidate.values());
  report.mass_identity_defect = mass_identity_defect(lambda, t);
  report.nonconstant = is_nonconstant(candidate);

  auto require = [&](bool ok, std::string what) {
    if (!ok) report.failures.push_back(std::move(what));
  };
  require(report.weak_residual_norm <= options.tol, "weak residual " + std::to_string(report.weak_residual_norm));
  if (lambda != 0.0) {
    require(report.cone_residual <= options.constraint_tol, "cone residual " + std::to_string(report.cone_residual));
    require(report.mass_identity_defect <= options.tol,
            "mass identity defect " + std::to_string(report.mass_identity_defect));
    require(report.nonconstant, "constant field");
  }
  report.passed = report.failures.empty();
  return report;
}

}  // namespace pqspectra
