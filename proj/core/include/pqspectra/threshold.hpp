#pragma once

// The spectral threshold lambda1: the infimum of T2/T3 over the nonzero cone,
// computed as the minimum of the q-Dirichlet energy on the cone intersected
// with the unit-mass set. The pure q-Laplacian value lambda_1q comes from the
// same minimization with the weaker exponent hypothesis (q >= 2).

#include <cstdint>
#include <string>
#include <vector>

#include "pqspectra/descent.hpp"
#include "pqspectra/functionals.hpp"
#include "pqspectra/problem.hpp"

namespace pqspectra {

/// Lagrange multipliers of a constrained minimizer, with lambda* fixed to 1.
struct KktReport {
  std::vector<std::string> names;
  std::vector<double> multipliers;
  /// Relative sup norm of the multiplier-weighted stationarity equation.
  double stationarity_residual = 0.0;
  std::string multiplier_scaling = "lambda_star=1";
};

struct RestartOutcome {
  std::string seed_name;
  double value = 0.0;  // Rayleigh quotient at the restart's final point
  int iterations = 0;
  bool converged = false;
  double stationarity = 0.0;
  DiscreteField field;  // normalized to unit mass
};

struct ThresholdResult {
  double lambda1 = 0.0;
  DiscreteField minimizer;  // g = 0 and T3 = 1
  int iterations = 0;
  double cone_residual = 0.0;  // relative |g|
  double mass_residual = 0.0;  // |T3 - 1|
  KktReport kkt;
  /// |lambda* lambda1 + mu1| / lambda1 with mu1 fitted from the stationarity equation.
  double kkt_identity_defect = 0.0;
  std::vector<double> history;
  std::vector<RestartOutcome> restarts;
};

struct ThresholdOptions {
  DescentOptions descent;
  int restarts = 3;
  std::uint64_t seed = 0;
  /// A restart that stagnates is still accepted when its relative residual is below this.
  double accept_residual = 1e-6;
};

/// First positive eigenvalue of the q-Laplacian problem (q >= 2, p ignored).
ThresholdResult solve_lambda_1q(const ProblemSpec& spec, const ThresholdOptions& options = {});

/// lambda1 under the full hypotheses (q > 2, p != q).
ThresholdResult solve_lambda1(const ProblemSpec& spec, const ThresholdOptions& options = {});

struct ConsistencyReport {
  int samples = 0;
  double scale_parameter = 0.0;        // t used in rayleigh_pq(t v)
  double min_rayleigh_pq = 0.0;        // over the scaled samples
  double max_relative_gap = 0.0;       // |R_pq(t v) - R_q(v)| / R_q(v)
  bool scaled_above_lambda1 = false;   // every R_pq(t v) >= lambda1 - tol
  bool pointwise_order = false;        // every R_pq(v) >= R_q(v)
  double lambda1 = 0.0;
  double lambda_1q = 0.0;
  double relative_difference = 0.0;    // |lambda1 - lambda_1q| / lambda_1q
  bool p_below_q = false;
  bool equal_when_p_below_q = false;          // p < q and relative_difference <= 0.02
  bool lambda1_at_least_lambda_1q = false;
  bool ok = false;
};

/// Probes the two quotient characterizations and the comparison with lambda_1q.
ConsistencyReport check_consistency(const ProblemSpec& spec, const ThresholdResult& result,
                                    const ThresholdResult& q_laplacian, int samples, std::uint64_t seed = 0,
                                    double tol = 1e-6);

/// Same, computing lambda_1q internally.
ConsistencyReport check_consistency(const ProblemSpec& spec, const ThresholdResult& result, int samples,
                                    std::uint64_t seed = 0, double tol = 1e-6);

}  // namespace pqspectra
