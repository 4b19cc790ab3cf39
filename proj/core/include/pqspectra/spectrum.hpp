#pragma once

// Eigenpairs for a prescribed lambda. Below or at the threshold no eigenpair
// exists and a certificate is produced instead; above it the eigenfunction is
// obtained by minimization on the cone:
//   p < q  : J_lambda restricted to the Nehari set T1 + T2 = lambda T3,
//   q < p  : J_lambda itself, which is coercive on the cone.
// lambda = 0 is always an eigenvalue with the constants as eigenfunctions.

#include <cstdint>
#include <string>
#include <vector>

#include "pqspectra/descent.hpp"
#include "pqspectra/functionals.hpp"
#include "pqspectra/problem.hpp"
#include "pqspectra/threshold.hpp"

namespace pqspectra {

enum class CaseTag { Zero, Nehari, Coercive };

const char* to_string(CaseTag tag);

struct EigenPair {
  double lambda = 0.0;
  DiscreteField field;  // the eigenfunction itself; not rescaled, since the problem is not homogeneous
  double weak_residual_norm = 0.0;
  double cone_residual = 0.0;     // relative |g|
  double nehari_residual = 0.0;   // |T1 + T2 - lambda T3| / (T1 + T2 + lambda T3)
  double mass_identity_defect = 0.0;  // |lambda - R_q - T1/T3| / lambda
  FunctionalValues values;
  double m_lambda = 0.0;  // Nehari minimum; equals J_lambda(field) in the Nehari case
  CaseTag case_tag = CaseTag::Zero;
  KktReport kkt;
  int iterations = 0;
  std::string seed_name;
};

struct SpectrumOptions {
  DescentOptions descent;
  /// Relative weak-residual tolerance for acceptance.
  double tol = 1e-8;
  /// Relative cone-residual tolerance for acceptance.
  double constraint_tol = 1e-10;
  /// Random cone fields used as certificate probes.
  int probes = 32;
  /// Extra random seeds for the eigenpair minimizations.
  int random_seeds = 2;
  std::uint64_t seed = 0;
  /// |lambda - lambda1| <= boundary_tol * lambda1 is treated as lambda = lambda1.
  double boundary_tol = 1e-9;
};

/// p < q and lambda > lambda1. Throws NoScalingWitness when no seed has R_q < lambda.
EigenPair solve_nehari(const ProblemSpec& spec, double lambda, const ThresholdResult& threshold,
                       const SpectrumOptions& options = {});

/// q < p and lambda > lambda1.
EigenPair solve_coercive(const ProblemSpec& spec, double lambda, const ThresholdResult& threshold,
                         const SpectrumOptions& options = {});

/// Dispatches to solve_nehari or solve_coercive by the exponent order.
EigenPair solve_eigenpair(const ProblemSpec& spec, double lambda, const ThresholdResult& threshold,
                          const SpectrumOptions& options = {});

/// (0, u = 1).
EigenPair zero_eigenpair(const ProblemSpec& spec);

struct NonexistenceCertificate {
  double lambda = 0.0;
  double lambda1_ref = 0.0;
  double margin = 0.0;  // lambda1_ref - lambda, clamped at 0 on the boundary
  std::string evidence = "quotient_bound";
  double min_probe_rayleigh = 0.0;  // smallest R_q over all probes
  int probe_count = 0;
  bool boundary_case = false;
};

/// Requires 0 < lambda <= lambda1 (up to boundary_tol). Every probe must satisfy
/// R_q >= lambda1 - tol, otherwise CertificationFailure is thrown.
NonexistenceCertificate certify_nonexistence(const ProblemSpec& spec, double lambda, const ThresholdResult& threshold,
                                             const SpectrumOptions& options = {});

struct VerificationReport {
  double lambda = 0.0;
  double weak_residual_norm = 0.0;
  double cone_residual = 0.0;
  double mass_identity_defect = 0.0;
  bool nonconstant = false;
  bool passed = false;
  std::vector<std::string> failures;
};

/// Independent check of a candidate eigenpair against every nodal test function.
/// Throws InvalidInput on the zero field.
VerificationReport kkt_check(const ProblemSpec& spec, double lambda, const DiscreteField& candidate,
                             const SpectrumOptions& options = {});

}  // namespace pqspectra
