#pragma once

// Descent on the cone g(u) = 0. The free variable u is mapped onto the cone by
// the constant-shift retraction P(u) = u - s*(u); f(P(u)) is minimized with
// preconditioned L-BFGS and a backtracking line search. Every objective used
// by the solvers is a function of (T1, T2, T3) only, so an objective supplies
// its value and the partial derivatives with respect to those three terms.

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "pqspectra/functionals.hpp"
#include "pqspectra/problem.hpp"

namespace pqspectra {

struct ObjectiveEvaluation {
  double value = 0.0;
  std::array<double, 3> partials{};  // dF/dT1, dF/dT2, dF/dT3
  /// Coefficients (c1, c2, c3) such that c1 dT1 + c2 dT2 + c3 dT3 is the weak
  /// residual of the eigenfunction induced by the current cone point.
  std::array<double, 3> residual_coefficients{};
};

/// Returns std::nullopt when the cone point is outside the objective's domain.
using ConeObjective = std::function<std::optional<ObjectiveEvaluation>(const terms::Values&)>;

struct DescentOptions {
  int max_iters = 4000;
  int memory = 12;
  double armijo_c = 1e-4;
  int max_backtracks = 60;
  /// Stop once the relative residual of the induced eigenfunction is below this.
  double stationarity_tol = 1e-11;
  /// Also stop when the objective moves less than this (relative) over `stagnation_window` iterations.
  double stagnation_tol = 1e-10;
  int stagnation_window = 10;
  /// Renormalize (and reset the memory) when T3 leaves [1/drift, drift]; 0 disables.
  double mass_drift = 0.0;
  /// Metric weights follow the curvature of the objective's p- and q-energies,
  /// with |grad u_e| floored at floor * max |grad u|; 0 keeps the plain H1 metric. Refreshed every `metric_refresh` iterations.
  double metric_floor = 1e-2;
  int metric_refresh = 5;
};

struct DescentResult {
  std::vector<double> point;  // final cone point
  terms::Values values;
  ObjectiveEvaluation evaluation;
  double stationarity = 0.0;
  int iterations = 0;
  bool converged = false;  // stationarity_tol met
  bool stagnated = false;
  std::vector<double> history;  // objective after each accepted step
};

/// (K + M / l^2)^{-1} with K the P1 stiffness matrix, M the mass matrix and l
/// the domain length scale. The stiffness may be reweighted per element, which
/// the descent uses to follow the curvature of the p- and q-energies.
class H1Preconditioner {
 public:
  explicit H1Preconditioner(const Mesh& mesh);
  ~H1Preconditioner();
  H1Preconditioner(H1Preconditioner&&) noexcept;
  H1Preconditioner& operator=(H1Preconditioner&&) noexcept;

  void apply(std::span<const double> in, std::span<double> out) const;

  /// Refactors with the stiffness of element e scaled by element_weights[e].
  void reweight(std::span<const double> element_weights);

  /// Lowest non-constant mode of K v = mu M v by deflated inverse iteration.
  std::vector<double> lowest_nonconstant_mode(int iterations = 60) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Minimizes objective(P(u)) from `start`. Throws InvalidInput when the start is infeasible.
/// The preconditioner is reweighted along the way unless options.metric_floor is 0.
DescentResult minimize_on_cone(const ProblemSpec& spec, const ConeObjective& objective, std::vector<double> start,
                               const DescentOptions& options, H1Preconditioner& preconditioner);

/// Relative sup norm of c1 dT1 + c2 dT2 + c3 dT3 at u.
double combination_residual(const ProblemSpec& spec, std::span<const double> u,
                            const std::array<double, 3>& coefficients);

}  // namespace pqspectra
