#pragma once

// Energies, constraints, quotients and first variations of the (p,q) problem,
// plus the retractions onto the cone, the unit-mass set and the Nehari manifold.
//
// Notation used throughout:
//   T1(u) = int |grad u|^p,  T2(u) = int |grad u|^q,
//   T3(u) = int a |u|^q + int_bd b |u|^q,
//   g(u)  = int a |u|^(q-2) u + int_bd b |u|^(q-2) u   (cone residual),
//   J(u)  = T1/p + T2/q - (lambda/q) T3.

#include <span>
#include <vector>

#include "pqspectra/mesh.hpp"
#include "pqspectra/problem.hpp"

namespace pqspectra {

struct FunctionalValues {
  double T1 = 0.0;
  double T2 = 0.0;
  double T3 = 0.0;
  double g = 0.0;
  double J_lambda = 0.0;
  double ab_norm = 0.0;
};

FunctionalValues evaluate_functionals(const ProblemSpec& spec, double lambda, const DiscreteField& u);

double cone_residual(const ProblemSpec& spec, const DiscreteField& u);
/// |g(u)| divided by int a |u|^(q-1) + int_bd b |u|^(q-1); 0 for the zero field.
double relative_cone_residual(const ProblemSpec& spec, const DiscreteField& u);

double energy_J_lambda(const ProblemSpec& spec, double lambda, const DiscreteField& u);

/// Entry i is <J'_lambda(u), phi_i>. Throws InvalidInput on the zero field.
std::vector<double> weak_residual(const ProblemSpec& spec, double lambda, const DiscreteField& u);

/// Sup norm of the weak residual relative to the sup norms of its three terms
/// (p-Laplacian action, q-Laplacian action, lambda times the mass action).
double weak_residual_norm(const ProblemSpec& spec, double lambda, const DiscreteField& u);

/// T2/T3, or +infinity when T3 = 0. Throws InvalidInput on the zero field.
double rayleigh_q(const ProblemSpec& spec, const DiscreteField& u);
/// (T2/q + T1/p) / (T3/q), or +infinity when T3 = 0.
double rayleigh_pq(const ProblemSpec& spec, const DiscreteField& u);

/// ||grad u||_{L^p} + T3^(1/q).
double ab_norm(const ProblemSpec& spec, const DiscreteField& u);

/// T1 + T2 - lambda T3.
double nehari_residual(const ProblemSpec& spec, double lambda, const DiscreteField& u);

struct NehariScaling {
  double t = 0.0;
  DiscreteField field;
};

/// The t > 0 with t v on the Nehari manifold, t = (T1 / (lambda T3 - T2))^(1/(q-p)).
/// Requires p < q; throws NoScalingWitness when lambda T3 - T2 <= 0.
NehariScaling nehari_scale(const ProblemSpec& spec, double lambda, const DiscreteField& v);

struct ConeProjection {
  double shift = 0.0;
  DiscreteField field;
};

/// u - s* where s* is the unique root of s -> g(u - s).
ConeProjection project_to_cone(const ProblemSpec& spec, const DiscreteField& u);

/// T3(u)^(-1/q) u. Throws InvalidInput when T3(u) = 0.
DiscreteField normalize_mass(const ProblemSpec& spec, const DiscreteField& u);

// Span-level building blocks shared with the solvers.
namespace terms {

struct Values {
  double T1 = 0.0;
  double T2 = 0.0;
  double T3 = 0.0;
  double g = 0.0;
};

struct Gradients {
  std::vector<double> dT1;  // p <|grad u|^(p-2) grad u, grad phi_i>
  std::vector<double> dT2;  // q <|grad u|^(q-2) grad u, grad phi_i>
  std::vector<double> dT3;  // q <a |u|^(q-2) u, phi_i> + boundary
  std::vector<double> dg;   // (q-1) <a |u|^(q-2), phi_i> + boundary
};

Values evaluate(const ProblemSpec& spec, std::span<const double> u);
void gradients(const ProblemSpec& spec, std::span<const double> u, Gradients& out);

/// Smoothing radius for the p-density when p < 2: 1e-10 times the largest element gradient.
double density_regularization(const ProblemSpec& spec, std::span<const double> u);

/// Root s* of g(u - s) by safeguarded Newton inside [min u - 1, max u + 1].
double cone_shift(const ProblemSpec& spec, std::span<const double> u);

/// Relative weak residual, see weak_residual_norm().
double relative_weak_residual(const ProblemSpec& spec, double lambda, std::span<const double> u);

}  // namespace terms

}  // namespace pqspectra
