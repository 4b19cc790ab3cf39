#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "pqspectra/mesh.hpp"

namespace pqspectra {

/// One instance of the (p,q) eigenproblem: exponents, nonnegative weights and the mesh.
/// `weight_b` is nodal on the whole mesh; only its boundary trace enters the integrals.
struct ProblemSpec {
  double p = 2.0;
  double q = 3.0;
  std::shared_ptr<const Mesh> mesh;
  DiscreteField weight_a;
  DiscreteField weight_b;

  const Mesh& domain() const { return *mesh; }
};

/// Which exponent hypothesis applies. The pure q-Laplacian path admits q >= 2 and ignores p.
enum class Hypotheses { Full, QLaplacian };

struct ValidationReport {
  bool ok = false;
  std::vector<std::string> violated_hypotheses;  // labels among H_pq, H_ab, H_Omega
  std::vector<std::string> messages;
  double mass_a = 0.0;
  double mass_b = 0.0;
};

ValidationReport validate_problem(const ProblemSpec& spec, Hypotheses mode = Hypotheses::Full);

/// Throws InvalidInput listing every violation when the report is not ok.
void require_valid(const ProblemSpec& spec, Hypotheses mode = Hypotheses::Full);

struct ConstantWeight {
  double value = 1.0;
};

/// `inside` on the half-open box lower <= x < upper, `outside` elsewhere.
struct IndicatorWeight {
  std::array<double, 2> lower{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  std::array<double, 2> upper{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  double inside = 1.0;
  double outside = 0.0;
};

struct NodalTableWeight {
  std::vector<double> values;
};

using WeightSpec = std::variant<ConstantWeight, IndicatorWeight, NodalTableWeight>;

enum class WeightTarget { Volume, Boundary };

/// Nodal weight vector. Boundary weights are zeroed on interior nodes.
/// Negative values are rejected (nonnegativity part of H_ab).
DiscreteField weight_from_expression(const Mesh& mesh, const WeightSpec& spec, WeightTarget target);

ProblemSpec make_problem(std::shared_ptr<const Mesh> mesh, double p, double q, const WeightSpec& a,
                         const WeightSpec& b);

/// Two disjoint hat bumps u1, u2 where the active weight is positive, combined as
/// sigma1*u1 - sigma2*u2 with sigma_k = theta_k^(-1/(q-1)), so the result lies in
/// the cone. Volume weight is used when it has mass, otherwise the boundary weight.
DiscreteField bump_pair_seed(const ProblemSpec& spec);

/// Zero-mean random combination of low-frequency cosine/sine modes; deterministic in `seed`.
DiscreteField random_smooth_field(const Mesh& mesh, std::uint64_t seed, int modes = 6);

/// splitmix64 mixing of two words; used to derive per-task seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace pqspectra
