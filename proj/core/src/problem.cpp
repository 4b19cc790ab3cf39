#include "pqspectra/problem.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "pqspectra/error.hpp"

namespace pqspectra {
namespace {

bool on_mesh(const Mesh& mesh, const DiscreteField& f) {
  return f.mesh_id() == mesh.id() && f.size() == mesh.node_count();
}

// theta_i = integral of a phi_i^(q-1) dx + integral of b phi_i^(q-1) dsigma for each nodal hat.
std::vector<double> hat_masses(const ProblemSpec& spec, bool volume, bool boundary) {
  const Mesh& mesh = spec.domain();
  const double r = spec.q - 1.0;
  std::vector<double> theta(mesh.node_count(), 0.0);
  const auto a = spec.weight_a.values();
  const auto b = spec.weight_b.values();
  if (volume) {
    const auto& rule = mesh.volume_quadrature();
    const std::size_t nv = mesh.vertices_per_element();
    for (const auto& e : mesh.elements()) {
      for (std::size_t q = 0; q < rule.size(); ++q) {
        double wq = 0.0;
        for (std::size_t k = 0; k < nv; ++k) wq += rule.barycentric[q][k] * a[e.nodes[k]];
        if (wq == 0.0) continue;
        for (std::size_t k = 0; k < nv; ++k) {
          theta[e.nodes[k]] += e.measure * rule.weights[q] * wq * kernels::abs_pow(rule.barycentric[q][k], r);
        }
      }
    }
  }
  if (boundary) {
    const auto& rule = mesh.boundary_quadrature();
    const std::size_t nv = mesh.facet_vertex_count();
    for (const auto& f : mesh.boundary_facets()) {
      for (std::size_t q = 0; q < rule.size(); ++q) {
        double wq = 0.0;
        for (std::size_t k = 0; k < nv; ++k) wq += rule.barycentric[q][k] * b[f.nodes[k]];
        if (wq == 0.0) continue;
        for (std::size_t k = 0; k < nv; ++k) {
          theta[f.nodes[k]] += f.measure * rule.weights[q] * wq * kernels::abs_pow(rule.barycentric[q][k], r);
        }
      }
    }
  }
  return theta;
}

std::vector<std::vector<std::int32_t>> node_elements(const Mesh& mesh) {
  std::vector<std::vector<std::int32_t>> adjacency(mesh.node_count());
  const auto elements = mesh.elements();
  for (std::size_t e = 0; e < elements.size(); ++e) {
    for (std::size_t k = 0; k < mesh.vertices_per_element(); ++k) {
      adjacency[elements[e].nodes[k]].push_back(static_cast<std::int32_t>(e));
    }
  }
  return adjacency;
}

bool supports_disjoint(const std::vector<std::vector<std::int32_t>>& adjacency, std::size_t i, std::size_t j) {
  if (i == j) return false;
  for (auto e : adjacency[i]) {
    if (std::find(adjacency[j].begin(), adjacency[j].end(), e) != adjacency[j].end()) return false;
  }
  return true;
}

// Picks two nodes with positive theta and disjoint hat supports, preferring
// interior nodes. Returns false when no such pair exists.
bool pick_pair(const Mesh& mesh, const std::vector<double>& theta, bool prefer_interior, std::size_t& first,
               std::size_t& second) {
  const auto adjacency = node_elements(mesh);
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    if (theta[i] > 0.0 && (!prefer_interior || !mesh.is_boundary_node(i))) candidates.push_back(i);
  }
  for (std::size_t a = 0; a < candidates.size(); ++a) {
    for (std::size_t b = candidates.size(); b-- > a + 1;) {
      if (supports_disjoint(adjacency, candidates[a], candidates[b])) {
        first = candidates[a];
        second = candidates[b];
        return true;
      }
    }
  }
  return false;
}

}  // namespace

ValidationReport validate_problem(const ProblemSpec& spec, Hypotheses mode) {
  ValidationReport report;
  const auto violate = [&report](const std::string& label, const std::string& message) {
    if (std::find(report.violated_hypotheses.begin(), report.violated_hypotheses.end(), label) ==
        report.violated_hypotheses.end()) {
      report.violated_hypotheses.push_back(label);
    }
    report.messages.push_back(label + ": " + message);
  };

  const bool finite_pq = std::isfinite(spec.p) && std::isfinite(spec.q);
  if (mode == Hypotheses::Full) {
    if (!finite_pq || !(spec.p > 1.0)) violate("H_pq", "p must lie in (1, inf)");
    if (!finite_pq || !(spec.q > 2.0)) violate("H_pq", "q must lie in (2, inf)");
    if (spec.p == spec.q) violate("H_pq", "p must differ from q");
  } else if (!std::isfinite(spec.q) || !(spec.q >= 2.0)) {
    violate("H_pq", "q must be >= 2 for the q-Laplacian problem");
  }

  if (!spec.mesh) {
    violate("H_Omega", "no mesh");
    report.ok = false;
    return report;
  }
  const Mesh& mesh = spec.domain();
  if (mesh.total_measure() <= 0.0 || mesh.boundary_facets().empty()) {
    violate("H_Omega", "domain must have positive measure and a boundary");
  }

  const bool a_ok = on_mesh(mesh, spec.weight_a);
  const bool b_ok = on_mesh(mesh, spec.weight_b);
  if (!a_ok) violate("H_ab", "weight a does not live on the mesh");
  if (!b_ok) violate("H_ab", "weight b does not live on the mesh");
  if (a_ok && b_ok) {
    const auto a = spec.weight_a.values();
    const auto b = spec.weight_b.values();
    if (std::any_of(a.begin(), a.end(), [](double v) { return !(v >= 0.0); })) {
      violate("H_ab", "weight a must be nonnegative");
    }
    bool b_negative = false;
    for (std::size_t i = 0; i < b.size(); ++i) {
      if (mesh.is_boundary_node(i) && !(b[i] >= 0.0)) b_negative = true;
    }
    if (b_negative) violate("H_ab", "weight b must be nonnegative on the boundary");
    const std::vector<double> one(mesh.node_count(), 1.0);
    report.mass_a = kernels::volume_power(mesh, one, a, 1.0, PowerMode::Unsigned);
    report.mass_b = kernels::boundary_power(mesh, one, b, 1.0, PowerMode::Unsigned);
    if (!(report.mass_a + report.mass_b > 0.0)) {
      violate("H_ab", "integral of a over the domain plus integral of b over the boundary must be positive");
    }
  }
  report.ok = report.violated_hypotheses.empty();
  return report;
}

void require_valid(const ProblemSpec& spec, Hypotheses mode) {
  const auto report = validate_problem(spec, mode);
  if (report.ok) return;
  std::ostringstream os;
  os << "problem violates hypotheses:";
  for (const auto& m : report.messages) os << "\n  " << m;
  throw InvalidInput(os.str());
}

DiscreteField weight_from_expression(const Mesh& mesh, const WeightSpec& spec, WeightTarget target) {
  std::vector<double> values(mesh.node_count(), 0.0);
  const auto nodes = mesh.nodes();
  if (const auto* c = std::get_if<ConstantWeight>(&spec)) {
    std::fill(values.begin(), values.end(), c->value);
  } else if (const auto* ind = std::get_if<IndicatorWeight>(&spec)) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      bool inside = true;
      for (int d = 0; d < mesh.dimension(); ++d) {
        inside = inside && nodes[i][d] >= ind->lower[d] && nodes[i][d] < ind->upper[d];
      }
      values[i] = inside ? ind->inside : ind->outside;
    }
  } else {
    const auto& table = std::get<NodalTableWeight>(spec);
    if (table.values.size() != values.size()) {
      throw InvalidInput("weight table has " + std::to_string(table.values.size()) + " entries, mesh has " +
                         std::to_string(values.size()) + " nodes");
    }
    values = table.values;
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) throw InvalidInput("H_ab: weight values must be finite");
    if (target == WeightTarget::Boundary && !mesh.is_boundary_node(i)) {
      values[i] = 0.0;
      continue;
    }
    if (values[i] < 0.0) {
      throw InvalidInput("H_ab: weights must be nonnegative (negative value at node " + std::to_string(i) + ")");
    }
  }
  return DiscreteField(mesh, std::move(values));
}

ProblemSpec make_problem(std::shared_ptr<const Mesh> mesh, double p, double q, const WeightSpec& a,
                         const WeightSpec& b) {
  ProblemSpec spec;
  spec.p = p;
  spec.q = q;
  spec.weight_a = weight_from_expression(*mesh, a, WeightTarget::Volume);
  spec.weight_b = weight_from_expression(*mesh, b, WeightTarget::Boundary);
  spec.mesh = std::move(mesh);
  return spec;
}

DiscreteField bump_pair_seed(const ProblemSpec& spec) {
  const Mesh& mesh = spec.domain();
  if (!(spec.q > 1.0)) throw InvalidInput("bump_pair_seed: q must exceed 1");
  const auto report = validate_problem(spec, Hypotheses::QLaplacian);
  std::size_t i = 0, j = 0;
  bool found = false;
  std::vector<double> theta;
  if (report.mass_a > 0.0) {
    theta = hat_masses(spec, true, true);
    found = pick_pair(mesh, theta, true, i, j) || pick_pair(mesh, theta, false, i, j);
  }
  if (!found && report.mass_b > 0.0) {
    // Hats centred on boundary nodes; only the boundary weight sees them when a vanishes there.
    theta = hat_masses(spec, report.mass_a > 0.0, true);
    std::vector<double> boundary_theta(theta.size(), 0.0);
    for (std::size_t k = 0; k < theta.size(); ++k) {
      if (mesh.is_boundary_node(k)) boundary_theta[k] = theta[k];
    }
    found = pick_pair(mesh, boundary_theta, false, i, j);
  }
  if (!found) {
    throw InvalidInput("bump_pair_seed: no two disjoint supports with positive weight mass (mesh too coarse)");
  }
  std::vector<double> v(mesh.node_count(), 0.0);
  v[i] = std::pow(theta[i], -1.0 / (spec.q - 1.0));
  v[j] = -std::pow(theta[j], -1.0 / (spec.q - 1.0));
  return DiscreteField(mesh, std::move(v));
}

DiscreteField random_smooth_field(const Mesh& mesh, std::uint64_t seed, int modes) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto nodes = mesh.nodes();
  std::array<double, 2> lo{nodes[0][0], nodes[0][1]}, hi = lo;
  for (const auto& x : nodes) {
    for (int d = 0; d < 2; ++d) {
      lo[d] = std::min(lo[d], x[d]);
      hi[d] = std::max(hi[d], x[d]);
    }
  }
  const auto unit = [&](const Point& x, int d) { return hi[d] > lo[d] ? (x[d] - lo[d]) / (hi[d] - lo[d]) : 0.0; };
  const double pi = std::numbers::pi;

  std::vector<double> values(mesh.node_count(), 0.0);
  if (mesh.dimension() == 1) {
    for (int k = 1; k <= modes; ++k) {
      const double c = normal(rng) / k, s = normal(rng) / k;
      for (std::size_t i = 0; i < values.size(); ++i) {
        const double t = unit(nodes[i], 0);
        values[i] += c * std::cos(k * pi * t) + s * std::sin(k * pi * t);
      }
    }
  } else {
    for (int kx = 0; kx <= modes; ++kx) {
      for (int ky = 0; ky <= modes; ++ky) {
        if (kx + ky == 0 || kx + ky > modes) continue;
        const double c = normal(rng) / (kx + ky), s = normal(rng) / (kx + ky);
        for (std::size_t i = 0; i < values.size(); ++i) {
          const double tx = unit(nodes[i], 0), ty = unit(nodes[i], 1);
          values[i] += c * std::cos(kx * pi * tx) * std::cos(ky * pi * ty) +
                       s * std::sin((kx + 1) * pi * tx) * std::sin((ky + 1) * pi * ty);
        }
      }
    }
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  for (double& v : values) v -= mean;
  return DiscreteField(mesh, std::move(values));
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace pqspectra
