#pragma once

// Simplicial meshes (intervals and triangulated rectangles) with P1 elements
// and the quadrature-backed integrals every functional is built from.

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace pqspectra {

using Point = std::array<double, 2>;

/// Reference quadrature on a simplex: barycentric points and weights summing to 1.
struct QuadratureRule {
  std::vector<std::array<double, 3>> barycentric;
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
};

struct Element {
  std::array<std::int32_t, 3> nodes{};  // only the first dim+1 entries are used
  double measure = 0.0;
  std::array<Point, 3> basis_gradients{};  // constant gradient of each local hat
};

/// A boundary facet: two nodes in 2D, a single node (point measure 1) in 1D.
struct Facet {
  std::array<std::int32_t, 2> nodes{};
  std::int32_t parent = -1;
  double measure = 0.0;
};

class Mesh {
 public:
  Mesh(int dimension, std::vector<Point> nodes, std::vector<std::array<std::int32_t, 3>> simplices,
       std::vector<Facet> boundary_facets);

  int dimension() const { return dimension_; }
  std::uint64_t id() const { return id_; }
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t vertices_per_element() const { return static_cast<std::size_t>(dimension_) + 1; }
  std::size_t facet_vertex_count() const { return static_cast<std::size_t>(dimension_); }

  std::span<const Point> nodes() const { return nodes_; }
  std::span<const Element> elements() const { return elements_; }
  std::span<const Facet> boundary_facets() const { return facets_; }
  const QuadratureRule& volume_quadrature() const { return volume_rule_; }
  const QuadratureRule& boundary_quadrature() const { return boundary_rule_; }

  /// True for nodes lying on some boundary facet.
  bool is_boundary_node(std::size_t node) const { return boundary_node_[node] != 0; }

  double total_measure() const;
  double boundary_measure() const;
  /// Largest element diameter.
  double mesh_size() const;

  /// Checks that interior facets are shared by exactly two elements and that
  /// the remaining facets coincide with the tagged boundary facets.
  bool is_conforming() const;

 private:
  int dimension_;
  std::uint64_t id_;
  std::vector<Point> nodes_;
  std::vector<Element> elements_;
  std::vector<Facet> facets_;
  std::vector<char> boundary_node_;
  QuadratureRule volume_rule_;
  QuadratureRule boundary_rule_;
};

/// Nodal coefficients of a P1 function on a specific mesh.
class DiscreteField {
 public:
  DiscreteField() = default;
  DiscreteField(const Mesh& mesh, std::vector<double> coefficients);
  static DiscreteField constant(const Mesh& mesh, double value);

  std::uint64_t mesh_id() const { return mesh_id_; }
  std::size_t size() const { return coefficients_.size(); }
  std::span<const double> values() const { return coefficients_; }
  std::span<double> values() { return coefficients_; }
  double operator[](std::size_t i) const { return coefficients_[i]; }

  bool is_zero() const;
  double max_abs() const;
  DiscreteField scaled(double t) const;

 private:
  std::uint64_t mesh_id_ = 0;
  std::vector<double> coefficients_;
};

Mesh build_interval_mesh(int n_elements, double x0, double x1);
Mesh build_rectangle_mesh(int nx, int ny, const std::array<double, 4>& bounds);

/// Nodal interpolation of an analytic function.
DiscreteField interpolate(const Mesh& mesh, const std::function<double(const Point&)>& f);

enum class PowerMode {
  Unsigned,  // |u|^r
  Signed,    // |u|^(r-2) u
};

/// Integral over the domain of w |u|^r (or w |u|^(r-2) u when signed).
double volume_power_integral(const Mesh& mesh, const DiscreteField& field, const DiscreteField& weight,
                             double exponent, PowerMode mode);

/// Same over the boundary; `weight` is nodal and only its boundary trace is used.
double boundary_power_integral(const Mesh& mesh, const DiscreteField& field, const DiscreteField& weight,
                               double exponent, PowerMode mode);

/// Integral of |grad u|^r. Exact for P1 fields.
double gradient_power_integral(const Mesh& mesh, const DiscreteField& field, double exponent);

// Span-based kernels used by the functionals and solvers. Fields are nodal
// vectors of length mesh.node_count(); no mesh-id checks are done here.
namespace kernels {

/// |u|^r for r >= 0, with the convention 0^0 = 1.
double abs_pow(double value, double exponent);
/// |u|^(r-2) u.
double signed_pow(double value, double exponent);

double volume_power(const Mesh& mesh, std::span<const double> u, std::span<const double> w, double r,
                    PowerMode mode);
double boundary_power(const Mesh& mesh, std::span<const double> u, std::span<const double> w, double r,
                      PowerMode mode);
double gradient_power(const Mesh& mesh, std::span<const double> u, double r);

/// Per-element gradient of u.
Point element_gradient(const Mesh& mesh, const Element& e, std::span<const double> u);

/// out_i += scale * integral of w F(u) phi_i over the domain and boundary,
/// where F(u) = |u|^r (unsigned) or |u|^(r-2) u (signed).
void add_power_load(const Mesh& mesh, std::span<const double> u, std::span<const double> volume_weight,
                    std::span<const double> boundary_weight, double r, PowerMode mode, double scale,
                    std::span<double> out);

/// out_i += scale * integral of rho(|grad u|) grad u . grad phi_i with
/// rho(s) = (s^2 + eps^2)^((r-2)/2). eps = 0 gives the exact density |grad u|^(r-2),
/// extended by zero where grad u vanishes.
void add_gradient_power_action(const Mesh& mesh, std::span<const double> u, double r, double eps, double scale,
                               std::span<double> out);

}  // namespace kernels

}  // namespace pqspectra
