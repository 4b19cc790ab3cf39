#include "pqspectra/mesh.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <string>

#include "pqspectra/error.hpp"

namespace pqspectra {
namespace {

std::uint64_t next_mesh_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1);
}

// Three-point Gauss-Legendre, exact through degree 5.
QuadratureRule gauss_segment() {
  const double d = 0.5 * std::sqrt(0.6);
  QuadratureRule rule;
  rule.barycentric = {{0.5 + d, 0.5 - d, 0.0}, {0.5, 0.5, 0.0}, {0.5 - d, 0.5 + d, 0.0}};
  rule.weights = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
  return rule;
}

// Seven-point Radon rule on the triangle, exact through degree 5.
QuadratureRule radon_triangle() {
  const double s15 = std::sqrt(15.0);
  const double a1 = (6.0 - s15) / 21.0;
  const double a2 = (6.0 + s15) / 21.0;
  const double w1 = (155.0 - s15) / 1200.0;
  const double w2 = (155.0 + s15) / 1200.0;
  QuadratureRule rule;
  rule.barycentric = {{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0},
                      {a1, a1, 1.0 - 2.0 * a1}, {a1, 1.0 - 2.0 * a1, a1}, {1.0 - 2.0 * a1, a1, a1},
                      {a2, a2, 1.0 - 2.0 * a2}, {a2, 1.0 - 2.0 * a2, a2}, {1.0 - 2.0 * a2, a2, a2}};
  rule.weights = {9.0 / 40.0, w1, w1, w1, w2, w2, w2};
  return rule;
}

QuadratureRule point_rule() {
  QuadratureRule rule;
  rule.barycentric = {{1.0, 0.0, 0.0}};
  rule.weights = {1.0};
  return rule;
}

double distance(const Point& a, const Point& b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

void require_same_mesh(const Mesh& mesh, const DiscreteField& field, const char* what) {
  if (field.mesh_id() != mesh.id() || field.size() != mesh.node_count()) {
    throw InvalidInput(std::string(what) + ": field does not live on this mesh");
  }
}

double apply_power(double u, double r, PowerMode mode) {
  return mode == PowerMode::Unsigned ? kernels::abs_pow(u, r) : kernels::signed_pow(u, r);
}

void check_exponent(double r, PowerMode mode) {
  if (!(r >= 1.0) || !std::isfinite(r)) throw InvalidInput("power integral: exponent must be >= 1");
  if (mode == PowerMode::Signed && r < 2.0) {
    throw InvalidInput("power integral: signed mode requires exponent >= 2");
  }
}

}  // namespace

Mesh::Mesh(int dimension, std::vector<Point> nodes, std::vector<std::array<std::int32_t, 3>> simplices,
           std::vector<Facet> boundary_facets)
    : dimension_(dimension), id_(next_mesh_id()), nodes_(std::move(nodes)), facets_(std::move(boundary_facets)) {
  if (dimension_ != 1 && dimension_ != 2) throw InvalidInput("mesh: dimension must be 1 or 2");
  if (simplices.empty()) throw InvalidInput("mesh: no elements");
  const auto n = static_cast<std::int32_t>(nodes_.size());
  elements_.reserve(simplices.size());
  for (const auto& s : simplices) {
    Element e;
    e.nodes = s;
    for (std::size_t k = 0; k < vertices_per_element(); ++k) {
      if (s[k] < 0 || s[k] >= n) throw InvalidInput("mesh: element references a missing node");
    }
    if (dimension_ == 1) {
      const double h = nodes_[s[1]][0] - nodes_[s[0]][0];
      e.measure = h;
      e.basis_gradients[0] = {-1.0 / h, 0.0};
      e.basis_gradients[1] = {1.0 / h, 0.0};
    } else {
      const Point& x0 = nodes_[s[0]];
      const Point& x1 = nodes_[s[1]];
      const Point& x2 = nodes_[s[2]];
      const double j00 = x1[0] - x0[0], j01 = x2[0] - x0[0];
      const double j10 = x1[1] - x0[1], j11 = x2[1] - x0[1];
      const double det = j00 * j11 - j01 * j10;
      e.measure = 0.5 * det;
      // Rows of J^{-1} are the gradients of the barycentric coordinates 1 and 2.
      e.basis_gradients[1] = {j11 / det, -j01 / det};
      e.basis_gradients[2] = {-j10 / det, j00 / det};
      e.basis_gradients[0] = {-e.basis_gradients[1][0] - e.basis_gradients[2][0],
                              -e.basis_gradients[1][1] - e.basis_gradients[2][1]};
    }
    if (!(e.measure > 0.0)) throw InvalidInput("mesh: element with non-positive measure");
    elements_.push_back(e);
  }

  boundary_node_.assign(nodes_.size(), 0);
  for (auto& f : facets_) {
    for (std::size_t k = 0; k < facet_vertex_count(); ++k) {
      if (f.nodes[k] < 0 || f.nodes[k] >= n) throw InvalidInput("mesh: facet references a missing node");
      boundary_node_[f.nodes[k]] = 1;
    }
    f.measure = dimension_ == 1 ? 1.0 : distance(nodes_[f.nodes[0]], nodes_[f.nodes[1]]);
    if (!(f.measure > 0.0)) throw InvalidInput("mesh: degenerate boundary facet");
  }

  volume_rule_ = dimension_ == 1 ? gauss_segment() : radon_triangle();
  boundary_rule_ = dimension_ == 1 ? point_rule() : gauss_segment();
}

double Mesh::total_measure() const {
  double sum = 0.0;
  for (const auto& e : elements_) sum += e.measure;
  return sum;
}

double Mesh::boundary_measure() const {
  double sum = 0.0;
  for (const auto& f : facets_) sum += f.measure;
  return sum;
}

double Mesh::mesh_size() const {
  double h = 0.0;
  for (const auto& e : elements_) {
    for (std::size_t a = 0; a < vertices_per_element(); ++a) {
      for (std::size_t b = a + 1; b < vertices_per_element(); ++b) {
        h = std::max(h, distance(nodes_[e.nodes[a]], nodes_[e.nodes[b]]));
      }
    }
  }
  return h;
}

bool Mesh::is_conforming() const {
  // Facets of a simplex are its vertex subsets of size dim.
  std::map<std::vector<std::int32_t>, int> count;
  const std::size_t nv = vertices_per_element();
  for (const auto& e : elements_) {
    for (std::size_t skip = 0; skip < nv; ++skip) {
      std::vector<std::int32_t> key;
      for (std::size_t k = 0; k < nv; ++k) {
        if (k != skip) key.push_back(e.nodes[k]);
      }
      std::sort(key.begin(), key.end());
      ++count[key];
    }
  }
  std::map<std::vector<std::int32_t>, int> boundary;
  for (const auto& f : facets_) {
    std::vector<std::int32_t> key(f.nodes.begin(), f.nodes.begin() + static_cast<std::ptrdiff_t>(facet_vertex_count()));
    std::sort(key.begin(), key.end());
    if (++boundary[key] > 1) return false;
  }
  for (const auto& [key, c] : count) {
    const bool tagged = boundary.count(key) != 0;
    if (c > 2 || (c == 1) != tagged) return false;
  }
  return boundary.size() <= count.size();
}

DiscreteField::DiscreteField(const Mesh& mesh, std::vector<double> coefficients)
    : mesh_id_(mesh.id()), coefficients_(std::move(coefficients)) {
  if (coefficients_.size() != mesh.node_count()) {
    throw InvalidInput("field: coefficient count " + std::to_string(coefficients_.size()) +
                       " does not match node count " + std::to_string(mesh.node_count()));
  }
  for (double c : coefficients_) {
    if (!std::isfinite(c)) throw InvalidInput("field: non-finite coefficient");
  }
}

DiscreteField DiscreteField::constant(const Mesh& mesh, double value) {
  return DiscreteField(mesh, std::vector<double>(mesh.node_count(), value));
}

bool DiscreteField::is_zero() const {
  return std::all_of(coefficients_.begin(), coefficients_.end(), [](double c) { return c == 0.0; });
}

double DiscreteField::max_abs() const {
  double m = 0.0;
  for (double c : coefficients_) m = std::max(m, std::abs(c));
  return m;
}

DiscreteField DiscreteField::scaled(double t) const {
  DiscreteField out = *this;
  for (double& c : out.coefficients_) c *= t;
  return out;
}

Mesh build_interval_mesh(int n_elements, double x0, double x1) {
  if (n_elements < 2) throw InvalidInput("build_interval_mesh: need at least 2 elements");
  if (!(x0 < x1)) throw InvalidInput("build_interval_mesh: degenerate interval");
  std::vector<Point> nodes(static_cast<std::size_t>(n_elements) + 1);
  const double h = (x1 - x0) / n_elements;
  for (int i = 0; i <= n_elements; ++i) nodes[i] = {i == n_elements ? x1 : x0 + i * h, 0.0};
  std::vector<std::array<std::int32_t, 3>> elements;
  for (int i = 0; i < n_elements; ++i) elements.push_back({i, i + 1, -1});
  std::vector<Facet> facets = {Facet{{0, -1}, 0, 1.0}, Facet{{n_elements, -1}, n_elements - 1, 1.0}};
  return Mesh(1, std::move(nodes), std::move(elements), std::move(facets));
}

Mesh build_rectangle_mesh(int nx, int ny, const std::array<double, 4>& bounds) {
  const auto [x0, x1, y0, y1] = bounds;
  if (nx < 2 || ny < 2) throw InvalidInput("build_rectangle_mesh: need at least 2 cells per direction");
  if (!(x0 < x1) || !(y0 < y1)) throw InvalidInput("build_rectangle_mesh: degenerate bounds");
  const auto node = [nx](int i, int j) { return static_cast<std::int32_t>(i + j * (nx + 1)); };
  std::vector<Point> nodes;
  nodes.reserve(static_cast<std::size_t>((nx + 1) * (ny + 1)));
  for (int j = 0; j <= ny; ++j) {
    const double y = j == ny ? y1 : y0 + (y1 - y0) * j / ny;
    for (int i = 0; i <= nx; ++i) nodes.push_back({i == nx ? x1 : x0 + (x1 - x0) * i / nx, y});
  }
  // Cell (i,j) -> lower triangle 2*(i+j*nx), upper triangle 2*(i+j*nx)+1.
  std::vector<std::array<std::int32_t, 3>> elements;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      elements.push_back({node(i, j), node(i + 1, j), node(i + 1, j + 1)});
      elements.push_back({node(i, j), node(i + 1, j + 1), node(i, j + 1)});
    }
  }
  const auto lower = [nx](int i, int j) { return static_cast<std::int32_t>(2 * (i + j * nx)); };
  std::vector<Facet> facets;
  for (int i = 0; i < nx; ++i) facets.push_back({{node(i, 0), node(i + 1, 0)}, lower(i, 0), 0.0});
  for (int j = 0; j < ny; ++j) facets.push_back({{node(nx, j), node(nx, j + 1)}, lower(nx - 1, j), 0.0});
  for (int i = nx - 1; i >= 0; --i) facets.push_back({{node(i + 1, ny), node(i, ny)}, lower(i, ny - 1) + 1, 0.0});
  for (int j = ny - 1; j >= 0; --j) facets.push_back({{node(0, j + 1), node(0, j)}, lower(0, j) + 1, 0.0});
  return Mesh(2, std::move(nodes), std::move(elements), std::move(facets));
}

DiscreteField interpolate(const Mesh& mesh, const std::function<double(const Point&)>& f) {
  std::vector<double> values;
  values.reserve(mesh.node_count());
  for (const auto& x : mesh.nodes()) values.push_back(f(x));
  return DiscreteField(mesh, std::move(values));
}

double volume_power_integral(const Mesh& mesh, const DiscreteField& field, const DiscreteField& weight,
                             double exponent, PowerMode mode) {
  require_same_mesh(mesh, field, "volume_power_integral");
  require_same_mesh(mesh, weight, "volume_power_integral (weight)");
  check_exponent(exponent, mode);
  return kernels::volume_power(mesh, field.values(), weight.values(), exponent, mode);
}

double boundary_power_integral(const Mesh& mesh, const DiscreteField& field, const DiscreteField& weight,
                               double exponent, PowerMode mode) {
  require_same_mesh(mesh, field, "boundary_power_integral");
  require_same_mesh(mesh, weight, "boundary_power_integral (weight)");
  check_exponent(exponent, mode);
  return kernels::boundary_power(mesh, field.values(), weight.values(), exponent, mode);
}

double gradient_power_integral(const Mesh& mesh, const DiscreteField& field, double exponent) {
  require_same_mesh(mesh, field, "gradient_power_integral");
  if (!(exponent > 1.0)) throw InvalidInput("gradient_power_integral: exponent must be > 1");
  return kernels::gradient_power(mesh, field.values(), exponent);
}

namespace kernels {

double abs_pow(double value, double exponent) {
  if (exponent == 0.0) return 1.0;
  const double a = std::abs(value);
  if (a == 0.0) return 0.0;
  if (exponent == 1.0) return a;
  if (exponent == 2.0) return a * a;
  if (exponent == 3.0) return a * a * a;
  if (exponent == 4.0) return (a * a) * (a * a);
  return std::pow(a, exponent);
}

double signed_pow(double value, double exponent) {
  const double m = abs_pow(value, exponent - 1.0);
  return value < 0.0 ? -m : (value > 0.0 ? m : 0.0);
}

double volume_power(const Mesh& mesh, std::span<const double> u, std::span<const double> w, double r,
                    PowerMode mode) {
  const auto& rule = mesh.volume_quadrature();
  const std::size_t nv = mesh.vertices_per_element();
  double total = 0.0;
  for (const auto& e : mesh.elements()) {
    double local = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      double uq = 0.0, wq = 0.0;
      for (std::size_t k = 0; k < nv; ++k) {
        uq += rule.barycentric[q][k] * u[e.nodes[k]];
        wq += rule.barycentric[q][k] * w[e.nodes[k]];
      }
      if (wq != 0.0) local += rule.weights[q] * wq * apply_power(uq, r, mode);
    }
    total += e.measure * local;
  }
  return total;
}

double boundary_power(const Mesh& mesh, std::span<const double> u, std::span<const double> w, double r,
                      PowerMode mode) {
  const auto& rule = mesh.boundary_quadrature();
  const std::size_t nv = mesh.facet_vertex_count();
  double total = 0.0;
  for (const auto& f : mesh.boundary_facets()) {
    double local = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      double uq = 0.0, wq = 0.0;
      for (std::size_t k = 0; k < nv; ++k) {
        uq += rule.barycentric[q][k] * u[f.nodes[k]];
        wq += rule.barycentric[q][k] * w[f.nodes[k]];
      }
      if (wq != 0.0) local += rule.weights[q] * wq * apply_power(uq, r, mode);
    }
    total += f.measure * local;
  }
  return total;
}

Point element_gradient(const Mesh& mesh, const Element& e, std::span<const double> u) {
  Point g{0.0, 0.0};
  for (std::size_t k = 0; k < mesh.vertices_per_element(); ++k) {
    g[0] += u[e.nodes[k]] * e.basis_gradients[k][0];
    g[1] += u[e.nodes[k]] * e.basis_gradients[k][1];
  }
  return g;
}

double gradient_power(const Mesh& mesh, std::span<const double> u, double r) {
  double total = 0.0;
  for (const auto& e : mesh.elements()) {
    const Point g = element_gradient(mesh, e, u);
    total += e.measure * abs_pow(std::hypot(g[0], g[1]), r);
  }
  return total;
}

void add_power_load(const Mesh& mesh, std::span<const double> u, std::span<const double> volume_weight,
                    std::span<const double> boundary_weight, double r, PowerMode mode, double scale,
                    std::span<double> out) {
  {
    const auto& rule = mesh.volume_quadrature();
    const std::size_t nv = mesh.vertices_per_element();
    for (const auto& e : mesh.elements()) {
      for (std::size_t q = 0; q < rule.size(); ++q) {
        double uq = 0.0, wq = 0.0;
        for (std::size_t k = 0; k < nv; ++k) {
          uq += rule.barycentric[q][k] * u[e.nodes[k]];
          wq += rule.barycentric[q][k] * volume_weight[e.nodes[k]];
        }
        if (wq == 0.0) continue;
        const double c = scale * e.measure * rule.weights[q] * wq * apply_power(uq, r, mode);
        for (std::size_t k = 0; k < nv; ++k) out[e.nodes[k]] += c * rule.barycentric[q][k];
      }
    }
  }
  const auto& rule = mesh.boundary_quadrature();
  const std::size_t nv = mesh.facet_vertex_count();
  for (const auto& f : mesh.boundary_facets()) {
    for (std::size_t q = 0; q < rule.size(); ++q) {
      double uq = 0.0, wq = 0.0;
      for (std::size_t k = 0; k < nv; ++k) {
        uq += rule.barycentric[q][k] * u[f.nodes[k]];
        wq += rule.barycentric[q][k] * boundary_weight[f.nodes[k]];
      }
      if (wq == 0.0) continue;
      const double c = scale * f.measure * rule.weights[q] * wq * apply_power(uq, r, mode);
      for (std::size_t k = 0; k < nv; ++k) out[f.nodes[k]] += c * rule.barycentric[q][k];
    }
  }
}

void add_gradient_power_action(const Mesh& mesh, std::span<const double> u, double r, double eps, double scale,
                               std::span<double> out) {
  for (const auto& e : mesh.elements()) {
    const Point g = element_gradient(mesh, e, u);
    const double s2 = g[0] * g[0] + g[1] * g[1];
    if (s2 == 0.0) continue;
    const double rho = eps > 0.0 ? std::pow(s2 + eps * eps, 0.5 * (r - 2.0)) : abs_pow(std::sqrt(s2), r - 2.0);
    const double c = scale * e.measure * rho;
    for (std::size_t k = 0; k < mesh.vertices_per_element(); ++k) {
      out[e.nodes[k]] += c * (g[0] * e.basis_gradients[k][0] + g[1] * e.basis_gradients[k][1]);
    }
  }
}

}  // namespace kernels
}  // namespace pqspectra
