#include "pqspectra/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pqspectra/error.hpp"

namespace pqspectra {
namespace {

void require_on_mesh(const ProblemSpec& spec, const DiscreteField& u, const char* what) {
  if (u.mesh_id() != spec.domain().id() || u.size() != spec.domain().node_count()) {
    throw InvalidInput(std::string(what) + ": field does not live on the problem mesh");
  }
}

void require_nonzero(const DiscreteField& u, const char* what) {
  if (u.is_zero()) throw InvalidInput(std::string(what) + ": zero field");
}

double sup_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// Quadrature-point samples (coefficient, value) of the weighted mass terms, so
// that g(u - s) can be re-evaluated for many shifts without touching the mesh.
struct MassSamples {
  std::vector<double> coefficient;
  std::vector<double> value;

  MassSamples(const ProblemSpec& spec, std::span<const double> u) {
    const Mesh& mesh = spec.domain();
    const auto a = spec.weight_a.values();
    const auto b = spec.weight_b.values();
    const auto& vrule = mesh.volume_quadrature();
    const std::size_t nv = mesh.vertices_per_element();
    for (const auto& e : mesh.elements()) {
      for (std::size_t q = 0; q < vrule.size(); ++q) {
        double uq = 0.0, wq = 0.0;
        for (std::size_t k = 0; k < nv; ++k) {
          uq += vrule.barycentric[q][k] * u[e.nodes[k]];
          wq += vrule.barycentric[q][k] * a[e.nodes[k]];
        }
        if (wq != 0.0) {
          coefficient.push_back(e.measure * vrule.weights[q] * wq);
          value.push_back(uq);
        }
      }
    }
    const auto& brule = mesh.boundary_quadrature();
    const std::size_t nf = mesh.facet_vertex_count();
    for (const auto& f : mesh.boundary_facets()) {
      for (std::size_t q = 0; q < brule.size(); ++q) {
        double uq = 0.0, wq = 0.0;
        for (std::size_t k = 0; k < nf; ++k) {
          uq += brule.barycentric[q][k] * u[f.nodes[k]];
          wq += brule.barycentric[q][k] * b[f.nodes[k]];
        }
        if (wq != 0.0) {
          coefficient.push_back(f.measure * brule.weights[q] * wq);
          value.push_back(uq);
        }
      }
    }
  }

  // g(u - s), -d/ds g(u - s) and the unsigned scale sum c |u - s|^(q-1).
  void evaluate(double s, double q, double& g, double& slope, double& scale) const {
    g = slope = scale = 0.0;
    for (std::size_t k = 0; k < value.size(); ++k) {
      const double d = value[k] - s;
      const double m = kernels::abs_pow(d, q - 2.0);
      g += coefficient[k] * m * d;
      slope += coefficient[k] * m;
      scale += coefficient[k] * m * std::abs(d);
    }
    slope *= (q - 1.0);
  }
};

}  // namespace

namespace terms {

Values evaluate(const ProblemSpec& spec, std::span<const double> u) {
  const Mesh& mesh = spec.domain();
  Values v;
  for (const auto& e : mesh.elements()) {
    const Point grad = kernels::element_gradient(mesh, e, u);
    const double s = std::hypot(grad[0], grad[1]);
    v.T1 += e.measure * kernels::abs_pow(s, spec.p);
    v.T2 += e.measure * kernels::abs_pow(s, spec.q);
  }
  const MassSamples samples(spec, u);
  for (std::size_t k = 0; k < samples.value.size(); ++k) {
    const double m = kernels::abs_pow(samples.value[k], spec.q - 2.0);
    v.T3 += samples.coefficient[k] * m * samples.value[k] * samples.value[k];
    v.g += samples.coefficient[k] * m * samples.value[k];
  }
  return v;
}

double density_regularization(const ProblemSpec& spec, std::span<const double> u) {
  if (spec.p >= 2.0) return 0.0;
  const Mesh& mesh = spec.domain();
  double largest = 0.0;
  for (const auto& e : mesh.elements()) {
    const Point g = kernels::element_gradient(mesh, e, u);
    largest = std::max(largest, std::hypot(g[0], g[1]));
  }
  return 1e-10 * largest;
}

void gradients(const ProblemSpec& spec, std::span<const double> u, Gradients& out) {
  const Mesh& mesh = spec.domain();
  const std::size_t n = mesh.node_count();
  for (auto* v : {&out.dT1, &out.dT2, &out.dT3, &out.dg}) v->assign(n, 0.0);
  const auto a = spec.weight_a.values();
  const auto b = spec.weight_b.values();
  kernels::add_gradient_power_action(mesh, u, spec.p, density_regularization(spec, u), spec.p, out.dT1);
  kernels::add_gradient_power_action(mesh, u, spec.q, 0.0, spec.q, out.dT2);
  kernels::add_power_load(mesh, u, a, b, spec.q, PowerMode::Signed, spec.q, out.dT3);
  kernels::add_power_load(mesh, u, a, b, spec.q - 2.0, PowerMode::Unsigned, spec.q - 1.0, out.dg);
}

double cone_shift(const ProblemSpec& spec, std::span<const double> u) {
  const MassSamples samples(spec, u);
  const double q = spec.q;
  double g = 0.0, slope = 0.0, scale = 0.0;
  samples.evaluate(0.0, q, g, slope, scale);
  if (std::abs(g) <= 1e-15 * scale) return 0.0;

  const auto [umin, umax] = std::minmax_element(u.begin(), u.end());
  double lo = *umin - 1.0, hi = *umax + 1.0;
  double g_lo = 0.0, g_hi = 0.0, dummy = 0.0;
  samples.evaluate(lo, q, g_lo, dummy, dummy);
  samples.evaluate(hi, q, g_hi, dummy, dummy);
  if (!(g_lo > 0.0) || !(g_hi < 0.0)) {
    throw InvalidInput("project_to_cone: root not bracketed (weights carry no mass)");
  }

  // g(u - s) is strictly decreasing in s. Newton steps are kept inside the
  // shrinking bracket; a bisection step replaces any step that leaves it.
  double s = std::clamp(0.0, lo, hi);
  for (int it = 0; it < 200; ++it) {
    samples.evaluate(s, q, g, slope, scale);
    if (g > 0.0) lo = s; else hi = s;
    if (std::abs(g) <= 1e-15 * scale || hi - lo <= 1e-14 * (1.0 + std::abs(s))) break;
    double next = slope > 0.0 ? s + g / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    s = next;
  }
  // Two Newton polish steps, kept only when they reduce |g|.
  for (int k = 0; k < 2; ++k) {
    samples.evaluate(s, q, g, slope, scale);
    if (!(slope > 0.0)) break;
    const double next = s + g / slope;
    double g_next = 0.0;
    samples.evaluate(next, q, g_next, dummy, dummy);
    if (std::abs(g_next) < std::abs(g)) s = next;
  }
  return s;
}

double relative_weak_residual(const ProblemSpec& spec, double lambda, std::span<const double> u) {
  Gradients d;
  gradients(spec, u, d);
  const std::size_t n = u.size();
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) {
    r[i] = d.dT1[i] / spec.p + d.dT2[i] / spec.q - lambda * d.dT3[i] / spec.q;
    if (!std::isfinite(r[i])) throw InvalidInput("weak_residual: NaN in regularized gradient terms");
  }
  const double scale = sup_norm(d.dT1) / spec.p + sup_norm(d.dT2) / spec.q + std::abs(lambda) * sup_norm(d.dT3) / spec.q;
  const double rn = sup_norm(r);
  return scale > 0.0 ? rn / scale : rn;
}

}  // namespace terms

FunctionalValues evaluate_functionals(const ProblemSpec& spec, double lambda, const DiscreteField& u) {
  require_on_mesh(spec, u, "evaluate_functionals");
  const auto t = terms::evaluate(spec, u.values());
  FunctionalValues v;
  v.T1 = t.T1;
  v.T2 = t.T2;
  v.T3 = t.T3;
  v.g = t.g;
  v.J_lambda = t.T1 / spec.p + t.T2 / spec.q - lambda / spec.q * t.T3;
  v.ab_norm = std::pow(t.T1, 1.0 / spec.p) + std::pow(t.T3, 1.0 / spec.q);
  return v;
}

double cone_residual(const ProblemSpec& spec, const DiscreteField& u) {
  require_on_mesh(spec, u, "cone_residual");
  return terms::evaluate(spec, u.values()).g;
}

double relative_cone_residual(const ProblemSpec& spec, const DiscreteField& u) {
  require_on_mesh(spec, u, "relative_cone_residual");
  const MassSamples samples(spec, u.values());
  double g = 0.0, slope = 0.0, scale = 0.0;
  samples.evaluate(0.0, spec.q, g, slope, scale);
  return scale > 0.0 ? std::abs(g) / scale : 0.0;
}

double energy_J_lambda(const ProblemSpec& spec, double lambda, const DiscreteField& u) {
  return evaluate_functionals(spec, lambda, u).J_lambda;
}

std::vector<double> weak_residual(const ProblemSpec& spec, double lambda, const DiscreteField& u) {
  require_on_mesh(spec, u, "weak_residual");
  require_nonzero(u, "weak_residual");
  terms::Gradients d;
  terms::gradients(spec, u.values(), d);
  std::vector<double> r(u.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    r[i] = d.dT1[i] / spec.p + d.dT2[i] / spec.q - lambda * d.dT3[i] / spec.q;
    if (!std::isfinite(r[i])) throw InvalidInput("weak_residual: NaN in regularized gradient terms");
  }
  return r;
}

double weak_residual_norm(const ProblemSpec& spec, double lambda, const DiscreteField& u) {
  require_on_mesh(spec, u, "weak_residual_norm");
  require_nonzero(u, "weak_residual_norm");
  return terms::relative_weak_residual(spec, lambda, u.values());
}

double rayleigh_q(const ProblemSpec& spec, const DiscreteField& u) {
  require_on_mesh(spec, u, "rayleigh_q");
  require_nonzero(u, "rayleigh_q");
  const auto t = terms::evaluate(spec, u.values());
  if (!(t.T3 > 0.0)) return std::numeric_limits<double>::infinity();
  return t.T2 / t.T3;
}

double rayleigh_pq(const ProblemSpec& spec, const DiscreteField& u) {
  require_on_mesh(spec, u, "rayleigh_pq");
  require_nonzero(u, "rayleigh_pq");
  const auto t = terms::evaluate(spec, u.values());
  if (!(t.T3 > 0.0)) return std::numeric_limits<double>::infinity();
  return (t.T2 / spec.q + t.T1 / spec.p) / (t.T3 / spec.q);
}

double ab_norm(const ProblemSpec& spec, const DiscreteField& u) {
  return evaluate_functionals(spec, 0.0, u).ab_norm;
}

double nehari_residual(const ProblemSpec& spec, double lambda, const DiscreteField& u) {
  require_on_mesh(spec, u, "nehari_residual");
  require_nonzero(u, "nehari_residual");
  const auto t = terms::evaluate(spec, u.values());
  return t.T1 + t.T2 - lambda * t.T3;
}

NehariScaling nehari_scale(const ProblemSpec& spec, double lambda, const DiscreteField& v) {
  require_on_mesh(spec, v, "nehari_scale");
  require_nonzero(v, "nehari_scale");
  if (!(spec.p < spec.q)) throw InvalidInput("nehari_scale: requires p < q");
  const auto t = terms::evaluate(spec, v.values());
  const double denominator = lambda * t.T3 - t.T2;
  if (!(denominator > 0.0)) {
    throw NoScalingWitness("nehari_scale: lambda*T3 - T2 <= 0, the field does not witness lambda > lambda1");
  }
  if (!(t.T1 > 0.0)) throw InvalidInput("nehari_scale: constant field has no Nehari scaling");
  NehariScaling out;
  out.t = std::pow(t.T1 / denominator, 1.0 / (spec.q - spec.p));
  out.field = v.scaled(out.t);
  return out;
}

ConeProjection project_to_cone(const ProblemSpec& spec, const DiscreteField& u) {
  require_on_mesh(spec, u, "project_to_cone");
  if (!(spec.q >= 2.0)) throw InvalidInput("project_to_cone: requires q >= 2");
  ConeProjection out;
  out.shift = terms::cone_shift(spec, u.values());
  std::vector<double> shifted(u.values().begin(), u.values().end());
  for (double& x : shifted) x -= out.shift;
  out.field = DiscreteField(spec.domain(), std::move(shifted));
  return out;
}

DiscreteField normalize_mass(const ProblemSpec& spec, const DiscreteField& u) {
  require_on_mesh(spec, u, "normalize_mass");
  const auto t = terms::evaluate(spec, u.values());
  if (!(t.T3 > 0.0)) throw InvalidInput("normalize_mass: weighted q-mass is zero");
  return u.scaled(std::pow(t.T3, -1.0 / spec.q));
}

}  // namespace pqspectra
