#include "pqspectra/descent.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "pqspectra/error.hpp"

namespace pqspectra {

struct H1Preconditioner::Impl {
  const Mesh* mesh = nullptr;
  double length = 1.0;
  Eigen::SparseMatrix<double> mass;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> factor;

  void assemble(std::span<const double> element_weights) {
    const auto n = static_cast<Eigen::Index>(mesh->node_count());
    const std::size_t nv = mesh->vertices_per_element();
    std::vector<Eigen::Triplet<double>> stiffness;
    stiffness.reserve(mesh->elements().size() * nv * nv);
    std::size_t k = 0;
    for (const auto& e : mesh->elements()) {
      const double w = element_weights.empty() ? 1.0 : element_weights[k];
      ++k;
      for (std::size_t a = 0; a < nv; ++a) {
        for (std::size_t b = 0; b < nv; ++b) {
          const auto& ga = e.basis_gradients[a];
          const auto& gb = e.basis_gradients[b];
          stiffness.emplace_back(e.nodes[a], e.nodes[b], w * e.measure * (ga[0] * gb[0] + ga[1] * gb[1]));
        }
      }
    }
    Eigen::SparseMatrix<double> kmat(n, n);
    kmat.setFromTriplets(stiffness.begin(), stiffness.end());
    const Eigen::SparseMatrix<double> system = kmat + mass / (length * length);
    if (!factor_ready) {
      factor.analyzePattern(system);
      factor_ready = true;
    }
    factor.factorize(system);
    if (factor.info() != Eigen::Success) throw InvalidInput("H1 preconditioner: factorization failed");
  }

  bool factor_ready = false;
};

H1Preconditioner::H1Preconditioner(const Mesh& mesh) : impl_(std::make_unique<Impl>()) {
  impl_->mesh = &mesh;
  impl_->length = std::pow(mesh.total_measure(), 1.0 / mesh.dimension());
  const auto n = static_cast<Eigen::Index>(mesh.node_count());
  const std::size_t nv = mesh.vertices_per_element();
  std::vector<Eigen::Triplet<double>> mass;
  for (const auto& e : mesh.elements()) {
    for (std::size_t a = 0; a < nv; ++a) {
      for (std::size_t b = 0; b < nv; ++b) {
        // Consistent P1 mass: |e| (1 + delta_ab) / ((d+1)(d+2)).
        const double m = e.measure * (a == b ? 2.0 : 1.0) / static_cast<double>((nv) * (nv + 1));
        mass.emplace_back(e.nodes[a], e.nodes[b], m);
      }
    }
  }
  impl_->mass.resize(n, n);
  impl_->mass.setFromTriplets(mass.begin(), mass.end());
  impl_->assemble({});
}

void H1Preconditioner::reweight(std::span<const double> element_weights) {
  if (element_weights.size() != impl_->mesh->elements().size()) {
    throw InvalidInput("H1 preconditioner: one weight per element expected");
  }
  impl_->assemble(element_weights);
}

H1Preconditioner::~H1Preconditioner() = default;
H1Preconditioner::H1Preconditioner(H1Preconditioner&&) noexcept = default;
H1Preconditioner& H1Preconditioner::operator=(H1Preconditioner&&) noexcept = default;

void H1Preconditioner::apply(std::span<const double> in, std::span<double> out) const {
  const Eigen::Map<const Eigen::VectorXd> x(in.data(), static_cast<Eigen::Index>(in.size()));
  Eigen::Map<Eigen::VectorXd> y(out.data(), static_cast<Eigen::Index>(out.size()));
  y = impl_->factor.solve(x);
}

std::vector<double> H1Preconditioner::lowest_nonconstant_mode(int iterations) const {
  const auto n = impl_->mass.rows();
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
  const Eigen::VectorXd m_ones = impl_->mass * ones;
  const double total = ones.dot(m_ones);
  Eigen::VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) x[i] = std::cos(0.7 * static_cast<double>(i)) + static_cast<double>(i) / n;
  for (int it = 0; it < iterations; ++it) {
    x -= (m_ones.dot(x) / total) * ones;
    x = impl_->factor.solve(impl_->mass * x);
    x /= x.lpNorm<Eigen::Infinity>();
  }
  x -= (m_ones.dot(x) / total) * ones;
  return {x.data(), x.data() + n};
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

struct Sample {
  std::vector<double> point;  // on the cone
  terms::Values values;
  ObjectiveEvaluation evaluation;
  std::vector<double> gradient;  // gradient of f o P
  double stationarity = 0.0;
};

class ConeEvaluator {
 public:
  ConeEvaluator(const ProblemSpec& spec, const ConeObjective& objective) : spec_(spec), objective_(objective) {}

  std::optional<Sample> operator()(std::span<const double> u) const {
    Sample s;
    double shift = 0.0;
    try {
      shift = terms::cone_shift(spec_, u);
    } catch (const InvalidInput&) {
      return std::nullopt;
    }
    s.point.assign(u.begin(), u.end());
    for (double& x : s.point) x -= shift;
    s.values = terms::evaluate(spec_, s.point);
    const auto ev = objective_(s.values);
    if (!ev || !std::isfinite(ev->value)) return std::nullopt;
    s.evaluation = *ev;

    terms::gradients(spec_, s.point, grads_);
    const std::size_t n = u.size();
    s.gradient.assign(n, 0.0);
    std::vector<double> residual(n, 0.0);
    const std::array<const std::vector<double>*, 3> parts{&grads_.dT1, &grads_.dT2, &grads_.dT3};
    double scale = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
      const double f = ev->partials[k];
      const double c = ev->residual_coefficients[k];
      if (f == 0.0 && c == 0.0) continue;
      const auto& d = *parts[k];
      for (std::size_t i = 0; i < n; ++i) {
        s.gradient[i] += f * d[i];
        residual[i] += c * d[i];
      }
      scale += std::abs(c) * sup_norm(d);
    }
    // Chain rule through the shift: ds = <dg, du> / <dg, 1>.
    const double dg_total = std::accumulate(grads_.dg.begin(), grads_.dg.end(), 0.0);
    const double f_total = std::accumulate(s.gradient.begin(), s.gradient.end(), 0.0);
    if (dg_total > 0.0) {
      const double ratio = f_total / dg_total;
      for (std::size_t i = 0; i < n; ++i) s.gradient[i] -= ratio * grads_.dg[i];
    }
    for (double x : s.gradient) {
      if (!std::isfinite(x)) return std::nullopt;
    }
    const double rn = sup_norm(residual);
    s.stationarity = scale > 0.0 ? rn / scale : rn;
    return s;
  }

 private:
  const ProblemSpec& spec_;
  const ConeObjective& objective_;
  mutable terms::Gradients grads_;
};

}  // namespace

double combination_residual(const ProblemSpec& spec, std::span<const double> u,
                            const std::array<double, 3>& coefficients) {
  terms::Gradients d;
  terms::gradients(spec, u, d);
  const std::array<const std::vector<double>*, 3> parts{&d.dT1, &d.dT2, &d.dT3};
  std::vector<double> r(u.size(), 0.0);
  double scale = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    if (coefficients[k] == 0.0) continue;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += coefficients[k] * (*parts[k])[i];
    scale += std::abs(coefficients[k]) * sup_norm(*parts[k]);
  }
  const double rn = sup_norm(r);
  return scale > 0.0 ? rn / scale : rn;
}

DescentResult minimize_on_cone(const ProblemSpec& spec, const ConeObjective& objective, std::vector<double> start,
                               const DescentOptions& options, H1Preconditioner& preconditioner) {
  const ConeEvaluator evaluate(spec, objective);
  auto current = evaluate(start);
  if (!current) throw InvalidInput("minimize_on_cone: infeasible starting point");
  const std::size_t n = start.size();

  struct Pair {
    std::vector<double> s, y;
    double rho;
  };
  std::deque<Pair> memory;
  std::vector<double> direction(n), work(n), alpha_k;

  DescentResult result;
  result.history.push_back(current->evaluation.value);
  std::vector<double> residuals{current->stationarity};
  int failures = 0;

  // Metric weights: the curvature of c1 T1 + c2 T2 along the element gradient,
  // sum_k |c_k| r_k (r_k - 1) |grad u_e|^(r_k - 2), with |grad u_e| floored.
  std::vector<double> element_weights(spec.domain().elements().size());
  auto refresh_metric = [&] {
    const Mesh& mesh = spec.domain();
    const auto& c = current->evaluation.residual_coefficients;
    double gmax = 0.0;
    std::size_t k = 0;
    for (const auto& e : mesh.elements()) {
      const auto g = kernels::element_gradient(mesh, e, current->point);
      element_weights[k] = std::hypot(g[0], g[1]);
      gmax = std::max(gmax, element_weights[k++]);
    }
    if (!(gmax > 0.0)) return;
    double wmax = 0.0;
    for (double& w : element_weights) {
      const double g = std::max(w, options.metric_floor * gmax);
      w = std::abs(c[0]) * spec.p * (spec.p - 1.0) * std::pow(g, spec.p - 2.0) +
          std::abs(c[1]) * spec.q * (spec.q - 1.0) * std::pow(g, spec.q - 2.0);
      wmax = std::max(wmax, w);
    }
    if (!(wmax > 0.0) || !std::isfinite(wmax)) return;
    for (double& w : element_weights) w /= wmax;
    preconditioner.reweight(element_weights);
  };

  for (int iter = 0; iter < options.max_iters; ++iter) {
    if (options.metric_floor > 0.0 && iter % std::max(options.metric_refresh, 1) == 0) {
      refresh_metric();
    }
    if (current->stationarity <= options.stationarity_tol) {
      result.converged = true;
      break;
    }
    const int w = options.stagnation_window;
    if (static_cast<int>(result.history.size()) > w) {
      const double now = result.history.back();
      const double then = result.history[result.history.size() - 1 - static_cast<std::size_t>(w)];
      // Objective values saturate at round-off before the residual does, so a
      // flat objective only counts when the residual has stopped improving too.
      const double residual_then = residuals[residuals.size() - 1 - static_cast<std::size_t>(w)];
      if (std::abs(then - now) <= options.stagnation_tol * std::max(std::abs(now), 1e-300) &&
          current->stationarity > 0.5 * residual_then) {
        result.stagnated = true;
        break;
      }
    }

    // Two-loop recursion with H0 = gamma * (K + M/l^2)^{-1}.
    std::vector<double> q(current->gradient);
    alpha_k.assign(memory.size(), 0.0);
    for (std::size_t k = memory.size(); k-- > 0;) {
      alpha_k[k] = memory[k].rho * dot(memory[k].s, q);
      for (std::size_t i = 0; i < n; ++i) q[i] -= alpha_k[k] * memory[k].y[i];
    }
    preconditioner.apply(q, direction);
    if (!memory.empty()) {
      const auto& last = memory.back();
      preconditioner.apply(last.y, work);
      const double gamma = dot(last.s, last.y) / dot(last.y, work);
      for (double& d : direction) d *= gamma;
    }
    for (std::size_t k = 0; k < memory.size(); ++k) {
      const double beta = memory[k].rho * dot(memory[k].y, direction);
      for (std::size_t i = 0; i < n; ++i) direction[i] += (alpha_k[k] - beta) * memory[k].s[i];
    }
    for (double& d : direction) d = -d;
    double slope = dot(current->gradient, direction);
    if (!(slope < 0.0)) {
      memory.clear();
      preconditioner.apply(current->gradient, direction);
      for (double& d : direction) d = -d;
      slope = dot(current->gradient, direction);
      if (!(slope < 0.0)) break;
    }

    double step = 1.0;
    if (memory.empty()) {
      const double dn = sup_norm(direction);
      const double un = sup_norm(current->point);
      if (dn > 0.0 && un > 0.0) step = std::min(1.0, 0.1 * un / dn);
    }

    std::optional<Sample> trial;
    const double f0 = current->evaluation.value;
    const double noise = 1e-13 * std::abs(f0);
    for (int bt = 0; bt < options.max_backtracks; ++bt, step *= 0.5) {
      std::vector<double> u(n);
      for (std::size_t i = 0; i < n; ++i) u[i] = current->point[i] + step * direction[i];
      auto candidate = evaluate(u);
      if (!candidate) continue;  // outside the objective's domain: halve the step
      const double f = candidate->evaluation.value;
      if (f <= f0 + options.armijo_c * step * slope) {
        trial = std::move(candidate);
        break;
      }
      // Once function differences reach round-off, Armijo cannot certify
      // decrease; accept a step within round-off of f0 whose directional
      // derivative shrank (approximate Wolfe).
      const double slope_new = dot(candidate->gradient, direction);
      if (f <= f0 + noise && slope_new >= 0.9 * slope && slope_new <= -0.8 * slope) {
        trial = std::move(candidate);
        break;
      }
    }
    if (!trial) {
      // No step decreases the objective beyond round-off: it has stagnated.
      if (++failures > 1 || memory.empty()) {
        result.stagnated = true;
        break;
      }
      memory.clear();
      continue;
    }
    failures = 0;

    Pair pair;
    pair.s.resize(n);
    pair.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      pair.s[i] = trial->point[i] - current->point[i];
      pair.y[i] = trial->gradient[i] - current->gradient[i];
    }
    const double sy = dot(pair.s, pair.y);
    if (sy > 1e-300) {
      pair.rho = 1.0 / sy;
      memory.push_back(std::move(pair));
      if (static_cast<int>(memory.size()) > options.memory) memory.pop_front();
    }
    current = std::move(trial);
    if (options.mass_drift > 0.0 && current->values.T3 > 0.0 &&
        (current->values.T3 > options.mass_drift || current->values.T3 < 1.0 / options.mass_drift)) {
      const double t = std::pow(current->values.T3, -1.0 / spec.q);
      for (double& x : current->point) x *= t;
      auto rescaled = evaluate(current->point);
      if (rescaled) current = std::move(rescaled);
      memory.clear();
    }
    result.history.push_back(current->evaluation.value);
    residuals.push_back(current->stationarity);
    result.iterations = iter + 1;
  }

  if (current->stationarity <= options.stationarity_tol) result.converged = true;
  result.point = std::move(current->point);
  result.values = current->values;
  result.evaluation = current->evaluation;
  result.stationarity = current->stationarity;
  return result;
}

}  // namespace pqspectra
