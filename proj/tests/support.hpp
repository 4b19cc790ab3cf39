#pragma once

#include <cmath>
#include <memory>
#include <numbers>
#include <random>

#include "pqspectra/mesh.hpp"
#include "pqspectra/problem.hpp"

namespace pqs_test {

using namespace pqspectra;

inline std::shared_ptr<const Mesh> interval(int n, double x0 = 0.0, double x1 = 1.0) {
  return std::make_shared<const Mesh>(build_interval_mesh(n, x0, x1));
}

inline std::shared_ptr<const Mesh> square(int n) {
  return std::make_shared<const Mesh>(build_rectangle_mesh(n, n, {0.0, 1.0, 0.0, 1.0}));
}

inline ProblemSpec neumann(std::shared_ptr<const Mesh> mesh, double p, double q) {
  return make_problem(std::move(mesh), p, q, ConstantWeight{1.0}, ConstantWeight{0.0});
}

inline DiscreteField random_field(const Mesh& mesh, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> d(-scale, scale);
  std::vector<double> v(mesh.node_count());
  for (double& x : v) x = d(rng);
  return DiscreteField(mesh, std::move(v));
}

inline double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace pqs_test
