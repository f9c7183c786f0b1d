#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hmap/types.hpp"

namespace hmap {

enum class ModelDomain { ball, half_ball, quarter_ball };

ModelDomain parse_model_domain(const std::string& name);
std::string model_domain_name(ModelDomain d);

struct ReflectedPoints {
  Vec3 y, y_bar, y_tilde, y_hat;
};

ReflectedPoints reflect(const Vec3& y);

// Dirichlet Green function of the unit ball, with even images across x1 = 0
// (half ball) and also x2 = 0 (quarter ball). Δ_x G = δ_y.
double green_function(ModelDomain kind, const Vec3& x, const Vec3& y);

using ScalarFunction = std::function<double(const Vec3&)>;

// Δu = f, ∂u/∂x1 = f1 on {x1 = 0}, ∂u/∂x2 = f2 on {x2 = 0}, u = f3 on the
// spherical cap. Empty functions mean zero data.
struct ModelProblem {
  ModelDomain domain = ModelDomain::half_ball;
  ScalarFunction f, f1, f2, f3;
};

struct QuadratureRule {
  int points = 32;  // Gauss–Legendre points per panel and axis
  int panels = 2;   // composite panels per axis for the far field
  bool pole_split = true;
};

struct WeightedPoints {
  std::vector<Vec3> points;
  std::vector<double> weights;
};

// Origin-centred spherical tensor rule over the domain.
WeightedPoints tensor_rule(ModelDomain d, const QuadratureRule& q);
double domain_measure(ModelDomain d);
bool in_domain(ModelDomain d, const Vec3& x, double tol = 1e-12);

// Gauss–Legendre nodes and weights on [-1, 1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

struct OracleValue {
  double value = 0.0;
  double error_estimate = 0.0;
  std::vector<std::string> warnings;
};

struct HarmonicPolynomial {
  std::vector<std::array<int, 3>> exponents;
  Eigen::VectorXd coefficients;

  double operator()(const Vec3& x) const;
  Vec3 gradient(const Vec3& x) const;
};

// Basis of harmonic polynomials of degree ≤ max_degree ((max_degree+1)² of them).
std::vector<HarmonicPolynomial> harmonic_basis(int max_degree);

// Least-squares fit of cap data by harmonic polynomials of degree ≤ 4.
HarmonicPolynomial harmonic_extension(ModelDomain d, const ScalarFunction& f3, int max_degree = 4);

OracleValue solve_model(const ModelProblem& problem, const QuadratureRule& quad, const Vec3& x,
                        double requested_error = 1e-6);
OracleValue solve_half_ball(const ModelProblem& problem, const QuadratureRule& quad, const Vec3& x);
OracleValue solve_quarter_ball(const ModelProblem& problem, const QuadratureRule& quad, const Vec3& x);

// Extension of Neumann data from the unit disk in {x1 = 0} to the whole plane,
// f(x) = -|x|^{-1} f1(x/|x|²) outside the disk. Throws CompatibilityError when
// f1 does not vanish on the unit circle.
ScalarFunction kelvin_extend(const ScalarFunction& f1, double tol = 1e-10);

struct ProbeRow {
  Vec3 x;
  double oracle = 0.0;
  double reference = 0.0;
  double abs_diff = 0.0;
  double quad_error = 0.0;
};

void write_probe_csv(const std::string& path, const std::vector<ProbeRow>& rows);

}  // namespace hmap
