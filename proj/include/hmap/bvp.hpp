#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "hmap/grid.hpp"
#include "hmap/metric.hpp"

namespace hmap {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Data for Δ_g u = source with u = dirichlet on B and T and ∂u/∂ν = neumann
// on the four side faces.
struct BoundaryData {
  std::function<double(const Vec3&)> source;
  std::function<double(const Vec3&)> dirichlet;
  std::function<double(Face, const Vec3&)> neumann;
};

// The mixed problem of the harmonic map: 0 on B, 1 on T, homogeneous Neumann.
BoundaryData harmonic_map_data();

struct DiscreteOperator {
  Grid grid{9};
  // L_h = -D^{-1} K on free rows, identity on Dirichlet rows.
  SparseMatrix matrix;
  Vector rhs;
  bool symmetric = false;

  // Symmetric energy form K and lumped Riemannian volume D = V·√g per node.
  SparseMatrix stiffness;
  Vector volume;
  Vector load;  // K u = load on free rows
  std::vector<char> dirichlet;
  Vector dirichlet_values;

  std::vector<Eigen::Triplet<double>> coefficients() const;
};

DiscreteOperator assemble_operator(const MetricField& metric, const Grid& grid);
DiscreteOperator assemble_operator(const MetricField& metric, const Grid& grid, const BoundaryData& data);

// L_h u at every node (Dirichlet rows give u itself).
Vector apply_operator(const DiscreteOperator& op, const Vector& u);
// Residual of the discrete equations: L_h u - rhs, zero on Dirichlet rows when u matches the data.
Vector operator_residual(const DiscreteOperator& op, const Vector& u);

enum class SolverMethod { conjugate_gradient, sor, direct };

struct SolverConfig {
  double tolerance = 1e-10;
  int max_iterations = 20000;
  SolverMethod method = SolverMethod::conjugate_gradient;
  double sor_omega = 0.0;  // 0 picks 2/(1+sin(πh))
};

SolverMethod parse_solver_method(const std::string& name);
std::string solver_method_name(SolverMethod m);

struct LinearSolveStats {
  int iterations = 0;
  double residual = 0.0;
  std::vector<double> history;
};

struct HarmonicSolution {
  Grid grid{9};
  std::string metric_description;
  std::uint64_t metric_hash = 0;
  GridField u;
  GridField du;         // ∂_i u, 3 components
  GridField grad_norm;  // |du|_g
  GridField hessian;    // covariant Hessian, 6 components (kSymIndex)
  double residual = 0.0;
  int iterations = 0;
  std::vector<double> residual_history;
  int clamped_nodes = 0;
  // Iterations per continuation step, empty for a direct solve.
  std::vector<int> step_iterations;
};

// Solves K u = load with the Dirichlet rows eliminated symmetrically.
Vector solve_linear(const DiscreteOperator& op, const SolverConfig& config, const Vector* initial,
                    LinearSolveStats* stats = nullptr);

HarmonicSolution solve_mixed_bvp(const MetricField& metric, const Grid& grid,
                                 const SolverConfig& config = {});
HarmonicSolution solve_mixed_bvp(const MetricField& metric, const Grid& grid, const SolverConfig& config,
                                 const Vector* initial);

HarmonicSolution continuation_solve(const MetricField& metric, const Grid& grid, int steps,
                                    const SolverConfig& config = {});

// Fills du, grad_norm and hessian of a solution from its u field.
void compute_derivatives(const MetricField& metric, HarmonicSolution& solution);

struct MaxPrincipleReport {
  double min_u = 0.0;
  double max_u = 0.0;
  double tolerance = 0.0;
  bool bounds_pass = false;

  std::vector<std::size_t> interior_extrema;
  bool interior_pass = false;

  struct BoundaryPiece {
    std::string name;
    double max_value = 0.0;
    double margin = 0.0;  // max over T minus max over the piece
  };
  double top_max = 0.0;
  std::vector<BoundaryPiece> pieces;  // open side faces, then open vertical edges
  bool boundary_pass = false;

  bool pass = false;
};

MaxPrincipleReport max_principle_check(const HarmonicSolution& solution, double tolerance = 1e-9);
MaxPrincipleReport max_principle_check(const Grid& grid, const GridField& u, double tolerance = 1e-9);

struct ConvergenceRow {
  int n = 0;
  double max_error = 0.0;
  std::optional<double> order;  // log2(e_{prev}/e_n)
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
  bool exact = false;
  double min_order = 0.0;
  std::vector<std::string> warnings;
};

ConvergenceTable manufactured_solution_error(const MetricField& metric, const Expression& u_exact,
                                             const std::vector<int>& sizes = {9, 17, 33, 65},
                                             const SolverConfig& config = {});

// Δ_g f at x using analytic derivatives of f.
double laplace_beltrami(const MetricField& metric, const ExpressionJet& f, const Vec3& x);

}  // namespace hmap
