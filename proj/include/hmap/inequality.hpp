#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "hmap/bvp.hpp"
#include "hmap/level_set.hpp"
#include "hmap/metric.hpp"

namespace hmap {

enum class InequalityVariant { dirichlet, cube };

InequalityVariant parse_variant(const std::string& name);
const char* variant_name(InequalityVariant v);

struct LevelRecord {
  double theta = 0.0;
  double area = 0.0;
  int chi = 0;
  double boundary_length = 0.0;
  double corner_angle_sum = 0.0;  // Σ γ_j
  double geodesic_curvature = 0.0;  // ∫ κ over ∂Σ_θ
  bool near_critical = false;
  std::optional<double> gauss_bonnet_residual;
};

// Levels θ_k = (k + ½)/samples with their boundary geometry.
struct LevelFamily {
  std::vector<LevelSurface> surfaces;
  std::vector<BoundaryGeometry> boundaries;
  std::vector<LevelRecord> records;
};

LevelFamily build_level_family(const MetricField& metric, const HarmonicSolution& solution, int samples,
                               bool gauss_bonnet = false);

struct InequalityReport {
  InequalityVariant variant = InequalityVariant::cube;
  int n = 0;
  int samples = 0;
  double delta_reg = 0.0;

  double hess_term = 0.0;
  double scalar_term = 0.0;
  double boundary_mean_term = 0.0;      // over all of ∂Q
  double boundary_topbottom_term = 0.0;  // T ∪ B part
  double boundary_side_term = 0.0;       // F part
  double side_kappa_term = 0.0;          // ∫_θ ∫_{∂Σ_θ} κ
  double euler_term = 0.0;               // 2π ∫ χ dθ
  double corner_angle_term = 0.0;        // ∫ Σ γ_j dθ
  double turning_term = 0.0;             // ∫ Σ (π/2 − γ_j) dθ

  double lower_order_bound = 0.0;  // C_N
  double excluded_mass = 0.0;

  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
  std::optional<double> error_estimate;

  std::vector<LevelRecord> levels;
};

// delta_reg < 0 selects regularization_threshold(solution).
InequalityReport compute_inequality_terms(const HarmonicSolution& solution, const MetricField& metric,
                                          const LevelFamily& family, InequalityVariant variant,
                                          double delta_reg = -1.0);

// Sum of termwise differences against the same computation on a coarser grid.
double discretization_error(const InequalityReport& fine, const InequalityReport& coarse);

// Solves on n and (n + 1)/2, fills error_estimate for the fine report.
InequalityReport inequality_study(const MetricField& metric, int n, InequalityVariant variant, int samples,
                                  const SolverConfig& config = {}, double delta_reg = -1.0);

struct VerifyResult {
  bool pass = false;
  double margin = 0.0;
};

// Recomputes lhs, rhs and slack from the individual terms.
void recompute_totals(InequalityReport& report);

VerifyResult verify_inequality(const InequalityReport& report, double tol);

struct BochnerResult {
  GridField residual;  // zero at the excluded nodes
  double max_norm = 0.0;
  std::size_t max_node = 0;
  std::size_t evaluated_nodes = 0;
};

// Δ_g ½|du|² − |Hess u|² − Ric(du, du) at nodes at least 3h from ∂Q.
BochnerResult bochner_residual(const HarmonicSolution& solution, const MetricField& metric);

struct RigidityDiagnostics {
  double max_hessian = 0.0;
  double max_scalar_curvature = 0.0;
  double max_mean_curvature = 0.0;
  double max_angle_deviation = 0.0;
  double flow_isometry_defect = 0.0;
  double theta_from = 0.0;
  double theta_to = 0.0;
};

// The flow runs between the family levels closest to θ = 1/4 and θ = 3/4.
RigidityDiagnostics rigidity_diagnostics(const HarmonicSolution& solution, const MetricField& metric,
                                         const LevelFamily& family);

struct TorusBoundInput {
  std::optional<double> volume;
  std::optional<double> width;
  std::optional<double> translation_length;
  std::optional<double> constant_c;
  std::optional<double> euler;  // |χ(S)|
  std::optional<double> bilipschitz;
};

struct TorusBounds {
  std::optional<double> genus_from_width;
  std::optional<double> genus_from_translation;
  std::optional<double> entropy_lower;
  std::optional<double> entropy_upper;
};

TorusBounds torus_bounds(const TorusBoundInput& input);

std::string report_text(const InequalityReport& report, const VerifyResult& verdict);
nlohmann::json report_json(const InequalityReport& report, const VerifyResult& verdict);
nlohmann::json diagnostics_json(const RigidityDiagnostics& d);
nlohmann::json bounds_json(const TorusBounds& b);

}  // namespace hmap
