#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "hmap/bvp.hpp"
#include "hmap/metric.hpp"

namespace hmap {

struct LevelSurface {
  double theta = 0.0;
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;  // oriented along ∇u
  std::vector<std::vector<int>> boundary_loops;  // closed, first vertex not repeated
  double area = 0.0;
  double boundary_length = 0.0;
  int chi = 0;
  int components = 0;
  bool near_critical = false;
};

struct Topology {
  int vertices = 0;
  int edges = 0;
  int faces = 0;
  int chi = 0;
  int components = 0;
  int boundary_loops = 0;
};

// Marching tetrahedra on the Kuhn split of every grid cell. Nodes with
// u >= theta count as above the level.
LevelSurface extract_level_set(const MetricField& metric, const HarmonicSolution& solution, double theta);

// Rebuilds boundary loops and counts; throws TopologyError on a non-manifold edge.
Topology surface_topology(LevelSurface& surface);
Topology surface_topology(const std::vector<Vec3>& vertices, const std::vector<std::array<int, 3>>& triangles,
                          std::vector<std::vector<int>>* loops = nullptr);

double triangle_area(const Mat3& g, const Vec3& a, const Vec3& b, const Vec3& c);

struct SurfaceGeometrySample {
  int triangle = -1;
  Vec3 centroid = Vec3::Zero();
  Eigen::Matrix2d second_fundamental_form = Eigen::Matrix2d::Zero();
  double gauss_curvature = 0.0;
  double mean_curvature = 0.0;
  double grad_norm = 0.0;
  double area = 0.0;
  bool excluded = false;
};

// Regularization threshold for near-critical points.
double regularization_threshold(const HarmonicSolution& solution);

// Throws DomainError when |du|_g < δ_reg at the centroid. A negative threshold
// is replaced by regularization_threshold(solution).
SurfaceGeometrySample second_fundamental_form(const MetricField& metric, const HarmonicSolution& solution,
                                              const LevelSurface& surface, int triangle, double threshold = -1.0);

struct BoundaryVertexGeometry {
  int vertex = -1;
  int loop = -1;
  bool corner = false;    // on a vertical cube edge
  int vertical_edge = -1;  // index into all_edges() when corner
  double turning = 0.0;   // signed polygon turning angle in g
  double connection = 0.0;  // Christoffel part of ∫κ over the dual length
  double dual_length = 0.0;
  double curvature = 0.0;  // κ at non-corner vertices
  double smooth_turning = 0.0;  // corner angle from the interpolated du instead of the polygon
  double dihedral = 0.0;   // metric dihedral angle at corners
  double orthogonality_deviation = 0.0;  // angle between ∇u and the edge at corners
};

struct BoundaryGeometry {
  std::vector<BoundaryVertexGeometry> vertices;
  double total_geodesic_curvature = 0.0;
  double total_turning = 0.0;  // Σ γ_j over corners
  std::vector<double> corner_angles;
  std::vector<double> smooth_corner_angles;
  double max_corner_deviation = 0.0;  // max |γ_j - (π - dihedral)|
};

BoundaryGeometry boundary_geometry(const MetricField& metric, const HarmonicSolution& solution,
                                   const LevelSurface& surface);

struct GaussBonnetResult {
  double gauss_integral = 0.0;
  double geodesic_integral = 0.0;
  double turning_sum = 0.0;
  int chi = 0;
  double residual = 0.0;
  double excluded_fraction = 0.0;
  bool reliable = true;
};

GaussBonnetResult gauss_bonnet_check(const MetricField& metric, const HarmonicSolution& solution,
                                     const LevelSurface& surface);

struct CoareaReport {
  int samples = 0;
  std::vector<std::string> names;
  std::vector<double> volume_side;  // ∫ φ |du| dV
  std::vector<double> level_side;   // ∫ (∫_Σθ φ dA) dθ
  std::vector<double> discrepancy;  // relative, or absolute when the volume side vanishes
  std::vector<double> critical_values;
  std::vector<double> flagged_thetas;
  double excluded_volume = 0.0;
};

using PointFunction = std::function<double(const Vec3&)>;

// Midpoint rule in θ over `samples` levels. Tests φ = 1, φ = R and the given
// smooth function (defaults to 1 + x1 x2 + x3/2).
CoareaReport coarea_scan(const MetricField& metric, const HarmonicSolution& solution, int samples,
                         PointFunction test_function = {});

void write_off(const std::string& path, const LevelSurface& surface);

// Parametric torus mesh with major radius R and minor radius r centred in the cube.
LevelSurface torus_fixture(double R, double r, int major_segments, int minor_segments);

// A solution-like container for an arbitrary sampled function (derivatives by
// the same stencils as the solver).
HarmonicSolution synthetic_solution(const MetricField& metric, const Grid& grid, const PointFunction& f);

}  // namespace hmap
