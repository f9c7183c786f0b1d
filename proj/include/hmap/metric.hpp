#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "hmap/errors.hpp"
#include "hmap/expression.hpp"
#include "hmap/types.hpp"

namespace hmap {

inline constexpr double kDegenerateEigenvalue = 1e-10;

/// Metric value with its first and second coordinate derivatives.
/// dg[m] = ∂_m g, ddg[m][n] = ∂_m ∂_n g. Unrequested orders are left zero.
template <typename Scalar>
struct MetricJetT {
  Mat3T<Scalar> g = Mat3T<Scalar>::Identity();
  std::array<Mat3T<Scalar>, 3> dg{Mat3T<Scalar>::Zero(), Mat3T<Scalar>::Zero(),
                                  Mat3T<Scalar>::Zero()};
  std::array<std::array<Mat3T<Scalar>, 3>, 3> ddg{};

  MetricJetT() {
    for (auto& row : ddg)
      for (auto& m : row) m.setZero();
  }
};
using MetricJet = MetricJetT<double>;

template <typename Derived>
Mat3T<typename Derived::Scalar> inverse_metric(const Eigen::MatrixBase<Derived>& g) {
  using Scalar = typename Derived::Scalar;
  const Mat3T<Scalar> m = g;
  Eigen::SelfAdjointEigenSolver<Mat3T<Scalar>> eig;
  eig.computeDirect(m, Eigen::EigenvaluesOnly);
  const Scalar smallest = eig.eigenvalues()(0);
  if (!(smallest > Scalar(kDegenerateEigenvalue))) {
    throw DegenerateMetricError(
        "degenerate metric: smallest eigenvalue " + std::to_string(double(smallest)),
        double(smallest));
  }
  return m.inverse();
}

template <typename Scalar>
ChristoffelT<Scalar> christoffel(const MetricJetT<Scalar>& jet, const Mat3T<Scalar>& g_inv) {
  // First kind Γ_lij = ½(∂_i g_jl + ∂_j g_il − ∂_l g_ij), then raise l.
  ChristoffelT<Scalar> first;
  for (int l = 0; l < 3; ++l) {
    for (int i = 0; i < 3; ++i) {
      for (int j = i; j < 3; ++j) {
        const Scalar v = Scalar(0.5) * (jet.dg[i](j, l) + jet.dg[j](i, l) - jet.dg[l](i, j));
        first[l](i, j) = v;
        first[l](j, i) = v;
      }
    }
  }
  ChristoffelT<Scalar> gamma;
  for (int k = 0; k < 3; ++k) {
    gamma[k].setZero();
    for (int l = 0; l < 3; ++l) gamma[k] += g_inv(k, l) * first[l];
  }
  return gamma;
}

template <typename Scalar>
ChristoffelT<Scalar> christoffel(const MetricJetT<Scalar>& jet) {
  return christoffel(jet, inverse_metric(jet.g));
}

/// Ricci tensor R_ij = ∂_k Γ^k_ij − ∂_j Γ^k_ik + Γ^k_kl Γ^l_ij − Γ^k_jl Γ^l_ik.
/// Needs a jet of order 2.
template <typename Scalar>
Mat3T<Scalar> ricci(const MetricJetT<Scalar>& jet) {
  const Mat3T<Scalar> g_inv = inverse_metric(jet.g);
  const ChristoffelT<Scalar> gamma = christoffel(jet, g_inv);

  // dgamma[m][k](i, j) = ∂_m Γ^k_ij
  std::array<ChristoffelT<Scalar>, 3> dgamma;
  for (int m = 0; m < 3; ++m) {
    const Mat3T<Scalar> dg_inv = -g_inv * jet.dg[m] * g_inv;
    for (int k = 0; k < 3; ++k) {
      for (int i = 0; i < 3; ++i) {
        for (int j = i; j < 3; ++j) {
          Scalar v(0);
          for (int l = 0; l < 3; ++l) {
            const Scalar s = jet.dg[i](j, l) + jet.dg[j](i, l) - jet.dg[l](i, j);
            const Scalar ds = jet.ddg[m][i](j, l) + jet.ddg[m][j](i, l) - jet.ddg[m][l](i, j);
            v += Scalar(0.5) * (dg_inv(k, l) * s + g_inv(k, l) * ds);
          }
          dgamma[m][k](i, j) = v;
          dgamma[m][k](j, i) = v;
        }
      }
    }
  }

  Mat3T<Scalar> ric = Mat3T<Scalar>::Zero();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      Scalar v(0);
      for (int k = 0; k < 3; ++k) {
        v += dgamma[k][k](i, j) - dgamma[j][k](i, k);
        for (int l = 0; l < 3; ++l) {
          v += gamma[k](k, l) * gamma[l](i, j) - gamma[k](j, l) * gamma[l](i, k);
        }
      }
      ric(i, j) = v;
    }
  }
  return Scalar(0.5) * (ric + ric.transpose());
}

template <typename Scalar>
Scalar scalar_curvature(const MetricJetT<Scalar>& jet) {
  return (inverse_metric(jet.g).cwiseProduct(ricci(jet))).sum();
}

enum class DerivativeMode { analytic, central_difference };

/// Riemannian metric on the unit cube chart [0,1]³. Immutable once built;
/// copies share the underlying evaluators.
class MetricField {
 public:
  using Evaluator = std::function<Mat3(const Vec3&)>;
  using JetEvaluator = std::function<MetricJet(const Vec3&, int order)>;

  /// Derivatives by 4th-order differences with step h_g (one-sided near the
  /// cube boundary).
  static MetricField from_function(std::string description, Evaluator g, double h_g = 1e-3);
  static MetricField with_derivatives(std::string description, Evaluator g, JetEvaluator jet);

  const std::string& description() const { return description_; }
  std::uint64_t hash() const;
  DerivativeMode derivative_mode() const { return mode_; }
  double h_g() const { return h_g_; }

  Mat3 operator()(const Vec3& x) const { return g_(x); }
  MetricJet jet(const Vec3& x, int order) const;

  /// Same metric, derivatives recomputed by finite differences.
  MetricField with_finite_differences(double h_g) const;

 private:
  MetricField() = default;

  std::string description_;
  Evaluator g_;
  JetEvaluator jet_;
  DerivativeMode mode_ = DerivativeMode::central_difference;
  double h_g_ = 1e-3;
};

namespace metrics {

MetricField euclidean();
/// g = e^{2f} δ
MetricField conformal(const Expression& f);
/// g = dx1² + dx2² + φ² dx3²
MetricField warped(const Expression& phi);
MetricField diagonal(const Expression& d1, const Expression& d2, const Expression& d3);
/// Entries in the order g11 g12 g13 g22 g23 g33.
MetricField custom(const std::array<Expression, 6>& entries);
/// Metric whose inverse is (1 − t) δ + t g⁻¹.
MetricField homotopy(const MetricField& target, double t);

}  // namespace metrics

Christoffel christoffel(const MetricField& metric, const Vec3& x);
double scalar_curvature(const MetricField& metric, const Vec3& x);
Mat3 ricci(const MetricField& metric, const Vec3& x);

struct GeometrySample {
  Vec3 point;
  Mat3 g;
  Mat3 g_inv;
  double sqrt_det = 1.0;
  Christoffel christoffel;
  double scalar_curvature = 0.0;
};

GeometrySample sample_geometry(const MetricField& metric, const Vec3& x);

// Faces of the cube chart: B = {x3 = 0}, T = {x3 = 1}, F1 = {x1 = 0},
// F2 = {x2 = 0}, F3 = {x1 = 1}, F4 = {x2 = 1}.
enum class Face { B, T, F1, F2, F3, F4 };

inline constexpr std::array<Face, 6> kAllFaces{Face::B, Face::T, Face::F1,
                                               Face::F2, Face::F3, Face::F4};
inline constexpr std::array<Face, 4> kSideFaces{Face::F1, Face::F2, Face::F3, Face::F4};

int face_axis(Face face);
// −1 for faces at coordinate 0, +1 at coordinate 1.
double face_side(Face face);
const char* face_name(Face face);
bool on_face(Face face, const Vec3& x, double tol = 1e-12);

struct FaceGeometry {
  Face face = Face::B;
  Vec3 point = Vec3::Zero();
  Vec3 outward_normal = Vec3::Zero();  // contravariant components, g-unit
  double mean_curvature = 0.0;         // trace of shape operator, outward normal
  double area_density = 1.0;           // √g · √(g^{aa}) for face axis a
  // g(∂_a, ∂_j) for the face axis a and the two j ≠ a.
  std::array<double, 2> tangential_offdiag{0.0, 0.0};
};

FaceGeometry face_geometry(const MetricField& metric, Face face, const Vec3& x);
FaceGeometry face_geometry(const MetricJet& jet, Face face, const Vec3& x);

struct Edge {
  Face first;
  Face second;
};

/// The twelve edges; the first four are the vertical ones F1∩F2, F2∩F3,
/// F3∩F4, F4∩F1.
const std::array<Edge, 12>& all_edges();
std::string edge_name(const Edge& edge);

/// Interior dihedral angle π − arccos g(ν₁, ν₂).
double dihedral_angle(const MetricField& metric, const Edge& edge, const Vec3& x);
double dihedral_angle(const Mat3& g, const Edge& edge);

struct EdgeAngleSample {
  Edge edge;
  Vec3 point;
  double dihedral_angle = 0.0;
};

struct RightAngleReport {
  double max_offdiag = 0.0;
  double max_angle_deviation = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

RightAngleReport validate_right_angled_metric(const MetricField& metric, int resolution,
                                              double tolerance = 1e-8);

}  // namespace hmap
