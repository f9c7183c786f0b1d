#include "hmap/metric.hpp"

#include <algorithm>
#include <memory>

namespace hmap {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// 4th-order first derivative along axis m; one-sided when the centred
// stencil would leave [0,1].
template <typename F>
Mat3 fd_first(const F& f, const Vec3& x, int m, double h) {
  const auto at = [&](double offset) {
    Vec3 y = x;
    y[m] += offset;
    return f(y);
  };
  constexpr double slack = 1e-14;
  if (x[m] - 2 * h >= -slack && x[m] + 2 * h <= 1.0 + slack) {
    return (-at(2 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2 * h)) / (12.0 * h);
  }
  const double s = (x[m] - 2 * h < -slack) ? h : -h;
  return (-25.0 * at(0) + 48.0 * at(s) - 36.0 * at(2 * s) + 16.0 * at(3 * s) - 3.0 * at(4 * s)) /
         (12.0 * s);
}

MetricJet fd_jet(const MetricField::Evaluator& g, const Vec3& x, int order, double h) {
  MetricJet jet;
  jet.g = g(x);
  if (order >= 1) {
    for (int m = 0; m < 3; ++m) jet.dg[m] = fd_first(g, x, m, h);
  }
  if (order >= 2) {
    for (int n = 0; n < 3; ++n) {
      const auto dn = [&](const Vec3& y) { return fd_first(g, y, n, h); };
      for (int m = n; m < 3; ++m) {
        jet.ddg[m][n] = fd_first(dn, x, m, h);
        jet.ddg[m][n] = 0.5 * (jet.ddg[m][n] + jet.ddg[m][n].transpose()).eval();
        jet.ddg[n][m] = jet.ddg[m][n];
      }
    }
  }
  return jet;
}

struct EntryJets {
  std::array<ExpressionJet, 6> entries;
};

constexpr int kEntryRow[6] = {0, 0, 0, 1, 1, 2};
constexpr int kEntryCol[6] = {0, 1, 2, 1, 2, 2};

MetricField from_entries(std::string description, const std::array<Expression, 6>& e) {
  auto jets = std::make_shared<EntryJets>(EntryJets{{ExpressionJet(e[0]), ExpressionJet(e[1]),
                                                     ExpressionJet(e[2]), ExpressionJet(e[3]),
                                                     ExpressionJet(e[4]), ExpressionJet(e[5])}});
  auto value = [jets](const Vec3& x) {
    Mat3 g;
    for (int k = 0; k < 6; ++k) {
      const double v = jets->entries[k].value(x);
      g(kEntryRow[k], kEntryCol[k]) = v;
      g(kEntryCol[k], kEntryRow[k]) = v;
    }
    return g;
  };
  auto jet = [jets, value](const Vec3& x, int order) {
    MetricJet j;
    j.g = value(x);
    for (int k = 0; k < 6; ++k) {
      const auto& ej = jets->entries[k];
      if (ej.value.is_constant()) continue;
      const int r = kEntryRow[k];
      const int c = kEntryCol[k];
      if (order >= 1) {
        for (int m = 0; m < 3; ++m) {
          const double v = ej.first[m](x);
          j.dg[m](r, c) = v;
          j.dg[m](c, r) = v;
        }
      }
      if (order >= 2) {
        for (int m = 0; m < 3; ++m) {
          for (int n = m; n < 3; ++n) {
            const double v = ej.second[m][n](x);
            j.ddg[m][n](r, c) = v;
            j.ddg[m][n](c, r) = v;
            j.ddg[n][m](r, c) = v;
            j.ddg[n][m](c, r) = v;
          }
        }
      }
    }
    return j;
  };
  return MetricField::with_derivatives(std::move(description), value, jet);
}

}  // namespace

MetricField MetricField::from_function(std::string description, Evaluator g, double h_g) {
  if (!(h_g > 0)) throw DomainError("finite-difference step must be positive");
  MetricField m;
  m.description_ = std::move(description);
  m.g_ = std::move(g);
  m.mode_ = DerivativeMode::central_difference;
  m.h_g_ = h_g;
  return m;
}

MetricField MetricField::with_derivatives(std::string description, Evaluator g, JetEvaluator jet) {
  MetricField m;
  m.description_ = std::move(description);
  m.g_ = std::move(g);
  m.jet_ = std::move(jet);
  m.mode_ = DerivativeMode::analytic;
  m.h_g_ = 0.0;
  return m;
}

std::uint64_t MetricField::hash() const { return fnv1a(description_); }

MetricJet MetricField::jet(const Vec3& x, int order) const {
  if (mode_ == DerivativeMode::analytic) return jet_(x, order);
  return fd_jet(g_, x, order, h_g_);
}

MetricField MetricField::with_finite_differences(double h_g) const {
  return from_function(description_, g_, h_g);
}

namespace metrics {

MetricField euclidean() {
  return MetricField::with_derivatives(
      "euclidean", [](const Vec3&) -> Mat3 { return Mat3::Identity(); },
      [](const Vec3&, int) { return MetricJet{}; });
}

MetricField conformal(const Expression& f) {
  auto jet = std::make_shared<ExpressionJet>(f);
  auto value = [jet](const Vec3& x) -> Mat3 {
    return std::exp(2.0 * jet->value(x)) * Mat3::Identity();
  };
  auto derivs = [jet](const Vec3& x, int order) {
    MetricJet j;
    const double e2f = std::exp(2.0 * jet->value(x));
    j.g = e2f * Mat3::Identity();
    if (order >= 1) {
      Vec3 df;
      for (int m = 0; m < 3; ++m) df[m] = jet->first[m](x);
      for (int m = 0; m < 3; ++m) j.dg[m] = 2.0 * df[m] * e2f * Mat3::Identity();
      if (order >= 2) {
        for (int m = 0; m < 3; ++m) {
          for (int n = m; n < 3; ++n) {
            const double v = (4.0 * df[m] * df[n] + 2.0 * jet->second[m][n](x)) * e2f;
            j.ddg[m][n] = v * Mat3::Identity();
            j.ddg[n][m] = j.ddg[m][n];
          }
        }
      }
    }
    return j;
  };
  return MetricField::with_derivatives("conformal(" + f.to_string() + ")", value, derivs);
}

MetricField warped(const Expression& phi) {
  const auto one = Expression::constant(1.0);
  const auto zero = Expression::constant(0.0);
  return from_entries("warped(" + phi.to_string() + ")", {one, zero, zero, one, zero, phi * phi});
}

MetricField diagonal(const Expression& d1, const Expression& d2, const Expression& d3) {
  const auto zero = Expression::constant(0.0);
  return from_entries("diagonal(" + d1.to_string() + "," + d2.to_string() + "," + d3.to_string() + ")",
                      {d1, zero, zero, d2, zero, d3});
}

MetricField custom(const std::array<Expression, 6>& entries) {
  std::string d = "custom(";
  for (int k = 0; k < 6; ++k) d += (k ? "," : "") + entries[k].to_string();
  return from_entries(d + ")", entries);
}

MetricField homotopy(const MetricField& target, double t) {
  if (t >= 1.0) return target;
  auto g = [target, t](const Vec3& x) -> Mat3 {
    const Mat3 inv = (1.0 - t) * Mat3::Identity() + t * inverse_metric(target(x));
    return inv.inverse();
  };
  return MetricField::from_function("homotopy(" + std::to_string(t) + "," + target.description() + ")",
                                    g, target.derivative_mode() == DerivativeMode::central_difference
                                           ? target.h_g()
                                           : 1e-3);
}

}  // namespace metrics

Christoffel christoffel(const MetricField& metric, const Vec3& x) {
  return christoffel(metric.jet(x, 1));
}

double scalar_curvature(const MetricField& metric, const Vec3& x) {
  return scalar_curvature(metric.jet(x, 2));
}

Mat3 ricci(const MetricField& metric, const Vec3& x) { return ricci(metric.jet(x, 2)); }

GeometrySample sample_geometry(const MetricField& metric, const Vec3& x) {
  const MetricJet jet = metric.jet(x, 2);
  GeometrySample s;
  s.point = x;
  s.g = jet.g;
  s.g_inv = inverse_metric(jet.g);
  s.sqrt_det = std::sqrt(jet.g.determinant());
  s.christoffel = christoffel(jet, s.g_inv);
  s.scalar_curvature = (s.g_inv.cwiseProduct(ricci(jet))).sum();
  return s;
}

int face_axis(Face face) {
  switch (face) {
    case Face::B:
    case Face::T: return 2;
    case Face::F1:
    case Face::F3: return 0;
    case Face::F2:
    case Face::F4: return 1;
  }
  return 0;
}

double face_side(Face face) {
  return (face == Face::T || face == Face::F3 || face == Face::F4) ? 1.0 : -1.0;
}

const char* face_name(Face face) {
  static const char* names[] = {"B", "T", "F1", "F2", "F3", "F4"};
  return names[static_cast<int>(face)];
}

bool on_face(Face face, const Vec3& x, double tol) {
  const int a = face_axis(face);
  const double target = face_side(face) > 0 ? 1.0 : 0.0;
  if (std::abs(x[a] - target) > tol) return false;
  for (int i = 0; i < 3; ++i) {
    if (x[i] < -tol || x[i] > 1.0 + tol) return false;
  }
  return true;
}

FaceGeometry face_geometry(const MetricJet& jet, Face face, const Vec3& x) {
  const int a = face_axis(face);
  const double s = face_side(face);
  const Mat3 g_inv = inverse_metric(jet.g);
  const double gaa = g_inv(a, a);
  const double root = std::sqrt(gaa);

  FaceGeometry out;
  out.face = face;
  out.point = x;
  out.outward_normal = s * g_inv.col(a) / root;
  out.area_density = std::sqrt(jet.g.determinant()) * root;
  int slot = 0;
  for (int j = 0; j < 3; ++j) {
    if (j != a) out.tangential_offdiag[slot++] = jet.g(a, j);
  }

  // H = div ν for the extension ν = s ∇x_a / |∇x_a|, whose restriction to the
  // face is the outward unit normal.
  std::array<Mat3, 3> dg_inv;
  for (int m = 0; m < 3; ++m) dg_inv[m] = -g_inv * jet.dg[m] * g_inv;
  double div = 0.0;
  for (int j = 0; j < 3; ++j) {
    const double d_nu = s * (dg_inv[j](a, j) / root - 0.5 * g_inv(a, j) * dg_inv[j](a, a) / (gaa * root));
    const double dlog_sqrtg = 0.5 * (g_inv.cwiseProduct(jet.dg[j])).sum();
    div += d_nu + out.outward_normal[j] * dlog_sqrtg;
  }
  out.mean_curvature = div;
  return out;
}

FaceGeometry face_geometry(const MetricField& metric, Face face, const Vec3& x) {
  if (!on_face(face, x, 1e-9)) {
    throw DomainError(std::string("point is not on face ") + face_name(face));
  }
  return face_geometry(metric.jet(x, 1), face, x);
}

const std::array<Edge, 12>& all_edges() {
  static const std::array<Edge, 12> edges{{
      {Face::F1, Face::F2}, {Face::F2, Face::F3}, {Face::F3, Face::F4}, {Face::F4, Face::F1},
      {Face::B, Face::F1},  {Face::B, Face::F2},  {Face::B, Face::F3},  {Face::B, Face::F4},
      {Face::T, Face::F1},  {Face::T, Face::F2},  {Face::T, Face::F3},  {Face::T, Face::F4},
  }};
  return edges;
}

std::string edge_name(const Edge& edge) {
  return std::string(face_name(edge.first)) + "^" + face_name(edge.second);
}

double dihedral_angle(const Mat3& g, const Edge& edge) {
  const int a = face_axis(edge.first);
  const int b = face_axis(edge.second);
  if (a == b) throw DomainError("faces " + edge_name(edge) + " are not adjacent");
  const Mat3 g_inv = inverse_metric(g);
  const double cosine =
      face_side(edge.first) * face_side(edge.second) * g_inv(a, b) / std::sqrt(g_inv(a, a) * g_inv(b, b));
  return kPi - std::acos(std::clamp(cosine, -1.0, 1.0));
}

double dihedral_angle(const MetricField& metric, const Edge& edge, const Vec3& x) {
  if (!on_face(edge.first, x, 1e-9) || !on_face(edge.second, x, 1e-9)) {
    throw DomainError("point is not on edge " + edge_name(edge));
  }
  const int free_axis = 3 - face_axis(edge.first) - face_axis(edge.second);
  if (x[free_axis] <= 1e-12 || x[free_axis] >= 1.0 - 1e-12) {
    throw DomainError("dihedral angle is undefined at a vertex of edge " + edge_name(edge));
  }
  return dihedral_angle(metric(x), edge);
}

RightAngleReport validate_right_angled_metric(const MetricField& metric, int resolution,
                                              double tolerance) {
  RightAngleReport report;
  report.tolerance = tolerance;
  const int m = std::max(resolution, 2);
  for (Face face : kAllFaces) {
    const int a = face_axis(face);
    const int u = (a + 1) % 3;
    const int v = (a + 2) % 3;
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) {
        Vec3 x;
        x[a] = face_side(face) > 0 ? 1.0 : 0.0;
        x[u] = double(i) / (m - 1);
        x[v] = double(j) / (m - 1);
        const Mat3 g = metric(x);
        report.max_offdiag = std::max({report.max_offdiag, std::abs(g(a, u)), std::abs(g(a, v))});
      }
    }
  }
  for (const Edge& edge : all_edges()) {
    const int a = face_axis(edge.first);
    const int b = face_axis(edge.second);
    const int c = 3 - a - b;
    for (int i = 0; i < m; ++i) {
      Vec3 x;
      x[a] = face_side(edge.first) > 0 ? 1.0 : 0.0;
      x[b] = face_side(edge.second) > 0 ? 1.0 : 0.0;
      x[c] = (i + 0.5) / m;
      report.max_angle_deviation =
          std::max(report.max_angle_deviation, std::abs(dihedral_angle(metric(x), edge) - kPi / 2));
    }
  }
  report.pass = report.max_offdiag <= tolerance && report.max_angle_deviation <= tolerance;
  return report;
}

}  // namespace hmap
