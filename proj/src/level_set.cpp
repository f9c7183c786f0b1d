#include "hmap/level_set.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include "hmap/errors.hpp"

namespace hmap {

namespace {

constexpr double kSnap = 1e-9;
constexpr double kFaceTol = 1e-9;

Vec3 g_cross(const Mat3& g, const Mat3& g_inv, const Vec3& a, const Vec3& b) {
  return std::sqrt(g.determinant()) * (g_inv * a.cross(b));
}

double g_dot(const Mat3& g, const Vec3& a, const Vec3& b) { return a.dot(g * b); }

double g_norm(const Mat3& g, const Vec3& a) { return std::sqrt(std::max(0.0, g_dot(g, a, a))); }

std::uint8_t side_faces_of(const Vec3& x) {
  std::uint8_t mask = 0;
  for (Face f : kSideFaces)
    if (on_face(f, x, kFaceTol)) mask |= std::uint8_t(1u << static_cast<int>(f));
  return mask;
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) {
    while (parent[std::size_t(a)] != a) a = parent[std::size_t(a)] = parent[std::size_t(parent[std::size_t(a)])];
    return a;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::size_t(std::max(a, b))] = std::min(a, b);
  }
};

std::vector<double> critical_values(const HarmonicSolution& sol) {
  const double delta = regularization_threshold(sol);
  std::vector<double> values;
  for (std::size_t p = 0; p < sol.grid.size(); ++p)
    if (sol.grad_norm.at(p) < delta) values.push_back(sol.u.at(p));
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end(),
                           [](double a, double b) { return std::abs(a - b) < 1e-12; }),
               values.end());
  return values;
}

}  // namespace

double regularization_threshold(const HarmonicSolution& solution) {
  const auto& v = solution.grad_norm.values;
  return v.empty() ? 0.0 : 1e-6 * *std::max_element(v.begin(), v.end());
}

double triangle_area(const Mat3& g, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 e1 = b - a, e2 = c - a;
  const double g11 = g_dot(g, e1, e1), g22 = g_dot(g, e2, e2), g12 = g_dot(g, e1, e2);
  return 0.5 * std::sqrt(std::max(0.0, g11 * g22 - g12 * g12));
}

LevelSurface extract_level_set(const MetricField& metric, const HarmonicSolution& sol, double theta) {
  if (!(theta > 0.0 && theta < 1.0)) throw DomainError("level must lie strictly between 0 and 1");
  const Grid& grid = sol.grid;
  const int n = grid.n();
  const std::uint64_t N = grid.size();
  const std::vector<double>& u = sol.u.values;

  LevelSurface s;
  s.theta = theta;
  std::unordered_map<std::uint64_t, int> ids;
  auto vertex = [&](std::size_t a, std::size_t b) {
    // a below, b above
    const double t = (theta - u[a]) / (u[b] - u[a]);
    std::uint64_t key;
    Vec3 pos;
    if (t <= kSnap) {
      key = a * N + a;
      pos = grid.point(a);
    } else if (t >= 1.0 - kSnap) {
      key = b * N + b;
      pos = grid.point(b);
    } else {
      key = std::min(a, b) * N + std::max(a, b);
      pos = (1.0 - t) * grid.point(a) + t * grid.point(b);
    }
    auto [it, inserted] = ids.emplace(key, int(s.vertices.size()));
    if (inserted) s.vertices.push_back(pos);
    return it->second;
  };

  static const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  const std::size_t stride[3] = {1, std::size_t(n), std::size_t(n) * n};
  for (int k = 0; k < n - 1; ++k)
    for (int j = 0; j < n - 1; ++j)
      for (int i = 0; i < n - 1; ++i) {
        const std::size_t base = grid.index(i, j, k);
        for (const auto& perm : perms) {
          std::size_t v[4];
          v[0] = base;
          for (int m = 0; m < 3; ++m) v[m + 1] = v[m] + stride[perm[m]];
          std::size_t above[4], below[4];
          int na = 0, nb = 0;
          for (std::size_t node : v) (u[node] >= theta ? above[na++] : below[nb++]) = node;
          if (na == 0 || nb == 0) continue;

          std::array<int, 4> poly{};
          int count = 0;
          if (na == 1) {
            for (int m = 0; m < 3; ++m) poly[count++] = vertex(below[m], above[0]);
          } else if (nb == 1) {
            for (int m = 0; m < 3; ++m) poly[count++] = vertex(below[0], above[m]);
          } else {
            poly = {vertex(below[0], above[0]), vertex(below[0], above[1]), vertex(below[1], above[1]),
                    vertex(below[1], above[0])};
            count = 4;
          }
          Vec3 up = Vec3::Zero();
          for (int m = 0; m < na; ++m) up += grid.point(above[m]) / na;
          for (int m = 0; m < nb; ++m) up -= grid.point(below[m]) / nb;
          auto emit = [&](int a, int b, int c) {
            if (a == b || b == c || a == c) return;
            const Vec3 normal = (s.vertices[std::size_t(b)] - s.vertices[std::size_t(a)])
                                    .cross(s.vertices[std::size_t(c)] - s.vertices[std::size_t(a)]);
            if (normal.dot(up) < 0) std::swap(b, c);
            s.triangles.push_back({a, b, c});
          };
          emit(poly[0], poly[1], poly[2]);
          if (count == 4) emit(poly[0], poly[2], poly[3]);
        }
      }

  for (const auto& t : s.triangles) {
    const Vec3& a = s.vertices[std::size_t(t[0])];
    const Vec3& b = s.vertices[std::size_t(t[1])];
    const Vec3& c = s.vertices[std::size_t(t[2])];
    s.area += triangle_area(metric((a + b + c) / 3.0), a, b, c);
  }
  surface_topology(s);
  for (const auto& loop : s.boundary_loops)
    for (std::size_t m = 0; m < loop.size(); ++m) {
      const Vec3& a = s.vertices[std::size_t(loop[m])];
      const Vec3& b = s.vertices[std::size_t(loop[(m + 1) % loop.size()])];
      s.boundary_length += g_norm(metric(0.5 * (a + b)), b - a);
    }
  for (double c : critical_values(sol))
    if (std::abs(c - theta) < grid.h()) s.near_critical = true;
  return s;
}

Topology surface_topology(const std::vector<Vec3>& vertices, const std::vector<std::array<int, 3>>& triangles,
                          std::vector<std::vector<int>>* loops) {
  Topology top;
  const std::uint64_t V = vertices.size();
  std::vector<char> used(vertices.size(), 0);
  std::unordered_map<std::uint64_t, int> edge_index;
  std::vector<int> edge_count;
  for (const auto& t : triangles)
    for (int m = 0; m < 3; ++m) {
      const auto a = std::uint64_t(t[std::size_t(m)]);
      const auto b = std::uint64_t(t[std::size_t((m + 1) % 3)]);
      used[a] = 1;
      const std::uint64_t key = std::min(a, b) * V + std::max(a, b);
      auto [it, inserted] = edge_index.emplace(key, int(edge_count.size()));
      if (inserted) edge_count.push_back(0);
      if (++edge_count[std::size_t(it->second)] > 2) {
        throw TopologyError("non-manifold edge " + std::to_string(it->second) + " between vertices " +
                                std::to_string(std::min(a, b)) + " and " + std::to_string(std::max(a, b)),
                            it->second);
      }
    }
  top.vertices = int(std::count(used.begin(), used.end(), 1));
  top.edges = int(edge_count.size());
  top.faces = int(triangles.size());
  top.chi = top.vertices - top.edges + top.faces;

  UnionFind uf(vertices.size());
  for (const auto& t : triangles) {
    uf.unite(t[0], t[1]);
    uf.unite(t[1], t[2]);
  }
  for (std::size_t v = 0; v < vertices.size(); ++v)
    if (used[v] && uf.find(int(v)) == int(v)) ++top.components;

  std::vector<int> next(vertices.size(), -1);
  for (const auto& t : triangles)
    for (int m = 0; m < 3; ++m) {
      const int a = t[std::size_t(m)], b = t[std::size_t((m + 1) % 3)];
      const std::uint64_t key = std::min<std::uint64_t>(a, b) * V + std::max<std::uint64_t>(a, b);
      if (edge_count[std::size_t(edge_index.at(key))] != 1) continue;
      if (next[std::size_t(a)] != -1) {
        throw TopologyError("boundary pinches at vertex " + std::to_string(a), edge_index.at(key));
      }
      next[std::size_t(a)] = b;
    }
  std::vector<char> seen(vertices.size(), 0);
  std::vector<std::vector<int>> found;
  for (std::size_t v = 0; v < vertices.size(); ++v) {
    if (next[v] == -1 || seen[v]) continue;
    std::vector<int> loop;
    int cur = int(v);
    while (cur != -1 && !seen[std::size_t(cur)]) {
      seen[std::size_t(cur)] = 1;
      loop.push_back(cur);
      cur = next[std::size_t(cur)];
    }
    if (cur != int(v)) throw TopologyError("open boundary chain starting at vertex " + std::to_string(v), -1);
    found.push_back(std::move(loop));
  }
  top.boundary_loops = int(found.size());
  if (loops) *loops = std::move(found);
  return top;
}

Topology surface_topology(LevelSurface& surface) {
  const Topology t = surface_topology(surface.vertices, surface.triangles, &surface.boundary_loops);
  surface.chi = t.chi;
  surface.components = t.components;
  return t;
}

SurfaceGeometrySample second_fundamental_form(const MetricField& metric, const HarmonicSolution& sol,
                                              const LevelSurface& surface, int triangle, double threshold) {
  const auto& t = surface.triangles.at(std::size_t(triangle));
  const Vec3& p0 = surface.vertices[std::size_t(t[0])];
  const Vec3& p1 = surface.vertices[std::size_t(t[1])];
  const Vec3& p2 = surface.vertices[std::size_t(t[2])];
  SurfaceGeometrySample out;
  out.triangle = triangle;
  out.centroid = (p0 + p1 + p2) / 3.0;

  const MetricJet jet = metric.jet(out.centroid, 2);
  const Mat3 g_inv = inverse_metric(jet.g);
  out.area = triangle_area(jet.g, p0, p1, p2);
  const Vec3 du = sample_vector(sol.du, out.centroid);
  out.grad_norm = std::sqrt(std::max(0.0, du.dot(g_inv * du)));
  if (threshold < 0) threshold = regularization_threshold(sol);
  if (out.grad_norm < threshold || out.grad_norm == 0.0) {
    throw DomainError("near-critical triangle " + std::to_string(triangle));
  }
  const Vec3 N = g_inv * du / out.grad_norm;

  // g-orthonormal basis of ker du from the two best coordinate directions.
  std::array<Vec3, 3> w;
  for (int a = 0; a < 3; ++a) w[std::size_t(a)] = Vec3::Unit(a) - du[a] / out.grad_norm * N;
  std::array<int, 3> order{0, 1, 2};
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return g_norm(jet.g, w[std::size_t(a)]) > g_norm(jet.g, w[std::size_t(b)]); });
  Vec3 t1 = w[std::size_t(order[0])];
  t1 /= g_norm(jet.g, t1);
  Vec3 t2 = w[std::size_t(order[1])] - g_dot(jet.g, w[std::size_t(order[1])], t1) * t1;
  t2 /= g_norm(jet.g, t2);

  const Mat3 H = sample_symmetric(sol.hessian, out.centroid);
  Eigen::Matrix2d h;
  h(0, 0) = t1.dot(H * t1);
  h(0, 1) = h(1, 0) = t1.dot(H * t2);
  h(1, 1) = t2.dot(H * t2);
  h /= out.grad_norm;
  out.second_fundamental_form = h;
  out.mean_curvature = h.trace();

  const Mat3 Ric = ricci(jet);
  const double R = (g_inv.cwiseProduct(Ric)).sum();
  out.gauss_curvature = 0.5 * R - N.dot(Ric * N) + h.determinant();
  return out;
}

BoundaryGeometry boundary_geometry(const MetricField& metric, const HarmonicSolution& sol,
                                   const LevelSurface& surface) {
  BoundaryGeometry out;
  const auto& edges = all_edges();
  for (std::size_t l = 0; l < surface.boundary_loops.size(); ++l) {
    const auto& loop = surface.boundary_loops[l];
    if (loop.size() < 3) throw TopologyError("degenerate boundary loop with " + std::to_string(loop.size()) + " vertices", -1);
    const std::size_t m = loop.size();
    for (std::size_t q = 0; q < m; ++q) {
      const Vec3& prev = surface.vertices[std::size_t(loop[(q + m - 1) % m])];
      const Vec3& v = surface.vertices[std::size_t(loop[q])];
      const Vec3& next = surface.vertices[std::size_t(loop[(q + 1) % m])];
      const MetricJet jet = metric.jet(v, 1);
      const Mat3& g = jet.g;
      const Mat3 g_inv = inverse_metric(g);
      const Christoffel G = christoffel(jet, g_inv);
      const Vec3 du = sample_vector(sol.du, v);
      const double du_norm = std::sqrt(std::max(0.0, du.dot(g_inv * du)));
      const Vec3 N = du_norm > 0 ? Vec3(g_inv * du / du_norm) : Vec3(Vec3::UnitZ());

      Vec3 a = v - prev, b = next - v;
      a -= g_dot(g, a, N) * N;
      b -= g_dot(g, b, N) * N;
      BoundaryVertexGeometry bv;
      bv.vertex = loop[q];
      bv.loop = int(l);
      bv.turning = std::atan2(g_dot(g, b, g_cross(g, g_inv, N, a)), g_dot(g, a, b));
      const double la = g_norm(g, a), lb = g_norm(g, b);
      bv.dual_length = 0.5 * (la + lb);
      Vec3 T = a / la + b / lb;
      T /= g_norm(g, T);
      Vec3 conormal = g_cross(g, g_inv, N, T);
      Vec3 accel;
      for (int k = 0; k < 3; ++k) accel[k] = T.dot(G[std::size_t(k)] * T);
      bv.connection = g_dot(g, accel, conormal) * bv.dual_length;

      const std::uint8_t mask = side_faces_of(v);
      for (int e = 0; e < 4; ++e) {
        const auto bit = [](Face f) { return std::uint8_t(1u << static_cast<int>(f)); };
        if ((mask & bit(edges[std::size_t(e)].first)) && (mask & bit(edges[std::size_t(e)].second))) {
          bv.corner = true;
          bv.vertical_edge = e;
        }
      }
      if (bv.corner) {
        // Σ ∩ F has tangent e_c × du inside the face with normal axis c.
        const auto face_tangent = [&](const Vec3& from, const Vec3& to) {
          const std::uint8_t shared = side_faces_of(from) & side_faces_of(to);
          for (Face f : kSideFaces)
            if (shared & (1u << static_cast<int>(f))) {
              Vec3 t = Vec3::Unit(face_axis(f)).cross(du);
              if (t.dot(g * (to - from)) < 0) t = -t;
              return t;
            }
          return Vec3(to - from);
        };
        const Vec3 ta = face_tangent(prev, v), tb = face_tangent(v, next);
        bv.smooth_turning = std::atan2(g_dot(g, tb, g_cross(g, g_inv, N, ta)), g_dot(g, ta, tb));
        out.smooth_corner_angles.push_back(bv.smooth_turning);
        bv.dihedral = dihedral_angle(metric, edges[std::size_t(bv.vertical_edge)], v);
        out.corner_angles.push_back(bv.turning);
        out.total_turning += bv.turning;
        out.max_corner_deviation = std::max(out.max_corner_deviation, std::abs(bv.turning - (kPi - bv.dihedral)));
        const double c = std::abs(g_dot(g, N, Vec3::UnitZ())) / std::sqrt(g(2, 2));
        bv.orthogonality_deviation = std::acos(std::min(1.0, c));
      } else {
        bv.curvature = (bv.turning + bv.connection) / bv.dual_length;
        out.total_geodesic_curvature += bv.turning;
      }
      out.total_geodesic_curvature += bv.connection;
      out.vertices.push_back(bv);
    }
  }
  return out;
}

GaussBonnetResult gauss_bonnet_check(const MetricField& metric, const HarmonicSolution& sol,
                                     const LevelSurface& surface) {
  GaussBonnetResult r;
  double excluded = 0.0, total = 0.0;
  const double delta = regularization_threshold(sol);
  for (int t = 0; t < int(surface.triangles.size()); ++t) {
    try {
      const SurfaceGeometrySample s = second_fundamental_form(metric, sol, surface, t, delta);
      r.gauss_integral += s.gauss_curvature * s.area;
      total += s.area;
    } catch (const DomainError&) {
      const auto& tri = surface.triangles[std::size_t(t)];
      const Vec3& a = surface.vertices[std::size_t(tri[0])];
      const Vec3& b = surface.vertices[std::size_t(tri[1])];
      const Vec3& c = surface.vertices[std::size_t(tri[2])];
      const double area = triangle_area(metric((a + b + c) / 3.0), a, b, c);
      excluded += area;
      total += area;
    }
  }
  const BoundaryGeometry bg = boundary_geometry(metric, sol, surface);
  r.geodesic_integral = bg.total_geodesic_curvature;
  r.turning_sum = bg.total_turning;
  r.chi = surface.chi;
  r.residual = std::abs(r.gauss_integral + r.geodesic_integral + r.turning_sum - 2 * kPi * r.chi);
  r.excluded_fraction = total > 0 ? excluded / total : 0.0;
  r.reliable = r.excluded_fraction <= 0.1;
  return r;
}

CoareaReport coarea_scan(const MetricField& metric, const HarmonicSolution& sol, int samples,
                         PointFunction test_function) {
  if (samples < 16) throw DomainError("coarea scan needs at least 16 level samples");
  if (!test_function) test_function = [](const Vec3& x) { return 1.0 + x[0] * x[1] + 0.5 * x[2]; };
  const PointFunction one = [](const Vec3&) { return 1.0; };
  const PointFunction curvature = [&metric](const Vec3& x) { return scalar_curvature(metric, x); };
  const std::array<const PointFunction*, 3> phis{&one, &curvature, &test_function};

  CoareaReport rep;
  rep.samples = samples;
  rep.names = {"one", "scalar_curvature", "test_function"};
  rep.volume_side.assign(3, 0.0);
  rep.level_side.assign(3, 0.0);

  const Grid& grid = sol.grid;
  const double delta = regularization_threshold(sol);
  const double h3 = grid.h() * grid.h() * grid.h();
  for (std::size_t p = 0; p < grid.size(); ++p) {
    const auto c = grid.coords(p);
    const Vec3 x = grid.point(p);
    const double w = h3 * grid.weight(c[0]) * grid.weight(c[1]) * grid.weight(c[2]) * std::sqrt(metric(x).determinant());
    if (sol.grad_norm.at(p) < delta) rep.excluded_volume += w;
    for (std::size_t k = 0; k < 3; ++k) rep.volume_side[k] += w * sol.grad_norm.at(p) * (*phis[k])(x);
  }
  rep.critical_values = critical_values(sol);

  for (int m = 0; m < samples; ++m) {
    const double theta = (m + 0.5) / samples;
    for (double c : rep.critical_values)
      if (std::abs(c - theta) < 0.5 / samples) {
        rep.flagged_thetas.push_back(theta);
        break;
      }
    const LevelSurface s = extract_level_set(metric, sol, theta);
    for (const auto& t : s.triangles) {
      const Vec3& a = s.vertices[std::size_t(t[0])];
      const Vec3& b = s.vertices[std::size_t(t[1])];
      const Vec3& c = s.vertices[std::size_t(t[2])];
      const Vec3 x = (a + b + c) / 3.0;
      const double area = triangle_area(metric(x), a, b, c);
      for (std::size_t k = 0; k < 3; ++k) rep.level_side[k] += area * (*phis[k])(x) / samples;
    }
  }
  for (std::size_t k = 0; k < 3; ++k) {
    const double v = rep.volume_side[k];
    const double d = std::abs(rep.level_side[k] - v);
    rep.discrepancy.push_back(std::abs(v) > 1e-12 ? d / std::abs(v) : d);
  }
  return rep;
}

void write_off(const std::string& path, const LevelSurface& surface) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  os.precision(12);
  os << "OFF\n" << surface.vertices.size() << " " << surface.triangles.size() << " 0\n";
  for (const Vec3& v : surface.vertices) os << v[0] << " " << v[1] << " " << v[2] << "\n";
  for (const auto& t : surface.triangles) os << "3 " << t[0] << " " << t[1] << " " << t[2] << "\n";
}

LevelSurface torus_fixture(double R, double r, int major_segments, int minor_segments) {
  if (major_segments < 3 || minor_segments < 3) throw DomainError("torus fixture needs at least 3 segments per direction");
  LevelSurface s;
  const Vec3 c(0.5, 0.5, 0.5);
  for (int i = 0; i < major_segments; ++i)
    for (int j = 0; j < minor_segments; ++j) {
      const double a = 2 * kPi * i / major_segments, b = 2 * kPi * j / minor_segments;
      s.vertices.push_back(c + Vec3((R + r * std::cos(b)) * std::cos(a), (R + r * std::cos(b)) * std::sin(a), r * std::sin(b)));
    }
  const auto id = [&](int i, int j) { return (i % major_segments) * minor_segments + (j % minor_segments); };
  for (int i = 0; i < major_segments; ++i)
    for (int j = 0; j < minor_segments; ++j) {
      s.triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      s.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  for (const auto& t : s.triangles)
    s.area += triangle_area(Mat3::Identity(), s.vertices[std::size_t(t[0])], s.vertices[std::size_t(t[1])],
                            s.vertices[std::size_t(t[2])]);
  surface_topology(s);
  return s;
}

HarmonicSolution synthetic_solution(const MetricField& metric, const Grid& grid, const PointFunction& f) {
  HarmonicSolution sol;
  sol.grid = grid;
  sol.metric_description = metric.description();
  sol.metric_hash = metric.hash();
  sol.u = sample_function("u", grid, f);
  compute_derivatives(metric, sol);
  return sol;
}

}  // namespace hmap
