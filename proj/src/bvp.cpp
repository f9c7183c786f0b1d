#include "hmap/bvp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/SparseCholesky>

#include "hmap/errors.hpp"

namespace hmap {

namespace {

std::string location(const Vec3& x) {
  std::ostringstream os;
  os << "(" << x[0] << ", " << x[1] << ", " << x[2] << ")";
  return os.str();
}

// √g g^{-1}, the coefficient of the divergence-form operator.
Mat3 conductivity(const MetricField& metric, const Vec3& x, double* sqrt_det = nullptr) {
  const Mat3 g = metric(x);
  Mat3 g_inv;
  try {
    g_inv = inverse_metric(g);
  } catch (const DegenerateMetricError& e) {
    throw DegenerateMetricError("degenerate metric at " + location(x), e.eigenvalue());
  }
  const double root = std::sqrt(g.determinant());
  if (sqrt_det) *sqrt_det = root;
  return root * g_inv;
}

inline int slot(int di, int dj, int dk) { return (di + 1) + 3 * (dj + 1) + 9 * (dk + 1); }

std::array<int, 3> axis_offset(int a) {
  std::array<int, 3> e{0, 0, 0};
  e[a] = 1;
  return e;
}

}  // namespace

BoundaryData harmonic_map_data() {
  BoundaryData d;
  d.dirichlet = [](const Vec3& x) { return x[2] > 0.5 ? 1.0 : 0.0; };
  return d;
}

std::vector<Eigen::Triplet<double>> DiscreteOperator::coefficients() const {
  std::vector<Eigen::Triplet<double>> out;
  out.reserve(std::size_t(matrix.nonZeros()));
  for (int r = 0; r < matrix.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(matrix, r); it; ++it) out.emplace_back(r, int(it.col()), it.value());
  return out;
}

DiscreteOperator assemble_operator(const MetricField& metric, const Grid& grid) {
  return assemble_operator(metric, grid, harmonic_map_data());
}

DiscreteOperator assemble_operator(const MetricField& metric, const Grid& grid, const BoundaryData& data) {
  const int n = grid.n();
  const double h = grid.h();
  const std::size_t N = grid.size();
  std::vector<double> stencil(N * 27, 0.0);
  auto add = [&](std::size_t p, const std::array<int, 3>& from, const std::array<int, 3>& to, double v) {
    stencil[p * 27 + slot(to[0] - from[0], to[1] - from[1], to[2] - from[2])] += v;
  };

  // Axis-aligned edges: ½ A^{aa} w h (Δu)².
  for (int a = 0; a < 3; ++a) {
    const auto e = axis_offset(a);
    for (int k = 0; k < n - e[2]; ++k)
      for (int j = 0; j < n - e[1]; ++j)
        for (int i = 0; i < n - e[0]; ++i) {
          const std::array<int, 3> c0{i, j, k};
          const std::array<int, 3> c1{i + e[0], j + e[1], k + e[2]};
          Vec3 mid = grid.point(i, j, k);
          mid[a] += 0.5 * h;
          const Mat3 A = conductivity(metric, mid);
          double w = 1.0;
          for (int b = 0; b < 3; ++b)
            if (b != a) w *= grid.weight(c0[b]);
          const double kval = A(a, a) * w * h;
          const std::size_t p = grid.index(i, j, k);
          const std::size_t q = grid.index(c1[0], c1[1], c1[2]);
          add(p, c0, c0, kval);
          add(q, c1, c1, kval);
          add(p, c0, c1, -kval);
          add(q, c1, c0, -kval);
        }
  }

  // Mixed terms per plaquette in each coordinate plane: A^{ab} D_a u D_b u h³ w_c.
  for (int a = 0; a < 3; ++a) {
    for (int b = a + 1; b < 3; ++b) {
      const int c = 3 - a - b;
      const auto ea = axis_offset(a);
      const auto eb = axis_offset(b);
      const std::array<int, 3> lim{n - ea[0] - eb[0], n - ea[1] - eb[1], n - ea[2] - eb[2]};
      for (int k = 0; k < lim[2]; ++k)
        for (int j = 0; j < lim[1]; ++j)
          for (int i = 0; i < lim[0]; ++i) {
            Vec3 center = grid.point(i, j, k);
            center[a] += 0.5 * h;
            center[b] += 0.5 * h;
            const Mat3 A = conductivity(metric, center);
            const std::array<int, 3> base{i, j, k};
            const double coef = A(a, b) * h * h * h * grid.weight(base[c]);
            if (coef == 0.0) continue;
            std::array<std::array<int, 3>, 4> corner;
            for (int r = 0; r < 4; ++r)
              for (int d = 0; d < 3; ++d) corner[r][d] = base[d] + (r & 1) * ea[d] + ((r >> 1) & 1) * eb[d];
            const double alpha[4] = {-1, 1, -1, 1};
            const double beta[4] = {-1, -1, 1, 1};
            const double scale = coef / (4.0 * h * h);
            for (int r = 0; r < 4; ++r) {
              const std::size_t p = grid.index(corner[r][0], corner[r][1], corner[r][2]);
              for (int s = 0; s < 4; ++s) {
                const double v = scale * (alpha[r] * beta[s] + beta[r] * alpha[s]);
                if (v != 0.0) add(p, corner[r], corner[s], v);
              }
            }
          }
    }
  }

  DiscreteOperator op;
  op.grid = grid;
  op.volume.resize(Eigen::Index(N));
  op.load = Vector::Zero(Eigen::Index(N));
  op.dirichlet.assign(N, 0);
  op.dirichlet_values = Vector::Zero(Eigen::Index(N));

  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const std::size_t p = grid.index(i, j, k);
        const Vec3 x = grid.point(i, j, k);
        double root = 0.0;
        const Mat3 A = conductivity(metric, x, &root);
        const double cell = h * h * h * grid.weight(i) * grid.weight(j) * grid.weight(k);
        op.volume[Eigen::Index(p)] = cell * root;
        if (k == 0 || k == n - 1) {
          op.dirichlet[p] = 1;
          op.dirichlet_values[Eigen::Index(p)] = data.dirichlet ? data.dirichlet(x) : 0.0;
          continue;
        }
        double b = data.source ? -op.volume[Eigen::Index(p)] * data.source(x) : 0.0;
        if (data.neumann) {
          const NodeClass cls = grid.classify(i, j, k);
          const std::array<int, 3> idx{i, j, k};
          for (Face f : kSideFaces) {
            if (!cls.on(f)) continue;
            const int ax = face_axis(f);
            double dual = h * h;
            for (int d = 0; d < 3; ++d)
              if (d != ax) dual *= grid.weight(idx[d]);
            // √g √g^{aa} = √(A^{aa} √g)
            const double density = std::sqrt(A(ax, ax) * root);
            b += dual * density * data.neumann(f, x);
          }
        }
        op.load[Eigen::Index(p)] = b;
      }

  // Stencils to CSR; slot order is ascending column order.
  const auto Ni = Eigen::Index(N);
  op.stiffness.resize(Ni, Ni);
  op.matrix.resize(Ni, Ni);
  std::size_t nnz = 0;
  for (double v : stencil) nnz += v != 0.0;
  op.stiffness.reserve(Eigen::Index(nnz + N));
  op.matrix.reserve(Eigen::Index(nnz + N));
  op.rhs.resize(Ni);
  const long nn = long(n) * n;
  for (std::size_t p = 0; p < N; ++p) {
    const auto row = Eigen::Index(p);
    op.stiffness.startVec(row);
    op.matrix.startVec(row);
    const bool dir = op.dirichlet[p];
    const double inv_vol = 1.0 / op.volume[row];
    for (int s = 0; s < 27; ++s) {
      const double v = stencil[p * 27 + s];
      const bool diag = s == 13;
      if (v == 0.0 && !diag) continue;
      const long off = long(s % 3 - 1) + long(n) * long((s / 3) % 3 - 1) + nn * long(s / 9 - 1);
      const auto col = Eigen::Index(long(p) + off);
      op.stiffness.insertBack(row, col) = v;
      if (dir) {
        if (diag) op.matrix.insertBack(row, col) = 1.0;
      } else {
        op.matrix.insertBack(row, col) = -v * inv_vol;
      }
    }
    op.rhs[row] = dir ? op.dirichlet_values[row] : -op.load[row] * inv_vol;
  }
  op.stiffness.finalize();
  op.matrix.finalize();
  op.symmetric = false;
  return op;
}

Vector apply_operator(const DiscreteOperator& op, const Vector& u) { return op.matrix * u; }

Vector operator_residual(const DiscreteOperator& op, const Vector& u) { return op.matrix * u - op.rhs; }

SolverMethod parse_solver_method(const std::string& name) {
  if (name == "cg" || name == "conjugate_gradient") return SolverMethod::conjugate_gradient;
  if (name == "sor") return SolverMethod::sor;
  if (name == "direct" || name == "ldlt") return SolverMethod::direct;
  throw DomainError("unknown solver method '" + name + "'");
}

std::string solver_method_name(SolverMethod m) {
  switch (m) {
    case SolverMethod::conjugate_gradient: return "cg";
    case SolverMethod::sor: return "sor";
    case SolverMethod::direct: return "direct";
  }
  return "cg";
}

namespace {

// The free unknowns are the contiguous block of nodes with 0 < k < n-1.
struct FreeSystem {
  const SparseMatrix& K;
  Eigen::Index lo, hi;

  Eigen::Index size() const { return hi - lo; }

  void multiply(const Vector& x, Vector& y) const {
    for (Eigen::Index r = lo; r < hi; ++r) {
      double acc = 0.0;
      for (SparseMatrix::InnerIterator it(K, r); it; ++it) {
        const Eigen::Index c = it.col();
        if (c >= lo && c < hi) acc += it.value() * x[c - lo];
      }
      y[r - lo] = acc;
    }
  }

  Vector diagonal() const {
    Vector d(size());
    for (Eigen::Index r = lo; r < hi; ++r) d[r - lo] = K.coeff(r, r);
    return d;
  }
};

void pcg(const FreeSystem& A, const Vector& b, Vector& x, const SolverConfig& cfg, LinearSolveStats& stats) {
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    x.setZero();
    stats.residual = 0.0;
    return;
  }
  const Vector dinv = A.diagonal().cwiseInverse();
  Vector r(A.size()), Ap(A.size());
  A.multiply(x, Ap);
  r = b - Ap;
  double rel = r.norm() / bnorm;
  stats.history.push_back(rel);
  if (rel <= cfg.tolerance) {
    stats.residual = rel;
    return;
  }
  // Restart from the true residual when the recurrence drifts below it.
  int it = 0;
  for (int restart = 0; restart < 4; ++restart) {
    Vector z = dinv.cwiseProduct(r);
    Vector p = z;
    double rz = r.dot(z);
    while (it < cfg.max_iterations) {
      ++it;
      A.multiply(p, Ap);
      const double pAp = p.dot(Ap);
      if (!(pAp > 0.0) || !std::isfinite(pAp)) {
        throw SolverError("conjugate gradient breakdown (p·Ap = " + std::to_string(pAp) + ")", stats.history);
      }
      const double alpha = rz / pAp;
      x += alpha * p;
      r -= alpha * Ap;
      rel = r.norm() / bnorm;
      stats.history.push_back(rel);
      stats.iterations = it;
      if (rel <= cfg.tolerance) break;
      z = dinv.cwiseProduct(r);
      const double rz_new = r.dot(z);
      p = z + (rz_new / rz) * p;
      rz = rz_new;
    }
    A.multiply(x, Ap);
    r = b - Ap;
    stats.residual = r.norm() / bnorm;
    if (stats.residual <= cfg.tolerance || it >= cfg.max_iterations) break;
  }
  if (!(stats.residual <= cfg.tolerance)) {
    throw SolverError("conjugate gradient did not converge in " + std::to_string(it) +
                          " iterations (relative residual " + std::to_string(stats.residual) + ")",
                      stats.history);
  }
}

void sor(const FreeSystem& A, const Vector& b, Vector& x, const SolverConfig& cfg, double omega,
         LinearSolveStats& stats) {
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    x.setZero();
    return;
  }
  Vector Ax(A.size());
  for (int it = 1; it <= cfg.max_iterations; ++it) {
    for (Eigen::Index r = A.lo; r < A.hi; ++r) {
      double acc = 0.0, diag = 0.0;
      for (SparseMatrix::InnerIterator e(A.K, r); e; ++e) {
        const Eigen::Index c = e.col();
        if (c == r) diag = e.value();
        else if (c >= A.lo && c < A.hi) acc += e.value() * x[c - A.lo];
      }
      const Eigen::Index i = r - A.lo;
      x[i] = (1.0 - omega) * x[i] + omega * (b[i] - acc) / diag;
    }
    A.multiply(x, Ax);
    const double rel = (b - Ax).norm() / bnorm;
    stats.history.push_back(rel);
    stats.iterations = it;
    stats.residual = rel;
    if (!std::isfinite(rel)) throw SolverError("SOR diverged", stats.history);
    if (rel <= cfg.tolerance) return;
  }
  throw SolverError("SOR did not converge in " + std::to_string(cfg.max_iterations) + " sweeps (relative residual " +
                        std::to_string(stats.residual) + ")",
                    stats.history);
}

void direct(const FreeSystem& A, const Vector& b, Vector& x, LinearSolveStats& stats) {
  std::vector<Eigen::Triplet<double>> trip;
  for (Eigen::Index r = A.lo; r < A.hi; ++r)
    for (SparseMatrix::InnerIterator e(A.K, r); e; ++e)
      if (e.col() >= A.lo && e.col() < A.hi) trip.emplace_back(int(r - A.lo), int(e.col() - A.lo), e.value());
  Eigen::SparseMatrix<double> M(A.size(), A.size());
  M.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(M);
  if (ldlt.info() != Eigen::Success) throw SolverError("sparse LDLT factorization failed", {});
  x = ldlt.solve(b);
  Vector Ax(A.size());
  A.multiply(x, Ax);
  stats.iterations = 1;
  stats.residual = b.norm() > 0 ? (b - Ax).norm() / b.norm() : 0.0;
  stats.history.push_back(stats.residual);
}

}  // namespace

Vector solve_linear(const DiscreteOperator& op, const SolverConfig& config, const Vector* initial,
                    LinearSolveStats* stats_out) {
  if (!(config.tolerance > 0.0)) throw DomainError("solver tolerance must be positive");
  const Grid& grid = op.grid;
  const int n = grid.n();
  const auto N = Eigen::Index(grid.size());
  const auto nn = Eigen::Index(n) * n;
  const FreeSystem A{op.stiffness, nn, N - nn};

  Vector u(N);
  if (initial) {
    if (initial->size() != N) throw DomainError("initial guess has the wrong size");
    u = *initial;
  } else {
    for (Eigen::Index p = 0; p < N; ++p) {
      const auto c = grid.coords(std::size_t(p));
      const double t = c[2] * grid.h();
      u[p] = (1.0 - t) * op.dirichlet_values[Eigen::Index(grid.index(c[0], c[1], 0))] +
             t * op.dirichlet_values[Eigen::Index(grid.index(c[0], c[1], n - 1))];
    }
  }
  for (Eigen::Index p = 0; p < N; ++p)
    if (op.dirichlet[std::size_t(p)]) u[p] = op.dirichlet_values[p];

  // b_f = load_f - K_fD u_D
  Vector b(A.size());
  for (Eigen::Index r = A.lo; r < A.hi; ++r) {
    double acc = op.load[r];
    for (SparseMatrix::InnerIterator it(op.stiffness, r); it; ++it)
      if (it.col() < A.lo || it.col() >= A.hi) acc -= it.value() * u[it.col()];
    b[r - A.lo] = acc;
  }

  LinearSolveStats stats;
  Vector x = u.segment(A.lo, A.size());
  switch (config.method) {
    case SolverMethod::conjugate_gradient: pcg(A, b, x, config, stats); break;
    case SolverMethod::sor: {
      const double omega = config.sor_omega > 0 ? config.sor_omega : 2.0 / (1.0 + std::sin(kPi * grid.h()));
      sor(A, b, x, config, omega, stats);
      break;
    }
    case SolverMethod::direct:
      if (n > 33) throw DomainError("direct sparse solve is limited to n <= 33");
      direct(A, b, x, stats);
      break;
  }
  u.segment(A.lo, A.size()) = x;
  if (stats_out) *stats_out = std::move(stats);
  return u;
}

namespace {

// First derivative along axis a of a scalar node field, second order everywhere.
std::vector<double> difference(const Grid& grid, const std::vector<double>& f, int a) {
  const int n = grid.n();
  const double h = grid.h();
  std::vector<double> out(f.size());
  const std::size_t stride = a == 0 ? 1 : a == 1 ? std::size_t(n) : std::size_t(n) * n;
  for (std::size_t p = 0; p < f.size(); ++p) {
    const int i = grid.coords(p)[a];
    if (i == 0) out[p] = (-3 * f[p] + 4 * f[p + stride] - f[p + 2 * stride]) / (2 * h);
    else if (i == n - 1) out[p] = (3 * f[p] - 4 * f[p - stride] + f[p - 2 * stride]) / (2 * h);
    else out[p] = (f[p + stride] - f[p - stride]) / (2 * h);
  }
  return out;
}

std::vector<double> second_difference(const Grid& grid, const std::vector<double>& f, int a) {
  const int n = grid.n();
  const double h2 = grid.h() * grid.h();
  std::vector<double> out(f.size());
  const std::size_t s = a == 0 ? 1 : a == 1 ? std::size_t(n) : std::size_t(n) * n;
  for (std::size_t p = 0; p < f.size(); ++p) {
    const int i = grid.coords(p)[a];
    if (i == 0) out[p] = (2 * f[p] - 5 * f[p + s] + 4 * f[p + 2 * s] - f[p + 3 * s]) / h2;
    else if (i == n - 1) out[p] = (2 * f[p] - 5 * f[p - s] + 4 * f[p - 2 * s] - f[p - 3 * s]) / h2;
    else out[p] = (f[p + s] - 2 * f[p] + f[p - s]) / h2;
  }
  return out;
}

}  // namespace

void compute_derivatives(const MetricField& metric, HarmonicSolution& sol) {
  const Grid& grid = sol.grid;
  const std::vector<double>& u = sol.u.values;
  std::array<std::vector<double>, 3> d;
  for (int a = 0; a < 3; ++a) d[a] = difference(grid, u, a);
  std::array<std::array<std::vector<double>, 3>, 3> dd;
  for (int a = 0; a < 3; ++a) {
    dd[a][a] = second_difference(grid, u, a);
    for (int b = 0; b < 3; ++b)
      if (b != a) dd[a][b] = difference(grid, d[a], b);
  }
  sol.du = GridField("du", grid, 3);
  sol.grad_norm = GridField("grad_norm", grid, 1);
  sol.hessian = GridField("hessian", grid, 6);
  for (std::size_t p = 0; p < grid.size(); ++p) {
    const MetricJet jet = metric.jet(grid.point(p), 1);
    const Mat3 g_inv = inverse_metric(jet.g);
    const Christoffel G = christoffel(jet, g_inv);
    const Vec3 du(d[0][p], d[1][p], d[2][p]);
    for (int a = 0; a < 3; ++a) sol.du.at(p, a) = du[a];
    sol.grad_norm.at(p) = std::sqrt(std::max(0.0, du.dot(g_inv * du)));
    for (int a = 0; a < 3; ++a)
      for (int b = a; b < 3; ++b) {
        const double partial = a == b ? dd[a][a][p] : 0.5 * (dd[a][b][p] + dd[b][a][p]);
        double corr = 0.0;
        for (int k = 0; k < 3; ++k) corr += G[k](a, b) * du[k];
        sol.hessian.at(p, kSymIndex[a][b]) = partial - corr;
      }
  }
}

HarmonicSolution solve_mixed_bvp(const MetricField& metric, const Grid& grid, const SolverConfig& config) {
  return solve_mixed_bvp(metric, grid, config, nullptr);
}

HarmonicSolution solve_mixed_bvp(const MetricField& metric, const Grid& grid, const SolverConfig& config,
                                 const Vector* initial) {
  const DiscreteOperator op = assemble_operator(metric, grid);
  LinearSolveStats stats;
  const Vector u = solve_linear(op, config, initial, &stats);

  HarmonicSolution sol;
  sol.grid = grid;
  sol.metric_description = metric.description();
  sol.metric_hash = metric.hash();
  sol.u = GridField("u", grid, 1);
  for (std::size_t p = 0; p < grid.size(); ++p) {
    double v = u[Eigen::Index(p)];
    if (v < 0.0 || v > 1.0) {
      ++sol.clamped_nodes;
      if (v >= -config.tolerance && v <= 1.0 + config.tolerance) v = std::clamp(v, 0.0, 1.0);
    }
    sol.u.at(p) = v;
  }
  sol.residual = stats.residual;
  sol.iterations = stats.iterations;
  sol.residual_history = std::move(stats.history);
  compute_derivatives(metric, sol);
  return sol;
}

HarmonicSolution continuation_solve(const MetricField& metric, const Grid& grid, int steps,
                                    const SolverConfig& config) {
  if (steps < 1) throw DomainError("continuation needs at least one step");
  Vector u;
  std::vector<int> counts;
  HarmonicSolution last;
  for (int s = 1; s <= steps; ++s) {
    const double t = double(s) / steps;
    const MetricField gt = metrics::homotopy(metric, t);
    try {
      last = solve_mixed_bvp(s == steps ? metric : gt, grid, config, s == 1 ? nullptr : &u);
    } catch (const SolverError& e) {
      throw SolverError("continuation failed at t = " + std::to_string(t) + ": " + e.what(), e.residual_history());
    }
    counts.push_back(last.iterations);
    u = Eigen::Map<const Vector>(last.u.values.data(), Eigen::Index(last.u.values.size()));
  }
  last.step_iterations = counts;
  return last;
}

MaxPrincipleReport max_principle_check(const HarmonicSolution& solution, double tolerance) {
  return max_principle_check(solution.grid, solution.u, tolerance);
}

MaxPrincipleReport max_principle_check(const Grid& grid, const GridField& u, double tolerance) {
  MaxPrincipleReport rep;
  rep.tolerance = tolerance;
  const int n = grid.n();
  rep.min_u = *std::min_element(u.values.begin(), u.values.end());
  rep.max_u = *std::max_element(u.values.begin(), u.values.end());
  rep.bounds_pass = rep.min_u >= -tolerance && rep.max_u <= 1.0 + tolerance;

  constexpr double strict = 1e-13;
  for (int k = 1; k < n - 1; ++k)
    for (int j = 1; j < n - 1; ++j)
      for (int i = 1; i < n - 1; ++i) {
        const std::size_t p = grid.index(i, j, k);
        const double v = u.at(p);
        const double nb[6] = {u.at(grid.index(i - 1, j, k)), u.at(grid.index(i + 1, j, k)),
                              u.at(grid.index(i, j - 1, k)), u.at(grid.index(i, j + 1, k)),
                              u.at(grid.index(i, j, k - 1)), u.at(grid.index(i, j, k + 1))};
        const double lo = *std::min_element(nb, nb + 6);
        const double hi = *std::max_element(nb, nb + 6);
        if (v > hi + strict || v < lo - strict) rep.interior_extrema.push_back(p);
      }
  rep.interior_pass = rep.interior_extrema.empty();

  rep.top_max = -1e300;
  const std::array<Face, 4> sides = kSideFaces;
  std::array<double, 4> face_max, edge_max;
  face_max.fill(-1e300);
  edge_max.fill(-1e300);
  for (std::size_t p = 0; p < grid.size(); ++p) {
    const NodeClass c = grid.classify(p);
    if (c.on(Face::T)) rep.top_max = std::max(rep.top_max, u.at(p));
    if (c.on(Face::B) || c.on(Face::T)) continue;
    if (c.kind == NodeKind::face) {
      for (int f = 0; f < 4; ++f)
        if (c.on(sides[f])) face_max[f] = std::max(face_max[f], u.at(p));
    } else if (c.kind == NodeKind::edge) {
      const auto& edges = all_edges();
      for (int e = 0; e < 4; ++e)
        if (c.on(edges[e].first) && c.on(edges[e].second)) edge_max[e] = std::max(edge_max[e], u.at(p));
    }
  }
  rep.boundary_pass = true;
  for (int f = 0; f < 4; ++f) {
    rep.pieces.push_back({face_name(sides[f]), face_max[f], rep.top_max - face_max[f]});
  }
  for (int e = 0; e < 4; ++e) {
    rep.pieces.push_back({edge_name(all_edges()[e]), edge_max[e], rep.top_max - edge_max[e]});
  }
  for (const auto& piece : rep.pieces) rep.boundary_pass = rep.boundary_pass && piece.margin > 0.0;
  rep.pass = rep.bounds_pass && rep.interior_pass && rep.boundary_pass;
  return rep;
}

double laplace_beltrami(const MetricField& metric, const ExpressionJet& f, const Vec3& x) {
  const MetricJet jet = metric.jet(x, 1);
  const Mat3 g_inv = inverse_metric(jet.g);
  const Christoffel G = christoffel(jet, g_inv);
  Vec3 df;
  for (int k = 0; k < 3; ++k) df[k] = f.first[k](x);
  double acc = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double cov = f.second[i][j](x);
      for (int k = 0; k < 3; ++k) cov -= G[k](i, j) * df[k];
      acc += g_inv(i, j) * cov;
    }
  return acc;
}

ConvergenceTable manufactured_solution_error(const MetricField& metric, const Expression& u_exact,
                                             const std::vector<int>& sizes, const SolverConfig& config) {
  auto jet = std::make_shared<ExpressionJet>(u_exact);
  BoundaryData data;
  data.source = [&metric, jet](const Vec3& x) { return laplace_beltrami(metric, *jet, x); };
  data.dirichlet = [jet](const Vec3& x) { return jet->value(x); };
  data.neumann = [&metric, jet](Face f, const Vec3& x) {
    const Mat3 g_inv = inverse_metric(metric(x));
    const int a = face_axis(f);
    double flux = 0.0;
    for (int j = 0; j < 3; ++j) flux += g_inv(a, j) * jet->first[j](x);
    return face_side(f) * flux / std::sqrt(g_inv(a, a));
  };

  ConvergenceTable table;
  for (int n : sizes) {
    const Grid grid(n);
    const DiscreteOperator op = assemble_operator(metric, grid, data);
    const Vector u = solve_linear(op, config, nullptr);
    double err = 0.0;
    bool finite = true;
    for (std::size_t p = 0; p < grid.size(); ++p) {
      const double exact = jet->value(grid.point(p));
      finite = finite && std::isfinite(exact);
      err = std::max(err, std::abs(u[Eigen::Index(p)] - exact));
    }
    if (!finite) table.warnings.push_back("exact solution is not finite on n = " + std::to_string(n));
    ConvergenceRow row{n, err, std::nullopt};
    if (!table.rows.empty() && table.rows.back().max_error > 0 && err > 0)
      row.order = std::log2(table.rows.back().max_error / err);
    table.rows.push_back(row);
  }
  constexpr double exact_threshold = 1e-8;
  table.exact = std::all_of(table.rows.begin(), table.rows.end(),
                            [](const ConvergenceRow& r) { return r.max_error <= exact_threshold; });
  table.min_order = 1e300;
  for (const auto& r : table.rows)
    if (r.order) table.min_order = std::min(table.min_order, *r.order);
  if (table.min_order == 1e300) table.min_order = 0.0;
  if (!table.exact && table.min_order < 1.8)
    table.warnings.push_back("observed order " + std::to_string(table.min_order) + " below 1.8");
  return table;
}

}  // namespace hmap
