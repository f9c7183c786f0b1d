#include "hmap/model_oracles.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>

#include "hmap/errors.hpp"

namespace hmap {

ModelDomain parse_model_domain(const std::string& name) {
  if (name == "ball") return ModelDomain::ball;
  if (name == "half_ball") return ModelDomain::half_ball;
  if (name == "quarter_ball") return ModelDomain::quarter_ball;
  throw DomainError("unknown model domain '" + name + "'");
}

std::string model_domain_name(ModelDomain d) {
  switch (d) {
    case ModelDomain::ball: return "ball";
    case ModelDomain::half_ball: return "half_ball";
    case ModelDomain::quarter_ball: return "quarter_ball";
  }
  return "ball";
}

ReflectedPoints reflect(const Vec3& y) {
  const double r2 = y.squaredNorm();
  if (r2 == 0.0) throw DomainError("spherical reflection of the origin is undefined");
  ReflectedPoints p;
  p.y = y;
  p.y_bar = y / r2;
  p.y_tilde = Vec3(-y[0], y[1], y[2]);
  p.y_hat = Vec3(y[0], -y[1], y[2]);
  return p;
}

namespace {

// √(|x|²|y|² − 2x·y + 1) equals |y||x − ȳ| and stays defined at y = 0.
double ball_green(const Vec3& x, const Vec3& y) {
  const double d = (x - y).norm();
  if (d < 1e-14) throw SingularityError("Green function evaluated at its pole");
  const double image = std::sqrt(std::max(0.0, x.squaredNorm() * y.squaredNorm() - 2.0 * x.dot(y) + 1.0));
  return -1.0 / (4 * kPi * d) + 1.0 / (4 * kPi * image);
}

Vec3 tilde(const Vec3& y) { return Vec3(-y[0], y[1], y[2]); }
Vec3 hat(const Vec3& y) { return Vec3(y[0], -y[1], y[2]); }

int image_points(ModelDomain d, const Vec3& x, Vec3 out[4]) {
  out[0] = x;
  if (d == ModelDomain::ball) return 1;
  out[1] = tilde(x);
  if (d == ModelDomain::half_ball) return 2;
  out[2] = hat(x);
  out[3] = tilde(hat(x));
  return 4;
}

}  // namespace

double green_function(ModelDomain kind, const Vec3& x, const Vec3& y) {
  Vec3 img[4];
  const int m = image_points(kind, y, img);
  double g = 0.0;
  for (int k = 0; k < m; ++k) g += ball_green(x, img[k]);
  return g;
}

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  static std::mutex mutex;
  static std::map<int, std::pair<std::vector<double>, std::vector<double>>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) {
    std::vector<double> x(static_cast<std::size_t>(n)), w(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
      double dp = 1.0;
      for (int iter = 0; iter < 100; ++iter) {
        double p0 = 1.0, p1 = z;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2.0 * k - 1) * z * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        if (n == 1) p0 = 1.0;
        dp = n * (z * p1 - p0) / (z * z - 1.0);
        const double dz = p1 / dp;
        z -= dz;
        if (std::abs(dz) < 1e-16) break;
      }
      x[std::size_t(i)] = -z;
      w[std::size_t(i)] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    it = cache.emplace(n, std::make_pair(x, w)).first;
  }
  nodes = it->second.first;
  weights = it->second.second;
}

namespace {

struct Rule1D {
  std::vector<double> x, w;
};

Rule1D composite(double a, double b, int panels, int points) {
  std::vector<double> gx, gw;
  gauss_legendre(points, gx, gw);
  Rule1D r;
  const double len = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * len;
    for (std::size_t i = 0; i < gx.size(); ++i) {
      r.x.push_back(lo + 0.5 * len * (gx[i] + 1.0));
      r.w.push_back(0.5 * len * gw[i]);
    }
  }
  return r;
}

Rule1D periodic(int points) {
  Rule1D r;
  for (int i = 0; i < points; ++i) {
    r.x.push_back(2 * kPi * (i + 0.5) / points);
    r.w.push_back(2 * kPi / points);
  }
  return r;
}

std::pair<double, double> azimuth_range(ModelDomain d) {
  switch (d) {
    case ModelDomain::ball: return {0.0, 2 * kPi};
    case ModelDomain::half_ball: return {-kPi / 2, kPi / 2};
    case ModelDomain::quarter_ball: return {0.0, kPi / 2};
  }
  return {0.0, 2 * kPi};
}

Vec3 spherical(double r, double mu, double phi) {
  const double s = std::sqrt(std::max(0.0, 1.0 - mu * mu));
  return Vec3(r * s * std::cos(phi), r * s * std::sin(phi), r * mu);
}

WeightedPoints cap_rule(ModelDomain d, const QuadratureRule& q) {
  const auto [a, b] = azimuth_range(d);
  const Rule1D mu = composite(-1, 1, q.panels, q.points);
  const Rule1D phi = composite(a, b, q.panels, q.points);
  WeightedPoints out;
  for (std::size_t i = 0; i < mu.x.size(); ++i)
    for (std::size_t j = 0; j < phi.x.size(); ++j) {
      out.points.push_back(spherical(1.0, mu.x[i], phi.x[j]));
      out.weights.push_back(mu.w[i] * phi.w[j]);
    }
  return out;
}

// Flat face {y_axis = 0} of the domain, as polar coordinates in the plane
// spanned by (other in-plane axis, x3).
struct FlatFace {
  int axis;
  int other;
  double alpha_lo, alpha_hi;  // angle measured from the `other` axis towards x3
  bool full;
};

std::vector<FlatFace> flat_faces(ModelDomain d) {
  switch (d) {
    case ModelDomain::ball: return {};
    case ModelDomain::half_ball: return {{0, 1, 0.0, 2 * kPi, true}};
    case ModelDomain::quarter_ball: return {{0, 1, -kPi / 2, kPi / 2, false}, {1, 0, -kPi / 2, kPi / 2, false}};
  }
  return {};
}

Vec3 face_point(const FlatFace& f, double s, double alpha) {
  Vec3 y = Vec3::Zero();
  y[f.other] = s * std::cos(alpha);
  y[2] = s * std::sin(alpha);
  return y;
}

double boundary_distance(ModelDomain d, const Vec3& x) {
  double dist = 1.0 - x.norm();
  if (d != ModelDomain::ball) dist = std::min(dist, x[0]);
  if (d == ModelDomain::quarter_ball) dist = std::min(dist, x[1]);
  return dist;
}

// 1 on [0, 1/2], 0 beyond 1, C∞ in between.
double cutoff(double s) {
  if (s <= 0.5) return 1.0;
  if (s >= 1.0) return 0.0;
  const double t = 2.0 * (s - 0.5);
  const double a = std::exp(-1.0 / (1.0 - t));
  const double b = std::exp(-1.0 / t);
  return a / (a + b);
}

struct Integrator {
  ModelDomain domain;
  QuadratureRule quad;

  // ∫_Ω K(x,y) F(y) dy with the pole at x split off by the cutoff.
  double volume(const Vec3& x, const ScalarFunction& F) const {
    const double rho = std::min(0.5, 0.9 * boundary_distance(domain, x));
    double total = 0.0;
    const WeightedPoints far = tensor_rule(domain, quad);
    for (std::size_t i = 0; i < far.points.size(); ++i) {
      const Vec3& y = far.points[i];
      const double c = cutoff((y - x).norm() / rho);
      if (c == 1.0) continue;
      total += far.weights[i] * (1.0 - c) * green_function(domain, x, y) * F(y);
    }
    const Rule1D r = composite(0.0, rho, 2, quad.points);
    const Rule1D mu = composite(-1, 1, 1, quad.points);
    const Rule1D phi = periodic(2 * quad.points);
    for (std::size_t i = 0; i < r.x.size(); ++i) {
      const double c = cutoff(r.x[i] / rho);
      if (c == 0.0) continue;
      for (std::size_t j = 0; j < mu.x.size(); ++j)
        for (std::size_t k = 0; k < phi.x.size(); ++k) {
          const Vec3 y = x + spherical(r.x[i], mu.x[j], phi.x[k]);
          total += r.w[i] * mu.w[j] * phi.w[k] * r.x[i] * r.x[i] * c * green_function(domain, x, y) * F(y);
        }
    }
    return total;
  }

  double face(const FlatFace& f, const Vec3& x, const ScalarFunction& F) const {
    // Foot point of x in the plane and its distance to the face rim.
    const double s0 = x[f.other], t0 = x[2];
    double rim = 1.0 - std::hypot(s0, t0);
    if (!f.full) rim = std::min(rim, s0);
    const double rho = std::min(0.5, 0.9 * rim);
    const bool split = quad.pole_split && rho >= 0.02;
    Vec3 foot = x;
    foot[f.axis] = 0.0;

    double total = 0.0;
    const Rule1D s = composite(0.0, 1.0, quad.panels, quad.points);
    const Rule1D a = composite(f.alpha_lo, f.alpha_hi, quad.panels, quad.points);
    for (std::size_t i = 0; i < s.x.size(); ++i)
      for (std::size_t j = 0; j < a.x.size(); ++j) {
        const Vec3 y = face_point(f, s.x[i], a.x[j]);
        const double c = split ? cutoff((y - foot).norm() / rho) : 0.0;
        if (c == 1.0) continue;
        total += s.w[i] * a.w[j] * s.x[i] * (1.0 - c) * green_function(domain, x, y) * F(y);
      }
    if (split) {
      const Rule1D r = composite(0.0, rho, 2, quad.points);
      const Rule1D phi = periodic(2 * quad.points);
      for (std::size_t i = 0; i < r.x.size(); ++i) {
        const double c = cutoff(r.x[i] / rho);
        if (c == 0.0) continue;
        for (std::size_t k = 0; k < phi.x.size(); ++k) {
          Vec3 y = foot;
          y[f.other] += r.x[i] * std::cos(phi.x[k]);
          y[2] += r.x[i] * std::sin(phi.x[k]);
          total += r.w[i] * phi.w[k] * r.x[i] * c * green_function(domain, x, y) * F(y);
        }
      }
    }
    return total;
  }

  // ∫_cap ∂_n G(x, ·) F, the Poisson kernel summed over the images of x.
  double cap(const Vec3& x, const ScalarFunction& F) const {
    Vec3 img[4];
    const int m = image_points(domain, x, img);
    const double num = (1.0 - x.squaredNorm()) / (4 * kPi);
    const WeightedPoints rule = cap_rule(domain, quad);
    double total = 0.0;
    for (std::size_t i = 0; i < rule.points.size(); ++i) {
      const Vec3& y = rule.points[i];
      double P = 0.0;
      for (int k = 0; k < m; ++k) P += num / std::pow((img[k] - y).norm(), 3);
      total += rule.weights[i] * P * F(y);
    }
    return total;
  }
};

double value_or_zero(const ScalarFunction& f, const Vec3& x) { return f ? f(x) : 0.0; }

void check_compatibility(const ModelProblem& p) {
  const int samples = 64;
  if (!p.f3) {
    double worst = 0.0;
    for (const FlatFace& face : flat_faces(p.domain)) {
      const ScalarFunction& data = face.axis == 0 ? p.f1 : p.f2;
      if (!data) continue;
      for (int k = 0; k <= samples; ++k) {
        const double a = face.alpha_lo + (face.alpha_hi - face.alpha_lo) * k / samples;
        worst = std::max(worst, std::abs(data(face_point(face, 1.0, a))));
      }
    }
    if (worst > 1e-8) throw CompatibilityError("Neumann data does not vanish on the rim of the flat face", worst);
  }
  if (p.domain == ModelDomain::quarter_ball && (p.f1 || p.f2)) {
    const double h = 1e-5;
    double worst = 0.0;
    for (int k = 0; k <= 20; ++k) {
      const double z = -0.95 + 1.9 * k / 20;
      const double d2f1 = (value_or_zero(p.f1, Vec3(0, h, z)) - value_or_zero(p.f1, Vec3(0, -h, z))) / (2 * h);
      const double d1f2 = (value_or_zero(p.f2, Vec3(h, 0, z)) - value_or_zero(p.f2, Vec3(-h, 0, z))) / (2 * h);
      worst = std::max(worst, std::abs(d2f1 - d1f2));
    }
    if (worst > 1e-5) throw CompatibilityError("corner compatibility d2 f1 = d1 f2 violated", worst);
  }
}

double evaluate(const ModelProblem& p, const HarmonicPolynomial& E, const QuadratureRule& q, const Vec3& x) {
  const Integrator in{p.domain, q};
  double u = E(x);
  if (p.f) u += in.volume(x, p.f);
  for (const FlatFace& face : flat_faces(p.domain)) {
    const ScalarFunction& data = face.axis == 0 ? p.f1 : p.f2;
    const int axis = face.axis;
    const ScalarFunction h = [&](const Vec3& y) { return value_or_zero(data, y) - E.gradient(y)[axis]; };
    u += in.face(face, x, h);
  }
  const ScalarFunction rest = [&](const Vec3& y) { return value_or_zero(p.f3, y) - E(y); };
  u += in.cap(x, rest);
  return u;
}

}  // namespace

double domain_measure(ModelDomain d) {
  switch (d) {
    case ModelDomain::ball: return 4 * kPi / 3;
    case ModelDomain::half_ball: return 2 * kPi / 3;
    case ModelDomain::quarter_ball: return kPi / 3;
  }
  return 0.0;
}

bool in_domain(ModelDomain d, const Vec3& x, double tol) {
  if (x.norm() > 1.0 + tol) return false;
  if (d != ModelDomain::ball && x[0] < -tol) return false;
  if (d == ModelDomain::quarter_ball && x[1] < -tol) return false;
  return true;
}

WeightedPoints tensor_rule(ModelDomain d, const QuadratureRule& q) {
  const auto [a, b] = azimuth_range(d);
  const Rule1D r = composite(0, 1, q.panels, q.points);
  const Rule1D mu = composite(-1, 1, q.panels, q.points);
  const Rule1D phi = composite(a, b, q.panels, q.points);
  WeightedPoints out;
  out.points.reserve(r.x.size() * mu.x.size() * phi.x.size());
  out.weights.reserve(out.points.capacity());
  for (std::size_t i = 0; i < r.x.size(); ++i)
    for (std::size_t j = 0; j < mu.x.size(); ++j)
      for (std::size_t k = 0; k < phi.x.size(); ++k) {
        out.points.push_back(spherical(r.x[i], mu.x[j], phi.x[k]));
        out.weights.push_back(r.x[i] * r.x[i] * r.w[i] * mu.w[j] * phi.w[k]);
      }
  return out;
}

double HarmonicPolynomial::operator()(const Vec3& x) const {
  double v = 0.0;
  for (std::size_t m = 0; m < exponents.size(); ++m) {
    const auto& e = exponents[m];
    v += coefficients[Eigen::Index(m)] * std::pow(x[0], e[0]) * std::pow(x[1], e[1]) * std::pow(x[2], e[2]);
  }
  return v;
}

Vec3 HarmonicPolynomial::gradient(const Vec3& x) const {
  Vec3 g = Vec3::Zero();
  for (std::size_t m = 0; m < exponents.size(); ++m) {
    const auto& e = exponents[m];
    const double c = coefficients[Eigen::Index(m)];
    for (int a = 0; a < 3; ++a) {
      if (e[a] == 0) continue;
      double t = c * e[a];
      for (int b = 0; b < 3; ++b) t *= std::pow(x[b], b == a ? e[b] - 1 : e[b]);
      g[a] += t;
    }
  }
  return g;
}

std::vector<HarmonicPolynomial> harmonic_basis(int max_degree) {
  std::vector<std::array<int, 3>> monomials;
  for (int d = 0; d <= max_degree; ++d)
    for (int a = d; a >= 0; --a)
      for (int b = d - a; b >= 0; --b) monomials.push_back({a, b, d - a - b});
  const auto find = [&](const std::array<int, 3>& e) {
    return Eigen::Index(std::find(monomials.begin(), monomials.end(), e) - monomials.begin());
  };

  std::vector<HarmonicPolynomial> basis;
  for (int d = 0; d <= max_degree; ++d) {
    std::vector<Eigen::Index> cols;
    for (std::size_t m = 0; m < monomials.size(); ++m)
      if (monomials[m][0] + monomials[m][1] + monomials[m][2] == d) cols.push_back(Eigen::Index(m));
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(Eigen::Index(monomials.size()), Eigen::Index(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const auto e = monomials[std::size_t(cols[c])];
      for (int a = 0; a < 3; ++a) {
        if (e[a] < 2) continue;
        auto lowered = e;
        lowered[a] -= 2;
        L(find(lowered), Eigen::Index(c)) += e[a] * (e[a] - 1);
      }
    }
    Eigen::MatrixXd kernel;
    if (d < 2) {
      kernel = Eigen::MatrixXd::Identity(Eigen::Index(cols.size()), Eigen::Index(cols.size()));
    } else {
      Eigen::FullPivLU<Eigen::MatrixXd> lu(L);
      kernel = lu.kernel();
    }
    for (Eigen::Index k = 0; k < kernel.cols(); ++k) {
      HarmonicPolynomial p;
      for (std::size_t c = 0; c < cols.size(); ++c) {
        if (std::abs(kernel(Eigen::Index(c), k)) < 1e-14) continue;
        p.exponents.push_back(monomials[std::size_t(cols[c])]);
      }
      p.coefficients.resize(Eigen::Index(p.exponents.size()));
      Eigen::Index slot = 0;
      for (std::size_t c = 0; c < cols.size(); ++c)
        if (std::abs(kernel(Eigen::Index(c), k)) >= 1e-14) p.coefficients[slot++] = kernel(Eigen::Index(c), k);
      basis.push_back(std::move(p));
    }
  }
  return basis;
}

HarmonicPolynomial harmonic_extension(ModelDomain d, const ScalarFunction& f3, int max_degree) {
  const std::vector<HarmonicPolynomial> basis = harmonic_basis(max_degree);
  HarmonicPolynomial out;
  for (const auto& b : basis)
    for (const auto& e : b.exponents)
      if (std::find(out.exponents.begin(), out.exponents.end(), e) == out.exponents.end()) out.exponents.push_back(e);
  out.coefficients = Eigen::VectorXd::Zero(Eigen::Index(out.exponents.size()));
  if (!f3) return out;

  const WeightedPoints cap = cap_rule(d, QuadratureRule{16, 2, true});
  Eigen::MatrixXd A(Eigen::Index(cap.points.size()), Eigen::Index(basis.size()));
  Eigen::VectorXd rhs(A.rows());
  for (std::size_t i = 0; i < cap.points.size(); ++i) {
    const double w = std::sqrt(cap.weights[i]);
    for (std::size_t k = 0; k < basis.size(); ++k) A(Eigen::Index(i), Eigen::Index(k)) = w * basis[k](cap.points[i]);
    rhs[Eigen::Index(i)] = w * f3(cap.points[i]);
  }
  // On a half or quarter cap some harmonic polynomials coincide; keep the
  // minimum-norm fit.
  const Eigen::VectorXd c = A.completeOrthogonalDecomposition().solve(rhs);
  for (std::size_t k = 0; k < basis.size(); ++k)
    for (std::size_t m = 0; m < basis[k].exponents.size(); ++m) {
      const auto it = std::find(out.exponents.begin(), out.exponents.end(), basis[k].exponents[m]);
      out.coefficients[Eigen::Index(it - out.exponents.begin())] += c[Eigen::Index(k)] * basis[k].coefficients[Eigen::Index(m)];
    }
  return out;
}

OracleValue solve_model(const ModelProblem& problem, const QuadratureRule& quad, const Vec3& x,
                        double requested_error) {
  if (!in_domain(problem.domain, x)) throw DomainError("probe point lies outside the " + model_domain_name(problem.domain));
  check_compatibility(problem);
  OracleValue out;
  if (x.norm() >= 1.0 - 1e-12) {
    out.value = value_or_zero(problem.f3, x);
    return out;
  }
  if (boundary_distance(problem.domain, x) < 1e-3)
    throw DomainError("probe point is closer than 1e-3 to a flat face");
  const HarmonicPolynomial E = harmonic_extension(problem.domain, problem.f3);
  out.value = evaluate(problem, E, quad, x);
  QuadratureRule coarse = quad;
  coarse.points = std::max(4, (quad.points * 3) / 4);
  out.error_estimate = std::abs(out.value - evaluate(problem, E, coarse, x));
  if (out.error_estimate > requested_error) {
    out.warnings.push_back("quadrature error estimate " + std::to_string(out.error_estimate) +
                           " exceeds the requested " + std::to_string(requested_error));
  }
  return out;
}

OracleValue solve_half_ball(const ModelProblem& problem, const QuadratureRule& quad, const Vec3& x) {
  ModelProblem p = problem;
  p.domain = ModelDomain::half_ball;
  return solve_model(p, quad, x);
}

OracleValue solve_quarter_ball(const ModelProblem& problem, const QuadratureRule& quad, const Vec3& x) {
  ModelProblem p = problem;
  p.domain = ModelDomain::quarter_ball;
  return solve_model(p, quad, x);
}

ScalarFunction kelvin_extend(const ScalarFunction& f1, double tol) {
  double worst = 0.0;
  const int samples = 720;
  for (int k = 0; k < samples; ++k) {
    const double a = 2 * kPi * k / samples;
    worst = std::max(worst, std::abs(f1(Vec3(0.0, std::cos(a), std::sin(a)))));
  }
  if (worst > tol) throw CompatibilityError("Neumann data does not vanish on the unit circle", worst);
  return [f1](const Vec3& x) {
    const Vec3 y(0.0, x[1], x[2]);
    const double r2 = y.squaredNorm();
    if (r2 <= 1.0) return f1(y);
    return -f1(y / r2) / std::sqrt(r2);
  };
}

void write_probe_csv(const std::string& path, const std::vector<ProbeRow>& rows) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  os.precision(12);
  os << "x1,x2,x3,oracle,reference,abs_diff,quad_error\n";
  for (const auto& r : rows)
    os << r.x[0] << "," << r.x[1] << "," << r.x[2] << "," << r.oracle << "," << r.reference << "," << r.abs_diff << ","
       << r.quad_error << "\n";
}

}  // namespace hmap
