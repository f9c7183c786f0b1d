#include "hmap/grid.hpp"

#include <algorithm>
#include <cmath>

#include "hmap/errors.hpp"

namespace hmap {

Grid::Grid(int n) : n_(n), h_(0.0) {
  if (n < 9 || n % 2 == 0) {
    throw DomainError("grid size must be odd and at least 9, got " + std::to_string(n));
  }
  h_ = 1.0 / (n - 1);
}

NodeClass Grid::classify(int i, int j, int k) const {
  NodeClass c;
  const int last = n_ - 1;
  auto mark = [&](bool cond, Face f) {
    if (cond) c.faces |= std::uint8_t(1u << static_cast<int>(f));
  };
  mark(k == 0, Face::B);
  mark(k == last, Face::T);
  mark(i == 0, Face::F1);
  mark(j == 0, Face::F2);
  mark(i == last, Face::F3);
  mark(j == last, Face::F4);
  const int count = __builtin_popcount(c.faces);
  c.kind = count == 0 ? NodeKind::interior : count == 1 ? NodeKind::face : count == 2 ? NodeKind::edge : NodeKind::vertex;
  return c;
}

GridField::GridField(std::string name_, const Grid& grid, int components_, double fill)
    : name(std::move(name_)), n(grid.n()), components(components_), values(grid.size() * components_, fill) {}

double GridField::sample(const Vec3& x, int c) const {
  const double h = 1.0 / (n - 1);
  int base[3];
  double t[3];
  for (int a = 0; a < 3; ++a) {
    const double s = std::clamp(x[a], 0.0, 1.0) / h;
    base[a] = std::min(int(std::floor(s)), n - 2);
    t[a] = s - base[a];
  }
  double acc = 0.0;
  for (int corner = 0; corner < 8; ++corner) {
    double w = 1.0;
    std::size_t idx[3];
    for (int a = 0; a < 3; ++a) {
      const int bit = (corner >> a) & 1;
      w *= bit ? t[a] : 1.0 - t[a];
      idx[a] = std::size_t(base[a] + bit);
    }
    if (w == 0.0) continue;
    acc += w * at(idx[0] + std::size_t(n) * (idx[1] + std::size_t(n) * idx[2]), c);
  }
  return acc;
}

GridField sample_function(const std::string& name, const Grid& grid,
                          const std::function<double(const Vec3&)>& f) {
  GridField out(name, grid, 1);
  for (std::size_t p = 0; p < grid.size(); ++p) out.at(p) = f(grid.point(p));
  return out;
}

Mat3 sample_symmetric(const GridField& f, const Vec3& x) {
  Mat3 m;
  for (int a = 0; a < 3; ++a)
    for (int b = a; b < 3; ++b) m(a, b) = m(b, a) = f.sample(x, kSymIndex[a][b]);
  return m;
}

Vec3 sample_vector(const GridField& f, const Vec3& x) {
  return Vec3(f.sample(x, 0), f.sample(x, 1), f.sample(x, 2));
}

}  // namespace hmap
