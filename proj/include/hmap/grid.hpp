#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "hmap/metric.hpp"
#include "hmap/types.hpp"

namespace hmap {

enum class NodeKind : std::uint8_t { interior, face, edge, vertex };

struct NodeClass {
  NodeKind kind = NodeKind::interior;
  // Bit f is set when the node lies on Face f (bit order of enum Face).
  std::uint8_t faces = 0;

  bool on(Face f) const { return faces & (1u << static_cast<int>(f)); }
};

class Grid {
 public:
  // n nodes per axis on [0,1]^3; n must be odd and at least 9.
  explicit Grid(int n);

  int n() const { return n_; }
  double h() const { return h_; }
  std::size_t size() const { return std::size_t(n_) * n_ * n_; }

  std::size_t index(int i, int j, int k) const { return std::size_t(i) + std::size_t(n_) * (j + std::size_t(n_) * k); }
  std::array<int, 3> coords(std::size_t p) const {
    return {int(p % n_), int((p / n_) % n_), int(p / (std::size_t(n_) * n_))};
  }
  Vec3 point(int i, int j, int k) const { return Vec3(i * h_, j * h_, k * h_); }
  Vec3 point(std::size_t p) const {
    const auto c = coords(p);
    return point(c[0], c[1], c[2]);
  }

  NodeClass classify(int i, int j, int k) const;
  NodeClass classify(std::size_t p) const {
    const auto c = coords(p);
    return classify(c[0], c[1], c[2]);
  }

  // Half weight at boundary planes, 1 inside (trapezoidal weight / h).
  double weight(int index) const { return (index == 0 || index == n_ - 1) ? 0.5 : 1.0; }

 private:
  int n_;
  double h_;
};

// Node-major field with `components` values per node.
struct GridField {
  std::string name;
  int n = 0;
  int components = 1;
  std::vector<double> values;

  GridField() = default;
  GridField(std::string name, const Grid& grid, int components, double fill = 0.0);

  double& at(std::size_t node, int c = 0) { return values[node * components + c]; }
  double at(std::size_t node, int c = 0) const { return values[node * components + c]; }

  // Trilinear interpolation of component c; x is clamped into the cube.
  double sample(const Vec3& x, int c = 0) const;
};

GridField sample_function(const std::string& name, const Grid& grid,
                          const std::function<double(const Vec3&)>& f);

// Symmetric 3x3 stored as xx, xy, xz, yy, yz, zz.
constexpr int kSymIndex[3][3] = {{0, 1, 2}, {1, 3, 4}, {2, 4, 5}};

inline Mat3 unpack_symmetric(const GridField& f, std::size_t node) {
  Mat3 m;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) m(a, b) = f.at(node, kSymIndex[a][b]);
  return m;
}

Mat3 sample_symmetric(const GridField& f, const Vec3& x);
Vec3 sample_vector(const GridField& f, const Vec3& x);

}  // namespace hmap
