#include "hmap/field_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "hmap/errors.hpp"

namespace hmap {

namespace {

constexpr char kMagic[8] = {'H', 'M', 'A', 'P', 'G', 'R', 'D', '\0'};

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_string(std::ostream& os, const std::string& s) {
  put<std::uint32_t>(os, std::uint32_t(s.size()));
  os.write(s.data(), std::streamsize(s.size()));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw DomainError("truncated field container");
  return v;
}

std::string get_string(std::istream& is) {
  const auto len = get<std::uint32_t>(is);
  if (len > (1u << 20)) throw DomainError("corrupt field container (string length)");
  std::string s(len, '\0');
  if (!is.read(s.data(), len)) throw DomainError("truncated field container");
  return s;
}

}  // namespace

const GridField& FieldContainer::field(const std::string& name) const {
  for (const auto& f : fields)
    if (f.name == name) return f;
  throw DomainError("field container has no field '" + name + "'");
}

void write_container(const std::string& path, const FieldContainer& c) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  os.write(kMagic, 8);
  put<std::uint32_t>(os, kContainerVersion);
  put<std::uint32_t>(os, std::uint32_t(c.n));
  put_string(os, c.metric_name);
  put<std::uint64_t>(os, c.metric_hash);
  put<std::uint32_t>(os, std::uint32_t(c.fields.size()));
  for (const auto& f : c.fields) {
    put_string(os, f.name);
    put<std::uint32_t>(os, std::uint32_t(f.components));
  }
  const std::size_t nodes = std::size_t(c.n) * c.n * c.n;
  for (const auto& f : c.fields) {
    if (f.values.size() != nodes * std::size_t(f.components)) throw DomainError("field '" + f.name + "' has the wrong size");
    os.write(reinterpret_cast<const char*>(f.values.data()), std::streamsize(f.values.size() * sizeof(double)));
  }
  if (!os) throw Error("failed writing '" + path + "'");
}

FieldContainer read_container(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open '" + path + "'");
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw DomainError("'" + path + "' is not a field container");
  const auto version = get<std::uint32_t>(is);
  if (version != kContainerVersion) throw DomainError("unsupported container version " + std::to_string(version));
  FieldContainer c;
  c.n = int(get<std::uint32_t>(is));
  c.metric_name = get_string(is);
  c.metric_hash = get<std::uint64_t>(is);
  const auto count = get<std::uint32_t>(is);
  const std::size_t nodes = std::size_t(c.n) * c.n * c.n;
  for (std::uint32_t k = 0; k < count; ++k) {
    GridField f;
    f.name = get_string(is);
    f.n = c.n;
    f.components = int(get<std::uint32_t>(is));
    c.fields.push_back(std::move(f));
  }
  for (auto& f : c.fields) {
    f.values.resize(nodes * std::size_t(f.components));
    if (!is.read(reinterpret_cast<char*>(f.values.data()), std::streamsize(f.values.size() * sizeof(double))))
      throw DomainError("truncated field container");
  }
  return c;
}

FieldContainer solution_container(const HarmonicSolution& s) {
  FieldContainer c;
  c.n = s.grid.n();
  c.metric_name = s.metric_description;
  c.metric_hash = s.metric_hash;
  c.fields = {s.u, s.du, s.grad_norm, s.hessian};
  return c;
}

void write_csv_slice(const std::string& path, const Grid& grid, const GridField& field, int axis, int index) {
  if (axis < 0 || axis > 2 || index < 0 || index >= grid.n()) throw DomainError("slice plane out of range");
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  os.precision(17);
  os << "i,j,k,x1,x2,x3";
  for (int c = 0; c < field.components; ++c) {
    os << "," << field.name;
    if (field.components > 1) os << "_" << c;
  }
  os << "\n";
  for (int k = 0; k < grid.n(); ++k)
    for (int j = 0; j < grid.n(); ++j)
      for (int i = 0; i < grid.n(); ++i) {
        const int idx[3] = {i, j, k};
        if (idx[axis] != index) continue;
        const Vec3 x = grid.point(i, j, k);
        os << i << "," << j << "," << k << "," << x[0] << "," << x[1] << "," << x[2];
        const std::size_t p = grid.index(i, j, k);
        for (int c = 0; c < field.components; ++c) os << "," << field.at(p, c);
        os << "\n";
      }
}

}  // namespace hmap
