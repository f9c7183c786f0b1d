#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hmap/bvp.hpp"
#include "hmap/grid.hpp"

namespace hmap {

// Binary grid-field container:
//   "HMAPGRD\0", u32 version, u32 n, u32 name length, name bytes, u64 metric hash,
//   u32 field count, then per field u32 name length, name bytes, u32 components;
//   body is float64 little-endian, field after field, x-fastest node order with
//   the components of a node adjacent.
struct FieldContainer {
  int n = 0;
  std::string metric_name;
  std::uint64_t metric_hash = 0;
  std::vector<GridField> fields;

  const GridField& field(const std::string& name) const;
};

constexpr std::uint32_t kContainerVersion = 1;

void write_container(const std::string& path, const FieldContainer& c);
FieldContainer read_container(const std::string& path);

FieldContainer solution_container(const HarmonicSolution& s);

// Plane `axis` = index of every component of the field as CSV.
void write_csv_slice(const std::string& path, const Grid& grid, const GridField& field, int axis, int index);

}  // namespace hmap
