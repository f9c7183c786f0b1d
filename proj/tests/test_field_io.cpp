#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "hmap/errors.hpp"
#include "hmap/field_io.hpp"

using namespace hmap;

TEST_CASE("field container round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "hmap_test_io";
  std::filesystem::create_directories(dir);
  const HarmonicSolution s = solve_mixed_bvp(metrics::conformal(Expression::parse("0.1*x3*x1")), Grid(9));
  const std::string path = (dir / "u.hmg").string();
  write_container(path, solution_container(s));
  const FieldContainer back = read_container(path);
  CHECK(back.n == 9);
  CHECK(back.metric_name == s.metric_description);
  CHECK(back.metric_hash == s.metric_hash);
  REQUIRE(back.fields.size() == 4);
  CHECK(back.field("u").values == s.u.values);
  CHECK(back.field("hessian").components == 6);
  CHECK(back.field("hessian").values == s.hessian.values);
  CHECK_THROWS_AS(back.field("nope"), DomainError);

  // Header layout: magic then version 1 then n.
  std::ifstream raw(path, std::ios::binary);
  char head[16];
  raw.read(head, 16);
  CHECK(std::string(head, 7) == "HMAPGRD");
  CHECK(head[7] == '\0');
  CHECK(head[8] == 1);
  CHECK(head[12] == 9);

  const std::string bad = (dir / "bad.hmg").string();
  std::ofstream(bad) << "not a container";
  CHECK_THROWS_AS(read_container(bad), DomainError);

  const std::string csv = (dir / "slice.csv").string();
  write_csv_slice(csv, s.grid, s.u, 2, 4);
  std::ifstream in(csv);
  std::string header;
  std::getline(in, header);
  CHECK(header == "i,j,k,x1,x2,x3,u");
  int lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  CHECK(lines == 81);
  std::filesystem::remove_all(dir);
}
