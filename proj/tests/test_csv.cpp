#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "aquinv/errors.hpp"
#include "aquinv/io/csv.hpp"

using namespace aquinv;
namespace fs = std::filesystem;

TEST_CASE("csv write/read round-trip") {
  fs::path dir = fs::temp_directory_path() / "aquinv_test_io";
  fs::create_directories(dir);
  fs::path p = dir / "table.csv";

  std::vector<std::vector<double>> rows = {{1.0, -0.5, 3.14159265358979}, {2.0, 1e-300, 7.0}};
  io::write_csv(p, {"a", "b", "c"}, rows);

  auto t = io::read_csv(p);
  CHECK(t.header == std::vector<std::string>{"a", "b", "c"});
  CHECK(t.column("b") == 1);
  CHECK(t.column("missing") == -1);
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0][2] == 3.14159265358979);
  CHECK(t.rows[1][1] == 1e-300);
}

TEST_CASE("csv rejects non-numeric cells") {
  fs::path dir = fs::temp_directory_path() / "aquinv_test_io";
  fs::create_directories(dir);
  fs::path p = dir / "bad.csv";
  {
    std::ofstream out(p);
    out << "x,y\n1.0,oops\n";
  }
  CHECK_THROWS_AS(io::read_csv(p), io_error);
}
