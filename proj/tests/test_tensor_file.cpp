#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "aquinv/errors.hpp"
#include "aquinv/io/tensor_file.hpp"

using namespace aquinv;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const char* name) {
  fs::path dir = fs::temp_directory_path() / "aquinv_test_io";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("crc32 matches the known check value") {
  // canonical IEEE 802.3 test vector
  CHECK(io::crc32("123456789", 9) == 0xCBF43926u);
}

TEST_CASE("tensor file round-trip is lossless and byte-stable") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> gauss;
  std::vector<double> data(2 * 3 * 4);
  for (auto& v : data) v = gauss(rng);

  fs::path p1 = temp_file("a.aqtn"), p2 = temp_file("b.aqtn");
  io::write_tensor(p1, {2, 3, 4}, data.data());

  std::vector<std::uint64_t> dims;
  auto back = io::read_tensor_f64(p1, &dims);
  CHECK(dims == std::vector<std::uint64_t>{2, 3, 4});
  REQUIRE(back.size() == data.size());
  for (size_t i = 0; i < data.size(); ++i) CHECK(back[i] == data[i]);

  // write -> read -> write produces identical bytes
  io::write_tensor(p2, dims, back.data());
  CHECK(slurp(p1) == slurp(p2));
}

TEST_CASE("tensor file stores f32 payloads") {
  std::vector<float> data = {1.5f, -2.25f, 0.0f, 3.0f};
  fs::path p = temp_file("c.aqtn");
  io::write_tensor(p, {4}, data.data());
  auto t = io::read_tensor(p);
  CHECK(t.dtype == io::Dtype::f32);
  REQUIRE(t.f32.size() == 4);
  CHECK(t.f32[1] == -2.25f);
  CHECK_THROWS_AS(io::read_tensor_f64(p), io_error);
}

TEST_CASE("corrupted tensor files are rejected") {
  std::vector<double> data = {1.0, 2.0, 3.0};
  fs::path p = temp_file("d.aqtn");
  io::write_tensor(p, {3}, data.data());

  auto bytes = slurp(p);
  SUBCASE("flipped payload byte fails CRC") {
    bytes[bytes.size() / 2] ^= 0x40;
    std::ofstream(p, std::ios::binary | std::ios::trunc).write(bytes.data(), bytes.size());
    CHECK_THROWS_AS(io::read_tensor(p), io_error);
  }
  SUBCASE("truncation fails") {
    std::ofstream(p, std::ios::binary | std::ios::trunc).write(bytes.data(), bytes.size() - 5);
    CHECK_THROWS_AS(io::read_tensor(p), io_error);
  }
  SUBCASE("bad magic fails") {
    bytes[0] = 'Z';
    std::ofstream(p, std::ios::binary | std::ios::trunc).write(bytes.data(), bytes.size());
    CHECK_THROWS_AS(io::read_tensor(p), io_error);
  }
  SUBCASE("missing file fails") { CHECK_THROWS_AS(io::read_tensor(temp_file("nope.aqtn")), io_error); }
}
