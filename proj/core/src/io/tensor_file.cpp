#include "aquinv/io/tensor_file.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "aquinv/errors.hpp"

namespace aquinv::io {

namespace {

static_assert(std::endian::native == std::endian::little,
              "AQTN writer assumes a little-endian host");

constexpr std::uint32_t kVersion = 1;
constexpr char kMagic[4] = {'A', 'Q', 'T', 'N'};

std::array<std::uint32_t, 256> make_crc_table() {
  std::array<std::uint32_t, 256> table{};
  for (std::uint32_t n = 0; n < 256; ++n) {
    std::uint32_t c = n;
    for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
    table[n] = c;
  }
  return table;
}

const std::array<std::uint32_t, 256>& crc_table() {
  static const auto table = make_crc_table();
  return table;
}

struct CrcWriter {
  std::ofstream out;
  std::uint32_t crc = 0xFFFFFFFFu;

  void write(const void* data, std::size_t len) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    const auto& table = crc_table();
    for (std::size_t i = 0; i < len; ++i) crc = table[(crc ^ bytes[i]) & 0xFF] ^ (crc >> 8);
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
  }

  template <typename T>
  void write_pod(T v) {
    write(&v, sizeof(T));
  }
};

std::uint64_t product(const std::vector<std::uint64_t>& dims) {
  std::uint64_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

void write_impl(const std::filesystem::path& path, const std::vector<std::uint64_t>& dims,
                Dtype dtype, const void* data, std::size_t elem_size) {
  CrcWriter w;
  w.out.open(path, std::ios::binary | std::ios::trunc);
  if (!w.out) throw io_error("cannot open for writing: " + path.string());
  w.write(kMagic, 4);
  w.write_pod(kVersion);
  w.write_pod(static_cast<std::uint32_t>(dtype));
  w.write_pod(static_cast<std::uint32_t>(dims.size()));
  for (auto d : dims) w.write_pod(d);
  w.write(data, product(dims) * elem_size);
  const std::uint32_t final_crc = w.crc ^ 0xFFFFFFFFu;
  w.out.write(reinterpret_cast<const char*>(&final_crc), sizeof(final_crc));
  if (!w.out) throw io_error("write failed: " + path.string());
}

}  // namespace

std::uint64_t TensorData::element_count() const { return product(dims); }

std::uint32_t crc32(const void* data, std::size_t len, std::uint32_t seed) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  const auto& table = crc_table();
  std::uint32_t c = seed ^ 0xFFFFFFFFu;
  for (std::size_t i = 0; i < len; ++i) c = table[(c ^ bytes[i]) & 0xFF] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

void write_tensor(const std::filesystem::path& path, const std::vector<std::uint64_t>& dims,
                  const double* data) {
  write_impl(path, dims, Dtype::f64, data, sizeof(double));
}

void write_tensor(const std::filesystem::path& path, const std::vector<std::uint64_t>& dims,
                  const float* data) {
  write_impl(path, dims, Dtype::f32, data, sizeof(float));
}

TensorData read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open for reading: " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 4 + 4 + 4 + 4 + 4) throw io_error("truncated tensor file: " + path.string());

  const std::size_t body_len = bytes.size() - 4;
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, bytes.data() + body_len, 4);
  if (crc32(bytes.data(), body_len) != stored_crc)
    throw io_error("CRC mismatch in tensor file: " + path.string());

  std::size_t off = 0;
  auto take = [&](void* dst, std::size_t len) {
    if (off + len > body_len) throw io_error("truncated tensor file: " + path.string());
    std::memcpy(dst, bytes.data() + off, len);
    off += len;
  };

  char magic[4];
  take(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw io_error("bad magic in tensor file: " + path.string());
  std::uint32_t version, dtype_code, rank;
  take(&version, 4);
  if (version != kVersion) throw io_error("unsupported tensor file version: " + path.string());
  take(&dtype_code, 4);
  if (dtype_code != 1 && dtype_code != 2) throw io_error("bad dtype in tensor file: " + path.string());
  take(&rank, 4);

  TensorData t;
  t.dtype = static_cast<Dtype>(dtype_code);
  t.dims.resize(rank);
  for (auto& d : t.dims) take(&d, 8);

  const std::uint64_t n = t.element_count();
  const std::size_t elem = t.dtype == Dtype::f64 ? 8 : 4;
  if (off + n * elem != body_len) throw io_error("payload length mismatch: " + path.string());
  if (t.dtype == Dtype::f64) {
    t.f64.resize(n);
    take(t.f64.data(), n * elem);
  } else {
    t.f32.resize(n);
    take(t.f32.data(), n * elem);
  }
  return t;
}

std::vector<double> read_tensor_f64(const std::filesystem::path& path,
                                    std::vector<std::uint64_t>* dims_out) {
  TensorData t = read_tensor(path);
  if (t.dtype != Dtype::f64) throw io_error("expected f64 tensor: " + path.string());
  if (dims_out) *dims_out = t.dims;
  return std::move(t.f64);
}

std::vector<float> read_tensor_f32(const std::filesystem::path& path,
                                   std::vector<std::uint64_t>* dims_out) {
  TensorData t = read_tensor(path);
  if (t.dtype != Dtype::f32) throw io_error("expected f32 tensor: " + path.string());
  if (dims_out) *dims_out = t.dims;
  return std::move(t.f32);
}

}  // namespace aquinv::io
