#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace aquinv::io {

// AQTN binary tensor file:
//   magic "AQTN" | u32 version (1) | u32 dtype (1=f64, 2=f32) | u32 rank
//   | u64 dims[rank] | little-endian payload | u32 crc32 (header+payload)
// CRC is IEEE 802.3 (poly 0xEDB88320), verified on load.

enum class Dtype : std::uint32_t { f64 = 1, f32 = 2 };

struct TensorData {
  Dtype dtype = Dtype::f64;
  std::vector<std::uint64_t> dims;
  std::vector<double> f64;  // filled when dtype == f64
  std::vector<float> f32;   // filled when dtype == f32

  std::uint64_t element_count() const;
};

std::uint32_t crc32(const void* data, std::size_t len, std::uint32_t seed = 0);

void write_tensor(const std::filesystem::path& path, const std::vector<std::uint64_t>& dims,
                  const double* data);
void write_tensor(const std::filesystem::path& path, const std::vector<std::uint64_t>& dims,
                  const float* data);

TensorData read_tensor(const std::filesystem::path& path);

// Convenience: read and require a dtype, converting is an error.
std::vector<double> read_tensor_f64(const std::filesystem::path& path,
                                    std::vector<std::uint64_t>* dims_out = nullptr);
std::vector<float> read_tensor_f32(const std::filesystem::path& path,
                                   std::vector<std::uint64_t>* dims_out = nullptr);

}  // namespace aquinv::io
