#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ccan/tensor.hpp"

// TensorFile layout (all multi-byte fields little-endian):
//
//   offset  size      field
//   0       4         magic "CCAT"
//   4       2         version (u16, currently 1)
//   6       1         dtype (u8: 0 = IEEE-754 binary32, 1 = binary64)
//   7       1         rank (u8, >= 1)
//   8       4 * rank  extents (u32 each, > 0)
//   ...               payload, row-major, product(extents) * dtype size bytes
namespace ccan {

enum class Dtype : std::uint8_t { kF32 = 0, kF64 = 1 };

inline constexpr std::uint16_t kTensorFileVersion = 1;

Dtype native_dtype() noexcept;
std::size_t dtype_size(Dtype dtype) noexcept;

// Writing binary32 from a binary64 build loses precision and must be asked for
// with allow_narrowing; otherwise UsageError.
std::vector<std::uint8_t> encode_tensor(const Tensor& t, Dtype dtype = native_dtype(), bool allow_narrowing = false);

// Decodes one record starting at bytes[0]. Errors carry absolute offsets
// (base_offset + position). `consumed` receives the record length.
Tensor decode_tensor(std::span<const std::uint8_t> bytes, std::size_t base_offset = 0, std::size_t* consumed = nullptr);

void write_tensor(const std::filesystem::path& path, const Tensor& t, Dtype dtype = native_dtype(),
                  bool allow_narrowing = false);

// Whole file must be exactly one record.
Tensor read_tensor(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace ccan
