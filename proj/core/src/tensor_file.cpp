#include "ccan/tensor_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include "ccan/error.hpp"

namespace ccan {
namespace {

static_assert(std::endian::native == std::endian::little, "TensorFile I/O assumes a little-endian host");

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  out.insert(out.end(), raw, raw + sizeof(T));
}

template <typename T>
T get(std::span<const std::uint8_t> bytes, std::size_t at) {
  T value;
  std::memcpy(&value, bytes.data() + at, sizeof(T));
  return value;
}

}  // namespace

Dtype native_dtype() noexcept { return sizeof(Scalar) == 4 ? Dtype::kF32 : Dtype::kF64; }

std::size_t dtype_size(Dtype dtype) noexcept { return dtype == Dtype::kF32 ? 4 : 8; }

std::vector<std::uint8_t> encode_tensor(const Tensor& t, Dtype dtype, bool allow_narrowing) {
  if (dtype == Dtype::kF32 && sizeof(Scalar) == 8 && !allow_narrowing) {
    throw UsageError("write_tensor: narrowing 64-bit data to binary32 requires allow_narrowing");
  }
  if (t.rank() == 0 || t.rank() > 255) throw UsageError("write_tensor: rank must lie in [1, 255]");
  std::vector<std::uint8_t> out;
  out.reserve(8 + 4 * t.rank() + t.numel() * dtype_size(dtype));
  out.insert(out.end(), {'C', 'C', 'A', 'T'});
  put<std::uint16_t>(out, kTensorFileVersion);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(dtype));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
  for (auto extent : t.shape()) {
    if (extent > 0xffffffffULL) throw UsageError("write_tensor: extent exceeds u32");
    put<std::uint32_t>(out, static_cast<std::uint32_t>(extent));
  }
  for (auto v : t.data()) {
    if (dtype == Dtype::kF32) {
      put<float>(out, static_cast<float>(v));
    } else {
      put<double>(out, static_cast<double>(v));
    }
  }
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes, std::size_t base, std::size_t* consumed) {
  auto fail = [&](const std::string& what, std::size_t at) -> FormatError { return FormatError(what, base + at); };
  if (bytes.size() < 8) throw fail("truncated header: need 8 bytes, have " + std::to_string(bytes.size()), bytes.size());
  if (std::memcmp(bytes.data(), "CCAT", 4) != 0) throw fail("bad magic (expected \"CCAT\")", 0);
  const auto version = get<std::uint16_t>(bytes, 4);
  if (version != kTensorFileVersion) throw fail("unsupported version " + std::to_string(version), 4);
  const auto dtype_code = get<std::uint8_t>(bytes, 6);
  if (dtype_code > 1) throw fail("unknown dtype code " + std::to_string(dtype_code), 6);
  const auto dtype = static_cast<Dtype>(dtype_code);
  const auto rank = get<std::uint8_t>(bytes, 7);
  if (rank == 0) throw fail("rank must be >= 1", 7);
  const std::size_t header = 8 + 4 * static_cast<std::size_t>(rank);
  if (bytes.size() < header) {
    throw fail("truncated extents: header needs " + std::to_string(header) + " bytes, have " +
                   std::to_string(bytes.size()),
               bytes.size());
  }
  Shape shape;
  for (std::size_t i = 0; i < rank; ++i) {
    const auto extent = get<std::uint32_t>(bytes, 8 + 4 * i);
    if (extent == 0) throw fail("zero extent on axis " + std::to_string(i), 8 + 4 * i);
    shape.push_back(extent);
  }
  const std::size_t expected = shape_numel(shape) * dtype_size(dtype);
  const std::size_t available = bytes.size() - header;
  if (available < expected) {
    throw fail("truncated payload: expected " + std::to_string(expected) + " bytes, found " + std::to_string(available),
               bytes.size());
  }
  std::vector<Scalar> values(shape_numel(shape));
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (dtype == Dtype::kF32) {
      values[i] = static_cast<Scalar>(get<float>(bytes, header + 4 * i));
    } else {
      values[i] = static_cast<Scalar>(get<double>(bytes, header + 8 * i));
    }
  }
  if (consumed) *consumed = header + expected;
  return Tensor::from(std::move(shape), std::move(values));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string() + " for reading");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write to " + path.string() + " failed");
}

void write_tensor(const std::filesystem::path& path, const Tensor& t, Dtype dtype, bool allow_narrowing) {
  write_file_bytes(path, encode_tensor(t, dtype, allow_narrowing));
}

Tensor read_tensor(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  std::size_t used = 0;
  Tensor t = decode_tensor(bytes, 0, &used);
  if (used != bytes.size()) {
    throw FormatError("trailing data: record is " + std::to_string(used) + " bytes, file is " +
                          std::to_string(bytes.size()),
                      used);
  }
  return t;
}

}  // namespace ccan
