#include "ccan/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "ccan/error.hpp"
#include "ccan/tensor_file.hpp"

namespace ccan {
namespace {

// Parses one whitespace-delimited header integer, skipping '#' comments.
std::size_t header_int(const std::vector<std::uint8_t>& bytes, std::size_t& pos, std::size_t* at = nullptr) {
  while (pos < bytes.size()) {
    if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(bytes[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  if (at) *at = start;
  std::size_t value = 0;
  while (pos < bytes.size() && std::isdigit(bytes[pos])) {
    value = value * 10 + (bytes[pos] - '0');
    if (value > 1u << 20) throw FormatError("PPM header value too large", start);
    ++pos;
  }
  if (pos == start) throw FormatError("expected integer in PPM header", start);
  return value;
}

}  // namespace

Tensor import_ppm(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') throw FormatError("not a binary PPM (expected P6)", 0);
  std::size_t pos = 2;
  std::size_t w_at = 0, h_at = 0;
  const std::size_t w = header_int(bytes, pos, &w_at);
  const std::size_t h = header_int(bytes, pos, &h_at);
  std::size_t maxval_at = 0;
  const std::size_t maxval = header_int(bytes, pos, &maxval_at);
  if (maxval != 255) throw FormatError("unsupported PPM maxval " + std::to_string(maxval), maxval_at);
  if (w == 0) throw FormatError("PPM width is zero", w_at);
  if (h == 0) throw FormatError("PPM height is zero", h_at);
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw FormatError("missing PPM header terminator", pos);
  ++pos;
  const std::size_t need = w * h * 3;
  if (bytes.size() - pos < need) {
    throw FormatError("truncated PPM payload: expected " + std::to_string(need) + " bytes", bytes.size());
  }
  std::vector<Scalar> values(need);
  for (std::size_t i = 0; i < need; ++i) values[i] = static_cast<Scalar>(bytes[pos + i]) / Scalar(255);
  return Tensor::from({h, w, 3}, std::move(values));
}

void export_ppm(const std::filesystem::path& path, const Tensor& image) {
  if (image.rank() != 3 || image.dim(2) != 3) {
    throw DimensionError("export_ppm: expected [H x W x 3], got " + shape_str(image.shape()));
  }
  const std::string header = "P6\n" + std::to_string(image.dim(1)) + " " + std::to_string(image.dim(0)) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  for (auto v : image.data()) {
    const double c = std::clamp(static_cast<double>(v), 0.0, 1.0);
    out.push_back(static_cast<std::uint8_t>(std::lround(c * 255.0)));
  }
  write_file_bytes(path, out);
}

Tensor load_image(const std::filesystem::path& path) {
  if (path.extension() == ".ppm") return import_ppm(path);
  return read_tensor(path);
}

}  // namespace ccan
