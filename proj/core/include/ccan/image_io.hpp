#pragma once

#include <filesystem>

#include "ccan/tensor.hpp"

namespace ccan {

// Binary PPM (P6, maxval 255) to [H x W x 3] with values in [0, 1].
Tensor import_ppm(const std::filesystem::path& path);

// [H x W x 3], values clamped to [0, 1] and quantized to 8 bits.
void export_ppm(const std::filesystem::path& path, const Tensor& image);

// Reads .ccat records directly and .ppm through import_ppm.
Tensor load_image(const std::filesystem::path& path);

}  // namespace ccan
