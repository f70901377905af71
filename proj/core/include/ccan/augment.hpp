#pragma once

#include <cstddef>
#include <optional>

#include "ccan/rng.hpp"
#include "ccan/tensor.hpp"

namespace ccan {

// Random-erasing parameters (probability, area fraction range, min aspect).
struct EraseConfig {
  double prob = 0.5;
  double area_lo = 0.02;
  double area_hi = 0.4;
  double aspect_lo = 0.3;
};

struct AugmentConfig {
  std::size_t resize_h = 72, resize_w = 36;
  std::size_t crop_h = 64, crop_w = 32;
  double hflip_prob = 0.5;
  EraseConfig erase;
  bool erase_enabled = false;

  void validate() const;
};

struct Rect {
  std::size_t y = 0, x = 0, h = 0, w = 0;
};

// Resize to resize_*, random crop to crop_*, random horizontal flip, then
// (if enabled) random erasing with per-pixel uniform noise.
Tensor augment(const Tensor& image, const AugmentConfig& config, Rng& rng);

// Test-time path: resize straight to crop_* with no randomness.
Tensor test_transform(const Tensor& image, const AugmentConfig& config);

Tensor hflip(const Tensor& image);
Tensor crop(const Tensor& image, std::size_t y, std::size_t x, std::size_t h, std::size_t w);

// Erases in place with probability config.prob; returns the rectangle used.
std::optional<Rect> random_erase(Tensor& image, const EraseConfig& config, Rng& rng);

}  // namespace ccan
