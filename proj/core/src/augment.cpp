#include "ccan/augment.hpp"

#include <cmath>
#include <string>

#include "ccan/error.hpp"
#include "ccan/ops.hpp"
#include "ccan/tape.hpp"

namespace ccan {

void AugmentConfig::validate() const {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError("augment config: " + msg);
  };
  need(crop_h >= 1 && crop_w >= 1, "crop extents must be positive");
  need(crop_h <= resize_h && crop_w <= resize_w, "crop_to must not exceed resize_to");
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  need(prob(hflip_prob) && prob(erase.prob), "probabilities must lie in [0, 1]");
  need(erase.area_lo > 0.0 && erase.area_lo <= erase.area_hi && erase.area_hi <= 1.0, "erase area range invalid");
  need(erase.aspect_lo > 0.0 && erase.aspect_lo <= 1.0, "erase aspect_lo must lie in (0, 1]");
}

Tensor hflip(const Tensor& image) {
  if (image.rank() != 3) throw DimensionError("hflip: expected [H x W x C], got " + shape_str(image.shape()));
  const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
  Tensor out = Tensor::zeros(image.shape());
  auto o = out.mutable_data();
  auto in = image.data();
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t k = 0; k < c; ++k) o[(y * w + x) * c + k] = in[(y * w + (w - 1 - x)) * c + k];
  return out;
}

Tensor crop(const Tensor& image, std::size_t y, std::size_t x, std::size_t h, std::size_t w) {
  NoGradScope plain;
  return slice(slice(image, 0, y, y + h), 1, x, x + w);
}

std::optional<Rect> random_erase(Tensor& image, const EraseConfig& config, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (unit(rng) >= config.prob) return std::nullopt;
  const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
  const double area = static_cast<double>(h * w);
  std::uniform_real_distribution<double> area_dist(config.area_lo, config.area_hi);
  std::uniform_real_distribution<double> log_aspect(std::log(config.aspect_lo), std::log(1.0 / config.aspect_lo));
  for (int attempt = 0; attempt < 100; ++attempt) {
    const double target = area_dist(rng) * area;
    const double aspect = std::exp(log_aspect(rng));
    const auto eh = static_cast<std::size_t>(std::lround(std::sqrt(target * aspect)));
    const auto ew = static_cast<std::size_t>(std::lround(std::sqrt(target / aspect)));
    if (eh == 0 || ew == 0 || eh >= h || ew >= w) continue;
    std::uniform_int_distribution<std::size_t> py(0, h - eh), px(0, w - ew);
    Rect r{py(rng), px(rng), eh, ew};
    auto d = image.mutable_data();
    for (std::size_t y = r.y; y < r.y + r.h; ++y)
      for (std::size_t x = r.x; x < r.x + r.w; ++x)
        for (std::size_t k = 0; k < c; ++k) d[(y * w + x) * c + k] = static_cast<Scalar>(unit(rng));
    return r;
  }
  return std::nullopt;
}

Tensor augment(const Tensor& image, const AugmentConfig& config, Rng& rng) {
  NoGradScope plain;
  Tensor out = image;
  if (image.dim(0) != config.resize_h || image.dim(1) != config.resize_w) {
    out = bilinear_resize(image, config.resize_h, config.resize_w);
  }
  if (config.crop_h != config.resize_h || config.crop_w != config.resize_w) {
    std::uniform_int_distribution<std::size_t> py(0, config.resize_h - config.crop_h);
    std::uniform_int_distribution<std::size_t> px(0, config.resize_w - config.crop_w);
    const std::size_t y = py(rng);
    const std::size_t x = px(rng);
    out = crop(out, y, x, config.crop_h, config.crop_w);
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (unit(rng) < config.hflip_prob) out = hflip(out);
  if (config.erase_enabled) {
    if (out.id() == image.id()) out = out.clone();
    random_erase(out, config.erase, rng);
  }
  return out;
}

Tensor test_transform(const Tensor& image, const AugmentConfig& config) {
  NoGradScope plain;
  if (image.dim(0) == config.crop_h && image.dim(1) == config.crop_w) return image;
  return bilinear_resize(image, config.crop_h, config.crop_w);
}

}  // namespace ccan
