#include "ccan/rng.hpp"

namespace ccan {

std::uint64_t tag_hash(std::string_view tag) noexcept {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view tag) noexcept {
  std::uint64_t z = root + tag_hash(tag) + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Tensor uniform_tensor(Shape shape, Scalar bound, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  std::uniform_real_distribution<double> dist(-static_cast<double>(bound), static_cast<double>(bound));
  for (auto& v : t.mutable_data()) v = static_cast<Scalar>(dist(rng));
  return t;
}

Tensor normal_tensor(Shape shape, Scalar stddev, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  std::normal_distribution<double> dist(0.0, static_cast<double>(stddev));
  for (auto& v : t.mutable_data()) v = static_cast<Scalar>(dist(rng));
  return t;
}

}  // namespace ccan
