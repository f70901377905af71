#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "ccan/tensor.hpp"

namespace ccan {

using Rng = std::mt19937_64;

// 64-bit FNV-1a of a component tag.
std::uint64_t tag_hash(std::string_view tag) noexcept;

// Seed for one component: splitmix64(root + tag_hash(tag)). Each component
// (init, sampler, augment, synth, ...) gets an independent stream so changing
// how much randomness one consumes never shifts another.
std::uint64_t derive_seed(std::uint64_t root, std::string_view tag) noexcept;

inline Rng make_rng(std::uint64_t root, std::string_view tag) { return Rng(derive_seed(root, tag)); }

// Uniform in [-bound, bound].
Tensor uniform_tensor(Shape shape, Scalar bound, Rng& rng);
Tensor normal_tensor(Shape shape, Scalar stddev, Rng& rng);

}  // namespace ccan
