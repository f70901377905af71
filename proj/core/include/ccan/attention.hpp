#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "ccan/rng.hpp"
#include "ccan/tensor.hpp"

namespace ccan {

enum class AttentionKind { kCrossCorrelated, kSymmetricSelf, kNonLocal };

std::string_view to_string(AttentionKind kind);

// Learnable maps of one attention unit bound to an M x N x C feature map.
//
//   g(q)  = relu(q  . W_g^T)          [MN x K]
//   f(q') = relu(q' . W_f^T)          [MN x K]
//   h(q)  = relu(q  . W_h^T)          [MN x K]
//   A'    = g(q) . f(q')^T            [MN x MN]
//   A     = relu([A', A'^T] . W_alpha) [MN x MN]
//   y     = (A . relu(h(q))) / MN     [MN x K]
//   z     = relu(y . W_w^T) + q       [MN x C]
struct AttentionWeights {
  Tensor w_f;      // K x C
  Tensor w_g;      // K x C
  Tensor w_h;      // K x C
  Tensor w_w;      // C x K
  Tensor w_alpha;  // 2MN x MN
  std::size_t m = 0, n = 0, c = 0, k = 0;

  // K = C / 8 (C must be divisible by 8) unless `k_override` is nonzero.
  // Entries uniform in +-sqrt(1 / fan_in).
  static AttentionWeights create(std::size_t m, std::size_t n, std::size_t c, Rng& rng, std::size_t k_override = 0);
  static AttentionWeights zeros(std::size_t m, std::size_t n, std::size_t c, std::size_t k_override = 0);

  std::size_t positions() const noexcept { return m * n; }
  std::vector<Tensor> tensors() const { return {w_f, w_g, w_h, w_w, w_alpha}; }
  AttentionWeights clone() const;
};

std::size_t default_key_dim(std::size_t channels, std::size_t k_override = 0);

// [M x N x C] -> [MN x C], row i = Q(m, n, :) with i = m * N + n.
Tensor to_positional(const Tensor& q);
// Inverse of to_positional.
Tensor from_positional(const Tensor& z, std::size_t m, std::size_t n);

// A' = g(q) . f(q')^T.
Tensor correlation_map(const Tensor& q, const Tensor& q_prime, const AttentionWeights& w);

// A = relu([A', A'^T] . W_alpha).
Tensor attention_map(const Tensor& q, const Tensor& q_prime, const AttentionWeights& w);

Tensor cca_forward(const Tensor& q, const Tensor& q_prime, const AttentionWeights& w);
// cca_forward(q, q, w).
Tensor ssa_forward(const Tensor& q, const AttentionWeights& w);
// Same pipeline with A = A' = g(q) . f(q)^T (no concat, no alpha layer).
Tensor nonlocal_forward(const Tensor& q, const AttentionWeights& w);

// Dispatch on kind; `q_prime` is ignored by the single-input kinds.
Tensor attend(AttentionKind kind, const Tensor& q, const Tensor& q_prime, const AttentionWeights& w);

}  // namespace ccan
