#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ccan/network.hpp"
#include "ccan/rng.hpp"
#include "ccan/tensor.hpp"

namespace ccan {

struct Triplet {
  std::size_t anchor = 0, positive = 0, negative = 0;
  double d_ap = 0.0, d_an = 0.0;
  bool operator==(const Triplet&) const = default;
};

struct TripletSet {
  std::vector<Triplet> triplets;
  std::size_t size() const noexcept { return triplets.size(); }
  bool empty() const noexcept { return triplets.empty(); }
};

// Every term >= 0; total == ce_g + tri_g + ce_l + tri_l.
struct LossBreakdown {
  double ce_g = 0.0, tri_g = 0.0, ce_l = 0.0, tri_l = 0.0, total = 0.0;
};

struct LossConfig {
  double epsilon = 0.1;  // label smoothing
  double tau = 1.0;      // triplet margin
  std::size_t r = 10;    // semi-hard negatives per anchor-positive pair
};

// Mean over the batch of the cross-entropy against (1 - eps) one-hot + eps / K.
// logits [B x K]; labels in [0, K).
Tensor lsr_cross_entropy(const Tensor& logits, std::span<const int> labels, double epsilon);

// emb [B x d] -> [B x B] squared Euclidean distances; symmetric, zero diagonal.
Tensor pairwise_sq_distances(const Tensor& emb);

// For each ordered anchor-positive pair (a, p), the up-to-r negatives j with
// D[a][p] < D[a][j], nearest first, lower index first on equal distance.
TripletSet mine_semihard(const Tensor& distances, std::span<const int> labels, std::size_t r);

// (1/|P|) sum [D_ap - D_an + tau]_+ over the mined triplets; 0 when |P| = 0.
Tensor triplet_loss(const Tensor& distances, const TripletSet& triplets, double tau);

struct TotalLoss {
  Tensor total;
  LossBreakdown breakdown;
  std::size_t triplets = 0;  // mined over both heads
};

// Both heads present in `outputs` contribute a cross-entropy and a triplet
// term; masked-out heads contribute zero.
TotalLoss total_loss(std::span<const ForwardOutputs> outputs, std::span<const int> labels, const LossConfig& config);

// Rows of `vectors` ([d] each) stacked into [B x d].
Tensor stack_rows(std::span<const Tensor> vectors);

// v distinct identities x batch / v samples each, grouped by identity.
// Identities with fewer than batch / v samples are drawn with replacement.
std::vector<std::size_t> pk_sample(std::span<const int> labels, std::size_t v, std::size_t batch, Rng& rng);

}  // namespace ccan
