#include "ccan/objective.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "ccan/error.hpp"
#include "ccan/ops.hpp"
#include "ccan/tape.hpp"

namespace ccan {

Tensor lsr_cross_entropy(const Tensor& logits, std::span<const int> labels, double epsilon) {
  if (logits.rank() != 2) throw DimensionError("lsr_cross_entropy: logits must be [B x K], got " + shape_str(logits.shape()));
  const std::size_t b = logits.dim(0), k = logits.dim(1);
  if (labels.size() != b) {
    throw UsageError("lsr_cross_entropy: " + std::to_string(labels.size()) + " labels for batch of " + std::to_string(b));
  }
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw UsageError("lsr_cross_entropy: epsilon must lie in [0, 1)");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw UsageError("lsr_cross_entropy: label " + std::to_string(y) + " outside [0, " + std::to_string(k) + ")");
    }
  }
  const double off = epsilon / static_cast<double>(k);
  auto z = logits.data();
  std::vector<Scalar> probs(b * k);
  double total = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    const Scalar* row = z.data() + i * k;
    const double mx = *std::max_element(row, row + k);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += std::exp(static_cast<double>(row[j]) - mx);
    const double lse = mx + std::log(s);
    double loss = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double logp = static_cast<double>(row[j]) - lse;
      const double target = off + (static_cast<std::size_t>(labels[i]) == j ? 1.0 - epsilon : 0.0);
      loss -= target * logp;
      probs[i * k + j] = static_cast<Scalar>(std::exp(logp));
    }
    total += loss;
  }
  Tensor out = Tensor::scalar(static_cast<Scalar>(total / static_cast<double>(b)));
  std::vector<int> y(labels.begin(), labels.end());
  record_op({logits}, out,
            [probs = std::move(probs), y = std::move(y), b, k, epsilon, off](std::span<const Scalar> g,
                                                                          const GradSink& sink) {
              auto gl = sink[0];
              const double scale = static_cast<double>(g[0]) / static_cast<double>(b);
              for (std::size_t i = 0; i < b; ++i)
                for (std::size_t j = 0; j < k; ++j) {
                  const double target = off + (static_cast<std::size_t>(y[i]) == j ? 1.0 - epsilon : 0.0);
                  gl[i * k + j] += static_cast<Scalar>(scale * (static_cast<double>(probs[i * k + j]) - target));
                }
            });
  return out;
}

Tensor pairwise_sq_distances(const Tensor& emb) {
  if (emb.rank() != 2) throw DimensionError("pairwise_sq_distances: expected [B x d], got " + shape_str(emb.shape()));
  const std::size_t b = emb.dim(0), d = emb.dim(1);
  Tensor out = Tensor::zeros({b, b});
  auto o = out.mutable_data();
  auto e = emb.data();
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = i + 1; j < b; ++j) {
      Scalar acc = 0;
      for (std::size_t p = 0; p < d; ++p) {
        const Scalar diff = e[i * d + p] - e[j * d + p];
        acc += diff * diff;
      }
      acc = std::max(acc, Scalar{0});
      o[i * b + j] = acc;
      o[j * b + i] = acc;
    }
  record_op({emb}, out, [emb, b, d](std::span<const Scalar> g, const GradSink& sink) {
    auto ge = sink[0];
    auto e = emb.data();
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t j = 0; j < b; ++j) {
        if (i == j) continue;
        const Scalar w = 2 * g[i * b + j];
        if (w == Scalar{0}) continue;
        for (std::size_t p = 0; p < d; ++p) {
          const Scalar diff = e[i * d + p] - e[j * d + p];
          ge[i * d + p] += w * diff;
          ge[j * d + p] -= w * diff;
        }
      }
  });
  return out;
}

TripletSet mine_semihard(const Tensor& distances, std::span<const int> labels, std::size_t r) {
  if (r == 0) throw UsageError("mine_semihard: r must be >= 1");
  if (distances.rank() != 2 || distances.dim(0) != distances.dim(1) || distances.dim(0) != labels.size()) {
    throw DimensionError("mine_semihard: distances " + shape_str(distances.shape()) + " do not match " +
                         std::to_string(labels.size()) + " labels");
  }
  const std::size_t b = labels.size();
  auto dv = distances.data();
  TripletSet set;
  std::vector<std::size_t> candidates;
  for (std::size_t a = 0; a < b; ++a) {
    for (std::size_t p = 0; p < b; ++p) {
      if (p == a || labels[p] != labels[a]) continue;
      const Scalar d_ap = dv[a * b + p];
      candidates.clear();
      for (std::size_t j = 0; j < b; ++j) {
        if (labels[j] != labels[a] && d_ap < dv[a * b + j]) candidates.push_back(j);
      }
      std::sort(candidates.begin(), candidates.end(), [&](std::size_t x, std::size_t y) {
        const Scalar dx = dv[a * b + x], dy = dv[a * b + y];
        return dx < dy || (dx == dy && x < y);
      });
      const std::size_t take = std::min(r, candidates.size());
      for (std::size_t t = 0; t < take; ++t) {
        const std::size_t n = candidates[t];
        set.triplets.push_back({a, p, n, static_cast<double>(d_ap), static_cast<double>(dv[a * b + n])});
      }
    }
  }
  if (KinkMonitor::active()) {
    KinkMonitor::note(set.size());
    for (const auto& t : set.triplets) KinkMonitor::note((t.anchor << 40) ^ (t.positive << 20) ^ t.negative);
  }
  return set;
}

Tensor triplet_loss(const Tensor& distances, const TripletSet& triplets, double tau) {
  if (!(tau > 0.0)) throw UsageError("triplet_loss: margin tau must be > 0");
  if (distances.rank() != 2 || distances.dim(0) != distances.dim(1)) {
    throw DimensionError("triplet_loss: distances must be square, got " + shape_str(distances.shape()));
  }
  const std::size_t b = distances.dim(0);
  auto dv = distances.data();
  std::vector<const Triplet*> active;
  double total = 0.0;
  for (const auto& t : triplets.triplets) {
    if (t.anchor >= b || t.positive >= b || t.negative >= b) throw UsageError("triplet_loss: triplet index out of range");
    const double margin = static_cast<double>(dv[t.anchor * b + t.positive]) -
                          static_cast<double>(dv[t.anchor * b + t.negative]) + tau;
    const bool on = margin > 0.0;
    if (KinkMonitor::active()) KinkMonitor::note(on ? 1 : 0);
    if (on) {
      total += margin;
      active.push_back(&t);
    }
  }
  const double count = static_cast<double>(triplets.size());
  Tensor out = Tensor::scalar(triplets.empty() ? Scalar{0} : static_cast<Scalar>(total / count));
  if (triplets.empty()) return out;
  std::vector<Triplet> hits;
  for (const auto* t : active) hits.push_back(*t);
  record_op({distances}, out, [hits = std::move(hits), b, count](std::span<const Scalar> g, const GradSink& sink) {
    auto gd = sink[0];
    const Scalar w = static_cast<Scalar>(static_cast<double>(g[0]) / count);
    for (const auto& t : hits) {
      gd[t.anchor * b + t.positive] += w;
      gd[t.anchor * b + t.negative] -= w;
    }
  });
  return out;
}

Tensor stack_rows(std::span<const Tensor> vectors) {
  if (vectors.empty()) throw UsageError("stack_rows: no rows");
  std::vector<Tensor> rows;
  rows.reserve(vectors.size());
  for (const auto& v : vectors) rows.push_back(reshape(v, {1, v.numel()}));
  return concat(rows, 0);
}

namespace {

struct HeadLoss {
  Tensor ce, tri;
  std::size_t mined = 0;
};

HeadLoss head_loss(std::span<const Tensor> embeddings, std::span<const Tensor> logits, std::span<const int> labels,
                   const LossConfig& config) {
  const Tensor ce = lsr_cross_entropy(stack_rows(logits), labels, config.epsilon);
  const Tensor d = pairwise_sq_distances(stack_rows(embeddings));
  const TripletSet mined = mine_semihard(d, labels, config.r);
  return {ce, triplet_loss(d, mined, config.tau), mined.size()};
}

}  // namespace

TotalLoss total_loss(std::span<const ForwardOutputs> outputs, std::span<const int> labels, const LossConfig& config) {
  if (outputs.empty() || outputs.size() != labels.size()) {
    throw UsageError("total_loss: " + std::to_string(outputs.size()) + " outputs for " + std::to_string(labels.size()) +
                     " labels");
  }
  const bool has_g = outputs.front().f_g.defined();
  const bool has_l = outputs.front().f_l.defined();
  if (!has_g && !has_l) throw UsageError("total_loss: outputs carry neither head");

  TotalLoss result;
  Tensor total;
  auto accumulate = [&](const Tensor& term) { total = total.defined() ? add(total, term) : term; };
  auto gather = [&](auto member) {
    std::vector<Tensor> v;
    for (const auto& o : outputs) {
      if (!(o.*member).defined()) throw UsageError("total_loss: outputs disagree on the active heads");
      v.push_back(o.*member);
    }
    return v;
  };

  if (has_g) {
    const auto h = head_loss(gather(&ForwardOutputs::f_g), gather(&ForwardOutputs::logits_g), labels, config);
    result.breakdown.ce_g = static_cast<double>(h.ce.item());
    result.breakdown.tri_g = static_cast<double>(h.tri.item());
    result.triplets += h.mined;
    accumulate(h.ce);
    accumulate(h.tri);
  }
  if (has_l) {
    const auto h = head_loss(gather(&ForwardOutputs::f_l), gather(&ForwardOutputs::logits_l), labels, config);
    result.breakdown.ce_l = static_cast<double>(h.ce.item());
    result.breakdown.tri_l = static_cast<double>(h.tri.item());
    result.triplets += h.mined;
    accumulate(h.ce);
    accumulate(h.tri);
  }
  result.total = total;
  result.breakdown.total = static_cast<double>(total.item());
  return result;
}

std::vector<std::size_t> pk_sample(std::span<const int> labels, std::size_t v, std::size_t batch, Rng& rng) {
  if (v == 0 || batch == 0 || batch % v != 0) {
    throw ConfigError("pk_sample: batch " + std::to_string(batch) + " is not divisible by v=" + std::to_string(v));
  }
  std::map<int, std::vector<std::size_t>> by_id;
  for (std::size_t i = 0; i < labels.size(); ++i) by_id[labels[i]].push_back(i);
  if (by_id.size() < v) {
    throw ConfigError("pk_sample: need " + std::to_string(v) + " identities, split has " + std::to_string(by_id.size()));
  }
  std::vector<int> ids;
  for (const auto& [id, _] : by_id) ids.push_back(id);
  std::shuffle(ids.begin(), ids.end(), rng);
  const std::size_t per_id = batch / v;
  std::vector<std::size_t> out;
  out.reserve(batch);
  for (std::size_t k = 0; k < v; ++k) {
    auto pool = by_id[ids[k]];
    if (pool.size() >= per_id) {
      std::shuffle(pool.begin(), pool.end(), rng);
      out.insert(out.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(per_id));
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      for (std::size_t j = 0; j < per_id; ++j) out.push_back(pool[pick(rng)]);
    }
  }
  return out;
}

}  // namespace ccan
