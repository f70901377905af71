#include "ccan/attention.hpp"

#include <cmath>
#include <string>

#include "ccan/error.hpp"
#include "ccan/ops.hpp"

namespace ccan {

std::string_view to_string(AttentionKind kind) {
  switch (kind) {
    case AttentionKind::kCrossCorrelated: return "cross-correlated";
    case AttentionKind::kSymmetricSelf: return "symmetric-self";
    case AttentionKind::kNonLocal: return "non-local";
  }
  return "unknown";
}

std::size_t default_key_dim(std::size_t channels, std::size_t k_override) {
  if (k_override != 0) return k_override;
  if (channels == 0 || channels % 8 != 0) {
    throw ConfigError("attention: channel count " + std::to_string(channels) +
                      " is not divisible by 8; set an explicit key dimension");
  }
  return channels / 8;
}

namespace {

Scalar init_bound(std::size_t fan_in) { return static_cast<Scalar>(std::sqrt(1.0 / static_cast<double>(fan_in))); }

}  // namespace

AttentionWeights AttentionWeights::create(std::size_t m, std::size_t n, std::size_t c, Rng& rng,
                                          std::size_t k_override) {
  AttentionWeights w;
  w.m = m;
  w.n = n;
  w.c = c;
  w.k = default_key_dim(c, k_override);
  const std::size_t mn = m * n;
  w.w_f = uniform_tensor({w.k, c}, init_bound(c), rng);
  w.w_g = uniform_tensor({w.k, c}, init_bound(c), rng);
  w.w_h = uniform_tensor({w.k, c}, init_bound(c), rng);
  w.w_w = uniform_tensor({c, w.k}, init_bound(w.k), rng);
  w.w_alpha = uniform_tensor({2 * mn, mn}, init_bound(2 * mn), rng);
  return w;
}

AttentionWeights AttentionWeights::zeros(std::size_t m, std::size_t n, std::size_t c, std::size_t k_override) {
  AttentionWeights w;
  w.m = m;
  w.n = n;
  w.c = c;
  w.k = default_key_dim(c, k_override);
  w.w_f = Tensor::zeros({w.k, c});
  w.w_g = Tensor::zeros({w.k, c});
  w.w_h = Tensor::zeros({w.k, c});
  w.w_w = Tensor::zeros({c, w.k});
  w.w_alpha = Tensor::zeros({2 * m * n, m * n});
  return w;
}

AttentionWeights AttentionWeights::clone() const {
  AttentionWeights w = *this;
  w.w_f = w_f.clone();
  w.w_g = w_g.clone();
  w.w_h = w_h.clone();
  w.w_w = w_w.clone();
  w.w_alpha = w_alpha.clone();
  return w;
}

Tensor to_positional(const Tensor& q) {
  if (q.rank() != 3) throw DimensionError("to_positional: expected [M x N x C], got " + shape_str(q.shape()));
  return reshape(q, {q.dim(0) * q.dim(1), q.dim(2)});
}

Tensor from_positional(const Tensor& z, std::size_t m, std::size_t n) {
  if (z.rank() != 2 || z.dim(0) != m * n) {
    throw DimensionError("from_positional: " + shape_str(z.shape()) + " is not [" + std::to_string(m * n) +
                         " x C]");
  }
  return reshape(z, {m, n, z.dim(1)});
}

namespace {

void check_bound(const Tensor& q, const AttentionWeights& w, const char* what) {
  if (q.rank() != 2 || q.dim(0) != w.positions() || q.dim(1) != w.c) {
    throw DimensionError(std::string("attention: ") + what + " " + shape_str(q.shape()) +
                         " does not match the bound shape [" + std::to_string(w.positions()) + "x" +
                         std::to_string(w.c) + "]");
  }
}

// [g f^T, (g f^T)^T] written straight into one MN x 2MN buffer.
Tensor correlation_concat(const Tensor& g, const Tensor& f) {
  const std::size_t mn = g.dim(0), k = g.dim(1);
  Tensor out = Tensor::zeros({mn, 2 * mn});
  auto o = out.mutable_data();
  auto gv = g.data();
  auto fv = f.data();
  const std::size_t width = 2 * mn;
  for (std::size_t i = 0; i < mn; ++i) {
    for (std::size_t j = 0; j < mn; ++j) {
      Scalar acc = 0;
      for (std::size_t p = 0; p < k; ++p) acc += gv[i * k + p] * fv[j * k + p];
      o[i * width + j] = acc;
      o[j * width + mn + i] = acc;
    }
  }
  record_op({g, f}, out, [g, f, mn, k, width](std::span<const Scalar> grad, const GradSink& sink) {
    auto gv = g.data();
    auto fv = f.data();
    auto dg = sink[0];
    auto df = sink[1];
    for (std::size_t i = 0; i < mn; ++i) {
      for (std::size_t j = 0; j < mn; ++j) {
        // A'_ij appears at (i, j) and at (j, MN + i).
        const Scalar t = grad[i * width + j] + grad[j * width + mn + i];
        if (t == Scalar{0}) continue;
        if (!dg.empty())
          for (std::size_t p = 0; p < k; ++p) dg[i * k + p] += t * fv[j * k + p];
        if (!df.empty())
          for (std::size_t p = 0; p < k; ++p) df[j * k + p] += t * gv[i * k + p];
      }
    }
  });
  return out;
}

// z = relu((A . relu(h(q))) / MN . W_w^T) + q
Tensor aggregate(const Tensor& a, const Tensor& q, const AttentionWeights& w) {
  const Tensor h = relu(relu(linear(q, w.w_h)));
  const Tensor y = scale(matmul(a, h), Scalar{1} / static_cast<Scalar>(w.positions()));
  return add(relu(linear(y, w.w_w)), q);
}

}  // namespace

Tensor correlation_map(const Tensor& q, const Tensor& q_prime, const AttentionWeights& w) {
  check_bound(q, w, "q");
  check_bound(q_prime, w, "q'");
  const Tensor g = relu(linear(q, w.w_g));
  const Tensor f = relu(linear(q_prime, w.w_f));
  return linear(g, f);
}

Tensor attention_map(const Tensor& q, const Tensor& q_prime, const AttentionWeights& w) {
  check_bound(q, w, "q");
  check_bound(q_prime, w, "q'");
  const Tensor g = relu(linear(q, w.w_g));
  const Tensor f = relu(linear(q_prime, w.w_f));
  return relu(matmul(correlation_concat(g, f), w.w_alpha));
}

Tensor cca_forward(const Tensor& q, const Tensor& q_prime, const AttentionWeights& w) {
  return aggregate(attention_map(q, q_prime, w), q, w);
}

Tensor ssa_forward(const Tensor& q, const AttentionWeights& w) { return cca_forward(q, q, w); }

Tensor nonlocal_forward(const Tensor& q, const AttentionWeights& w) {
  return aggregate(correlation_map(q, q, w), q, w);
}

Tensor attend(AttentionKind kind, const Tensor& q, const Tensor& q_prime, const AttentionWeights& w) {
  switch (kind) {
    case AttentionKind::kCrossCorrelated: return cca_forward(q, q_prime, w);
    case AttentionKind::kSymmetricSelf: return ssa_forward(q, w);
    case AttentionKind::kNonLocal: return nonlocal_forward(q, w);
  }
  throw UsageError("attend: unknown attention kind");
}

}  // namespace ccan
