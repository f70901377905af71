#include <cmath>
#include <cstring>

#include "ccan/attention.hpp"
#include "ccan/error.hpp"
#include "ccan/gradcheck.hpp"
#include "ccan/ops.hpp"
#include "checks.hpp"
#include "doctest.h"
#include "oracle.hpp"

using namespace ccan;

TEST_CASE("attention invariants hold over 120 seeded instances") {
  const auto v = checks::attention_invariants(120);
  INFO(v.detail);
  CHECK(v.pass);
}

TEST_CASE("zero weights: A = 0 and z = q") {
  Rng rng = make_rng(0, "test.attention");
  const auto w = AttentionWeights::zeros(2, 2, 8);
  const Tensor q = normal_tensor({4, 8}, 1, rng);
  const Tensor a = attention_map(q, q, w);
  for (Scalar v : a.data()) CHECK(v == 0);
  CHECK(oracle::to_vec(cca_forward(q, q, w)) == oracle::to_vec(q));
}

TEST_CASE("zero input gives zero output") {
  Rng rng = make_rng(2, "test.attention");
  const auto w = AttentionWeights::create(2, 2, 8, rng);
  const Tensor z = ssa_forward(Tensor::zeros({4, 8}), w);
  for (Scalar v : z.data()) CHECK(v == 0);
}

TEST_CASE("non-local differs from SSA for generic weights") {
  Rng rng = make_rng(0, "test.attention");
  const auto w = AttentionWeights::create(2, 2, 8, rng);
  const Tensor q = normal_tensor({4, 8}, 1, rng);
  CHECK(oracle::to_vec(nonlocal_forward(q, w)) != oracle::to_vec(ssa_forward(q, w)));
  CHECK(oracle::to_vec(attend(AttentionKind::kNonLocal, q, q, w)) == oracle::to_vec(nonlocal_forward(q, w)));
}

TEST_CASE("key dimension and binding checks") {
  CHECK(default_key_dim(64) == 8);
  CHECK(default_key_dim(12, 3) == 3);
  CHECK_THROWS_AS(default_key_dim(12), ConfigError);
  Rng rng = make_rng(0, "test.attention");
  const auto w = AttentionWeights::create(2, 2, 8, rng);
  CHECK(w.w_alpha.shape() == Shape{8, 4});
  CHECK(w.w_f.shape() == Shape{1, 8});
  CHECK_THROWS_AS(cca_forward(Tensor::zeros({5, 8}), Tensor::zeros({5, 8}), w), DimensionError);
}

TEST_CASE("positional flattening round trip") {
  Rng rng = make_rng(3, "test.attention");
  const Tensor x = normal_tensor({3, 2, 4}, 1, rng);
  const Tensor q = to_positional(x);
  CHECK(q.shape() == Shape{6, 4});
  CHECK(q.at({3, 1}) == x.at({1, 1, 1}));
  CHECK(oracle::to_vec(from_positional(q, 3, 2)) == oracle::to_vec(x));
}

TEST_CASE("attention map allocates no MN x MN buffers beyond the documented three") {
  Rng rng = make_rng(4, "test.attention");
  const auto w = AttentionWeights::create(3, 2, 16, rng);
  const Tensor q = normal_tensor({6, 16}, 1, rng);
  debug::AllocationRecorder rec;
  (void)attention_map(q, q, w);
  CHECK(rec.count({6, 12}) == 1);
  CHECK(rec.count({6, 6}) == 2);
}

TEST_CASE("attention gradients match central differences") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Rng rng = make_rng(seed, "test.attention.grad");
    auto w = AttentionWeights::create(2, 2, 8, rng, 2);
    Tensor q = normal_tensor({4, 8}, 1, rng), qp = normal_tensor({4, 8}, 1, rng);
    std::vector<Tensor> inputs{q, qp};
    for (const auto& t : w.tensors()) inputs.push_back(t);
    GradCheckOptions opt;
    opt.max_coords_per_input = 8;
    opt.seed = seed;
    const auto rep = grad_check([&] { const Tensor z = cca_forward(q, qp, w); return sum(hadamard(z, z)); }, inputs, opt);
    INFO(rep.describe());
    CHECK(rep.pass);
  }
}
