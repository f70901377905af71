#include <cmath>
#include <map>
#include <set>

#include "ccan/error.hpp"
#include "ccan/network.hpp"
#include "ccan/ops.hpp"
#include "ccan/rng.hpp"
#include "ccan/verification.hpp"
#include "doctest.h"
#include "oracle.hpp"

using namespace ccan;

namespace {

double max_abs_diff(std::span<const Scalar> a, const std::vector<Scalar>& b) {
  REQUIRE(a.size() == b.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) worst = std::max(worst, std::abs(double(a[i]) - double(b[i])));
  return worst;
}

}  // namespace

TEST_CASE("toy topology extents") {
  const ModelConfig cfg;
  const auto e = cfg.extents();
  CHECK(e.h0 == 16);
  CHECK(e.w0 == 8);
  CHECK(e.h1 * e.w1 == 128);
  CHECK(e.h2 * e.w2 == 32);
  CHECK(e.h1 % cfg.k_p == 0);
  CHECK(e.h2 % cfg.k_p == 0);

  Rng rng = make_rng(0, "test.network");
  const auto model = CcanModel::create(cfg, 1);
  const auto out = model.forward(uniform_tensor({64, 32, 3}, 1, rng), true);
  CHECK(out.z1.shape() == Shape{16, 8, 32});
  CHECK(out.z2.shape() == Shape{8, 4, 64});
  CHECK(out.f_g.shape() == Shape{64});
  CHECK(out.f_l.shape() == Shape{64});
  CHECK(out.logits_g.shape() == Shape{16});
  CHECK(out.part_vectors.size() == 4);
}

TEST_CASE("inconsistent topologies are configuration errors") {
  ModelConfig cfg;
  cfg.k_p = 3;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = ModelConfig{};
  cfg.d = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_THROWS_AS(AblationMask::from_setting("G+X"), ConfigError);
  CHECK_THROWS_AS(slice_parts(Tensor::zeros({6, 2, 1}), 4), ConfigError);
}

TEST_CASE("backbone block matches the straight-line oracle") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    Rng rng = make_rng(s, "test.block");
    const std::size_t h = 2 + 2 * (s % 3), w = 2 + 2 * (s % 2), cin = 1 + s % 3, cout = 4 + 2 * (s % 2);
    const bool pool = s % 2 == 0;
    auto p = make_block(cin, cout, pool, s);
    // Nonzero biases exercise the bias path.
    p.path1_bias = normal_tensor(p.path1_bias.shape(), 0.5, rng);
    p.path2_bias = normal_tensor(p.path2_bias.shape(), 0.5, rng);
    const Tensor x = normal_tensor({h, w, cin}, 1, rng);
    const auto want = oracle::backbone_block(oracle::to_vec(x), h, w, cin, oracle::to_vec(p.path1_kernels),
                                             oracle::to_vec(p.path1_bias), p.path1_kernels.dim(3),
                                             oracle::to_vec(p.path2_kernels), oracle::to_vec(p.path2_bias),
                                             p.path2_kernels.dim(3), pool);
    const Tensor y = backbone_block_forward(x, p);
    CHECK(y.dim(2) == cout);
    CHECK(max_abs_diff(y.data(), want) <= 1e-12);
  }
}

TEST_CASE("slice_parts resizes each strip back to full height") {
  Rng rng = make_rng(5, "test.slice");
  const Tensor z = normal_tensor({8, 4, 3}, 1, rng);
  const auto parts = slice_parts(z, 4);
  REQUIRE(parts.size() == 4);
  for (std::size_t s = 0; s < 4; ++s) {
    CHECK(parts[s].shape() == Shape{8, 4, 3});
    const auto strip = oracle::to_vec(slice(z, 0, 2 * s, 2 * s + 2));
    CHECK(max_abs_diff(parts[s].data(), oracle::bilinear(strip, 2, 4, 3, 8, 4)) <= 1e-12);
  }
}

TEST_CASE("ablation masks") {
  const auto settings = ablation_settings();
  REQUIRE(settings.size() == 6);
  CHECK(settings.front() == "G");
  CHECK(settings.back() == "full");
  for (auto s : settings) CHECK(AblationMask::from_setting(s).setting() == s);
  CHECK(AblationMask::from_setting("CCAN") == AblationMask::from_setting("full"));

  ModelConfig cfg = lite_model_config();
  cfg.mask = AblationMask::from_setting("G");
  const auto model = CcanModel::create(cfg, 0);
  Rng rng = make_rng(0, "test.mask");
  const auto out = model.forward(uniform_tensor({cfg.input_h, cfg.input_w, 3}, 1, rng));
  CHECK(out.f_g.defined());
  CHECK_FALSE(out.f_l.defined());
  CHECK_FALSE(out.logits_l.defined());
}

TEST_CASE("the same seed gives the same weights under every mask") {
  ModelConfig cfg = lite_model_config();
  std::map<std::string, std::vector<Scalar>> seen;
  for (auto s : ablation_settings()) {
    cfg.mask = AblationMask::from_setting(s);
    for (const auto& p : CcanModel::create(cfg, 11).parameters()) {
      const auto v = oracle::to_vec(p.tensor);
      auto [it, fresh] = seen.emplace(p.name, v);
      if (!fresh) CHECK_MESSAGE(it->second == v, p.name);
    }
  }
  CHECK(seen.count("global.I1.path1.kernels") == 1);
  CHECK(seen.count("local.part0.CC2.W_alpha") == 1);
}

TEST_CASE("parameter names are unique and clone is deep") {
  const auto model = CcanModel::create(lite_model_config(), 3);
  std::set<std::string> names;
  std::size_t count = 0;
  for (const auto& p : model.parameters()) {
    CHECK(names.insert(p.name).second);
    count += p.tensor.numel();
  }
  CHECK(count == model.parameter_count());
  auto copy = model.clone();
  copy.parameters().front().tensor.mutable_data()[0] += 1;
  CHECK(copy.parameters().front().tensor.data()[0] != model.parameters().front().tensor.data()[0]);
}

TEST_CASE("model config text round trip") {
  ModelConfig cfg = lite_model_config();
  cfg.global_attention = AttentionKind::kNonLocal;
  cfg.mask = AblationMask::from_setting("G+L+CC");
  const auto text = model_config_to_text(cfg);
  CHECK(model_config_to_text(model_config_from_text(text)) == text);
}

TEST_CASE("inference features equal the training forward") {
  const auto model = CcanModel::create(lite_model_config(), 4);
  Rng rng = make_rng(1, "test.features");
  const Tensor img = uniform_tensor({8, 4, 3}, 1, rng);
  const std::vector<Tensor> batch{img};
  const auto feats = extract_features(batch, model);
  const auto outs = ccan_forward(batch, model);
  CHECK(oracle::to_vec(feats[0].f_g) == oracle::to_vec(outs[0].f_g));
  CHECK(oracle::to_vec(feats[0].f_l) == oracle::to_vec(outs[0].f_l));
  CHECK_THROWS_AS(model.forward(Tensor::zeros({4, 8, 3})), DimensionError);
}

TEST_CASE("non-local global attention is selectable") {
  ModelConfig cfg = lite_model_config();
  cfg.global_attention = AttentionKind::kNonLocal;
  const auto a = CcanModel::create(cfg, 2);
  cfg.global_attention = AttentionKind::kSymmetricSelf;
  const auto b = CcanModel::create(cfg, 2);
  Rng rng = make_rng(2, "test.nonlocal");
  const Tensor img = uniform_tensor({8, 4, 3}, 1, rng);
  CHECK(oracle::to_vec(a.forward(img).f_g) != oracle::to_vec(b.forward(img).f_g));
}
