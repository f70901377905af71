#include <cmath>
#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "ccan/attention.hpp"
#include "ccan/augment.hpp"
#include "ccan/error.hpp"
#include "ccan/gradcheck.hpp"
#include "ccan/network.hpp"
#include "ccan/objective.hpp"
#include "ccan/ops.hpp"
#include "ccan/optim.hpp"
#include "ccan/retrieval.hpp"
#include "ccan/tape.hpp"
#include "ccan/tensor_file.hpp"
#include "ccan_cli/cli.hpp"

namespace ccan::cli {
namespace {

using Check = std::pair<const char*, std::function<bool()>>;

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

bool equals(const Tensor& t, std::initializer_list<double> values, double tol = 0.0) {
  if (t.numel() != values.size()) return false;
  std::size_t i = 0;
  for (double v : values) {
    if (!near(static_cast<double>(t.data()[i++]), v, tol)) return false;
  }
  return true;
}

bool same(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

template <typename E, typename Fn>
bool throws(Fn&& fn) {
  try {
    fn();
  } catch (const E&) {
    return true;
  }
  return false;
}

Tensor grad_of(Tensor x, const std::function<Tensor(const Tensor&)>& f) {
  x.set_requires_grad(true);
  Tape tape;
  Tensor loss;
  {
    TapeScope scope(tape);
    loss = f(x);
  }
  backward(loss, tape);
  return Tensor::from(x.shape(), {x.grad().begin(), x.grad().end()});
}

std::vector<Check> checks() {
  std::vector<Check> c;
  // tensor-core
  c.emplace_back("matmul identity", [] {
    return equals(matmul(Tensor::from({2, 2}, {1, 2, 3, 4}), Tensor::from({2, 2}, {1, 0, 0, 1})), {1, 2, 3, 4});
  });
  c.emplace_back("matmul 2x2 product", [] {
    return equals(matmul(Tensor::from({2, 2}, {1, 2, 3, 4}), Tensor::from({2, 2}, {5, 6, 7, 8})), {19, 22, 43, 50});
  });
  c.emplace_back("matmul mismatch is a dimension error", [] {
    return throws<DimensionError>([] { matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})); });
  });
  c.emplace_back("hadamard with zeros", [] {
    return equals(hadamard(Tensor::from({3}, {1, 2, 3}), Tensor::zeros({3})), {0, 0, 0});
  });
  c.emplace_back("add", [] { return equals(add(Tensor::from({2}, {1, 2}), Tensor::from({2}, {3, 4})), {4, 6}); });
  c.emplace_back("scale", [] { return equals(scale(Tensor::from({2}, {2, 4}), 0.5), {1, 2}); });
  c.emplace_back("relu", [] { return equals(relu(Tensor::from({3}, {-1, 0, 3.5})), {0, 0, 3.5}); });
  c.emplace_back("relu backward at 2", [] {
    return equals(grad_of(Tensor::from({1}, {2}), [](const Tensor& x) { return sum(relu(x)); }), {1});
  });
  c.emplace_back("concat along width", [] {
    const Tensor a = Tensor::full({4, 4}, 1);
    return concat(std::vector<Tensor>{a, transpose2d(a)}, 1).shape() == Shape{4, 8};
  });
  c.emplace_back("reshape round trip", [] {
    const Tensor t = Tensor::from({2, 3, 4}, std::vector<Scalar>(24, 0.25));
    return same(reshape(reshape(t, {6, 4}), {2, 3, 4}), t);
  });
  c.emplace_back("conv 3x3 ones: 9 / 6 / 4", [] {
    const Tensor out = conv2d(Tensor::full({3, 3, 1}, 1), Tensor::full({3, 3, 1, 1}, 1), 1, 1);
    return equals(out, {4, 6, 4, 6, 9, 6, 4, 6, 4});
  });
  c.emplace_back("conv stride 2 shape", [] {
    return conv2d(Tensor::zeros({64, 32, 3}), Tensor::zeros({3, 3, 3, 32}), 2, 1).shape() == Shape{32, 16, 32};
  });
  c.emplace_back("max pool", [] {
    return equals(pool2d(Tensor::from({2, 2, 1}, {1, 2, 3, 4}), PoolKind::kMax, 2, 2), {4});
  });
  c.emplace_back("avg pool", [] {
    return equals(pool2d(Tensor::from({2, 2, 1}, {1, 2, 3, 4}), PoolKind::kAvg, 2, 2), {2.5});
  });
  c.emplace_back("global average pool", [] {
    return equals(global_avg_pool(Tensor::from({2, 2, 1}, {0, 1, 2, 3})), {1.5});
  });
  c.emplace_back("bilinear align-corners center", [] {
    return near(bilinear_resize(Tensor::from({2, 2, 1}, {0, 1, 2, 3}), 3, 3).at({1, 1, 0}), 1.5, 1e-15);
  });
  c.emplace_back("sum(x*x) gradient", [] {
    return equals(grad_of(Tensor::from({2}, {1, 2}), [](const Tensor& x) { return sum(hadamard(x, x)); }), {2, 4});
  });
  c.emplace_back("fan-out accumulation", [] {
    return equals(grad_of(Tensor::from({3}, {1, 2, 3}), [](const Tensor& x) { return sum(add(x, x)); }), {2, 2, 2});
  });
  c.emplace_back("grad_check x^2 at 3", [] {
    Tensor x = Tensor::from({1}, {3});
    return grad_check([&] { return sum(hadamard(x, x)); }, {x}).pass;
  });
  // attention
  c.emplace_back("zero weights give A = 0 and z = q", [] {
    Rng rng = make_rng(0, "selftest");
    const Tensor q = uniform_tensor({4, 8}, 1.0, rng);
    const auto w = AttentionWeights::zeros(2, 2, 8);
    const Tensor a = attention_map(q, q, w);
    return std::all_of(a.data().begin(), a.data().end(), [](Scalar v) { return v == 0; }) &&
           same(cca_forward(q, q, w), q) && same(nonlocal_forward(q, w), q);
  });
  c.emplace_back("ssa delegates to cca", [] {
    Rng rng = make_rng(1, "selftest");
    const Tensor q = uniform_tensor({4, 8}, 1.0, rng);
    const auto w = AttentionWeights::create(2, 2, 8, rng);
    return same(ssa_forward(q, w), cca_forward(q, q, w));
  });
  c.emplace_back("zero q gives zero output", [] {
    Rng rng = make_rng(2, "selftest");
    const auto w = AttentionWeights::create(2, 2, 8, rng);
    const Tensor z = cca_forward(Tensor::zeros({4, 8}), Tensor::zeros({4, 8}), w);
    return std::all_of(z.data().begin(), z.data().end(), [](Scalar v) { return v == 0; });
  });
  c.emplace_back("nonlocal differs from ssa", [] {
    Rng rng = make_rng(0, "selftest");
    const Tensor q = uniform_tensor({4, 8}, 1.0, rng);
    const auto w = AttentionWeights::create(2, 2, 8, rng);
    return !same(nonlocal_forward(q, w), ssa_forward(q, w));
  });
  c.emplace_back("K = C/8 enforced", [] { return throws<ConfigError>([] { default_key_dim(12); }); });
  // network
  c.emplace_back("slice_parts rejects M=6, k_p=4", [] {
    return throws<ConfigError>([] { slice_parts(Tensor::zeros({6, 2, 1}), 4); });
  });
  c.emplace_back("toy model feature extents", [] {
    ModelConfig cfg;
    const auto model = CcanModel::create(cfg, 0);
    const auto out = model.forward(Tensor::full({64, 32, 3}, 0.5));
    return out.f_g.numel() == 64 && out.f_l.numel() == 64 && out.logits_g.numel() == cfg.num_ids;
  });
  c.emplace_back("G-only model has no local outputs", [] {
    ModelConfig cfg;
    cfg.mask = AblationMask::from_setting("G");
    const auto out = CcanModel::create(cfg, 0).forward(Tensor::full({64, 32, 3}, 0.5));
    return out.f_g.defined() && !out.f_l.defined();
  });
  // objective
  c.emplace_back("LSR uniform logits = ln 4", [] {
    const std::vector<int> labels{2};
    return near(lsr_cross_entropy(Tensor::zeros({1, 4}), labels, 0.1).item(), std::log(4.0), 1e-12);
  });
  c.emplace_back("LSR [2,0,0,0] = 0.4908", [] {
    const std::vector<int> labels{0};
    return near(lsr_cross_entropy(Tensor::from({1, 4}, {2, 0, 0, 0}), labels, 0.1).item(), 0.4908, 1e-3);
  });
  c.emplace_back("distance 3-4-5", [] {
    return equals(pairwise_sq_distances(Tensor::from({2, 2}, {0, 0, 3, 4})), {0, 25, 25, 0});
  });
  c.emplace_back("semi-hard order {1.5, 2.0}", [] {
    const Tensor d = Tensor::from({5, 5}, {0, 1, .5, 1.5, 2, 1, 0, 9, 9, 9, .5, 9, 0, 9, 9, 1.5, 9, 9, 0, 9, 2, 9, 9, 9, 0});
    const std::vector<int> labels{0, 0, 1, 2, 3};
    std::vector<std::size_t> negatives;
    for (const auto& t : mine_semihard(d, labels, 10).triplets) {
      if (t.anchor == 0 && t.positive == 1) negatives.push_back(t.negative);
    }
    return negatives == std::vector<std::size_t>{3, 4};
  });
  c.emplace_back("triplet term D_ap=2, D_an=2 -> 1", [] {
    const Tensor d = Tensor::from({3, 3}, {0, 2, 2, 2, 0, 9, 2, 9, 0});
    TripletSet set;
    set.triplets.push_back({0, 1, 2, 2.0, 2.0});
    return near(triplet_loss(d, set, 1.0).item(), 1.0, 0.0);
  });
  c.emplace_back("v = batch mines nothing", [] {
    Rng rng = make_rng(0, "selftest");
    const std::vector<int> labels{0, 0, 1, 1, 2, 2, 3, 3};
    const auto picks = pk_sample(labels, 4, 4, rng);
    std::vector<int> picked;
    for (auto i : picks) picked.push_back(labels[i]);
    Rng erng = make_rng(1, "selftest");
    return mine_semihard(pairwise_sq_distances(normal_tensor({4, 3}, 1.0, erng)), picked, 10).empty();
  });
  // optim
  c.emplace_back("adam first step 1.0 -> 0.9", [] {
    Tensor p = Tensor::from({1}, {1.0});
    p.mutable_grad()[0] = 1.0;
    std::vector<Tensor> params{p};
    AdamState state;
    adam_step(params, state, 0.1, {0.9, 0.99, 0.0, 1e-8});
    return near(p.item(), 0.9, 1e-6);
  });
  c.emplace_back("lr schedule 5e-4 / 5e-5 / 5e-6", [] {
    TrainConfig cfg;
    cfg.lr_plateau = 150;
    cfg.lr_decay_every = 50;
    return near(lr_at(0, cfg), 5e-4, 1e-18) && near(lr_at(150, cfg), 5e-5, 1e-18) && near(lr_at(200, cfg), 5e-6, 1e-18);
  });
  // retrieval
  c.emplace_back("fuse [3,4]+[0,1]", [] {
    return equals(fuse_features(Tensor::from({2}, {3, 4}), Tensor::from({2}, {0, 1})), {0.6, 0.8, 0, 1}, 1e-15);
  });
  c.emplace_back("fuse keeps a zero half", [] {
    return equals(fuse_features(Tensor::from({2}, {3, 4}), Tensor::zeros({2})), {0.6, 0.8, 0, 0}, 1e-15);
  });
  c.emplace_back("AP of [1,0,1] = 0.8333", [] {
    const auto q = make_index({Tensor::from({1}, {0})}, {1}, {0}, {false});
    const auto g = make_index({Tensor::from({1}, {1}), Tensor::from({1}, {2}), Tensor::from({1}, {3})}, {1, 2, 1},
                              {1, 1, 1}, {false, false, false});
    return near(evaluate(q, g, {1}).mAP, (1.0 + 2.0 / 3.0) / 2.0, 1e-15);
  });
  c.emplace_back("ties rank the lower index first", [] {
    const auto g = make_index({Tensor::from({1}, {1}), Tensor::from({1}, {-1})}, {0, 1}, {0, 0}, {false, false});
    return rank_gallery(Tensor::from({1}, {0}), g) == std::vector<std::size_t>{0, 1};
  });
  // data-io
  c.emplace_back("2x2 f32 header is 16 bytes", [] {
    return encode_tensor(Tensor::zeros({2, 2}), Dtype::kF32, true).size() == 16 + 4 * 4;
  });
  c.emplace_back("tensor file round trip", [] {
    Rng rng = make_rng(3, "selftest");
    const Tensor t = normal_tensor({3, 4, 5}, 1.0, rng);
    return same(decode_tensor(encode_tensor(t)), t);
  });
  c.emplace_back("narrowing must be explicit", [] {
    return sizeof(Scalar) == 4 || throws<UsageError>([] { encode_tensor(Tensor::zeros({1}), Dtype::kF32); });
  });
  c.emplace_back("disabled augmentation is the identity", [] {
    Rng rng = make_rng(4, "selftest");
    const Tensor img = uniform_tensor({8, 4, 3}, 1.0, rng);
    AugmentConfig cfg;
    cfg.resize_h = cfg.crop_h = 8;
    cfg.resize_w = cfg.crop_w = 4;
    cfg.hflip_prob = 0.0;
    cfg.erase.prob = 0.0;
    return same(augment(img, cfg, rng), img);
  });
  c.emplace_back("hflip twice", [] {
    Rng rng = make_rng(5, "selftest");
    const Tensor img = uniform_tensor({8, 4, 3}, 1.0, rng);
    return same(hflip(hflip(img)), img);
  });
  // cli
  c.emplace_back("unknown config key rejected", [] {
    return throws<ConfigError>([] { RunConfig::from_text("model.widht=3\n"); });
  });
  c.emplace_back("resolved config round trip", [] {
    RunConfig cfg;
    cfg.set("train.lr0", "1e-3");
    return RunConfig::from_text(cfg.to_text()).to_text() == cfg.to_text();
  });
  return c;
}

}  // namespace

int run_selftest(std::ostream& out) {
  int failures = 0;
  for (const auto& [name, fn] : checks()) {
    bool ok = false;
    std::string note;
    try {
      ok = fn();
    } catch (const std::exception& e) {
      note = std::string(" (threw: ") + e.what() + ")";
    }
    out << (ok ? "PASS " : "FAIL ") << name << note << '\n';
    if (!ok) ++failures;
  }
  out << (failures == 0 ? "selftest: all checks passed\n" : "selftest: " + std::to_string(failures) + " failed\n");
  return failures;
}

}  // namespace ccan::cli
