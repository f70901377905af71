#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "ccan/error.hpp"
#include "ccan/optim.hpp"
#include "ccan/rng.hpp"
#include "ccan/verification.hpp"
#include "doctest.h"

using namespace ccan;

namespace {

// Three identities for the lite model, each brightening one colour channel.
TrainSet tiny_set(std::size_t per_id) {
  TrainSet set;
  Rng rng = make_rng(0, "test.trainset");
  for (int id = 0; id < 3; ++id)
    for (std::size_t k = 0; k < per_id; ++k) {
      Tensor img = uniform_tensor({8, 4, 3}, 0.1, rng);
      for (std::size_t i = 0; i < 32; ++i) img.mutable_data()[i * 3 + static_cast<std::size_t>(id)] += 0.8;
      set.images.push_back(img);
      set.labels.push_back(id);
    }
  return set;
}

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.v = 3;
  cfg.batch = 6;
  cfg.lr0 = 2e-3;
  cfg.erasing_start_epoch = 2;
  return cfg;
}

AugmentConfig tiny_augment() {
  AugmentConfig a;
  a.resize_h = 9;
  a.resize_w = 5;
  a.crop_h = 8;
  a.crop_w = 4;
  return a;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("ADAM first step moves 1.0 to 0.9") {
  Tensor p = Tensor::from({1}, {1.0});
  p.mutable_grad()[0] = 1.0;
  std::vector<Tensor> params{p};
  AdamState state;
  adam_step(params, state, 0.1, {0.9, 0.99, 0.0, 1e-8});
  CHECK(p.item() == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(state.t == 1);
}

TEST_CASE("ADAM matches the textbook recurrence over several steps") {
  const AdamConfig cfg{0.9, 0.99, 1e-2, 1e-8};
  Tensor p = Tensor::from({2}, {0.5, -1.5});
  std::vector<Tensor> params{p};
  AdamState state;
  double x[2] = {0.5, -1.5}, m[2] = {0, 0}, v[2] = {0, 0};
  for (int t = 1; t <= 6; ++t) {
    const double g[2] = {std::sin(t), 0.1 * t};
    p.mutable_grad()[0] = g[0];
    p.mutable_grad()[1] = g[1];
    adam_step(params, state, 0.05, cfg);
    for (int i = 0; i < 2; ++i) {
      x[i] -= 0.05 * cfg.weight_decay * x[i];
      m[i] = 0.9 * m[i] + 0.1 * g[i];
      v[i] = 0.99 * v[i] + 0.01 * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(0.9, t)), vh = v[i] / (1 - std::pow(0.99, t));
      x[i] -= 0.05 * mh / (std::sqrt(vh) + 1e-8);
    }
    CHECK(p.data()[0] == doctest::Approx(x[0]).epsilon(1e-13));
    CHECK(p.data()[1] == doctest::Approx(x[1]).epsilon(1e-13));
  }
  std::vector<Tensor> other{Tensor::zeros({1}), Tensor::zeros({1})};
  CHECK_THROWS_AS(adam_step(other, state, 0.05, cfg), UsageError);
}

TEST_CASE("learning-rate schedule") {
  TrainConfig cfg;
  cfg.lr_plateau = 150;
  cfg.lr_decay_every = 50;
  CHECK(lr_at(0, cfg) == 5e-4);
  CHECK(lr_at(149, cfg) == 5e-4);
  CHECK(lr_at(150, cfg) == doctest::Approx(5e-5).epsilon(1e-12));
  CHECK(lr_at(199, cfg) == doctest::Approx(5e-5).epsilon(1e-12));
  CHECK(lr_at(200, cfg) == doctest::Approx(5e-6).epsilon(1e-12));
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  cfg.batch = 30;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.adam.beta2 = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("training smoke: finite losses, history lines, descent") {
  const auto dir = std::filesystem::temp_directory_path() / "ccan_unit_train";
  std::filesystem::remove_all(dir);
  ModelConfig mc = lite_model_config();
  auto model = CcanModel::create(mc, 0);
  auto cfg = tiny_config();
  cfg.epochs = 6;
  cfg.history_path = dir / "history.jsonl";
  cfg.checkpoint_path = dir / "ckpt.ccac";
  std::size_t hook_calls = 0;
  const auto hist = train(model, tiny_set(4), cfg, tiny_augment(), [&](std::size_t, const CcanModel&) {
    ++hook_calls;
    return std::map<std::string, double>{{"probe", 1.0}};
  });
  REQUIRE(hist.epochs.size() == 6);
  CHECK(hook_calls == 6);
  for (const auto& e : hist.epochs) {
    CHECK(std::isfinite(e.mean.total));
    CHECK(e.mean.total == doctest::Approx(e.mean.ce_g + e.mean.tri_g + e.mean.ce_l + e.mean.tri_l).epsilon(1e-9));
    CHECK(e.metrics.at("probe") == 1.0);
  }
  CHECK(hist.epochs.back().mean.total < hist.epochs.front().mean.total);

  std::istringstream lines(slurp(cfg.history_path));
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    CHECK(line == history_line(hist.epochs[n]));
    CHECK(line.rfind("{\"epoch\":", 0) == 0);
    ++n;
  }
  CHECK(n == 6);
  CHECK(std::filesystem::exists(cfg.checkpoint_path));
  std::filesystem::remove_all(dir);
}

TEST_CASE("training is deterministic for a fixed seed") {
  auto run = [] {
    auto model = CcanModel::create(lite_model_config(), 3);
    auto cfg = tiny_config();
    cfg.seed = 9;
    const auto hist = train(model, tiny_set(3), cfg, tiny_augment());
    std::vector<Scalar> weights;
    for (const auto& p : model.parameters()) weights.insert(weights.end(), p.tensor.data().begin(), p.tensor.data().end());
    std::string lines;
    for (const auto& e : hist.epochs) lines += history_line(e) + "\n";
    return std::make_pair(weights, lines);
  };
  const auto a = run(), b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("a non-finite loss stops training") {
  auto model = CcanModel::create(lite_model_config(), 0);
  for (auto& p : model.parameters()) {
    if (p.name == "global.FC2.bias") p.tensor.mutable_data()[0] = std::numeric_limits<Scalar>::quiet_NaN();
  }
  CHECK_THROWS_AS(train(model, tiny_set(2), tiny_config(), tiny_augment()), NumericError);
}

TEST_CASE("training rejects mismatched data") {
  auto model = CcanModel::create(lite_model_config(), 0);
  TrainSet set = tiny_set(2);
  set.labels.pop_back();
  CHECK_THROWS_AS(train(model, set, tiny_config(), tiny_augment()), ConfigError);
}
