#include <cmath>
#include <map>

#include "ccan/error.hpp"
#include "ccan/gradcheck.hpp"
#include "ccan/objective.hpp"
#include "ccan/ops.hpp"
#include "ccan/verification.hpp"
#include "checks.hpp"
#include "doctest.h"
#include "oracle.hpp"

using namespace ccan;

TEST_CASE("LSR worked examples") {
  const std::vector<int> two{2}, zero{0};
  CHECK(lsr_cross_entropy(Tensor::zeros({1, 4}), two, 0.1).item() == doctest::Approx(std::log(4.0)).epsilon(1e-14));
  CHECK(lsr_cross_entropy(Tensor::from({1, 4}, {2, 0, 0, 0}), zero, 0.1).item() == doctest::Approx(0.4908).epsilon(1e-3));
}

TEST_CASE("LSR agrees with the direct formula on random logits") {
  for (std::uint64_t s = 0; s < 50; ++s) {
    Rng rng = make_rng(s, "test.lsr");
    const std::size_t b = 1 + s % 7, k = 2 + s % 9;
    const Tensor logits = normal_tensor({b, k}, 2, rng);
    std::vector<int> labels(b);
    for (auto& y : labels) y = static_cast<int>(std::uniform_int_distribution<std::size_t>(0, k - 1)(rng));
    std::vector<std::vector<double>> rows(b, std::vector<double>(k));
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t j = 0; j < k; ++j) rows[i][j] = logits.at({i, j});
    const double eps = 0.05 * static_cast<double>(s % 5);
    CHECK(lsr_cross_entropy(logits, labels, eps).item() ==
          doctest::Approx(oracle::lsr_cross_entropy(rows, labels, eps)).epsilon(1e-12));
  }
  const std::vector<int> bad{4};
  CHECK_THROWS_AS(lsr_cross_entropy(Tensor::zeros({1, 4}), bad, 0.1), UsageError);
}

TEST_CASE("pairwise distances: 3-4-5 and the naive reference") {
  CHECK(oracle::to_vec(pairwise_sq_distances(Tensor::from({2, 2}, {0, 0, 3, 4}))) ==
        std::vector<Scalar>{0, 25, 25, 0});
  Rng rng = make_rng(0, "test.dist");
  const Tensor e = normal_tensor({9, 5}, 1, rng);
  const Tensor d = pairwise_sq_distances(e);
  const auto ref = oracle::sq_distances(oracle::to_vec(e), 9, 5);
  for (std::size_t i = 0; i < 81; ++i) CHECK(std::abs(d.data()[i] - ref[i]) <= 1e-12);
  for (std::size_t i = 0; i < 9; ++i) CHECK(d.at({i, i}) == 0);
}

TEST_CASE("semi-hard mining matches exhaustive enumeration on 100 batches") {
  const auto v = checks::mining_oracle(100);
  INFO(v.detail);
  CHECK(v.pass);
}

TEST_CASE("semi-hard mining worked example keeps {1.5, 2.0} in order") {
  const Tensor d = Tensor::from({5, 5}, {0, 1, .5, 1.5, 2, 1, 0, 9, 9, 9, .5, 9, 0, 9, 9, 1.5, 9, 9, 0, 9, 2, 9, 9, 9, 0});
  const std::vector<int> labels{0, 0, 1, 2, 3};
  std::vector<std::size_t> negatives;
  for (const auto& t : mine_semihard(d, labels, 10).triplets)
    if (t.anchor == 0 && t.positive == 1) negatives.push_back(t.negative);
  CHECK(negatives == std::vector<std::size_t>{3, 4});
  CHECK(mine_semihard(d, labels, 1).size() == 2);
}

TEST_CASE("triplet loss") {
  const Tensor d = Tensor::from({3, 3}, {0, 2, 2, 2, 0, 9, 2, 9, 0});
  TripletSet set;
  set.triplets.push_back({0, 1, 2, 2.0, 2.0});
  CHECK(triplet_loss(d, set, 1.0).item() == 1.0);
  CHECK(triplet_loss(d, TripletSet{}, 1.0).item() == 0.0);
  CHECK_THROWS_AS(triplet_loss(d, set, 0.0), UsageError);

  // Mean of hinge terms over a mined set, against the direct sum.
  Rng rng = make_rng(1, "test.triplet");
  const Tensor e = normal_tensor({8, 3}, 1, rng);
  const std::vector<int> labels{0, 0, 1, 1, 2, 2, 3, 3};
  const Tensor dist = pairwise_sq_distances(e);
  const auto mined = mine_semihard(dist, labels, 3);
  REQUIRE_FALSE(mined.empty());
  double want = 0.0;
  for (const auto& t : mined.triplets) want += std::max(0.0, t.d_ap - t.d_an + 1.0);
  want /= static_cast<double>(mined.size());
  CHECK(triplet_loss(dist, mined, 1.0).item() == doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("loss gradients pass the finite-difference check") {
  GradSuiteOptions opt;
  opt.seed = 5;
  const auto cases = run_gradcheck_suite(opt);
  REQUIRE(cases.size() == 6);
  for (const auto& c : cases) {
    INFO(c.name << ": " << c.report.describe());
    CHECK(c.report.pass);
  }
}

TEST_CASE("total loss breakdown is consistent") {
  ModelConfig cfg = lite_model_config();
  const auto model = CcanModel::create(cfg, 0);
  Rng rng = make_rng(2, "test.total");
  std::vector<Tensor> batch;
  for (int i = 0; i < 6; ++i) batch.push_back(uniform_tensor({8, 4, 3}, 1, rng));
  const std::vector<int> labels{0, 0, 1, 1, 2, 2};
  const auto outs = ccan_forward(batch, model);
  const auto loss = total_loss(outs, labels, LossConfig{});
  const auto& b = loss.breakdown;
  CHECK(b.ce_g >= 0);
  CHECK(b.tri_g >= 0);
  CHECK(b.ce_l >= 0);
  CHECK(b.tri_l >= 0);
  CHECK(b.total == doctest::Approx(b.ce_g + b.tri_g + b.ce_l + b.tri_l).epsilon(1e-12));
  CHECK(loss.total.item() == b.total);

  cfg.mask = AblationMask::from_setting("G");
  const auto g_only = CcanModel::create(cfg, 0);
  const auto lg = total_loss(ccan_forward(batch, g_only), labels, LossConfig{});
  CHECK(lg.breakdown.ce_l == 0);
  CHECK(lg.breakdown.tri_l == 0);
}

TEST_CASE("PK sampling") {
  std::vector<int> labels;
  for (int id = 0; id < 6; ++id)
    for (int k = 0; k < 3 + id % 3; ++k) labels.push_back(id);
  Rng a = make_rng(0, "test.pk"), b = make_rng(0, "test.pk");
  const auto picks = pk_sample(labels, 3, 12, a);
  CHECK(picks == pk_sample(labels, 3, 12, b));
  REQUIRE(picks.size() == 12);
  std::map<int, int> per_id;
  for (std::size_t i = 0; i < picks.size(); ++i) {
    ++per_id[labels[picks[i]]];
    // Samples of one identity are contiguous.
    CHECK(labels[picks[i]] == labels[picks[i / 4 * 4]]);
  }
  CHECK(per_id.size() == 3);
  for (const auto& [id, n] : per_id) CHECK(n == 4);

  CHECK_THROWS_AS(pk_sample(labels, 5, 12, a), ConfigError);
  CHECK_THROWS_AS(pk_sample(labels, 7, 14, a), ConfigError);
}

TEST_CASE("one image per identity mines nothing") {
  Rng rng = make_rng(0, "test.pk");
  const std::vector<int> labels{0, 0, 1, 1, 2, 2, 3, 3};
  const auto picks = pk_sample(labels, 4, 4, rng);
  std::vector<int> picked;
  for (auto i : picks) picked.push_back(labels[i]);
  Rng erng = make_rng(1, "test.pk");
  CHECK(mine_semihard(pairwise_sq_distances(normal_tensor({4, 3}, 1.0, erng)), picked, 10).empty());
}
