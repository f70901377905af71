#include <cmath>

#include "ccan/error.hpp"
#include "ccan/retrieval.hpp"
#include "checks.hpp"
#include "doctest.h"
#include "oracle.hpp"

using namespace ccan;

namespace {

GalleryIndex index_of(const std::vector<std::vector<Scalar>>& rows, std::vector<int> pids, std::vector<int> cams,
                      std::vector<bool> junk = {}) {
  std::vector<Tensor> fused;
  for (const auto& r : rows) fused.push_back(Tensor::from({r.size()}, r));
  if (junk.empty()) junk.assign(rows.size(), false);
  return make_index(fused, std::move(pids), std::move(cams), std::move(junk));
}

}  // namespace

TEST_CASE("feature fusion normalises each half") {
  const Tensor f = fuse_features(Tensor::from({2}, {3, 4}), Tensor::from({2}, {0, 1}));
  CHECK(oracle::to_vec(f) == std::vector<Scalar>{0.6, 0.8, 0, 1});
  const Tensor z = fuse_features(Tensor::zeros({2}), Tensor::from({2}, {0, 2}));
  CHECK(oracle::to_vec(z) == std::vector<Scalar>{0, 0, 0, 1});
  CHECK_THROWS_AS(fuse_features(Tensor::zeros({3}), Tensor::zeros({2})), DimensionError);
}

TEST_CASE("AP of relevance pattern [1, 0, 1] is 5/6") {
  const auto q = index_of({{0}}, {1}, {0});
  const auto g = index_of({{1}, {2}, {3}}, {1, 2, 1}, {1, 1, 1});
  const auto rep = evaluate(q, g, {1, 2});
  CHECK(rep.mAP == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
  CHECK(rep.cmc_at(1) == 1.0);
  CHECK_THROWS_AS(rep.cmc_at(5), UsageError);
}

TEST_CASE("equal distances rank the lower gallery index first") {
  const auto g = index_of({{1}, {-1}, {1}}, {0, 1, 2}, {0, 0, 0});
  CHECK(rank_gallery(Tensor::from({1}, {0}), g) == std::vector<std::size_t>{0, 1, 2});
  const auto d = gallery_distances(Tensor::from({1}, {0}), g);
  CHECK(d == std::vector<double>{1, 1, 1});
}

TEST_CASE("junk and same-camera matches are filtered") {
  const auto q = index_of({{0}}, {5}, {0});
  // Nearest first: same-camera true match, junk, wrong id, cross-camera match.
  const auto g = index_of({{0.1}, {0.2}, {0.3}, {0.4}}, {5, -1, 7, 5}, {0, 1, 1, 1}, {false, true, false, false});
  const auto rep = evaluate(q, g, {1, 2});
  CHECK(rep.cmc_at(1) == 0.0);
  CHECK(rep.cmc_at(2) == 1.0);
  CHECK(rep.mAP == 0.5);
}

TEST_CASE("queries without a relevant item are skipped, all-skipped is an error") {
  const auto q = index_of({{0}, {1}}, {1, 9}, {0, 0});
  const auto g = index_of({{0}, {1}}, {1, 2}, {1, 1});
  const auto rep = evaluate(q, g, {1});
  CHECK(rep.skipped == 1);
  CHECK(rep.queries == 2);
  CHECK(rep.average_precision.size() == 1);
  const auto lonely = index_of({{0}}, {9}, {0});
  CHECK_THROWS_AS(evaluate(lonely, g, {1}), EvaluationError);
  CHECK_THROWS_AS(evaluate(q, g, {0}), UsageError);
}

TEST_CASE("evaluate matches the brute-force reference on 20 random 50x200 problems") {
  const auto v = checks::metric_oracle(20);
  INFO(v.detail);
  CHECK(v.pass);
}

TEST_CASE("report format") {
  const auto q = index_of({{0}}, {1}, {0});
  const auto g = index_of({{1}, {2}}, {1, 2}, {1, 1});
  const auto text = format_report(evaluate(q, g, {1, 5}));
  CHECK(text.rfind("mAP: 1.000000\n", 0) == 0);
  CHECK(text.find("rank1: 1.000000\n") != std::string::npos);
  CHECK(text.find("rank5: 1.000000\n") != std::string::npos);
  CHECK(text.find("skipped: 0\n") != std::string::npos);
}
