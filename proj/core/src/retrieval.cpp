#include "ccan/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "ccan/error.hpp"

namespace ccan {
namespace {

void normalize_into(std::span<const Scalar> src, std::span<Scalar> dst) {
  double sq = 0.0;
  for (auto v : src) sq += static_cast<double>(v) * static_cast<double>(v);
  const double norm = std::sqrt(sq);
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = norm > 0.0 ? static_cast<Scalar>(static_cast<double>(src[i]) / norm) : Scalar{0};
  }
}

}  // namespace

Tensor fuse_features(const Tensor& f_g, const Tensor& f_l) {
  if (f_g.numel() != f_l.numel()) {
    throw DimensionError("fuse_features: halves " + shape_str(f_g.shape()) + " and " + shape_str(f_l.shape()) +
                         " differ");
  }
  const std::size_t d = f_g.numel();
  Tensor out = Tensor::zeros({2 * d});
  auto dst = out.mutable_data();
  normalize_into(f_g.data(), dst.subspan(0, d));
  normalize_into(f_l.data(), dst.subspan(d, d));
  return out;
}

void GalleryIndex::validate() const {
  const std::size_t n = person_ids.size();
  if (n == 0) throw EvaluationError("gallery index is empty");
  if (camera_ids.size() != n || junk.size() != n) throw DimensionError("gallery index metadata lengths differ");
  if (features.rank() != 2 || features.dim(0) != n) {
    throw DimensionError("gallery index features " + shape_str(features.shape()) + " do not hold " +
                         std::to_string(n) + " rows");
  }
}

GalleryIndex make_index(const std::vector<Tensor>& fused, std::vector<int> person_ids, std::vector<int> camera_ids,
                        std::vector<bool> junk) {
  if (fused.empty()) throw EvaluationError("make_index: no features");
  const std::size_t dim = fused.front().numel();
  std::vector<Scalar> rows;
  rows.reserve(fused.size() * dim);
  for (const auto& f : fused) {
    if (f.numel() != dim) throw DimensionError("make_index: feature rows differ in length");
    rows.insert(rows.end(), f.data().begin(), f.data().end());
  }
  GalleryIndex index{Tensor::from({fused.size(), dim}, std::move(rows)), std::move(person_ids), std::move(camera_ids),
                     std::move(junk)};
  index.validate();
  return index;
}

std::vector<double> gallery_distances(const Tensor& query, const GalleryIndex& index) {
  const std::size_t dim = index.features.dim(1);
  if (query.numel() != dim) {
    throw DimensionError("rank_gallery: query has " + std::to_string(query.numel()) + " values, gallery rows " +
                         std::to_string(dim));
  }
  const auto q = query.data();
  const auto g = index.features.data();
  std::vector<double> dist(index.features.dim(0));
  for (std::size_t j = 0; j < dist.size(); ++j) {
    double acc = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      const double diff = static_cast<double>(q[k]) - static_cast<double>(g[j * dim + k]);
      acc += diff * diff;
    }
    dist[j] = acc;
  }
  return dist;
}

std::vector<std::size_t> rank_gallery(const Tensor& query, const GalleryIndex& index) {
  const auto dist = gallery_distances(query, index);
  std::vector<std::size_t> order(dist.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
  return order;
}

double EvalReport::cmc_at(std::size_t rank) const {
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    if (ranks[i] == rank) return cmc[i];
  }
  throw UsageError("rank " + std::to_string(rank) + " was not evaluated");
}

EvalReport evaluate(const GalleryIndex& queries, const GalleryIndex& gallery, const std::vector<std::size_t>& ranks) {
  queries.validate();
  gallery.validate();
  for (auto r : ranks) {
    if (r == 0) throw UsageError("evaluate: ranks are 1-based");
  }
  const std::size_t dim = queries.features.dim(1);
  EvalReport report;
  report.ranks = ranks;
  report.queries = queries.size();
  std::vector<std::size_t> hits(ranks.size(), 0);

  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    const Tensor q = Tensor::from({dim}, {queries.features.data().begin() + static_cast<std::ptrdiff_t>(qi * dim),
                                          queries.features.data().begin() + static_cast<std::ptrdiff_t>((qi + 1) * dim)});
    const auto order = rank_gallery(q, gallery);
    const int pid = queries.person_ids[qi];
    const int cam = queries.camera_ids[qi];

    std::size_t position = 0, relevant_seen = 0, first_hit = 0;
    double precision_sum = 0.0;
    for (auto j : order) {
      if (gallery.junk[j] || (gallery.person_ids[j] == pid && gallery.camera_ids[j] == cam)) continue;
      ++position;
      if (gallery.person_ids[j] == pid) {
        ++relevant_seen;
        if (first_hit == 0) first_hit = position;
        precision_sum += static_cast<double>(relevant_seen) / static_cast<double>(position);
      }
    }
    if (relevant_seen == 0) {
      ++report.skipped;
      continue;
    }
    report.average_precision.push_back(precision_sum / static_cast<double>(relevant_seen));
    for (std::size_t i = 0; i < ranks.size(); ++i) {
      if (first_hit <= ranks[i]) ++hits[i];
    }
  }
  if (report.average_precision.empty()) {
    throw EvaluationError("evaluate: all " + std::to_string(report.queries) + " queries lack a relevant gallery item");
  }
  const double evaluated = static_cast<double>(report.average_precision.size());
  double ap_sum = 0.0;
  for (auto ap : report.average_precision) ap_sum += ap;
  report.mAP = ap_sum / evaluated;
  for (auto h : hits) report.cmc.push_back(static_cast<double>(h) / evaluated);
  return report;
}

std::string format_report(const EvalReport& report) {
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return std::string(buf);
  };
  std::ostringstream out;
  out << "mAP: " << num(report.mAP) << '\n';
  for (std::size_t i = 0; i < report.ranks.size(); ++i) {
    out << "rank" << report.ranks[i] << ": " << num(report.cmc[i]) << '\n';
  }
  out << "queries: " << report.queries << '\n';
  out << "evaluated: " << report.average_precision.size() << '\n';
  out << "skipped: " << report.skipped << '\n';
  out << '\n' << "rank\tcmc\n";
  for (std::size_t i = 0; i < report.ranks.size(); ++i) out << report.ranks[i] << '\t' << num(report.cmc[i]) << '\n';
  return out.str();
}

}  // namespace ccan
