#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ccan/tensor.hpp"

namespace ccan {

// [f_G / |f_G| ; f_L / |f_L|]; a zero half stays zero.
Tensor fuse_features(const Tensor& f_g, const Tensor& f_l);

struct GalleryIndex {
  Tensor features;  // [G x D], one row per item
  std::vector<int> person_ids;
  std::vector<int> camera_ids;
  std::vector<bool> junk;

  std::size_t size() const noexcept { return person_ids.size(); }
  void validate() const;
};

// Row-stacks fused vectors and metadata into an index.
GalleryIndex make_index(const std::vector<Tensor>& fused, std::vector<int> person_ids, std::vector<int> camera_ids,
                        std::vector<bool> junk);

// Squared Euclidean distance from `query` to every gallery row.
std::vector<double> gallery_distances(const Tensor& query, const GalleryIndex& index);

// Gallery indices by ascending distance; equal distances keep the lower index first.
std::vector<std::size_t> rank_gallery(const Tensor& query, const GalleryIndex& index);

struct EvalReport {
  double mAP = 0.0;
  std::vector<std::size_t> ranks;  // 1-based ranks reported in cmc
  std::vector<double> cmc;         // cmc[i] = CMC@ranks[i]
  std::vector<double> average_precision;  // one per evaluated query
  std::size_t queries = 0;
  std::size_t skipped = 0;  // queries with no relevant gallery item

  double cmc_at(std::size_t rank) const;
};

// Single-query, cross-camera protocol: for each query, gallery items that are
// junk or share both person and camera id are dropped before scoring.
EvalReport evaluate(const GalleryIndex& queries, const GalleryIndex& gallery,
                    const std::vector<std::size_t>& ranks = {1, 5, 10});

// "key: value" lines followed by a rank/CMC table.
std::string format_report(const EvalReport& report);

}  // namespace ccan
