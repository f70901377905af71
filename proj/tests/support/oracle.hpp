#pragma once

// Straight-line reference implementations used as test oracles. They work on
// flat row-major vectors and share no code with the library.

#include <cstddef>
#include <vector>

#include "ccan/tensor.hpp"

namespace oracle {

using ccan::Scalar;
using Vec = std::vector<Scalar>;

Vec to_vec(const ccan::Tensor& t);

// [m x k] . [k x n]
Vec matmul(const Vec& a, const Vec& b, std::size_t m, std::size_t k, std::size_t n);

struct AttentionParts {
  Vec a_prime;  // MN x MN
  Vec a;        // MN x MN (equals a_prime for the non-local variant)
  Vec z;        // MN x C
};

// q, q_prime [MN x C]; w_f, w_g, w_h [K x C]; w_w [C x K]; w_alpha [2MN x MN].
AttentionParts attention(const Vec& q, const Vec& q_prime, const Vec& w_f, const Vec& w_g, const Vec& w_h,
                         const Vec& w_w, const Vec& w_alpha, std::size_t mn, std::size_t c, std::size_t k,
                         bool non_local);

// x [H x W x Cin], kernels [kh x kw x Cin x Cout]; zero padding.
Vec conv2d(const Vec& x, std::size_t h, std::size_t w, std::size_t cin, const Vec& kernels, std::size_t kh,
           std::size_t kw, std::size_t cout, std::size_t stride, std::size_t pad, std::size_t* oh, std::size_t* ow);

// concat(relu(conv1x1 + b1), relu(conv3x3 + b2)), then an optional 2x2 average pool.
Vec backbone_block(const Vec& x, std::size_t h, std::size_t w, std::size_t cin, const Vec& k1, const Vec& b1,
                   std::size_t c1, const Vec& k2, const Vec& b2, std::size_t c2, bool pool);

// Align-corners bilinear resize of [H x W x C].
Vec bilinear(const Vec& x, std::size_t h, std::size_t w, std::size_t c, std::size_t oh, std::size_t ow);

// Squared Euclidean distances between the rows of [B x d].
std::vector<double> sq_distances(const Vec& emb, std::size_t b, std::size_t d);

double lsr_cross_entropy(const std::vector<std::vector<double>>& logits, const std::vector<int>& labels, double eps);

struct MinedTriplet {
  std::size_t a, p, n;
  bool operator==(const MinedTriplet&) const = default;
};

// Every (a, p, n) with y_a = y_p, a != p, y_n != y_a and D_ap < D_an; for each
// (a, p) keep the r with smallest (D_an, n).
std::vector<MinedTriplet> enumerate_semihard(const std::vector<double>& d, const std::vector<int>& labels,
                                             std::size_t r);

struct Retrieval {
  double mean_ap = 0.0;
  std::vector<double> cmc;  // cmc[r - 1] = fraction of queries hit within top r
  std::vector<double> ap;
  std::size_t evaluated = 0;
};

// Brute-force cross-camera retrieval scoring from a full query x gallery
// distance matrix. Gallery items that are junk or share (pid, cam) with the
// query are removed; queries with no relevant item left are skipped.
Retrieval brute_force_retrieval(const std::vector<double>& dist, std::size_t nq, std::size_t ng,
                                const std::vector<int>& q_pid, const std::vector<int>& q_cam,
                                const std::vector<int>& g_pid, const std::vector<int>& g_cam,
                                const std::vector<bool>& g_junk, std::size_t max_rank);

}  // namespace oracle
