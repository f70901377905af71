#include "oracle.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace oracle {

Vec to_vec(const ccan::Tensor& t) {
  auto d = t.data();
  return Vec(d.begin(), d.end());
}

Vec matmul(const Vec& a, const Vec& b, std::size_t m, std::size_t k, std::size_t n) {
  Vec c(m * n, 0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      Scalar acc = 0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] = acc;
    }
  return c;
}

namespace {

Scalar relu(Scalar v) { return v > 0 ? v : Scalar{0}; }

// relu(x . W^T) for x [rows x in], W [out x in].
Vec relu_linear(const Vec& x, const Vec& w, std::size_t rows, std::size_t in, std::size_t out) {
  Vec y(rows * out);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t o = 0; o < out; ++o) {
      Scalar acc = 0;
      for (std::size_t p = 0; p < in; ++p) acc += x[i * in + p] * w[o * in + p];
      y[i * out + o] = relu(acc);
    }
  return y;
}

}  // namespace

AttentionParts attention(const Vec& q, const Vec& q_prime, const Vec& w_f, const Vec& w_g, const Vec& w_h,
                         const Vec& w_w, const Vec& w_alpha, std::size_t mn, std::size_t c, std::size_t k,
                         bool non_local) {
  const Vec g = relu_linear(q, w_g, mn, c, k);
  const Vec f = relu_linear(q_prime, w_f, mn, c, k);
  const Vec h = relu_linear(q, w_h, mn, c, k);

  AttentionParts out;
  out.a_prime.assign(mn * mn, 0);
  for (std::size_t i = 0; i < mn; ++i)
    for (std::size_t j = 0; j < mn; ++j) {
      Scalar acc = 0;
      for (std::size_t p = 0; p < k; ++p) acc += g[i * k + p] * f[j * k + p];
      out.a_prime[i * mn + j] = acc;
    }

  if (non_local) {
    out.a = out.a_prime;
  } else {
    // Row i of the concatenation is [A'(i, 0..MN-1), A'(0..MN-1, i)].
    out.a.assign(mn * mn, 0);
    for (std::size_t i = 0; i < mn; ++i)
      for (std::size_t j = 0; j < mn; ++j) {
        Scalar acc = 0;
        for (std::size_t t = 0; t < mn; ++t) acc += out.a_prime[i * mn + t] * w_alpha[t * mn + j];
        for (std::size_t t = 0; t < mn; ++t) acc += out.a_prime[t * mn + i] * w_alpha[(mn + t) * mn + j];
        out.a[i * mn + j] = relu(acc);
      }
  }

  Vec y(mn * k);
  for (std::size_t i = 0; i < mn; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      Scalar acc = 0;
      for (std::size_t j = 0; j < mn; ++j) acc += out.a[i * mn + j] * relu(h[j * k + p]);
      y[i * k + p] = acc / static_cast<Scalar>(mn);
    }

  out.z.assign(mn * c, 0);
  for (std::size_t i = 0; i < mn; ++i)
    for (std::size_t ch = 0; ch < c; ++ch) {
      Scalar acc = 0;
      for (std::size_t p = 0; p < k; ++p) acc += y[i * k + p] * w_w[ch * k + p];
      out.z[i * c + ch] = relu(acc) + q[i * c + ch];
    }
  return out;
}

Vec conv2d(const Vec& x, std::size_t h, std::size_t w, std::size_t cin, const Vec& kernels, std::size_t kh,
           std::size_t kw, std::size_t cout, std::size_t stride, std::size_t pad, std::size_t* oh_out,
           std::size_t* ow_out) {
  const std::size_t oh = (h + 2 * pad - kh) / stride + 1;
  const std::size_t ow = (w + 2 * pad - kw) / stride + 1;
  Vec y(oh * ow * cout, 0);
  for (std::size_t oy = 0; oy < oh; ++oy)
    for (std::size_t ox = 0; ox < ow; ++ox)
      for (std::size_t co = 0; co < cout; ++co) {
        Scalar acc = 0;
        for (std::size_t ky = 0; ky < kh; ++ky)
          for (std::size_t kx = 0; kx < kw; ++kx) {
            const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
            const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
            if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w)) continue;
            for (std::size_t ci = 0; ci < cin; ++ci) {
              acc += x[(static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix)) * cin + ci] *
                     kernels[((ky * kw + kx) * cin + ci) * cout + co];
            }
          }
        y[(oy * ow + ox) * cout + co] = acc;
      }
  if (oh_out) *oh_out = oh;
  if (ow_out) *ow_out = ow;
  return y;
}

Vec backbone_block(const Vec& x, std::size_t h, std::size_t w, std::size_t cin, const Vec& k1, const Vec& b1,
                   std::size_t c1, const Vec& k2, const Vec& b2, std::size_t c2, bool pool) {
  const Vec p1 = conv2d(x, h, w, cin, k1, 1, 1, c1, 1, 0, nullptr, nullptr);
  const Vec p2 = conv2d(x, h, w, cin, k2, 3, 3, c2, 1, 1, nullptr, nullptr);
  const std::size_t c = c1 + c2;
  Vec cat(h * w * c);
  for (std::size_t s = 0; s < h * w; ++s) {
    for (std::size_t j = 0; j < c1; ++j) cat[s * c + j] = relu(p1[s * c1 + j] + b1[j]);
    for (std::size_t j = 0; j < c2; ++j) cat[s * c + c1 + j] = relu(p2[s * c2 + j] + b2[j]);
  }
  if (!pool) return cat;
  const std::size_t oh = h / 2, ow = w / 2;
  Vec out(oh * ow * c);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t xx = 0; xx < ow; ++xx)
      for (std::size_t j = 0; j < c; ++j) {
        const Scalar s = cat[((2 * y) * w + 2 * xx) * c + j] + cat[((2 * y) * w + 2 * xx + 1) * c + j] +
                         cat[((2 * y + 1) * w + 2 * xx) * c + j] + cat[((2 * y + 1) * w + 2 * xx + 1) * c + j];
        out[(y * ow + xx) * c + j] = s / 4;
      }
  return out;
}

Vec bilinear(const Vec& x, std::size_t h, std::size_t w, std::size_t c, std::size_t oh, std::size_t ow) {
  Vec out(oh * ow * c);
  for (std::size_t i = 0; i < oh; ++i)
    for (std::size_t j = 0; j < ow; ++j) {
      const double sy = oh == 1 ? 0.0 : static_cast<double>(i) * static_cast<double>(h - 1) / static_cast<double>(oh - 1);
      const double sx = ow == 1 ? 0.0 : static_cast<double>(j) * static_cast<double>(w - 1) / static_cast<double>(ow - 1);
      const std::size_t y0 = static_cast<std::size_t>(std::floor(sy));
      const std::size_t x0 = static_cast<std::size_t>(std::floor(sx));
      const std::size_t y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
      const double fy = sy - static_cast<double>(y0), fx = sx - static_cast<double>(x0);
      for (std::size_t k = 0; k < c; ++k) {
        const double top = (1 - fx) * x[(y0 * w + x0) * c + k] + fx * x[(y0 * w + x1) * c + k];
        const double bot = (1 - fx) * x[(y1 * w + x0) * c + k] + fx * x[(y1 * w + x1) * c + k];
        out[(i * ow + j) * c + k] = static_cast<Scalar>((1 - fy) * top + fy * bot);
      }
    }
  return out;
}

std::vector<double> sq_distances(const Vec& emb, std::size_t b, std::size_t d) {
  std::vector<double> out(b * b, 0.0);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < b; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < d; ++p) {
        const double diff = static_cast<double>(emb[i * d + p]) - static_cast<double>(emb[j * d + p]);
        s += diff * diff;
      }
      out[i * b + j] = s;
    }
  return out;
}

double lsr_cross_entropy(const std::vector<std::vector<double>>& logits, const std::vector<int>& labels, double eps) {
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const auto& z = logits[i];
    const double k = static_cast<double>(z.size());
    double denom = 0.0;
    for (double v : z) denom += std::exp(v);
    for (std::size_t j = 0; j < z.size(); ++j) {
      const double q = (static_cast<int>(j) == labels[i] ? 1.0 - eps : 0.0) + eps / k;
      total -= q * std::log(std::exp(z[j]) / denom);
    }
  }
  return total / static_cast<double>(logits.size());
}

std::vector<MinedTriplet> enumerate_semihard(const std::vector<double>& d, const std::vector<int>& labels,
                                             std::size_t r) {
  const std::size_t b = labels.size();
  std::vector<MinedTriplet> out;
  for (std::size_t a = 0; a < b; ++a)
    for (std::size_t p = 0; p < b; ++p) {
      if (p == a || labels[p] != labels[a]) continue;
      std::vector<std::pair<double, std::size_t>> cands;
      for (std::size_t n = 0; n < b; ++n) {
        if (labels[n] == labels[a]) continue;
        if (d[a * b + p] < d[a * b + n]) cands.emplace_back(d[a * b + n], n);
      }
      std::sort(cands.begin(), cands.end());
      for (std::size_t i = 0; i < cands.size() && i < r; ++i) out.push_back({a, p, cands[i].second});
    }
  return out;
}

Retrieval brute_force_retrieval(const std::vector<double>& dist, std::size_t nq, std::size_t ng,
                                const std::vector<int>& q_pid, const std::vector<int>& q_cam,
                                const std::vector<int>& g_pid, const std::vector<int>& g_cam,
                                const std::vector<bool>& g_junk, std::size_t max_rank) {
  Retrieval out;
  std::vector<double> hits(max_rank, 0.0);
  for (std::size_t qi = 0; qi < nq; ++qi) {
    // Remaining gallery items, ordered by (distance, index) with insertion sort.
    std::vector<std::size_t> kept;
    for (std::size_t g = 0; g < ng; ++g) {
      if (g_junk[g]) continue;
      if (g_pid[g] == q_pid[qi] && g_cam[g] == q_cam[qi]) continue;
      kept.push_back(g);
    }
    for (std::size_t i = 1; i < kept.size(); ++i) {
      std::size_t j = i;
      while (j > 0) {
        const std::size_t x = kept[j - 1], y = kept[j];
        const double dx = dist[qi * ng + x], dy = dist[qi * ng + y];
        if (dx < dy || (dx == dy && x < y)) break;
        std::swap(kept[j - 1], kept[j]);
        --j;
      }
    }
    std::size_t relevant = 0;
    for (std::size_t g : kept) relevant += g_pid[g] == q_pid[qi] ? 1 : 0;
    if (relevant == 0) continue;

    double precision_sum = 0.0;
    std::size_t found = 0, first = 0;
    for (std::size_t pos = 0; pos < kept.size(); ++pos) {
      if (g_pid[kept[pos]] != q_pid[qi]) continue;
      ++found;
      if (found == 1) first = pos + 1;
      precision_sum += static_cast<double>(found) / static_cast<double>(pos + 1);
    }
    out.ap.push_back(precision_sum / static_cast<double>(relevant));
    for (std::size_t r = first; r <= max_rank; ++r) hits[r - 1] += 1.0;
    ++out.evaluated;
  }
  double s = 0.0;
  for (double v : out.ap) s += v;
  out.mean_ap = out.evaluated ? s / static_cast<double>(out.evaluated) : 0.0;
  out.cmc.resize(max_rank);
  for (std::size_t r = 0; r < max_rank; ++r) out.cmc[r] = out.evaluated ? hits[r] / static_cast<double>(out.evaluated) : 0.0;
  return out;
}

}  // namespace oracle
