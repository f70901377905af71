#include "ccan/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ccan/error.hpp"
#include "kernels.hpp"

namespace ccan {
namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_str(t.shape()));
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " . " +
                         shape_str(b.shape()));
  }
  Tensor out = Tensor::zeros({m, n});
  kernels::gemm_nn(m, k, n, a.data().data(), b.data().data(), out.mutable_data().data());
  record_op({a, b}, out, [a, b, m, k, n](std::span<const Scalar> g, const GradSink& sink) {
    if (auto ga = sink[0]; !ga.empty()) kernels::gemm_nt(m, n, k, g.data(), b.data().data(), ga.data());
    if (auto gb = sink[1]; !gb.empty()) kernels::gemm_tn(k, m, n, a.data().data(), g.data(), gb.data());
  });
  return out;
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank(x, 2, "linear");
  require_rank(weight, 2, "linear");
  const std::size_t n = x.dim(0), in = x.dim(1), out_dim = weight.dim(0);
  if (weight.dim(1) != in) {
    throw DimensionError("linear: input " + shape_str(x.shape()) + " does not match weight " +
                         shape_str(weight.shape()));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != out_dim)) {
    throw DimensionError("linear: bias " + shape_str(bias.shape()) + " does not match weight " +
                         shape_str(weight.shape()));
  }
  Tensor out = Tensor::zeros({n, out_dim});
  auto o = out.mutable_data();
  kernels::gemm_nt(n, in, out_dim, x.data().data(), weight.data().data(), o.data());
  if (bias.defined()) {
    auto b = bias.data();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < out_dim; ++j) o[i * out_dim + j] += b[j];
  }
  std::vector<Tensor> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  record_op(std::move(inputs), out,
            [x, weight, n, in, out_dim, has_bias = bias.defined()](std::span<const Scalar> g,
                                                                   const GradSink& sink) {
              if (auto gx = sink[0]; !gx.empty())
                kernels::gemm_nn(n, out_dim, in, g.data(), weight.data().data(), gx.data());
              if (auto gw = sink[1]; !gw.empty())
                kernels::gemm_tn(out_dim, n, in, g.data(), x.data().data(), gw.data());
              if (has_bias) {
                if (auto gb = sink[2]; !gb.empty()) {
                  for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < out_dim; ++j) gb[j] += g[i * out_dim + j];
                }
              }
            });
  return out;
}

Tensor elementwise(Elementwise kind, const Tensor& a, const Tensor& b) {
  const bool same = a.shape() == b.shape();
  const bool b_scalar = !same && b.numel() == 1;
  const bool a_scalar = !same && !b_scalar && a.numel() == 1;
  if (!same && !a_scalar && !b_scalar) {
    throw DimensionError("elementwise: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const Shape& shape = a_scalar ? b.shape() : a.shape();
  const std::size_t count = shape_numel(shape);
  Tensor out = Tensor::zeros(shape);
  auto o = out.mutable_data();
  auto av = a.data();
  auto bv = b.data();
  const std::size_t sa = a_scalar ? 0 : 1;
  const std::size_t sb = b_scalar ? 0 : 1;
  for (std::size_t i = 0; i < count; ++i) {
    const Scalar x = av[i * sa], y = bv[i * sb];
    switch (kind) {
      case Elementwise::kAdd: o[i] = x + y; break;
      case Elementwise::kSub: o[i] = x - y; break;
      case Elementwise::kHadamard: o[i] = x * y; break;
    }
  }
  record_op({a, b}, out, [a, b, kind, sa, sb, count](std::span<const Scalar> g, const GradSink& sink) {
    auto av = a.data();
    auto bv = b.data();
    if (auto ga = sink[0]; !ga.empty()) {
      for (std::size_t i = 0; i < count; ++i) {
        const Scalar d = kind == Elementwise::kHadamard ? g[i] * bv[i * sb] : g[i];
        ga[i * sa] += d;
      }
    }
    if (auto gb = sink[1]; !gb.empty()) {
      for (std::size_t i = 0; i < count; ++i) {
        Scalar d = g[i];
        if (kind == Elementwise::kSub) d = -d;
        if (kind == Elementwise::kHadamard) d = g[i] * av[i * sa];
        gb[i * sb] += d;
      }
    }
  });
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(Elementwise::kAdd, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(Elementwise::kSub, a, b); }
Tensor hadamard(const Tensor& a, const Tensor& b) { return elementwise(Elementwise::kHadamard, a, b); }

Tensor scale(const Tensor& a, Scalar factor) {
  Tensor out = Tensor::zeros(a.shape());
  auto o = out.mutable_data();
  auto av = a.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] * factor;
  record_op({a}, out, [factor](std::span<const Scalar> g, const GradSink& sink) {
    auto ga = sink[0];
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * factor;
  });
  return out;
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  if (bias.rank() != 1 || x.shape().back() != bias.dim(0)) {
    throw DimensionError("add_bias: bias " + shape_str(bias.shape()) + " does not match last axis of " +
                         shape_str(x.shape()));
  }
  const std::size_t c = bias.dim(0);
  const std::size_t rows = x.numel() / c;
  Tensor out = x.clone();
  auto o = out.mutable_data();
  auto b = bias.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < c; ++j) o[r * c + j] += b[j];
  record_op({x, bias}, out, [rows, c](std::span<const Scalar> g, const GradSink& sink) {
    if (auto gx = sink[0]; !gx.empty())
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
    if (auto gb = sink[1]; !gb.empty())
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < c; ++j) gb[j] += g[r * c + j];
  });
  return out;
}

Tensor relu(const Tensor& a) {
  Tensor out = Tensor::zeros(a.shape());
  auto o = out.mutable_data();
  auto av = a.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] > 0 ? av[i] : Scalar{0};
  if (KinkMonitor::active()) {
    std::uint64_t word = 0;
    for (std::size_t i = 0; i < av.size(); ++i) {
      word = (word << 1) | (av[i] > 0 ? 1u : 0u);
      if (i % 64 == 63) {
        KinkMonitor::note(word);
        word = 0;
      }
    }
    KinkMonitor::note(word);
  }
  record_op({a}, out, [a](std::span<const Scalar> g, const GradSink& sink) {
    auto ga = sink[0];
    auto av = a.data();
    for (std::size_t i = 0; i < ga.size(); ++i)
      if (av[i] > 0) ga[i] += g[i];
  });
  return out;
}

Tensor sum(const Tensor& a) {
  Scalar total = 0;
  for (auto v : a.data()) total += v;
  Tensor out = Tensor::scalar(total);
  record_op({a}, out, [](std::span<const Scalar> g, const GradSink& sink) {
    auto ga = sink[0];
    for (auto& v : ga) v += g[0];
  });
  return out;
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  }
  auto data = a.data();
  Tensor out = Tensor::from(std::move(shape), std::vector<Scalar>(data.begin(), data.end()));
  record_op({a}, out, [](std::span<const Scalar> g, const GradSink& sink) {
    auto ga = sink[0];
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
  });
  return out;
}

Tensor transpose2d(const Tensor& a) {
  require_rank(a, 2, "transpose2d");
  const std::size_t r = a.dim(0), c = a.dim(1);
  Tensor out = Tensor::zeros({c, r});
  auto o = out.mutable_data();
  auto av = a.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) o[j * r + i] = av[i * c + j];
  record_op({a}, out, [r, c](std::span<const Scalar> g, const GradSink& sink) {
    auto ga = sink[0];
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
  });
  return out;
}

namespace {

// Splits `shape` around `axis` into (outer, extent, inner) element counts.
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end) {
  if (axis >= a.rank()) {
    throw DimensionError("slice: axis " + std::to_string(axis) + " out of range for " + shape_str(a.shape()));
  }
  if (begin >= end || end > a.dim(axis)) {
    throw DimensionError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") out of bounds for axis " + std::to_string(axis) + " of " + shape_str(a.shape()));
  }
  const AxisSplit s = split_axis(a.shape(), axis);
  const std::size_t len = end - begin;
  Shape shape = a.shape();
  shape[axis] = len;
  Tensor out = Tensor::zeros(shape);
  auto o = out.mutable_data();
  auto av = a.data();
  for (std::size_t p = 0; p < s.outer; ++p) {
    const Scalar* src = av.data() + (p * s.extent + begin) * s.inner;
    std::copy(src, src + len * s.inner, o.data() + p * len * s.inner);
  }
  record_op({a}, out, [s, begin, len](std::span<const Scalar> g, const GradSink& sink) {
    auto ga = sink[0];
    for (std::size_t p = 0; p < s.outer; ++p) {
      Scalar* dst = ga.data() + (p * s.extent + begin) * s.inner;
      const Scalar* src = g.data() + p * len * s.inner;
      for (std::size_t i = 0; i < len * s.inner; ++i) dst[i] += src[i];
    }
  });
  return out;
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no operands");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) {
    throw DimensionError("concat: axis " + std::to_string(axis) + " out of range for " + shape_str(first));
  }
  Shape shape = first;
  shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& ps = p.shape();
    bool ok = ps.size() == first.size();
    for (std::size_t i = 0; ok && i < ps.size(); ++i) ok = i == axis || ps[i] == first[i];
    if (!ok) {
      throw DimensionError("concat: ragged operands " + shape_str(first) + " and " + shape_str(ps) +
                           " along axis " + std::to_string(axis));
    }
    shape[axis] += ps[axis];
  }
  const AxisSplit total = split_axis(shape, axis);
  Tensor out = Tensor::zeros(shape);
  auto o = out.mutable_data();
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    const std::size_t width = p.dim(axis) * total.inner;
    auto pv = p.data();
    for (std::size_t q = 0; q < total.outer; ++q) {
      std::copy(pv.data() + q * width, pv.data() + (q + 1) * width,
                o.data() + q * total.extent * total.inner + offset * total.inner);
    }
    offset += p.dim(axis);
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  record_op(inputs, out, [inputs, offsets, total, axis](std::span<const Scalar> g, const GradSink& sink) {
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      auto gk = sink[k];
      if (gk.empty()) continue;
      const std::size_t width = inputs[k].dim(axis) * total.inner;
      for (std::size_t q = 0; q < total.outer; ++q) {
        const Scalar* src = g.data() + q * total.extent * total.inner + offsets[k] * total.inner;
        Scalar* dst = gk.data() + q * width;
        for (std::size_t i = 0; i < width; ++i) dst[i] += src[i];
      }
    }
  });
  return out;
}

Tensor global_avg_pool(const Tensor& x) {
  require_rank(x, 3, "global_avg_pool");
  const std::size_t hw = x.dim(0) * x.dim(1), c = x.dim(2);
  Tensor out = Tensor::zeros({c});
  auto o = out.mutable_data();
  auto xv = x.data();
  for (std::size_t p = 0; p < hw; ++p)
    for (std::size_t j = 0; j < c; ++j) o[j] += xv[p * c + j];
  for (auto& v : o) v /= static_cast<Scalar>(hw);
  record_op({x}, out, [hw, c](std::span<const Scalar> g, const GradSink& sink) {
    auto gx = sink[0];
    const Scalar inv = Scalar{1} / static_cast<Scalar>(hw);
    for (std::size_t p = 0; p < hw; ++p)
      for (std::size_t j = 0; j < c; ++j) gx[p * c + j] += g[j] * inv;
  });
  return out;
}

namespace {

struct Tap {
  std::size_t lo, hi;
  Scalar w;  // weight of `hi`
};

std::vector<Tap> resize_taps(std::size_t src, std::size_t dst) {
  std::vector<Tap> taps(dst);
  for (std::size_t i = 0; i < dst; ++i) {
    const double pos = dst == 1 ? 0.0 : static_cast<double>(i) * static_cast<double>(src - 1) /
                                            static_cast<double>(dst - 1);
    std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    if (lo > src - 1) lo = src - 1;
    const std::size_t hi = std::min(lo + 1, src - 1);
    taps[i] = Tap{lo, hi, static_cast<Scalar>(pos - static_cast<double>(lo))};
  }
  return taps;
}

}  // namespace

Tensor bilinear_resize(const Tensor& x, std::size_t out_h, std::size_t out_w) {
  require_rank(x, 3, "bilinear_resize");
  if (out_h == 0 || out_w == 0) throw DimensionError("bilinear_resize: output extents must be positive");
  const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  const auto ty = resize_taps(h, out_h);
  const auto tx = resize_taps(w, out_w);
  Tensor out = Tensor::zeros({out_h, out_w, c});
  auto o = out.mutable_data();
  auto xv = x.data();
  for (std::size_t i = 0; i < out_h; ++i) {
    const Scalar wy = ty[i].w;
    for (std::size_t j = 0; j < out_w; ++j) {
      const Scalar wx = tx[j].w;
      const Scalar* a = xv.data() + (ty[i].lo * w + tx[j].lo) * c;
      const Scalar* b = xv.data() + (ty[i].lo * w + tx[j].hi) * c;
      const Scalar* d = xv.data() + (ty[i].hi * w + tx[j].lo) * c;
      const Scalar* e = xv.data() + (ty[i].hi * w + tx[j].hi) * c;
      Scalar* dst = o.data() + (i * out_w + j) * c;
      for (std::size_t k = 0; k < c; ++k) {
        dst[k] = (1 - wy) * (1 - wx) * a[k] + (1 - wy) * wx * b[k] + wy * (1 - wx) * d[k] + wy * wx * e[k];
      }
    }
  }
  record_op({x}, out, [ty, tx, w, c, out_h, out_w](std::span<const Scalar> g, const GradSink& sink) {
    auto gx = sink[0];
    for (std::size_t i = 0; i < out_h; ++i) {
      const Scalar wy = ty[i].w;
      for (std::size_t j = 0; j < out_w; ++j) {
        const Scalar wx = tx[j].w;
        const Scalar* src = g.data() + (i * out_w + j) * c;
        Scalar* a = gx.data() + (ty[i].lo * w + tx[j].lo) * c;
        Scalar* b = gx.data() + (ty[i].lo * w + tx[j].hi) * c;
        Scalar* d = gx.data() + (ty[i].hi * w + tx[j].lo) * c;
        Scalar* e = gx.data() + (ty[i].hi * w + tx[j].hi) * c;
        for (std::size_t k = 0; k < c; ++k) {
          a[k] += (1 - wy) * (1 - wx) * src[k];
          b[k] += (1 - wy) * wx * src[k];
          d[k] += wy * (1 - wx) * src[k];
          e[k] += wy * wx * src[k];
        }
      }
    }
  });
  return out;
}

}  // namespace ccan
