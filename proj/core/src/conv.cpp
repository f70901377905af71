#include <algorithm>
#include <limits>
#include <string>

#include "ccan/error.hpp"
#include "ccan/ops.hpp"
#include "kernels.hpp"

namespace ccan {
namespace {

// Convolutions floor the output extent (trailing rows a full stride cannot
// reach are dropped); pooling demands an exact tiling.
std::size_t output_extent(std::size_t in, std::size_t window, std::size_t stride, std::size_t pad, const char* op,
                          bool allow_floor) {
  const std::size_t padded = in + 2 * pad;
  if (stride == 0 || window == 0 || padded < window || (!allow_floor && (padded - window) % stride != 0)) {
    throw ConfigError(std::string(op) + ": extent " + std::to_string(in) + " with window " +
                      std::to_string(window) + ", stride " + std::to_string(stride) + ", pad " +
                      std::to_string(pad) + " gives a non-integral output");
  }
  return (padded - window) / stride + 1;
}

struct ConvGeometry {
  std::size_t h, w, cin, kh, kw, cout, stride, pad, oh, ow;
  std::size_t patch() const { return kh * kw * cin; }
  bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

// cols[(oy*ow + ox) x (ky*kw + kx)*cin + c]
void im2col(const ConvGeometry& g, const Scalar* x, Scalar* cols) {
  const std::size_t patch = g.patch();
  for (std::size_t oy = 0; oy < g.oh; ++oy) {
    for (std::size_t ox = 0; ox < g.ow; ++ox) {
      Scalar* row = cols + (oy * g.ow + ox) * patch;
      for (std::size_t ky = 0; ky < g.kh; ++ky) {
        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
        for (std::size_t kx = 0; kx < g.kw; ++kx) {
          const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
          Scalar* dst = row + (ky * g.kw + kx) * g.cin;
          if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(g.h) || ix >= static_cast<std::ptrdiff_t>(g.w)) {
            std::fill(dst, dst + g.cin, Scalar{0});
          } else {
            const Scalar* src = x + (static_cast<std::size_t>(iy) * g.w + static_cast<std::size_t>(ix)) * g.cin;
            std::copy(src, src + g.cin, dst);
          }
        }
      }
    }
  }
}

void col2im(const ConvGeometry& g, const Scalar* cols, Scalar* x) {
  const std::size_t patch = g.patch();
  for (std::size_t oy = 0; oy < g.oh; ++oy) {
    for (std::size_t ox = 0; ox < g.ow; ++ox) {
      const Scalar* row = cols + (oy * g.ow + ox) * patch;
      for (std::size_t ky = 0; ky < g.kh; ++ky) {
        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
        for (std::size_t kx = 0; kx < g.kw; ++kx) {
          const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
          if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
          const Scalar* src = row + (ky * g.kw + kx) * g.cin;
          Scalar* dst = x + (static_cast<std::size_t>(iy) * g.w + static_cast<std::size_t>(ix)) * g.cin;
          for (std::size_t c = 0; c < g.cin; ++c) dst[c] += src[c];
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& kernels, std::size_t stride, std::size_t pad) {
  if (x.rank() != 3 || kernels.rank() != 4) {
    throw DimensionError("conv2d: expected input [H x W x Cin] and kernels [kh x kw x Cin x Cout], got " +
                         shape_str(x.shape()) + " and " + shape_str(kernels.shape()));
  }
  if (kernels.dim(2) != x.dim(2)) {
    throw DimensionError("conv2d: input channels of " + shape_str(x.shape()) + " do not match kernels " +
                         shape_str(kernels.shape()));
  }
  if (kernels.dim(0) % 2 == 0 || kernels.dim(1) % 2 == 0) {
    throw ConfigError("conv2d: kernel extents must be odd, got " + shape_str(kernels.shape()));
  }
  ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), kernels.dim(0), kernels.dim(1), kernels.dim(3), stride, pad, 0, 0};
  g.oh = output_extent(g.h, g.kh, stride, pad, "conv2d", true);
  g.ow = output_extent(g.w, g.kw, stride, pad, "conv2d", true);

  const std::size_t positions = g.oh * g.ow;
  std::vector<Scalar> cols;
  const Scalar* col_ptr = x.data().data();
  if (!g.pointwise()) {
    cols.resize(positions * g.patch());
    im2col(g, x.data().data(), cols.data());
    col_ptr = cols.data();
  }
  Tensor out = Tensor::zeros({g.oh, g.ow, g.cout});
  kernels::gemm_nn(positions, g.patch(), g.cout, col_ptr, kernels.data().data(), out.mutable_data().data());

  record_op({x, kernels}, out,
            [x, kernels, g, cols = std::move(cols)](std::span<const Scalar> grad, const GradSink& sink) {
              const std::size_t positions = g.oh * g.ow;
              if (auto gk = sink[1]; !gk.empty()) {
                const Scalar* c = g.pointwise() ? x.data().data() : cols.data();
                kernels::gemm_tn(g.patch(), positions, g.cout, c, grad.data(), gk.data());
              }
              if (auto gx = sink[0]; !gx.empty()) {
                if (g.pointwise()) {
                  kernels::gemm_nt(positions, g.cout, g.cin, grad.data(), kernels.data().data(), gx.data());
                } else {
                  std::vector<Scalar> dcols(positions * g.patch(), Scalar{0});
                  kernels::gemm_nt(positions, g.cout, g.patch(), grad.data(), kernels.data().data(), dcols.data());
                  col2im(g, dcols.data(), gx.data());
                }
              }
            });
  return out;
}

Tensor pool2d(const Tensor& x, PoolKind kind, std::size_t window, std::size_t stride) {
  if (x.rank() != 3) throw DimensionError("pool2d: expected [H x W x C], got " + shape_str(x.shape()));
  const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  const std::size_t oh = output_extent(h, window, stride, 0, "pool2d", false);
  const std::size_t ow = output_extent(w, window, stride, 0, "pool2d", false);
  Tensor out = Tensor::zeros({oh, ow, c});
  auto o = out.mutable_data();
  auto xv = x.data();

  if (kind == PoolKind::kAvg) {
    const Scalar inv = Scalar{1} / static_cast<Scalar>(window * window);
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        Scalar* dst = o.data() + (oy * ow + ox) * c;
        for (std::size_t ky = 0; ky < window; ++ky)
          for (std::size_t kx = 0; kx < window; ++kx) {
            const Scalar* src = xv.data() + ((oy * stride + ky) * w + ox * stride + kx) * c;
            for (std::size_t k = 0; k < c; ++k) dst[k] += src[k];
          }
        for (std::size_t k = 0; k < c; ++k) dst[k] *= inv;
      }
    record_op({x}, out, [w, c, oh, ow, window, stride, inv](std::span<const Scalar> g, const GradSink& sink) {
      auto gx = sink[0];
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox) {
          const Scalar* src = g.data() + (oy * ow + ox) * c;
          for (std::size_t ky = 0; ky < window; ++ky)
            for (std::size_t kx = 0; kx < window; ++kx) {
              Scalar* dst = gx.data() + ((oy * stride + ky) * w + ox * stride + kx) * c;
              for (std::size_t k = 0; k < c; ++k) dst[k] += src[k] * inv;
            }
        }
    });
    return out;
  }

  // Max: the first element in row-major window order wins ties.
  std::vector<std::size_t> argmax(oh * ow * c);
  for (std::size_t oy = 0; oy < oh; ++oy)
    for (std::size_t ox = 0; ox < ow; ++ox)
      for (std::size_t k = 0; k < c; ++k) {
        Scalar best = -std::numeric_limits<Scalar>::infinity();
        std::size_t best_at = 0;
        for (std::size_t ky = 0; ky < window; ++ky)
          for (std::size_t kx = 0; kx < window; ++kx) {
            const std::size_t at = ((oy * stride + ky) * w + ox * stride + kx) * c + k;
            if (xv[at] > best) {
              best = xv[at];
              best_at = at;
            }
          }
        const std::size_t slot = (oy * ow + ox) * c + k;
        o[slot] = best;
        argmax[slot] = best_at;
      }
  if (KinkMonitor::active()) {
    for (auto a : argmax) KinkMonitor::note(a);
  }
  record_op({x}, out, [argmax = std::move(argmax)](std::span<const Scalar> g, const GradSink& sink) {
    auto gx = sink[0];
    for (std::size_t i = 0; i < argmax.size(); ++i) gx[argmax[i]] += g[i];
  });
  return out;
}

}  // namespace ccan
