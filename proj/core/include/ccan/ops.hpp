#pragma once

#include <cstddef>
#include <span>

#include "ccan/tape.hpp"
#include "ccan/tensor.hpp"

// Differentiable primitives. Every op records itself on the active tape when
// one of its inputs requires a gradient; otherwise it is a plain computation.
namespace ccan {

// [m x k] . [k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b);

// x . weight^T (+ bias) for x [n x in], weight [out x in], bias [out] or undefined.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias = {});

enum class Elementwise { kAdd, kSub, kHadamard };

// Same-shape operands, or one single-element operand broadcast to the other.
Tensor elementwise(Elementwise kind, const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, Scalar factor);

// Adds bias [C] along the last axis of x.
Tensor add_bias(const Tensor& x, const Tensor& bias);

// Subgradient 0 at exactly 0.
Tensor relu(const Tensor& a);

// Sum of all elements as a single-element tensor.
Tensor sum(const Tensor& a);

Tensor reshape(const Tensor& a, Shape shape);
Tensor transpose2d(const Tensor& a);
// Elements [begin, end) along `axis`.
Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end);
Tensor concat(std::span<const Tensor> parts, std::size_t axis);

// x [H x W x Cin], kernels [kh x kw x Cin x Cout]; zero padding; cross-correlation.
// H' = floor((H + 2 pad - kh) / stride) + 1.
Tensor conv2d(const Tensor& x, const Tensor& kernels, std::size_t stride, std::size_t pad);

enum class PoolKind { kMax, kAvg };

// No padding; (extent - window) must be a multiple of stride.
Tensor pool2d(const Tensor& x, PoolKind kind, std::size_t window, std::size_t stride);

// [H x W x C] -> [C]
Tensor global_avg_pool(const Tensor& x);

// Align-corners bilinear sampling: src = dst * (S - 1) / (D - 1), src = 0 when D == 1.
Tensor bilinear_resize(const Tensor& x, std::size_t out_h, std::size_t out_w);

}  // namespace ccan
