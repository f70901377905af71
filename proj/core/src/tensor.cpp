#include "ccan/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <optional>

#include "ccan/error.hpp"

namespace ccan {

struct Tensor::Impl {
  Shape shape;
  std::vector<Scalar> data;
  bool requires_grad = false;
  std::optional<std::vector<Scalar>> grad;
};

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), Scalar{0}); }

Tensor Tensor::full(Shape shape, Scalar value) {
  for (auto extent : shape) {
    if (extent == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
  }
  debug::note_allocation(shape);
  auto impl = std::make_shared<Impl>();
  impl->data.assign(shape_numel(shape), value);
  impl->shape = std::move(shape);
  return Tensor(std::move(impl));
}

Tensor Tensor::from(Shape shape, std::vector<Scalar> values) {
  for (auto extent : shape) {
    if (extent == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
  }
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("shape " + shape_str(shape) + " holds " + std::to_string(shape_numel(shape)) +
                         " elements, got " + std::to_string(values.size()));
  }
  debug::note_allocation(shape);
  auto impl = std::make_shared<Impl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(Scalar value) { return from({1}, {value}); }

Tensor::Impl& Tensor::impl() const {
  if (!impl_) throw UsageError("use of an undefined tensor");
  return *impl_;
}

const Shape& Tensor::shape() const { return impl().shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return impl().data.size(); }

std::span<const Scalar> Tensor::data() const { return impl().data; }
std::span<Scalar> Tensor::mutable_data() { return impl().data; }

Scalar Tensor::item() const {
  if (numel() != 1) throw UsageError("item() on tensor of shape " + shape_str(shape()));
  return impl().data[0];
}

Scalar Tensor::at(std::initializer_list<std::size_t> index) const {
  const auto& s = shape();
  if (index.size() != s.size()) throw DimensionError("index rank does not match " + shape_str(s));
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= s[axis]) throw DimensionError("index out of range for " + shape_str(s));
    flat = flat * s[axis] + i;
    ++axis;
  }
  return impl().data[flat];
}

bool Tensor::requires_grad() const { return impl().requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  impl().requires_grad = on;
  return *this;
}

bool Tensor::has_grad() const { return impl().grad.has_value(); }

std::span<const Scalar> Tensor::grad() const {
  auto& g = impl().grad;
  if (!g) return {};
  return *g;
}

std::span<Scalar> Tensor::mutable_grad() {
  auto& i = impl();
  if (!i.grad) i.grad.emplace(i.data.size(), Scalar{0});
  return *i.grad;
}

void Tensor::zero_grad() {
  auto& g = impl().grad;
  if (g) std::fill(g->begin(), g->end(), Scalar{0});
}

void Tensor::clear_grad() { impl().grad.reset(); }

Tensor Tensor::clone() const {
  const auto& i = impl();
  return from(i.shape, i.data);
}

namespace debug {
namespace {
thread_local AllocationRecorder* g_recorder = nullptr;
}

AllocationRecorder::AllocationRecorder() : previous_(g_recorder) { g_recorder = this; }
AllocationRecorder::~AllocationRecorder() { g_recorder = previous_; }

std::size_t AllocationRecorder::count(const Shape& shape) const {
  return static_cast<std::size_t>(std::count(shapes_.begin(), shapes_.end(), shape));
}

void note_allocation(const Shape& shape) {
  if (g_recorder) g_recorder->shapes_.push_back(shape);
}

}  // namespace debug
}  // namespace ccan
