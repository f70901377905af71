#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ccan {

#if defined(CCAN_SCALAR_FLOAT)
using Scalar = float;
#else
using Scalar = double;
#endif

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major array with optional gradient tracking.
//
// A Tensor is a shared handle: copies alias the same storage, which is what
// lets parameters be referenced from both a model and the tape. Values are
// treated as immutable once an op has consumed them; only `grad` and the
// optimizer's in-place parameter update write to existing storage.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, Scalar value);
  static Tensor from(Shape shape, std::vector<Scalar> values);
  static Tensor scalar(Scalar value);

  bool defined() const noexcept { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const Scalar> data() const;
  std::span<Scalar> mutable_data();
  Scalar item() const;
  Scalar at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on = true);

  bool has_grad() const;
  std::span<const Scalar> grad() const;
  // Zero-initialized on first access.
  std::span<Scalar> mutable_grad();
  void zero_grad();
  // Drops the gradient buffer entirely.
  void clear_grad();

  // Fresh storage with the same values and no gradient history.
  Tensor clone() const;

  // Storage identity, used by the tape and by tests.
  const void* id() const noexcept { return impl_.get(); }

 private:
  struct Impl;
  explicit Tensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}
  Impl& impl() const;

  std::shared_ptr<Impl> impl_;
};

namespace debug {

// Records the shape of every tensor allocated on this thread while alive.
class AllocationRecorder {
 public:
  AllocationRecorder();
  ~AllocationRecorder();
  AllocationRecorder(const AllocationRecorder&) = delete;
  AllocationRecorder& operator=(const AllocationRecorder&) = delete;

  const std::vector<Shape>& shapes() const noexcept { return shapes_; }
  std::size_t count(const Shape& shape) const;

 private:
  friend void note_allocation(const Shape& shape);
  std::vector<Shape> shapes_;
  AllocationRecorder* previous_;
};

void note_allocation(const Shape& shape);

}  // namespace debug
}  // namespace ccan
