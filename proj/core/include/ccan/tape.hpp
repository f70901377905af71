#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ccan/tensor.hpp"

namespace ccan {

// Accumulates gradient contributions into the inputs of one recorded op.
class GradSink {
 public:
  explicit GradSink(std::span<const Tensor> inputs) : inputs_(inputs) {}

  // Zero-initialized gradient buffer of input `index`, or empty when that
  // input does not require a gradient.
  std::span<Scalar> operator[](std::size_t index) const;
  bool wants(std::size_t index) const;

 private:
  std::span<const Tensor> inputs_;
};

// Reverse-mode rule: receives d(loss)/d(output) and adds into the inputs.
using BackwardFn = std::function<void(std::span<const Scalar> grad_out, const GradSink& sink)>;

// Ordered record of differentiable ops.
class Tape {
 public:
  struct Entry {
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardFn backward;
  };

  void record(std::vector<Tensor> inputs, Tensor output, BackwardFn backward);
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const std::vector<Entry>& entries() const noexcept { return entries_; }
  void clear() noexcept { entries_.clear(); }

 private:
  std::vector<Entry> entries_;
};

// Makes `tape` the recording target for ops on this thread. Without an active
// scope ops run in inference mode and record nothing.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape() noexcept;

// Suspends recording on this thread (inference inside a recorded region).
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

// Records `output = op(inputs)` on the active tape if any input requires a
// gradient; marks the output as requiring one in that case.
void record_op(std::vector<Tensor> inputs, Tensor& output, BackwardFn backward);

// Populates grad on every requires_grad tensor reachable from `loss`.
// Throws UsageError if `loss` is not a single-element tensor.
void backward(const Tensor& loss, const Tape& tape);

// Collects a fingerprint of every branch decision taken by non-smooth ops
// (ReLU sign, pooling argmax, hinge activity, mining selections). Two
// evaluations with the same fingerprint lie in the same smooth piece.
class KinkMonitor {
 public:
  KinkMonitor();
  ~KinkMonitor();
  KinkMonitor(const KinkMonitor&) = delete;
  KinkMonitor& operator=(const KinkMonitor&) = delete;

  std::uint64_t fingerprint() const noexcept { return hash_; }

  static bool active() noexcept;
  static void note(std::uint64_t decision) noexcept;

 private:
  std::uint64_t hash_ = 1469598103934665603ULL;
  KinkMonitor* previous_;
};

}  // namespace ccan
