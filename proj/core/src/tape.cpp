#include "ccan/tape.hpp"

#include <string>

#include "ccan/error.hpp"

namespace ccan {
namespace {
thread_local Tape* g_tape = nullptr;
thread_local KinkMonitor* g_monitor = nullptr;
}  // namespace

std::span<Scalar> GradSink::operator[](std::size_t index) const {
  // Tensor handles share storage, so a copy writes into the same grad.
  Tensor t = inputs_[index];
  if (!t.requires_grad()) return {};
  return t.mutable_grad();
}

bool GradSink::wants(std::size_t index) const { return inputs_[index].requires_grad(); }

void Tape::record(std::vector<Tensor> inputs, Tensor output, BackwardFn backward) {
  entries_.push_back(Entry{std::move(inputs), std::move(output), std::move(backward)});
}

TapeScope::TapeScope(Tape& tape) : previous_(g_tape) { g_tape = &tape; }
TapeScope::~TapeScope() { g_tape = previous_; }

NoGradScope::NoGradScope() : previous_(g_tape) { g_tape = nullptr; }
NoGradScope::~NoGradScope() { g_tape = previous_; }

Tape* active_tape() noexcept { return g_tape; }

void record_op(std::vector<Tensor> inputs, Tensor& output, BackwardFn backward) {
  if (!g_tape) return;
  bool any = false;
  for (const auto& t : inputs) any = any || t.requires_grad();
  if (!any) return;
  output.set_requires_grad(true);
  g_tape->record(std::move(inputs), output, std::move(backward));
}

void backward(const Tensor& loss, const Tape& tape) {
  if (!loss.defined() || loss.numel() != 1) {
    throw UsageError("backward() needs a scalar loss, got " +
                     (loss.defined() ? shape_str(loss.shape()) : std::string("undefined tensor")));
  }
  for (const auto& e : tape.entries()) {
    Tensor out = e.output;
    out.clear_grad();
  }
  Tensor seed = loss;
  seed.mutable_grad()[0] += Scalar{1};

  const auto& entries = tape.entries();
  for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
    if (!it->output.has_grad()) continue;
    GradSink sink(it->inputs);
    it->backward(it->output.grad(), sink);
  }
}

KinkMonitor::KinkMonitor() : previous_(g_monitor) { g_monitor = this; }
KinkMonitor::~KinkMonitor() { g_monitor = previous_; }

bool KinkMonitor::active() noexcept { return g_monitor != nullptr; }

void KinkMonitor::note(std::uint64_t decision) noexcept {
  if (!g_monitor) return;
  auto& h = g_monitor->hash_;
  h ^= decision + 0x9e3779b97f4a7c15ULL;
  h *= 1099511628211ULL;
}

}  // namespace ccan
