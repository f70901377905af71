#include "ccan/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "ccan/tape.hpp"

namespace ccan {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

std::string GradCheckReport::describe() const {
  std::ostringstream os;
  os << (pass ? "pass" : "FAIL") << " max_rel_err=" << max_rel_err << " checked=" << checked
     << " straddled=" << straddled << " unresolved=" << unresolved;
  if (checked) {
    os << " worst=input" << worst_input << "[" << worst_index << "] analytic=" << worst_analytic
       << " numeric=" << worst_numeric;
  }
  return os.str();
}

namespace {

struct Probe {
  double value;
  std::uint64_t fingerprint;
};

Probe evaluate(const std::function<Tensor()>& f) {
  NoGradScope no_grad;
  KinkMonitor monitor;
  const Tensor out = f();
  return {static_cast<double>(out.item()), monitor.fingerprint()};
}

}  // namespace

GradCheckReport grad_check(const std::function<Tensor()>& f, std::vector<Tensor> inputs,
                           const GradCheckOptions& options) {
  std::vector<bool> saved_flags;
  for (auto& t : inputs) {
    saved_flags.push_back(t.requires_grad());
    t.set_requires_grad(true);
    t.clear_grad();
  }

  std::uint64_t base_fingerprint = 0;
  {
    Tape tape;
    TapeScope scope(tape);
    KinkMonitor monitor;
    const Tensor loss = f();
    base_fingerprint = monitor.fingerprint();
    backward(loss, tape);
  }
  std::vector<std::vector<Scalar>> analytic;
  for (auto& t : inputs) {
    auto g = t.grad();
    analytic.emplace_back(g.begin(), g.end());
    if (analytic.back().empty()) analytic.back().assign(t.numel(), Scalar{0});
  }

  GradCheckReport report;
  std::mt19937_64 rng(options.seed);
  const Scalar h = static_cast<Scalar>(options.h);

  // Returns false when the probe straddles a non-smooth decision or the
  // gradient is below what a one-ulp change of f can resolve at this tol.
  auto probe = [&](std::size_t input, std::size_t index) {
    auto data = inputs[input].mutable_data();
    const Scalar original = data[index];
    data[index] = original + h;
    const Probe plus = evaluate(f);
    data[index] = original - h;
    const Probe minus = evaluate(f);
    data[index] = original;
    if (plus.fingerprint != base_fingerprint || minus.fingerprint != base_fingerprint) {
      ++report.straddled;
      return false;
    }
    const double numeric = (plus.value - minus.value) / (2.0 * options.h);
    const double a = static_cast<double>(analytic[input][index]);
    const double quantum = std::numeric_limits<Scalar>::epsilon() * std::max(std::abs(plus.value), std::abs(minus.value)) /
                           options.h;
    const double magnitude = std::max(std::abs(a), std::abs(numeric));
    if (magnitude > 0.0 && magnitude * options.tol < quantum) {
      ++report.unresolved;
      return false;
    }
    const double err = relative_error(a, numeric);
    if (report.checked == 0 || err > report.max_rel_err) {
      report.max_rel_err = err;
      report.worst_input = input;
      report.worst_index = index;
      report.worst_analytic = a;
      report.worst_numeric = numeric;
    }
    ++report.checked;
    return true;
  };

  std::size_t requested = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const std::size_t n = inputs[i].numel();
    if (options.max_coords_per_input == 0 || options.max_coords_per_input >= n) {
      requested += n;
      for (std::size_t k = 0; k < n; ++k) probe(i, k);
      continue;
    }
    requested += options.max_coords_per_input;
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::size_t accepted = 0;
    // Resample rejected probes, bounded so a fully kinked input terminates.
    for (std::size_t attempts = 0; accepted < options.max_coords_per_input && attempts < 8 * options.max_coords_per_input;
         ++attempts) {
      if (probe(i, pick(rng))) ++accepted;
    }
  }

  for (std::size_t i = 0; i < inputs.size(); ++i) {
    inputs[i].clear_grad();
    inputs[i].set_requires_grad(saved_flags[i]);
  }
  // At least half of the requested comparisons must have been made.
  report.pass = report.checked > 0 && report.max_rel_err < options.tol && report.checked * 2 >= requested;
  return report;
}

}  // namespace ccan
