#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ccan/gradcheck.hpp"
#include "ccan/network.hpp"

namespace ccan {

// 8x4 input, channel plan 8/16/24, 4-channel stride-1 stem, k_p = 2.
ModelConfig lite_model_config();

struct GradCheckCase {
  std::string name;
  double tol = 0.0;
  GradCheckReport report;
  double seconds = 0.0;
};

struct GradSuiteOptions {
  std::uint64_t seed = 0;
  double h = 1e-5;
  double tol = 1e-4;
  // The label-smoothed cross-entropy is smooth everywhere and is held to this.
  double lsr_tol = 1e-6;
  // Coordinates sampled per parameter tensor in the end-to-end case.
  std::size_t end_to_end_coords = 6;
};

// cca_forward, ssa_forward, nonlocal_forward, lsr_cross_entropy, triplet_loss
// and the lite end-to-end total loss, in that order.
std::vector<GradCheckCase> run_gradcheck_suite(const GradSuiteOptions& options = {});

std::string format_gradcheck_table(const std::vector<GradCheckCase>& cases);

}  // namespace ccan
