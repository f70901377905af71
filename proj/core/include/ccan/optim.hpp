#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ccan/augment.hpp"
#include "ccan/network.hpp"
#include "ccan/objective.hpp"
#include "ccan/tensor.hpp"

namespace ccan {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.99;
  double weight_decay = 1e-4;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<std::vector<Scalar>> m, v;
  std::uint64_t t = 0;
};

// Decoupled weight decay (p -= lr * wd * p), then the bias-corrected ADAM
// update. Parameters without a gradient buffer are treated as having zero
// gradient.
void adam_step(std::span<Tensor> params, AdamState& state, double lr, const AdamConfig& config);

struct TrainConfig {
  double lr0 = 5e-4;
  AdamConfig adam;
  std::size_t epochs = 40;
  std::size_t lr_plateau = 30;
  std::size_t lr_decay_every = 10;
  double lr_factor = 0.1;
  LossConfig loss;
  std::size_t v = 8;
  std::size_t batch = 32;
  std::size_t erasing_start_epoch = 10;
  std::uint64_t seed = 0;

  // Output locations; empty paths disable the corresponding file.
  std::filesystem::path history_path;
  std::filesystem::path checkpoint_path;
  // Extra checkpoint every k epochs (0: only at the end).
  std::size_t checkpoint_every = 0;

  void validate() const;
};

// lr0 for epoch < plateau, then multiplied by factor once per started
// decay_every-epoch block: lr0 * factor^(1 + (epoch - plateau) / decay_every).
double lr_at(std::size_t epoch, const TrainConfig& config);

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  LossBreakdown mean;
  double mean_triplets = 0.0;
  double wall_seconds = 0.0;
  std::map<std::string, double> metrics;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

// One JSON object per line; wall time is left out so histories of identical
// runs compare equal byte for byte.
std::string history_line(const EpochRecord& record);

struct TrainSet {
  std::vector<Tensor> images;
  std::vector<int> labels;  // contiguous class indices
};

using EpochHook = std::function<std::map<std::string, double>(std::size_t epoch, const CcanModel& model)>;

// Trains `model` in place. Throws NumericError on a non-finite loss.
TrainHistory train(CcanModel& model, const TrainSet& data, const TrainConfig& config, const AugmentConfig& augment,
                   const EpochHook& on_epoch_end = {});

}  // namespace ccan
