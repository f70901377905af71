#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "ccan/checkpoint.hpp"
#include "ccan/error.hpp"
#include "ccan/optim.hpp"
#include "ccan/tape.hpp"

namespace ccan {
namespace {

bool finite(const LossBreakdown& b) {
  return std::isfinite(b.ce_g) && std::isfinite(b.tri_g) && std::isfinite(b.ce_l) && std::isfinite(b.tri_l) &&
         std::isfinite(b.total);
}

std::string describe(const LossBreakdown& b) {
  std::ostringstream out;
  out << "ce_g=" << b.ce_g << " tri_g=" << b.tri_g << " ce_l=" << b.ce_l << " tri_l=" << b.tri_l
      << " total=" << b.total;
  return out.str();
}

std::filesystem::path numbered(const std::filesystem::path& path, std::size_t epoch) {
  auto out = path;
  out.replace_filename(path.stem().string() + ".epoch" + std::to_string(epoch) + path.extension().string());
  return out;
}

}  // namespace

std::string history_line(const EpochRecord& record) {
  nlohmann::ordered_json j;
  j["epoch"] = record.epoch;
  j["lr"] = record.lr;
  j["ce_g"] = record.mean.ce_g;
  j["tri_g"] = record.mean.tri_g;
  j["ce_l"] = record.mean.ce_l;
  j["tri_l"] = record.mean.tri_l;
  j["total"] = record.mean.total;
  j["triplets"] = record.mean_triplets;
  if (!record.metrics.empty()) j["metrics"] = record.metrics;
  return j.dump();
}

TrainHistory train(CcanModel& model, const TrainSet& data, const TrainConfig& config, const AugmentConfig& augment_cfg,
                   const EpochHook& on_epoch_end) {
  config.validate();
  augment_cfg.validate();
  if (data.images.empty() || data.images.size() != data.labels.size()) {
    throw ConfigError("train: " + std::to_string(data.images.size()) + " images for " +
                      std::to_string(data.labels.size()) + " labels");
  }

  std::vector<Tensor> params;
  for (auto& p : model.parameters()) {
    p.tensor.set_requires_grad(true);
    params.push_back(p.tensor);
  }

  std::ofstream history_out;
  if (!config.history_path.empty()) {
    if (config.history_path.has_parent_path()) std::filesystem::create_directories(config.history_path.parent_path());
    history_out.open(config.history_path, std::ios::trunc);
    if (!history_out) throw Error("cannot open history file " + config.history_path.string());
  }

  Rng sampler = make_rng(config.seed, "train.sampler");
  Rng augmenter = make_rng(config.seed, "train.augment");
  AdamState state;
  TrainHistory history;
  const std::size_t steps = std::max<std::size_t>(1, data.images.size() / config.batch);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const double lr = lr_at(epoch, config);
    AugmentConfig epoch_aug = augment_cfg;
    epoch_aug.erase_enabled = epoch >= config.erasing_start_epoch;

    LossBreakdown sum;
    double triplets = 0.0;
    for (std::size_t step = 0; step < steps; ++step) {
      const auto picks = pk_sample(data.labels, config.v, config.batch, sampler);
      std::vector<int> labels;
      std::vector<Tensor> images;
      labels.reserve(picks.size());
      images.reserve(picks.size());
      for (auto i : picks) {
        labels.push_back(data.labels[i]);
        images.push_back(augment(data.images[i], epoch_aug, augmenter));
      }

      Tape tape;
      TotalLoss loss;
      {
        TapeScope scope(tape);
        const auto outputs = ccan_forward(images, model);
        loss = total_loss(outputs, labels, config.loss);
      }
      if (!finite(loss.breakdown)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", step " + std::to_string(step) +
                           ": " + describe(loss.breakdown));
      }
      backward(loss.total, tape);
      adam_step(params, state, lr, config.adam);
      for (auto& p : params) p.zero_grad();

      sum.ce_g += loss.breakdown.ce_g;
      sum.tri_g += loss.breakdown.tri_g;
      sum.ce_l += loss.breakdown.ce_l;
      sum.tri_l += loss.breakdown.tri_l;
      sum.total += loss.breakdown.total;
      triplets += static_cast<double>(loss.triplets);
    }

    EpochRecord record;
    record.epoch = epoch;
    record.lr = lr;
    const double n = static_cast<double>(steps);
    record.mean = {sum.ce_g / n, sum.tri_g / n, sum.ce_l / n, sum.tri_l / n, sum.total / n};
    record.mean_triplets = triplets / n;
    if (on_epoch_end) record.metrics = on_epoch_end(epoch, model);
    record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (history_out.is_open()) history_out << history_line(record) << '\n' << std::flush;
    history.epochs.push_back(std::move(record));

    if (!config.checkpoint_path.empty() && config.checkpoint_every > 0 && (epoch + 1) % config.checkpoint_every == 0 &&
        epoch + 1 < config.epochs) {
      save_checkpoint(numbered(config.checkpoint_path, epoch + 1), model);
    }
  }
  if (!config.checkpoint_path.empty()) save_checkpoint(config.checkpoint_path, model);
  return history;
}

}  // namespace ccan
