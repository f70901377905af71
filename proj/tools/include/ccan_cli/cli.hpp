#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ccan/optim.hpp"
#include "ccan/retrieval.hpp"
#include "ccan_cli/run_config.hpp"

namespace ccan::cli {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;     // a check or computation failed
inline constexpr int kExitBadConfig = 2;   // usage, config or schema error

// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

struct TrainOutcome {
  TrainHistory history;
  std::filesystem::path checkpoint;
  double seconds = 0.0;
};

// Trains from the manifest under data_dir and writes config.cfg,
// checkpoint.ccac, history.jsonl and timing.tsv into out_dir.
TrainOutcome train_from_config(const RunConfig& config, std::ostream& log);

// Scores a checkpoint on the query/gallery split of data_dir.
EvalReport evaluate_checkpoint(const RunConfig& config, const std::filesystem::path& checkpoint);

struct AblationRow {
  std::string label;
  std::string setting;
  std::size_t d = 0, k_p = 0;
  EvalReport report;
  double first_loss = 0.0, final_loss = 0.0;
  double seconds = 0.0;
};

// Tab-separated table: label, setting, d, k_p, mAP, one column per rank,
// first/final epoch loss. Wall time is left out so tables compare exactly.
std::string format_ablation_table(const std::vector<AblationRow>& rows, const std::vector<std::size_t>& ranks);

// Checks every worked example of the library; returns the failure count.
int run_selftest(std::ostream& out);

}  // namespace ccan::cli
