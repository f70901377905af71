#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ccan/augment.hpp"
#include "ccan/network.hpp"
#include "ccan/optim.hpp"
#include "ccan/synth.hpp"

namespace ccan::cli {

enum class ValueKind { kUint, kDouble, kBool, kString, kUintList, kSettingList, kSetting, kAttention };

struct KeySpec {
  std::string_view key;
  ValueKind kind;
  std::string_view default_value;
  std::string_view help;
};

// Every accepted key, in the order the resolved file lists them.
std::span<const KeySpec> config_schema();

// key=value assignments validated against config_schema(). Unset keys hold
// their defaults, so a RunConfig is always complete.
class RunConfig {
 public:
  RunConfig();

  // One assignment per line; '#' starts a comment; blank lines ignored.
  // Errors name the line number.
  static RunConfig from_text(std::string_view text, std::string_view origin = "<text>");
  static RunConfig from_file(const std::filesystem::path& path);

  // Throws ConfigError for unknown keys or values of the wrong kind.
  void set(std::string_view key, std::string_view value);
  // "key=value".
  void apply_override(std::string_view assignment);

  const std::string& raw(std::string_view key) const;
  std::uint64_t get_uint(std::string_view key) const;
  double get_double(std::string_view key) const;
  bool get_bool(std::string_view key) const;
  std::vector<std::uint64_t> get_uint_list(std::string_view key) const;
  std::vector<std::string> get_list(std::string_view key) const;

  // Canonical form: every key in schema order.
  std::string to_text() const;
  void write(const std::filesystem::path& path) const;

  // num_ids is taken from the data, not from the config.
  ModelConfig model_config(std::size_t num_ids) const;
  TrainConfig train_config() const;
  AugmentConfig augment_config() const;
  SynthConfig synth_config() const;
  std::vector<std::size_t> eval_ranks() const;

  // Builds and validates every derived config; throws ConfigError.
  void validate() const;

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

// Component seeds fanned out from the root `seed` key.
std::uint64_t model_seed(const RunConfig& config);
std::uint64_t train_seed(const RunConfig& config);

}  // namespace ccan::cli
