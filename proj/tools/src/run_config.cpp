#include "ccan_cli/run_config.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

#include "ccan/error.hpp"
#include "ccan/rng.hpp"

namespace ccan::cli {
namespace {

constexpr std::array kSchema{
    KeySpec{"seed", ValueKind::kUint, "0", "root seed; every component derives its own stream from it"},
    KeySpec{"data_dir", ValueKind::kString, "", "dataset directory holding manifest.tsv"},
    KeySpec{"out_dir", ValueKind::kString, "", "output directory"},
    KeySpec{"checkpoint", ValueKind::kString, "", "checkpoint read by eval (default <out_dir>/checkpoint.ccac)"},

    KeySpec{"synth.ids", ValueKind::kUint, "16", "identities"},
    KeySpec{"synth.per_id", ValueKind::kUint, "8", "images per identity per camera"},
    KeySpec{"synth.cams", ValueKind::kUint, "2", "cameras"},
    KeySpec{"synth.height", ValueKind::kUint, "64", "image height"},
    KeySpec{"synth.width", ValueKind::kUint, "32", "image width"},
    KeySpec{"synth.bands", ValueKind::kUint, "4", "horizontal body bands per identity"},
    KeySpec{"synth.palette", ValueKind::kUint, "3", "prototypes per band shared across identities"},
    KeySpec{"synth.camera_shift", ValueKind::kDouble, "0.3", "per-camera gain spread and offset"},
    KeySpec{"synth.noise", ValueKind::kDouble, "0.05", "Gaussian pixel noise stddev"},

    KeySpec{"model.setting", ValueKind::kSetting, "full", "ablation mask: G, L, G+L, G+SS, G+L+CC or full"},
    KeySpec{"model.global_attention", ValueKind::kAttention, "ssa", "global unit: ssa or nonlocal"},
    KeySpec{"model.input_h", ValueKind::kUint, "64", "network input height"},
    KeySpec{"model.input_w", ValueKind::kUint, "32", "network input width"},
    KeySpec{"model.stem_channels", ValueKind::kUint, "16", "stem conv channels (0 disables the stem)"},
    KeySpec{"model.stem_stride", ValueKind::kUint, "2", "stem conv stride"},
    KeySpec{"model.stem_pool", ValueKind::kBool, "true", "2x2 max-pool after the stem"},
    KeySpec{"model.c1", ValueKind::kUint, "32", "level-1 channels"},
    KeySpec{"model.c2", ValueKind::kUint, "64", "level-2 channels"},
    KeySpec{"model.c3", ValueKind::kUint, "128", "level-3 channels"},
    KeySpec{"model.pool1", ValueKind::kBool, "false", "2x2 avg-pool after level 1"},
    KeySpec{"model.pool2", ValueKind::kBool, "true", "2x2 avg-pool after level 2"},
    KeySpec{"model.pool3", ValueKind::kBool, "false", "2x2 avg-pool after level 3"},
    KeySpec{"model.d", ValueKind::kUint, "64", "embedding dimension per branch"},
    KeySpec{"model.k_p", ValueKind::kUint, "4", "body parts"},
    KeySpec{"model.attention_key_dim", ValueKind::kUint, "0", "attention K (0: C/8)"},

    KeySpec{"train.lr0", ValueKind::kDouble, "5e-4", "initial learning rate"},
    KeySpec{"train.beta1", ValueKind::kDouble, "0.9", "ADAM beta1"},
    KeySpec{"train.beta2", ValueKind::kDouble, "0.99", "ADAM beta2"},
    KeySpec{"train.weight_decay", ValueKind::kDouble, "1e-4", "decoupled weight decay"},
    KeySpec{"train.adam_eps", ValueKind::kDouble, "1e-8", "ADAM epsilon"},
    KeySpec{"train.epochs", ValueKind::kUint, "40", "epochs"},
    KeySpec{"train.lr_plateau", ValueKind::kUint, "30", "epochs at lr0"},
    KeySpec{"train.lr_decay_every", ValueKind::kUint, "10", "epochs per decay step after the plateau"},
    KeySpec{"train.lr_factor", ValueKind::kDouble, "0.1", "decay factor"},
    KeySpec{"train.tau", ValueKind::kDouble, "1.0", "triplet margin"},
    KeySpec{"train.epsilon_lsr", ValueKind::kDouble, "0.1", "label smoothing"},
    KeySpec{"train.r", ValueKind::kUint, "10", "semi-hard negatives per anchor-positive pair"},
    KeySpec{"train.v", ValueKind::kUint, "8", "identities per batch"},
    KeySpec{"train.batch", ValueKind::kUint, "32", "batch size (multiple of train.v)"},
    KeySpec{"train.erasing_start_epoch", ValueKind::kUint, "10", "first epoch with random erasing"},
    KeySpec{"train.checkpoint_every", ValueKind::kUint, "0", "extra checkpoint every k epochs (0: end only)"},

    KeySpec{"augment.resize_h", ValueKind::kUint, "72", "training resize height before the crop"},
    KeySpec{"augment.resize_w", ValueKind::kUint, "36", "training resize width before the crop"},
    KeySpec{"augment.hflip_prob", ValueKind::kDouble, "0.5", "horizontal flip probability"},
    KeySpec{"augment.erase_prob", ValueKind::kDouble, "0.5", "random erasing probability"},
    KeySpec{"augment.erase_area_lo", ValueKind::kDouble, "0.02", "min erased area fraction"},
    KeySpec{"augment.erase_area_hi", ValueKind::kDouble, "0.4", "max erased area fraction"},
    KeySpec{"augment.erase_aspect_lo", ValueKind::kDouble, "0.3", "min erased aspect ratio"},

    KeySpec{"eval.ranks", ValueKind::kUintList, "1,5,10", "CMC ranks to report"},

    KeySpec{"ablate.settings", ValueKind::kSettingList, "G,L,G+L,G+SS,G+L+CC,full", "settings trained by ablate"},
    KeySpec{"ablate.d_sweep", ValueKind::kUintList, "", "embedding sizes swept by ablate (full setting)"},
    KeySpec{"ablate.kp_sweep", ValueKind::kUintList, "", "part counts swept by ablate (full setting)"},
};

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

const KeySpec* find_spec(std::string_view key) {
  for (const auto& spec : kSchema) {
    if (spec.key == key) return &spec;
  }
  return nullptr;
}

std::vector<std::string> split_commas(std::string_view s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.emplace_back(trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

bool parse_uint(std::string_view s, std::uint64_t& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return !s.empty() && ec == std::errc{} && ptr == s.data() + s.size();
}

bool parse_double(std::string_view s, double& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return !s.empty() && ec == std::errc{} && ptr == s.data() + s.size();
}

// Returns the stored (normalized) form or throws.
std::string check_value(const KeySpec& spec, std::string_view value) {
  auto bad = [&](const char* expected) {
    return ConfigError("config key '" + std::string(spec.key) + "': '" + std::string(value) + "' is not " + expected);
  };
  switch (spec.kind) {
    case ValueKind::kUint: {
      std::uint64_t v;
      if (!parse_uint(value, v)) throw bad("a non-negative integer");
      return std::string(value);
    }
    case ValueKind::kDouble: {
      double v;
      if (!parse_double(value, v)) throw bad("a number");
      return std::string(value);
    }
    case ValueKind::kBool:
      if (value == "true" || value == "1") return "true";
      if (value == "false" || value == "0") return "false";
      throw bad("a boolean (true/false)");
    case ValueKind::kString:
      return std::string(value);
    case ValueKind::kUintList: {
      for (const auto& item : split_commas(value)) {
        std::uint64_t v;
        if (!parse_uint(item, v)) throw bad("a comma-separated list of integers");
      }
      return std::string(value);
    }
    case ValueKind::kSetting:
      (void)AblationMask::from_setting(value);
      return std::string(value);
    case ValueKind::kSettingList:
      for (const auto& item : split_commas(value)) (void)AblationMask::from_setting(item);
      return std::string(value);
    case ValueKind::kAttention:
      if (value == "ssa" || value == "nonlocal") return std::string(value);
      throw bad("ssa or nonlocal");
  }
  return std::string(value);
}

}  // namespace

std::span<const KeySpec> config_schema() { return kSchema; }

RunConfig::RunConfig() {
  for (const auto& spec : kSchema) values_.emplace(std::string(spec.key), std::string(spec.default_value));
}

RunConfig RunConfig::from_text(std::string_view text, std::string_view origin) {
  RunConfig config;
  std::size_t line_no = 0, start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) + ": expected key=value");
    }
    try {
      config.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return config;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_text(buffer.str(), path.string());
}

void RunConfig::set(std::string_view key, std::string_view value) {
  const KeySpec* spec = find_spec(key);
  if (!spec) throw ConfigError("unknown config key '" + std::string(key) + "'");
  values_[std::string(key)] = check_value(*spec, trim(value));
}

void RunConfig::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

const std::string& RunConfig::raw(std::string_view key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
  return it->second;
}

std::uint64_t RunConfig::get_uint(std::string_view key) const {
  std::uint64_t v = 0;
  parse_uint(raw(key), v);
  return v;
}

double RunConfig::get_double(std::string_view key) const {
  double v = 0.0;
  parse_double(raw(key), v);
  return v;
}

bool RunConfig::get_bool(std::string_view key) const { return raw(key) == "true"; }

std::vector<std::uint64_t> RunConfig::get_uint_list(std::string_view key) const {
  std::vector<std::uint64_t> out;
  for (const auto& item : split_commas(raw(key))) {
    std::uint64_t v = 0;
    parse_uint(item, v);
    out.push_back(v);
  }
  return out;
}

std::vector<std::string> RunConfig::get_list(std::string_view key) const { return split_commas(raw(key)); }

std::string RunConfig::to_text() const {
  std::ostringstream out;
  for (const auto& spec : kSchema) out << spec.key << '=' << values_.at(std::string(spec.key)) << '\n';
  return out.str();
}

void RunConfig::write(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << to_text();
}

ModelConfig RunConfig::model_config(std::size_t num_ids) const {
  ModelConfig c;
  c.input_h = get_uint("model.input_h");
  c.input_w = get_uint("model.input_w");
  c.stem_channels = get_uint("model.stem_channels");
  c.stem_stride = get_uint("model.stem_stride");
  c.stem_pool = get_bool("model.stem_pool");
  c.c1 = get_uint("model.c1");
  c.c2 = get_uint("model.c2");
  c.c3 = get_uint("model.c3");
  c.pool1 = get_bool("model.pool1");
  c.pool2 = get_bool("model.pool2");
  c.pool3 = get_bool("model.pool3");
  c.d = get_uint("model.d");
  c.k_p = get_uint("model.k_p");
  c.num_ids = num_ids;
  c.attention_key_dim = get_uint("model.attention_key_dim");
  c.global_attention = raw("model.global_attention") == "nonlocal" ? AttentionKind::kNonLocal
                                                                   : AttentionKind::kSymmetricSelf;
  c.mask = AblationMask::from_setting(raw("model.setting"));
  return c;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig c;
  c.lr0 = get_double("train.lr0");
  c.adam.beta1 = get_double("train.beta1");
  c.adam.beta2 = get_double("train.beta2");
  c.adam.weight_decay = get_double("train.weight_decay");
  c.adam.eps = get_double("train.adam_eps");
  c.epochs = get_uint("train.epochs");
  c.lr_plateau = get_uint("train.lr_plateau");
  c.lr_decay_every = get_uint("train.lr_decay_every");
  c.lr_factor = get_double("train.lr_factor");
  c.loss.tau = get_double("train.tau");
  c.loss.epsilon = get_double("train.epsilon_lsr");
  c.loss.r = get_uint("train.r");
  c.v = get_uint("train.v");
  c.batch = get_uint("train.batch");
  c.erasing_start_epoch = get_uint("train.erasing_start_epoch");
  c.checkpoint_every = get_uint("train.checkpoint_every");
  c.seed = train_seed(*this);
  return c;
}

AugmentConfig RunConfig::augment_config() const {
  AugmentConfig c;
  c.resize_h = get_uint("augment.resize_h");
  c.resize_w = get_uint("augment.resize_w");
  c.crop_h = get_uint("model.input_h");
  c.crop_w = get_uint("model.input_w");
  c.hflip_prob = get_double("augment.hflip_prob");
  c.erase.prob = get_double("augment.erase_prob");
  c.erase.area_lo = get_double("augment.erase_area_lo");
  c.erase.area_hi = get_double("augment.erase_area_hi");
  c.erase.aspect_lo = get_double("augment.erase_aspect_lo");
  return c;
}

SynthConfig RunConfig::synth_config() const {
  SynthConfig c;
  c.ids = get_uint("synth.ids");
  c.per_id = get_uint("synth.per_id");
  c.cams = get_uint("synth.cams");
  c.height = get_uint("synth.height");
  c.width = get_uint("synth.width");
  c.bands = get_uint("synth.bands");
  c.palette = get_uint("synth.palette");
  c.camera_shift = get_double("synth.camera_shift");
  c.noise = get_double("synth.noise");
  c.seed = get_uint("seed");
  return c;
}

std::vector<std::size_t> RunConfig::eval_ranks() const {
  std::vector<std::size_t> out;
  for (auto r : get_uint_list("eval.ranks")) out.push_back(r);
  return out;
}

void RunConfig::validate() const {
  model_config(1).validate();
  train_config().validate();
  augment_config().validate();
  synth_config().validate();
  for (auto r : eval_ranks()) {
    if (r == 0) throw ConfigError("config key 'eval.ranks': ranks are 1-based");
  }
  if (eval_ranks().empty()) throw ConfigError("config key 'eval.ranks' is empty");
}

std::uint64_t model_seed(const RunConfig& config) { return derive_seed(config.get_uint("seed"), "model"); }
std::uint64_t train_seed(const RunConfig& config) { return derive_seed(config.get_uint("seed"), "train"); }

}  // namespace ccan::cli
