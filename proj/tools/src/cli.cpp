#include "ccan_cli/cli.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <set>

#include "CLI11.hpp"
#include "ccan/checkpoint.hpp"
#include "ccan/error.hpp"
#include "ccan/image_io.hpp"
#include "ccan/manifest.hpp"
#include "ccan/verification.hpp"

namespace ccan::cli {
namespace {

namespace fs = std::filesystem;

struct EvalSplit {
  std::vector<Tensor> images;
  std::vector<int> person_ids, camera_ids;
  std::vector<bool> junk;
};

Manifest open_manifest(const RunConfig& config) {
  const std::string& dir = config.raw("data_dir");
  if (dir.empty()) throw ConfigError("data_dir is not set (use --data or data_dir=)");
  const fs::path path = fs::path(dir) / "manifest.tsv";
  if (!fs::exists(path)) throw ConfigError("no manifest at " + path.string());
  return load_manifest(path);
}

fs::path require_out_dir(const RunConfig& config) {
  const std::string& dir = config.raw("out_dir");
  if (dir.empty()) throw ConfigError("out_dir is not set (use --out or out_dir=)");
  return dir;
}

// Person ids map to contiguous labels in ascending id order.
TrainSet load_train_set(const Manifest& manifest, std::size_t& num_ids) {
  std::set<int> ids;
  for (const auto& r : manifest.records) {
    if (r.split == Split::kTrain && !r.junk) ids.insert(r.person_id);
  }
  std::map<int, int> label_of;
  for (int id : ids) label_of.emplace(id, static_cast<int>(label_of.size()));
  TrainSet set;
  for (const auto& r : manifest.records) {
    if (r.split != Split::kTrain || r.junk) continue;
    set.images.push_back(load_image(manifest.resolve(r)));
    set.labels.push_back(label_of.at(r.person_id));
  }
  if (set.images.empty()) throw ConfigError("manifest has no train records");
  num_ids = ids.size();
  return set;
}

EvalSplit load_eval_split(const Manifest& manifest, Split split) {
  EvalSplit out;
  for (const auto& r : manifest.select(split)) {
    out.images.push_back(load_image(manifest.resolve(r)));
    out.person_ids.push_back(r.person_id);
    out.camera_ids.push_back(r.camera_id);
    out.junk.push_back(r.junk);
  }
  if (out.images.empty()) throw ConfigError("manifest has no " + std::string(to_string(split)) + " records");
  return out;
}

GalleryIndex embed(const EvalSplit& split, const CcanModel& model, const AugmentConfig& augment) {
  std::vector<Tensor> batch;
  batch.reserve(split.images.size());
  for (const auto& img : split.images) batch.push_back(test_transform(img, augment));
  const auto features = extract_features(batch, model);
  const std::size_t d = model.config().d;
  std::vector<Tensor> fused;
  fused.reserve(features.size());
  for (const auto& f : features) {
    fused.push_back(fuse_features(f.f_g.defined() ? f.f_g : Tensor::zeros({d}),
                                  f.f_l.defined() ? f.f_l : Tensor::zeros({d})));
  }
  return make_index(fused, split.person_ids, split.camera_ids, split.junk);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
}

std::string fixed(double v, int digits = 6) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string row_label(const std::string& setting) { return setting == "full" ? "CCAN" : setting; }

// Shared flags of the commands that take a config.
struct ConfigFlags {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string data_dir, out_dir;

  void attach(CLI::App& cmd, bool with_data, bool with_out) {
    cmd.add_option("--config", config_path, "key=value config file")->check(CLI::ExistingFile);
    cmd.add_option("--set", overrides, "override one key (key=value), repeatable");
    if (with_data) cmd.add_option("--data", data_dir, "dataset directory (sets data_dir)");
    if (with_out) cmd.add_option("--out", out_dir, "output directory (sets out_dir)");
  }

  RunConfig resolve() const {
    RunConfig config = config_path.empty() ? RunConfig{} : RunConfig::from_file(config_path);
    for (const auto& o : overrides) config.apply_override(o);
    if (!data_dir.empty()) config.set("data_dir", data_dir);
    if (!out_dir.empty()) config.set("out_dir", out_dir);
    config.validate();
    return config;
  }
};

AblationRow ablation_run(RunConfig config, const std::string& setting, const fs::path& dir, std::ostream& out) {
  config.set("model.setting", setting);
  config.set("out_dir", dir.string());
  config.set("checkpoint", "");
  config.validate();
  out << "== " << row_label(setting) << " (d=" << config.raw("model.d") << ", k_p=" << config.raw("model.k_p")
      << ") -> " << dir.string() << '\n';
  const auto trained = train_from_config(config, out);
  AblationRow row;
  row.label = row_label(setting);
  row.setting = setting;
  row.d = config.get_uint("model.d");
  row.k_p = config.get_uint("model.k_p");
  row.report = evaluate_checkpoint(config, trained.checkpoint);
  write_text(dir / "report.txt", format_report(row.report));
  row.first_loss = trained.history.epochs.front().mean.total;
  row.final_loss = trained.history.epochs.back().mean.total;
  row.seconds = trained.seconds;
  out << "   mAP=" << fixed(row.report.mAP, 4) << " rank1=" << fixed(row.report.cmc.front(), 4) << " ("
      << fixed(row.seconds, 1) << "s)\n";
  return row;
}

int dispatch(CLI::App& app, const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  // gen-data
  auto* gen = app.add_subcommand("gen-data", "write a synthetic identity dataset and its manifest");
  ConfigFlags gen_flags;
  gen_flags.attach(*gen, false, true);
  std::map<std::string, std::string> gen_values;
  for (auto [flag, key] : {std::pair{"--ids", "synth.ids"}, {"--per-id", "synth.per_id"}, {"--cams", "synth.cams"},
                           {"--height", "synth.height"}, {"--width", "synth.width"}, {"--bands", "synth.bands"},
                           {"--palette", "synth.palette"}, {"--camera-shift", "synth.camera_shift"},
                           {"--noise", "synth.noise"}, {"--seed", "seed"}}) {
    gen->add_option(flag, gen_values[key], std::string("sets ") + key);
  }

  // train
  auto* train_cmd = app.add_subcommand("train", "train a model and write checkpoint + history");
  ConfigFlags train_flags;
  train_flags.attach(*train_cmd, true, true);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint on the query/gallery split");
  ConfigFlags eval_flags;
  eval_flags.attach(*eval_cmd, true, true);
  std::string checkpoint_path;
  eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file (default <out>/checkpoint.ccac)");

  // gradcheck
  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check of attention, losses and the lite model");
  GradSuiteOptions grad_opts;
  grad_cmd->add_option("--seed", grad_opts.seed, "probe seed");
  grad_cmd->add_option("--step", grad_opts.h, "central-difference step h");
  grad_cmd->add_option("--tol", grad_opts.tol, "max relative error");
  grad_cmd->add_option("--coords", grad_opts.end_to_end_coords, "probes per parameter tensor in the lite model");

  // ablate
  auto* ablate_cmd = app.add_subcommand("ablate", "train + eval every ablation setting and optional d / k_p sweeps");
  ConfigFlags ablate_flags;
  ablate_flags.attach(*ablate_cmd, true, true);
  std::string d_sweep, kp_sweep;
  ablate_cmd->add_option("--d-sweep", d_sweep, "comma-separated embedding sizes (sets ablate.d_sweep)");
  ablate_cmd->add_option("--kp-sweep", kp_sweep, "comma-separated part counts (sets ablate.kp_sweep)");

  auto* self_cmd = app.add_subcommand("selftest", "check the library's worked examples");
  app.require_subcommand(1);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitBadConfig;
  }

  if (gen->parsed()) {
    RunConfig config = gen_flags.resolve();
    for (const auto& [key, value] : gen_values) {
      if (!value.empty()) config.set(key, value);
    }
    config.validate();
    const fs::path dir = require_out_dir(config);
    const auto records = synth_generate(config.synth_config(), dir);
    config.write(dir / "gen-data.cfg");
    out << "wrote " << records.size() << " records to " << (dir / "manifest.tsv").string() << '\n';
    return kExitOk;
  }
  if (train_cmd->parsed()) {
    const RunConfig config = train_flags.resolve();
    const auto outcome = train_from_config(config, out);
    const auto& last = outcome.history.epochs.back();
    out << "final epoch total loss " << fixed(last.mean.total) << "; checkpoint " << outcome.checkpoint.string()
        << '\n';
    return kExitOk;
  }
  if (eval_cmd->parsed()) {
    RunConfig config = eval_flags.resolve();
    if (!checkpoint_path.empty()) config.set("checkpoint", checkpoint_path);
    const fs::path out_dir = require_out_dir(config);
    fs::path ckpt = config.raw("checkpoint");
    if (ckpt.empty()) ckpt = out_dir / "checkpoint.ccac";
    if (!fs::exists(ckpt)) throw ConfigError("checkpoint " + ckpt.string() + " does not exist");
    const EvalReport report = evaluate_checkpoint(config, ckpt);
    config.write(out_dir / "eval.cfg");
    const std::string text = format_report(report);
    write_text(out_dir / "report.txt", text);
    out << text;
    return kExitOk;
  }
  if (grad_cmd->parsed()) {
    const auto cases = run_gradcheck_suite(grad_opts);
    out << format_gradcheck_table(cases);
    bool ok = true;
    for (const auto& c : cases) {
      if (!c.report.pass) {
        ok = false;
        err << c.name << ": " << c.report.describe() << '\n';
      }
    }
    return ok ? kExitOk : kExitFailure;
  }
  if (ablate_cmd->parsed()) {
    RunConfig config = ablate_flags.resolve();
    if (!d_sweep.empty()) config.set("ablate.d_sweep", d_sweep);
    if (!kp_sweep.empty()) config.set("ablate.kp_sweep", kp_sweep);
    config.validate();
    const fs::path dir = require_out_dir(config);
    (void)open_manifest(config);
    config.write(dir / "ablate.cfg");
    const auto ranks = config.eval_ranks();

    std::vector<AblationRow> rows;
    for (const auto& setting : config.get_list("ablate.settings")) {
      rows.push_back(ablation_run(config, setting, dir / row_label(setting), out));
    }
    const std::string table = format_ablation_table(rows, ranks);
    write_text(dir / "ablation.tsv", table);
    out << '\n' << table;

    auto sweep = [&](const char* list_key, const char* model_key, const char* prefix, const char* file) {
      const auto values = config.get_uint_list(list_key);
      if (values.empty()) return;
      std::vector<AblationRow> sweep_rows;
      for (auto v : values) {
        RunConfig c = config;
        c.set(model_key, std::to_string(v));
        sweep_rows.push_back(ablation_run(c, "full", dir / (prefix + std::to_string(v)), out));
      }
      const std::string t = format_ablation_table(sweep_rows, ranks);
      write_text(dir / file, t);
      out << '\n' << t;
    };
    sweep("ablate.d_sweep", "model.d", "d", "sweep_d.tsv");
    sweep("ablate.kp_sweep", "model.k_p", "kp", "sweep_kp.tsv");
    return kExitOk;
  }
  if (self_cmd->parsed()) return run_selftest(out) == 0 ? kExitOk : kExitFailure;
  return kExitBadConfig;
}

}  // namespace

TrainOutcome train_from_config(const RunConfig& config, std::ostream& log) {
  config.validate();
  const fs::path dir = require_out_dir(config);
  const Manifest manifest = open_manifest(config);
  std::size_t num_ids = 0;
  const TrainSet data = load_train_set(manifest, num_ids);
  const ModelConfig model_cfg = config.model_config(num_ids);
  model_cfg.validate();

  fs::create_directories(dir);
  config.write(dir / "config.cfg");
  TrainConfig train_cfg = config.train_config();
  train_cfg.history_path = dir / "history.jsonl";
  train_cfg.checkpoint_path = dir / "checkpoint.ccac";

  CcanModel model = CcanModel::create(model_cfg, model_seed(config));
  log << "training " << model_cfg.mask.setting() << ": " << data.images.size() << " images, " << num_ids << " ids, "
      << model.parameter_count() << " parameters, " << train_cfg.epochs << " epochs\n";
  const auto start = std::chrono::steady_clock::now();
  const auto progress = [&](std::size_t epoch, const CcanModel&) -> std::map<std::string, double> {
    if (epoch == 0 || (epoch + 1) % 10 == 0 || epoch + 1 == train_cfg.epochs) {
      const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      log << "  epoch " << epoch + 1 << "/" << train_cfg.epochs << " (" << fixed(s, 1) << "s)\n";
    }
    return {};
  };
  TrainOutcome outcome;
  outcome.history = train(model, data, train_cfg, config.augment_config(), progress);
  outcome.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  outcome.checkpoint = train_cfg.checkpoint_path;

  std::string timing = "epoch\tseconds\ttotal_loss\n";
  for (const auto& e : outcome.history.epochs) {
    timing += std::to_string(e.epoch) + "\t" + fixed(e.wall_seconds, 3) + "\t" + fixed(e.mean.total) + "\n";
  }
  write_text(dir / "timing.tsv", timing);
  return outcome;
}

EvalReport evaluate_checkpoint(const RunConfig& config, const fs::path& checkpoint) {
  const Manifest manifest = open_manifest(config);
  const CcanModel model = load_checkpoint(checkpoint);
  AugmentConfig augment = config.augment_config();
  augment.crop_h = model.config().input_h;
  augment.crop_w = model.config().input_w;
  const GalleryIndex queries = embed(load_eval_split(manifest, Split::kQuery), model, augment);
  const GalleryIndex gallery = embed(load_eval_split(manifest, Split::kGallery), model, augment);
  return evaluate(queries, gallery, config.eval_ranks());
}

std::string format_ablation_table(const std::vector<AblationRow>& rows, const std::vector<std::size_t>& ranks) {
  std::string out = "label\tsetting\td\tk_p\tmAP";
  for (auto r : ranks) out += "\trank" + std::to_string(r);
  out += "\tfirst_loss\tfinal_loss\n";
  for (const auto& row : rows) {
    out += row.label + "\t" + row.setting + "\t" + std::to_string(row.d) + "\t" + std::to_string(row.k_p) + "\t" +
           fixed(row.report.mAP);
    for (auto r : ranks) out += "\t" + fixed(row.report.cmc_at(r));
    out += "\t" + fixed(row.first_loss) + "\t" + fixed(row.final_loss) + "\n";
  }
  return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"ccan: two-branch attention re-identification toolkit"};
  app.name("ccan");
  try {
    return dispatch(app, args, out, err);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitBadConfig;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitBadConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace ccan::cli
