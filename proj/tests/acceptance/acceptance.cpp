// Acceptance driver: one PASS/FAIL line per criterion on stdout, progress and
// subcommand output in <work>/acceptance.log.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ccan/verification.hpp"
#include "ccan_cli/cli.hpp"
#include "checks.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using checks::Verdict;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string fmt(double v, int digits = 4, char conv = 'f') {
  char buf[64];
  if (conv == 'e')
    std::snprintf(buf, sizeof(buf), "%.*e", digits, v);
  else
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

struct Context {
  fs::path work;
  fs::path toy_config;
  std::ofstream log;

  // Runs one subcommand; its output goes to the log.
  bool ccan(const std::vector<std::string>& args) {
    log << "$ ccan";
    for (const auto& a : args) log << ' ' << a;
    log << std::endl;
    const int code = ccan::cli::run(args, log, log);
    log << "exit " << code << std::endl;
    return code == ccan::cli::kExitOk;
  }

  fs::path data_dir() {
    const fs::path dir = work / "data";
    if (!data_ready_) {
      fs::remove_all(dir);
      data_ready_ = ccan({"gen-data", "--config", toy_config.string(), "--seed", "7", "--out", dir.string()});
    }
    return dir;
  }

  struct ToyRun {
    bool ok = false;
    fs::path dir;
    double map = 0, rank1 = 0, first_loss = 0, final_loss = 0, seconds = 0;
  };

  // Trains and evaluates the toy configuration once per seed.
  const ToyRun& toy(int seed) {
    auto it = toy_runs_.find(seed);
    if (it != toy_runs_.end()) return it->second;
    ToyRun run;
    run.dir = work / ("toy_seed" + std::to_string(seed));
    fs::remove_all(run.dir);
    const auto data = data_dir().string();
    const auto t0 = Clock::now();
    const std::vector<std::string> common{"--config", toy_config.string(), "--set", "seed=" + std::to_string(seed),
                                          "--data", data, "--out", run.dir.string()};
    std::vector<std::string> train{"train"}, eval{"eval"};
    train.insert(train.end(), common.begin(), common.end());
    eval.insert(eval.end(), common.begin(), common.end());
    run.ok = ccan(train) && ccan(eval);
    run.seconds = seconds_since(t0);
    if (run.ok) {
      std::istringstream report(slurp(run.dir / "report.txt"));
      std::string line;
      while (std::getline(report, line)) {
        if (line.rfind("mAP: ", 0) == 0) run.map = std::stod(line.substr(5));
        if (line.rfind("rank1: ", 0) == 0) run.rank1 = std::stod(line.substr(7));
      }
      std::istringstream hist(slurp(run.dir / "history.jsonl"));
      std::vector<std::string> lines;
      while (std::getline(hist, line)) lines.push_back(line);
      run.ok = !lines.empty();
      if (run.ok) {
        run.first_loss = nlohmann::json::parse(lines.front()).at("total").get<double>();
        run.final_loss = nlohmann::json::parse(lines.back()).at("total").get<double>();
      }
    }
    log << "toy seed " << seed << ": mAP " << run.map << " rank1 " << run.rank1 << " loss " << run.first_loss
        << " -> " << run.final_loss << " in " << run.seconds << " s" << std::endl;
    return toy_runs_.emplace(seed, run).first->second;
  }

 private:
  bool data_ready_ = false;
  std::map<int, ToyRun> toy_runs_;
};

Verdict gradient_suite(Context&) {
  const auto t0 = Clock::now();
  const auto cases = ccan::run_gradcheck_suite({});
  const double secs = seconds_since(t0);
  bool pass = secs < 120.0;
  double worst = 0.0;
  std::string failed;
  for (const auto& c : cases) {
    worst = std::max(worst, c.report.max_rel_err);
    if (!c.report.pass) {
      pass = false;
      failed += " " + c.name;
    }
  }
  std::string detail = std::to_string(cases.size()) + " cases, max rel err " + fmt(worst, 3, 'e') + " (tol 1e-4), " +
                       fmt(secs, 2) + " s";
  if (!failed.empty()) detail += "; failing:" + failed;
  return {pass && cases.size() == 6, detail};
}

Verdict toy_end_to_end(Context& ctx) {
  std::vector<double> maps, rank1s;
  double total_seconds = 0;
  bool descent = true, ok = true;
  std::string per_seed;
  for (int seed = 0; seed < 3; ++seed) {
    const auto& r = ctx.toy(seed);
    ok = ok && r.ok;
    descent = descent && r.final_loss < r.first_loss;
    maps.push_back(r.map);
    rank1s.push_back(r.rank1);
    total_seconds += r.seconds;
    per_seed += " s" + std::to_string(seed) + "=" + fmt(r.rank1, 3) + "/" + fmt(r.map, 3);
  }
  std::sort(maps.begin(), maps.end());
  std::sort(rank1s.begin(), rank1s.end());
  const double map = maps[1], rank1 = rank1s[1];
  const bool pass = ok && descent && rank1 >= 0.90 && map >= 0.80 && total_seconds < 15 * 60;
  return {pass, "median rank1 " + fmt(rank1, 3) + " (>= 0.90), median mAP " + fmt(map, 3) +
                    " (>= 0.80), rank1/mAP per seed:" + per_seed + ", loss descent " + (descent ? "yes" : "NO") +
                    ", " + fmt(total_seconds / 60, 1) + " min"};
}

Verdict ablation_harness(Context& ctx) {
  const fs::path dir = ctx.work / "ablate";
  fs::remove_all(dir);
  const auto data = ctx.data_dir().string();
  if (!ctx.ccan({"ablate", "--config", ctx.toy_config.string(), "--data", data, "--out", dir.string()}))
    return {false, "ablate exited nonzero"};
  std::istringstream table(slurp(dir / "ablation.tsv"));
  std::string line;
  std::getline(table, line);
  std::vector<std::string> header;
  {
    std::istringstream h(line);
    std::string col;
    while (std::getline(h, col, '\t')) header.push_back(col);
  }
  const auto col = std::find(header.begin(), header.end(), "rank1");
  if (col == header.end()) return {false, "table has no rank1 column"};
  const auto rank_col = static_cast<std::size_t>(col - header.begin());

  std::vector<std::string> labels;
  bool all_above = true;
  std::string rows;
  while (std::getline(table, line)) {
    std::vector<std::string> cells;
    std::istringstream r(line);
    std::string cell;
    while (std::getline(r, cell, '\t')) cells.push_back(cell);
    if (cells.size() != header.size()) return {false, "malformed row: " + line};
    labels.push_back(cells[0]);
    const double rank1 = std::stod(cells[rank_col]);
    all_above = all_above && rank1 >= 0.75;
    rows += " " + cells[0] + "=" + fmt(rank1, 3);
  }
  const std::vector<std::string> expected{"G", "L", "G+L", "G+SS", "G+L+CC", "CCAN"};
  const bool rows_ok = labels == expected;
  return {rows_ok && all_above, std::string(rows_ok ? "six rows" : "row labels differ") + ", rank1:" + rows +
                                    " (each >= 0.75)"};
}

Verdict determinism(Context& ctx) {
  const auto& first = ctx.toy(0);
  if (!first.ok) return {false, "reference run failed"};
  const fs::path dir = ctx.work / "determinism";
  fs::remove_all(dir);
  const auto resolved = (first.dir / "config.cfg").string();
  if (!ctx.ccan({"train", "--config", resolved, "--out", dir.string()}) ||
      !ctx.ccan({"eval", "--config", resolved, "--out", dir.string()}))
    return {false, "rerun from the resolved config failed"};
  std::string detail;
  bool pass = true;
  for (const char* f : {"checkpoint.ccac", "history.jsonl", "report.txt"}) {
    const bool same = slurp(first.dir / f) == slurp(dir / f) && fs::file_size(dir / f) > 0;
    pass = pass && same;
    detail += std::string(detail.empty() ? "" : ", ") + f + (same ? " identical" : " DIFFERS");
  }
  return {pass, detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria driver"};
  std::string work;
  std::string toy_config = CCAN_TOY_CONFIG;
  std::vector<int> only;
  app.add_option("--work", work, "scratch directory")->required();
  app.add_option("--toy-config", toy_config, "toy run configuration")->check(CLI::ExistingFile);
  app.add_option("--only", only, "criteria to run (default all)");
  CLI11_PARSE(app, argc, argv);

  Context ctx;
  ctx.work = fs::absolute(work);
  ctx.toy_config = fs::absolute(toy_config);
  fs::create_directories(ctx.work);
  ctx.log.open(ctx.work / "acceptance.log", std::ios::trunc);

  struct Criterion {
    int id;
    const char* name;
    std::function<Verdict(Context&)> run;
  };
  const std::vector<Criterion> criteria{
      {1, "gradient suite", gradient_suite},
      {2, "attention invariants", [](Context&) { return checks::attention_invariants(128); }},
      {3, "metric oracle", [](Context&) { return checks::metric_oracle(20); }},
      {4, "mining oracle", [](Context&) { return checks::mining_oracle(100); }},
      {5, "toy end-to-end", toy_end_to_end},
      {6, "ablation harness", ablation_harness},
      {7, "determinism", determinism},
      {8, "format conformance", [](Context& c) { return checks::format_conformance(c.work / "formats"); }},
  };

  const std::set<int> selected(only.begin(), only.end());
  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = Clock::now();
    Verdict v;
    try {
      v = c.run(ctx);
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    ctx.log << "criterion " << c.id << " took " << seconds_since(t0) << " s" << std::endl;
    std::cout << (v.pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << ": " << v.detail << std::endl;
    failures += v.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
