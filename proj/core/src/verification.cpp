#include "ccan/verification.hpp"

#include <chrono>
#include <cstdio>
#include <sstream>

#include "ccan/attention.hpp"
#include "ccan/objective.hpp"
#include "ccan/ops.hpp"
#include "ccan/rng.hpp"

namespace ccan {
namespace {

template <typename Fn>
GradCheckCase timed(std::string name, double tol, Fn&& run) {
  const auto start = std::chrono::steady_clock::now();
  GradCheckCase c{std::move(name), tol, run(), 0.0};
  c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return c;
}

std::vector<Tensor> with_grad(std::vector<Tensor> tensors) {
  for (auto& t : tensors) t.set_requires_grad(true);
  return tensors;
}

}  // namespace

ModelConfig lite_model_config() {
  ModelConfig c;
  c.input_h = 8;
  c.input_w = 4;
  c.stem_channels = 4;
  c.stem_stride = 1;
  c.stem_pool = false;
  c.c1 = 8;
  c.c2 = 16;
  c.c3 = 24;
  c.d = 8;
  c.k_p = 2;
  c.num_ids = 3;
  return c;
}

std::vector<GradCheckCase> run_gradcheck_suite(const GradSuiteOptions& o) {
  GradCheckOptions gc;
  gc.h = o.h;
  gc.tol = o.tol;
  gc.seed = o.seed;
  std::vector<GradCheckCase> cases;

  constexpr std::size_t m = 3, n = 2, c = 8, k = 2;
  Rng rng = make_rng(o.seed, "gradcheck.attention");
  const Tensor q = uniform_tensor({m * n, c}, 1.0, rng);
  const Tensor q2 = uniform_tensor({m * n, c}, 1.0, rng);
  const auto w = AttentionWeights::create(m, n, c, rng, k);

  cases.push_back(timed("cca_forward", o.tol, [&] {
    auto inputs = with_grad({q.clone(), q2.clone()});
    auto ww = w.clone();
    for (auto t : ww.tensors()) t.set_requires_grad(true);
    for (auto t : ww.tensors()) inputs.push_back(t);
    return grad_check([&] { return sum(cca_forward(inputs[0], inputs[1], ww)); }, inputs, gc);
  }));
  cases.push_back(timed("ssa_forward", o.tol, [&] {
    auto inputs = with_grad({q.clone()});
    auto ww = w.clone();
    for (auto t : ww.tensors()) t.set_requires_grad(true);
    for (auto t : ww.tensors()) inputs.push_back(t);
    return grad_check([&] { return sum(ssa_forward(inputs[0], ww)); }, inputs, gc);
  }));
  cases.push_back(timed("nonlocal_forward", o.tol, [&] {
    auto ww = w.clone();
    auto inputs = with_grad({q.clone(), ww.w_f, ww.w_g, ww.w_h, ww.w_w});
    return grad_check([&] { return sum(nonlocal_forward(inputs[0], ww)); }, inputs, gc);
  }));

  Rng loss_rng = make_rng(o.seed, "gradcheck.loss");
  const std::vector<int> labels{0, 2, 1, 1, 3, 0};
  cases.push_back(timed("lsr_cross_entropy", o.lsr_tol, [&] {
    auto inputs = with_grad({normal_tensor({labels.size(), 4}, 2.0, loss_rng)});
    GradCheckOptions tight = gc;
    tight.tol = o.lsr_tol;
    return grad_check([&] { return lsr_cross_entropy(inputs[0], labels, 0.1); }, inputs, tight);
  }));
  const std::vector<int> pk_labels{0, 0, 1, 1, 2, 2, 3, 3};
  cases.push_back(timed("triplet_loss", o.tol, [&] {
    auto inputs = with_grad({normal_tensor({pk_labels.size(), 5}, 1.0, loss_rng)});
    return grad_check(
        [&] {
          const Tensor d = pairwise_sq_distances(inputs[0]);
          return triplet_loss(d, mine_semihard(d, pk_labels, 10), 1.0);
        },
        inputs, gc);
  }));

  cases.push_back(timed("end_to_end_total_loss", o.tol, [&] {
    const ModelConfig cfg = lite_model_config();
    CcanModel model = CcanModel::create(cfg, o.seed);
    Rng img_rng = make_rng(o.seed, "gradcheck.images");
    std::vector<Tensor> batch;
    const std::vector<int> batch_labels{0, 0, 1, 1, 2, 2};
    for (std::size_t i = 0; i < batch_labels.size(); ++i) {
      Tensor img = uniform_tensor({cfg.input_h, cfg.input_w, cfg.input_channels}, 0.5, img_rng);
      for (auto& v : img.mutable_data()) v += Scalar(0.5);
      batch.push_back(img);
    }
    std::vector<Tensor> inputs;
    for (auto& p : model.parameters()) inputs.push_back(p.tensor.set_requires_grad(true));
    GradCheckOptions sampled = gc;
    sampled.max_coords_per_input = o.end_to_end_coords;
    return grad_check([&] { return total_loss(ccan_forward(batch, model), batch_labels, {}).total; }, inputs,
                      sampled);
  }));
  return cases;
}

std::string format_gradcheck_table(const std::vector<GradCheckCase>& cases) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-24s %12s %10s %8s %9s %10s %8s  %s\n", "case", "max_rel_err", "tol", "checked",
                "straddled", "unresolved", "seconds", "result");
  out << line;
  for (const auto& c : cases) {
    std::snprintf(line, sizeof(line), "%-24s %12.3e %10.1e %8zu %9zu %10zu %8.2f  %s\n", c.name.c_str(),
                  c.report.max_rel_err, c.tol, c.report.checked, c.report.straddled, c.report.unresolved, c.seconds, c.report.pass ? "PASS" : "FAIL");
    out << line;
  }
  return out.str();
}

}  // namespace ccan
