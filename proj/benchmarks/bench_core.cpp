#include <benchmark/benchmark.h>

#include "ccan/attention.hpp"
#include "ccan/network.hpp"
#include "ccan/ops.hpp"
#include "ccan/rng.hpp"
#include "ccan/tape.hpp"

namespace {

using namespace ccan;

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng = make_rng(0, "bench.matmul");
  const Tensor a = normal_tensor({n, n}, 1, rng), b = normal_tensor({n, n}, 1, rng);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(128)->Arg(256);

// Level-2 shaped convolution of the toy topology.
void BM_Conv2d(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  Rng rng = make_rng(0, "bench.conv");
  const Tensor x = normal_tensor({16, 8, c}, 1, rng), k = normal_tensor({3, 3, c, 2 * c}, 1, rng);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, k, 1, 1));
}
BENCHMARK(BM_Conv2d)->Arg(16)->Arg(32)->Arg(64);

void BM_CcaForward(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const std::size_t c = 64;
  Rng rng = make_rng(0, "bench.cca");
  const auto w = AttentionWeights::create(side, side / 2, c, rng);
  const std::size_t mn = side * (side / 2);
  const Tensor q = normal_tensor({mn, c}, 1, rng), qp = normal_tensor({mn, c}, 1, rng);
  for (auto _ : state) benchmark::DoNotOptimize(cca_forward(q, qp, w));
}
BENCHMARK(BM_CcaForward)->Arg(4)->Arg(8)->Arg(16);

void BM_ModelForward(benchmark::State& state) {
  const auto model = CcanModel::create(ModelConfig{}, 0);
  Rng rng = make_rng(0, "bench.model");
  const Tensor image = uniform_tensor({64, 32, 3}, 1, rng);
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(image));
}
BENCHMARK(BM_ModelForward)->Unit(benchmark::kMillisecond);

void BM_ModelForwardBackward(benchmark::State& state) {
  const auto model = CcanModel::create(ModelConfig{}, 0);
  for (const auto& p : model.parameters()) {
    Tensor t = p.tensor;
    t.set_requires_grad(true);
  }
  Rng rng = make_rng(0, "bench.model");
  const Tensor image = uniform_tensor({64, 32, 3}, 1, rng);
  for (auto _ : state) {
    Tape tape;
    TapeScope scope(tape);
    const auto out = model.forward(image);
    backward(add(sum(out.logits_g), sum(out.logits_l)), tape);
  }
}
BENCHMARK(BM_ModelForwardBackward)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
