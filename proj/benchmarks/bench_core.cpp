#include <benchmark/benchmark.h>

#include "biresnet/intralink.hpp"
#include "biresnet/model.hpp"
#include "biresnet/motorsim.hpp"
#include "biresnet/ops.hpp"
#include "biresnet/rng.hpp"

using namespace biresnet;

namespace {

Tensor<float> random_tensor(std::vector<std::size_t> shape, std::uint64_t seed) {
  Tensor<float> t(std::move(shape));
  SeededRng rng(seed, "bench");
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = static_cast<float>(rng.normal());
  }
  return t;
}

void bm_conv1d_forward(benchmark::State& state) {
  const auto cin = static_cast<std::size_t>(state.range(0));
  const auto x = random_tensor({8, cin, 1000}, 1);
  const auto w = random_tensor({cin, cin, 3}, 2);
  for (auto _ : state) {
    auto y = conv1d_forward<float>(x, w, nullptr, nullptr);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * 8 * cin * 1000);
}
BENCHMARK(bm_conv1d_forward)->Arg(32)->Arg(128)->Arg(256);

void bm_conv1d_backward(benchmark::State& state) {
  const auto cin = static_cast<std::size_t>(state.range(0));
  const auto x = random_tensor({8, cin, 1000}, 3);
  const auto w = random_tensor({cin, cin, 3}, 4);
  const auto dy = random_tensor({8, cin, 1000}, 5);
  Conv1dCache<float> cache;
  conv1d_forward<float>(x, w, nullptr, &cache);
  Tensor<float> dw(w.shape());
  for (auto _ : state) {
    dw.fill(0.0f);
    auto dx = conv1d_backward<float>(cache, w, dy, dw, nullptr, true);
    benchmark::DoNotOptimize(dx.data());
  }
}
BENCHMARK(bm_conv1d_backward)->Arg(32)->Arg(128);

void bm_st_block_forward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  ParamRegistry<float> reg(11);
  STBlock<float> block(reg, "st", c, c, STBlockConfig{});
  const auto x = random_tensor({8, c, 1000}, 6);
  for (auto _ : state) {
    auto y = block.forward(x, Mode::train);
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(bm_st_block_forward)->Arg(32)->Arg(128);

void bm_intralink_forward(benchmark::State& state) {
  const auto x = random_tensor({8, 256, 1000}, 7);
  IntraLinkConfig cfg;
  cfg.n = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto y = intralink_forward<float>(x, cfg, nullptr);
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(bm_intralink_forward)->Arg(0)->Arg(1)->Arg(4);

void bm_model_forward(benchmark::State& state) {
  BiResNetConfig cfg;
  BiResNet<float> model(cfg, 12);
  const auto batch = static_cast<std::size_t>(state.range(0));
  const auto x = random_tensor({batch, 8, 100}, 8);
  for (auto _ : state) {
    auto logits = model.forward(x, Mode::eval);
    benchmark::DoNotOptimize(logits.data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(bm_model_forward)->Arg(1)->Arg(32);

void bm_model_train_step(benchmark::State& state) {
  BiResNetConfig cfg;
  BiResNet<float> model(cfg, 13);
  const std::size_t batch = 32;
  const auto x = random_tensor({batch, 8, 100}, 9);
  std::vector<int> labels(batch);
  SeededRng rng(10, "labels");
  for (auto& l : labels) l = static_cast<int>(rng.below(6));
  for (auto _ : state) {
    model.zero_grads();
    auto logits = model.forward(x, Mode::train);
    auto ce = softmax_cross_entropy(logits, labels);
    model.backward(ce.dlogits);
    benchmark::DoNotOptimize(ce.loss);
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(bm_model_train_step);

void bm_simulate_experiment(benchmark::State& state) {
  MachineParams params;
  FaultSpec fault;
  fault.cls = FaultClass::TWO_PSC;
  fault.t_f = 0.5;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    auto rec = simulate_experiment(params, fault, seed++);
    benchmark::DoNotOptimize(rec.data.data());
  }
}
BENCHMARK(bm_simulate_experiment);

}  // namespace

BENCHMARK_MAIN();
