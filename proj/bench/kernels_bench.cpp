// Serial reference kernels versus the OpenMP kernels, per worker count.
//
//   uada_bench --benchmark_filter=Forward

#include <benchmark/benchmark.h>

#include "uada/adapt.hpp"
#include "uada/augment.hpp"
#include "uada/data.hpp"
#include "uada/model.hpp"
#include "uada/parallel.hpp"

namespace {

uada::ImageBatch synthetic_batch(int n) {
  uada::DatasetSpec spec;
  const uada::Dataset d = uada::gen_synthetic(spec, n, 0);
  return d.images;
}

uada::Model cnn() { return uada::Model(uada::ModelSpec::cnn_s({1, 16, 16}, 3, 1)); }

void BM_ForwardReference(benchmark::State& state) {
  const uada::Model m = cnn();
  const uada::ImageBatch b = synthetic_batch(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(uada::reference::forward(m, b));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardReference)->Arg(64)->Arg(250);

void BM_ForwardParallel(benchmark::State& state) {
  uada::set_worker_count(static_cast<int>(state.range(1)));
  const uada::Model m = cnn();
  const uada::ImageBatch b = synthetic_batch(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(uada::forward(m, b));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardParallel)->ArgsProduct({{64, 250}, {1, 2, 4}});

void BM_Backward(benchmark::State& state) {
  uada::set_worker_count(static_cast<int>(state.range(1)));
  const uada::Model m = cnn();
  const uada::ImageBatch b = synthetic_batch(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(uada::backward(m, b));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Backward)->ArgsProduct({{64}, {1, 2, 4}});

void BM_ApplyPipeline(benchmark::State& state) {
  uada::set_worker_count(static_cast<int>(state.range(0)));
  const uada::ImageBatch b = synthetic_batch(64);
  const uada::Pipeline p{{16, 16},
                         {uada::OpInstance{uada::OpKind::Rotate, {7, 1}},
                          uada::OpInstance{uada::OpKind::Contrast, {5, 0}}}};
  for (auto _ : state) benchmark::DoNotOptimize(uada::apply_pipeline(p, b));
}
BENCHMARK(BM_ApplyPipeline)->Arg(1)->Arg(2)->Arg(4);

void BM_AdaptStep(benchmark::State& state) {
  uada::set_worker_count(static_cast<int>(state.range(0)));
  const uada::Model m = cnn();
  const uada::ImageBatch b = synthetic_batch(64);
  const uada::ModelLossEvaluator eval(m, b);
  const uada::Pipeline p{{16, 16},
                         {uada::OpInstance{uada::OpKind::Rotate, {4, 1}},
                          uada::OpInstance{uada::OpKind::Cutout, {3, 5, 9}}}};
  for (auto _ : state) benchmark::DoNotOptimize(uada::adapt_step(eval, p, uada::AdaptConfig{}));
}
BENCHMARK(BM_AdaptStep)->Arg(1)->Arg(2)->Arg(4);

}  // namespace

BENCHMARK_MAIN();
