#include <benchmark/benchmark.h>

#include <vector>

#include "mcua/backbone.hpp"
#include "mcua/context.hpp"
#include "mcua/ensemble.hpp"
#include "mcua/nn.hpp"
#include "mcua/patches.hpp"
#include "mcua/synth.hpp"

namespace {

using namespace mcua;

TensorPtr random_tensor(std::vector<int> shape, Rng& rng, bool needs_grad = false) {
  auto t = Tensor::create(std::move(shape), needs_grad);
  for (auto& v : t->data) v = rng.normal(0.0, 1.0);
  return t;
}

// First backbone layer geometry: a patch batch through a 3x3 valid conv.
void bench_conv_forward_patch(benchmark::State& state) {
  Rng rng(7);
  auto x = random_tensor({8, 3, 32, 32}, rng);
  auto w = random_tensor({8, 3, 3, 3}, rng);
  auto b = random_tensor({8}, rng);
  NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, w, b, 1, Padding::valid));
}
BENCHMARK(bench_conv_forward_patch);

// First context-trunk layer geometry: stacked pair placements over 8-channel
// feature maps.
void bench_conv_forward_context(benchmark::State& state) {
  Rng rng(7);
  auto x = random_tensor({4, 16, 11, 11}, rng);
  auto w = random_tensor({32, 16, 3, 3}, rng);
  auto b = random_tensor({32}, rng);
  NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, w, b, 1, Padding::valid));
}
BENCHMARK(bench_conv_forward_context);

// One optimizer-free training step (forward + full backward) of a conv layer.
void bench_conv_train_step(benchmark::State& state) {
  Rng rng(7);
  auto x = random_tensor({4, 16, 11, 11}, rng);
  auto w = random_tensor({32, 16, 3, 3}, rng, true);
  auto b = random_tensor({32}, rng, true);
  const std::vector<int> labels(4, 0);
  for (auto _ : state) {
    auto loss = nll_rows(log_softmax_rows(spatial_mean(conv2d(x, w, b, 1, Padding::valid))),
                         labels);
    zero_grads({w, b});
    backward(loss);
    benchmark::DoNotOptimize(loss->data[0]);
  }
}
BENCHMARK(bench_conv_train_step);

// Whole-image feature extraction at the evaluation stride.
void bench_feature_maps(benchmark::State& state) {
  SynthSpec spec;
  const Image img = generate_image(spec, 2, 0);
  const Backbone bb = Backbone::build("arch-A", "A1", 1, 32, 32, 4, 11);
  const auto patches = extract_patches(img, 32, 32, 8);
  for (auto _ : state) benchmark::DoNotOptimize(bb.extract_feature_maps(patches));
}
BENCHMARK(bench_feature_maps);

// Ten stochastic passes over one image's placement stack.
void bench_mc_predict(benchmark::State& state) {
  SynthSpec spec;
  const Image img = generate_image(spec, 2, 0);
  const Backbone bb = Backbone::build("arch-A", "A1", 1, 32, 32, 4, 11);
  PatchGrid grid;
  const auto patches = extract_patches(img, 32, 32, 8, &grid);
  const auto maps = bb.extract_feature_maps(patches);
  const auto lib = default_pattern_library();
  const auto& pattern = find_pattern(lib, "P2_S1");
  const auto placements = enumerate_placements(grid, pattern);
  const auto stacked = build_context_input(maps, placements);
  const ContextModel model = ContextModel::build("A1_P2_S1", "A1", 1, pattern,
                                                 bb.feature_channels(), bb.feature_h(),
                                                 bb.feature_w(), 4, 0.7, 13);
  for (auto _ : state) {
    Rng rng(99);
    benchmark::DoNotOptimize(model.mc_predict(stacked, 10, rng));
  }
}
BENCHMARK(bench_mc_predict);

void bench_summarize_passes(benchmark::State& state) {
  Rng rng(3);
  std::vector<std::vector<double>> passes(10, std::vector<double>(4));
  for (auto& p : passes) {
    double sum = 0.0;
    for (auto& v : p) sum += (v = rng.uniform(0.01, 1.0));
    for (auto& v : p) v /= sum;
  }
  for (auto _ : state) benchmark::DoNotOptimize(summarize_passes(passes));
}
BENCHMARK(bench_summarize_passes);

void bench_extract_patches(benchmark::State& state) {
  SynthSpec spec;
  const Image img = generate_image(spec, 1, 0);
  for (auto _ : state) benchmark::DoNotOptimize(extract_patches(img, 32, 32, 8));
}
BENCHMARK(bench_extract_patches);

void bench_generate_image(benchmark::State& state) {
  SynthSpec spec;
  int i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(generate_image(spec, i & 3, i));
    ++i;
  }
}
BENCHMARK(bench_generate_image);

}  // namespace

BENCHMARK_MAIN();
