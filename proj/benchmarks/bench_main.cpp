#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>

#include "ser/audio_io.hpp"
#include "ser/dsp.hpp"
#include "ser/model.hpp"
#include "ser/nn/ops.hpp"
#include "ser/rng.hpp"

namespace {

using namespace ser;

Tensor<float> random_tensor(Shape shape, std::uint64_t seed) {
  CounterRng rng(seed, "bench");
  Tensor<float> t(std::move(shape));
  for (float& v : t.values()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

audio::AudioClip noise_tone(double seconds) {
  audio::AudioClip clip;
  const auto n = static_cast<std::size_t>(seconds * clip.sample_rate);
  CounterRng rng(1, "bench-audio");
  clip.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / clip.sample_rate;
    clip.samples[i] = static_cast<float>(0.4 * std::sin(2.0 * std::numbers::pi * 220.0 * t) + 0.05 * rng.uniform(-1.0, 1.0));
  }
  return clip;
}

// The four conv stages of the network at batch 1: {in, out, height, width}.
void BM_Conv2dForward(benchmark::State& state) {
  const auto cin = static_cast<std::size_t>(state.range(0));
  const auto cout = static_cast<std::size_t>(state.range(1));
  const auto h = static_cast<std::size_t>(state.range(2));
  const auto w = static_cast<std::size_t>(state.range(3));
  const auto x = random_tensor({1, cin, h, w}, 1);
  const auto k = random_tensor({cout, cin, 3, 3}, 2);
  const auto b = random_tensor({cout}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(nn::conv2d_forward(x, k, b, {.stride = 1, .padding = 1}));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * cin * cout * h * w * 9));
}
BENCHMARK(BM_Conv2dForward)
    ->Args({1, 16, 128, 130})
    ->Args({16, 32, 64, 65})
    ->Args({32, 64, 32, 32})
    ->Args({64, 128, 16, 16})
    ->Unit(benchmark::kMillisecond);

void BM_StftPower(benchmark::State& state) {
  const auto clip = noise_tone(3.0);
  for (auto _ : state) benchmark::DoNotOptimize(dsp::stft_power(clip, {}));
}
BENCHMARK(BM_StftPower)->Unit(benchmark::kMillisecond);

void BM_ExtractFeatures(benchmark::State& state) {
  const auto clip = noise_tone(3.0);
  for (auto _ : state) benchmark::DoNotOptimize(dsp::extract_features(clip));
}
BENCHMARK(BM_ExtractFeatures)->Unit(benchmark::kMillisecond);

void BM_Resample48kTo22050(benchmark::State& state) {
  audio::AudioClip clip = noise_tone(3.0);
  clip.sample_rate = 48000;
  for (auto _ : state) benchmark::DoNotOptimize(audio::resample(clip, 22050));
}
BENCHMARK(BM_Resample48kTo22050)->Unit(benchmark::kMillisecond);

void BM_ModelPredict(benchmark::State& state) {
  const model::SerModel m = model::build_ser_model(42);
  const auto features = dsp::extract_features(noise_tone(3.0));
  for (auto _ : state) benchmark::DoNotOptimize(model::predict(m, features));
}
BENCHMARK(BM_ModelPredict)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  model::SerModel m = model::build_ser_model(42);
  const auto x = random_tensor({batch, 1, 128, 130}, 4);
  std::vector<std::size_t> targets(batch);
  for (std::size_t i = 0; i < batch; ++i) targets[i] = i % 12;
  CounterRng dropout(1, "dropout");
  nn::TrainContext ctx{dropout};
  for (auto _ : state) {
    const auto probs = m.forward_train(x, ctx);
    Tensor<float> grad = probs;
    for (std::size_t i = 0; i < batch; ++i) grad[i * 12 + targets[i]] -= 1.0f;
    for (float& g : grad.values()) g /= static_cast<float>(batch);
    m.backward_from_logits(grad);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * batch));
}
BENCHMARK(BM_TrainStep)->Arg(16)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
