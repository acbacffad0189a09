// Copyright 2026 The gentse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <benchmark/benchmark.h>
#include <ATen/CPUGeneratorImpl.h>
#include <torch/torch.h>

#include "gentse/features.h"
#include "gentse/flow.h"
#include "gentse/metrics.h"
#include "gentse/model.h"
#include "gentse/rng.h"

namespace {

using namespace gentse;

Waveform noise(std::size_t n, std::uint64_t seed = 1) {
  Rng rng(seed);
  std::vector<float> s(n);
  for (auto& x : s) x = static_cast<float>(rng.uniform(-0.3, 0.3));
  return Waveform(std::move(s), 16000);
}

void BM_LogMel(benchmark::State& state) {
  FeatureConfig c;
  const auto w = noise(static_cast<std::size_t>(state.range(0)) * 16000);
  for (auto _ : state) benchmark::DoNotOptimize(compute_log_mel(w, c).values);
  state.SetItemsProcessed(state.iterations() * state.range(0));  // seconds of audio
}
BENCHMARK(BM_LogMel)->Arg(1)->Arg(5)->Arg(10)->Unit(benchmark::kMillisecond);

ModelConfig toy_model() {
  ModelConfig m;
  m.features.hop_length = 200;
  m.features.n_mels = 40;
  m.encoder.n_mels = 40;
  m.encoder.d_model = 64;
  m.encoder.n_layers = 2;
  m.encoder.n_heads = 4;
  m.encoder.max_frames = 400;
  m.encoder.max_enroll_frames = 400;
  m.encoder.d_speaker = 80;
  m.encoder.lora_rank = 4;
  m.flow.width = 64;
  m.flow.n_blocks = 4;
  m.flow.time_dim = 32;
  m.decoder.d_model = 64;
  m.decoder.n_layers = 2;
  m.decoder.n_heads = 4;
  m.decoder.max_text_positions = 64;
  return m;
}

void BM_EncoderForward(benchmark::State& state) {
  TseModel m(toy_model());
  m->eval();
  torch::NoGradGuard g;
  const auto frames = state.range(0);
  auto mix = torch::randn({40, frames});
  auto enroll = torch::randn({40, 160});
  auto spk = torch::randn({80});
  for (auto _ : state) benchmark::DoNotOptimize(m->encoder->encode_target(mix, enroll, spk, {true, true}).values);
}
BENCHMARK(BM_EncoderForward)->Arg(80)->Arg(240)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_CfmTrainingStep(benchmark::State& state) {
  const auto cfg = toy_model();
  VectorFieldNet net(40, cfg.encoder.d_model, cfg.encoder.d_speaker, cfg.flow);
  const auto frames = state.range(0);
  auto x1 = torch::randn({40, frames});
  FlowConditioning cond{torch::randn({frames, cfg.encoder.d_model}), torch::randn({cfg.encoder.d_speaker})};
  VectorField field = [&](const torch::Tensor& x, const torch::Tensor& t, const FlowConditioning& c) {
    return net->forward(x, t, c);
  };
  auto gen = at::make_generator<at::CPUGeneratorImpl>(1);
  for (auto _ : state) {
    net->zero_grad();
    auto loss = cfm_loss(field, x1, cond, gen, cfg.flow.sigma, cfg.flow.n_mc);
    loss.backward();
    benchmark::DoNotOptimize(loss);
  }
}
BENCHMARK(BM_CfmTrainingStep)->Arg(80)->Arg(240)->Unit(benchmark::kMillisecond);

void BM_EulerSampling(benchmark::State& state) {
  const auto cfg = toy_model();
  VectorFieldNet net(40, cfg.encoder.d_model, cfg.encoder.d_speaker, cfg.flow);
  torch::NoGradGuard g;
  FlowConditioning cond{torch::randn({160, cfg.encoder.d_model}), torch::randn({cfg.encoder.d_speaker})};
  VectorField field = [&](const torch::Tensor& x, const torch::Tensor& t, const FlowConditioning& c) {
    return net->forward(x, t, c);
  };
  auto gen = at::make_generator<at::CPUGeneratorImpl>(2);
  for (auto _ : state) benchmark::DoNotOptimize(sample_flow(field, cond, {40, 160}, static_cast<int>(state.range(0)), gen));
}
BENCHMARK(BM_EulerSampling)->Arg(1)->Arg(10)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_Wer(benchmark::State& state) {
  Rng rng(3);
  static const char* vocab[] = {"the", "a", "cat", "sat", "on", "mat", "dog", "ran"};
  std::vector<std::string> hyp(static_cast<std::size_t>(state.range(0))), ref(hyp.size());
  for (auto& w : hyp) w = vocab[rng.below(8)];
  for (auto& w : ref) w = vocab[rng.below(8)];
  for (auto _ : state) benchmark::DoNotOptimize(align_words(hyp, ref));
}
BENCHMARK(BM_Wer)->Arg(10)->Arg(100)->Arg(1000);

}  // namespace

int main(int argc, char** argv) {
  torch::set_num_threads(1);
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
