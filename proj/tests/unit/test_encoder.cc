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

#include <doctest.h>

#include <torch/torch.h>

#include "gentse/encoder.h"
#include "helpers.h"

using namespace gentse;
using gentse::testing::code_of;

namespace {

EncoderConfig tiny(int rank = 4) {
  EncoderConfig c;
  c.n_mels = 8;
  c.d_model = 16;
  c.n_layers = 2;
  c.n_heads = 2;
  c.max_frames = 600;
  c.max_enroll_frames = 600;
  c.d_speaker = 6;
  c.lora_rank = rank;
  return c;
}

void randomize_lora(TargetEncoderImpl& enc, double scale = 0.1) {
  torch::NoGradGuard g;
  for (auto& l : enc.adapted_layers()) l->lora_B.normal_(0.0, scale);
}

}  // namespace

TEST_SUITE("encoder") {
  TEST_CASE("token count is floor(T / 2) for every prompt combination") {
    torch::manual_seed(1);
    TargetEncoder enc(tiny());
    torch::NoGradGuard g;
    Rng rng(5);
    const PromptSwitches combos[] = {{false, false}, {true, false}, {false, true}, {true, true}};
    for (int trial = 0; trial < 40; ++trial) {
      const auto t = 4 + static_cast<std::int64_t>(rng.below(200));
      const auto te = 4 + static_cast<std::int64_t>(rng.below(200));
      auto mix = torch::randn({8, t});
      auto en = torch::randn({8, te});
      auto spk = torch::randn({6});
      for (auto s : combos) {
        auto h = enc->encode_target(mix, en, spk, s);
        CHECK(h.length() == t / 2);
        CHECK(h.values.size(1) == 16);
      }
      CHECK(enc->encode_base(mix).length() == t / 2);
    }
  }

  TEST_CASE("prompted length") {
    TargetEncoder enc(tiny());
    CHECK(enc->prompted_length(10, 7, {false, false}) == 5);
    CHECK(enc->prompted_length(10, 7, {true, false}) == 6);
    CHECK(enc->prompted_length(10, 7, {false, true}) == 9);
    CHECK(enc->prompted_length(11, 7, {true, true}) == 10);
  }

  TEST_CASE("zero-initialised adapters reproduce the base encoder") {
    torch::manual_seed(2);
    TargetEncoder with(tiny(4));
    TargetEncoder without(tiny(0));
    // Copy base weights across.
    std::map<std::string, torch::Tensor> archive;
    for (auto& [n, t] : without->base_parameters()) archive[n] = t;
    assign_from_archive(with->base_parameters(), archive, "");
    torch::NoGradGuard g;
    auto x = torch::randn({8, 50});
    auto a = with->encode_base(x).values;
    auto b = without->encode_base(x).values;
    CHECK((a - b).abs().max().item<double>() <= 1e-6);
  }

  TEST_CASE("merged adapters match the adapter forward") {
    torch::manual_seed(3);
    TargetEncoder enc(tiny(4));
    randomize_lora(*enc);
    torch::NoGradGuard g;
    auto mix = torch::randn({8, 40});
    auto en = torch::randn({8, 30});
    auto spk = torch::randn({6});
    auto before = enc->encode_target(mix, en, spk, {true, true}).values;
    enc->merge_lora();
    auto after = enc->encode_target(mix, en, spk, {true, true}).values;
    const double rel = ((before - after).abs().max() / before.abs().max()).item<double>();
    CHECK(rel < 1e-5);
    CHECK(code_of([&] { enc->merge_lora(); }) == ErrorCode::kState);
  }

  TEST_CASE("adapter parameter count") {
    auto cfg = tiny(4);
    TargetEncoder enc(cfg);
    // rank * (in + out) per adapted projection, four projections per layer.
    CHECK(enc->lora_parameter_count() == cfg.n_layers * 4 * 4 * (16 + 16));
    cfg.lora_targets = {"query", "value"};
    TargetEncoder qv(cfg);
    CHECK(qv->lora_parameter_count() == cfg.n_layers * 2 * 4 * (16 + 16));
    TargetEncoder none(tiny(0));
    CHECK(none->lora_parameter_count() == 0);
    CHECK(none->lora_parameters().empty());
  }

  TEST_CASE("LoRA linear algebra") {
    torch::manual_seed(4);
    LoRALinear l(5, 3, true, 2, 0.5);
    {
      torch::NoGradGuard g;
      l->lora_B.normal_();
    }
    auto x = torch::randn({7, 5});
    auto expect = x.matmul(l->weight.t()) + l->bias + 0.5 * x.matmul(l->lora_A.t()).matmul(l->lora_B.t());
    CHECK((l->forward(x) - expect).abs().max().item<double>() < 1e-5);
  }

  TEST_CASE("input validation") {
    TargetEncoder enc(tiny());
    auto mix = torch::randn({8, 20});
    CHECK(code_of([&] { enc->encode_target(torch::randn({7, 20}), {}, {}, {false, false}); }) ==
          ErrorCode::kInvalidInput);
    CHECK(code_of([&] { enc->encode_target(torch::randn({8, 1}), {}, {}, {false, false}); }) ==
          ErrorCode::kInvalidInput);
    CHECK(code_of([&] { enc->encode_target(torch::randn({8, 601}), {}, {}, {false, false}); }) ==
          ErrorCode::kCapacity);
    CHECK(code_of([&] { enc->encode_target(mix, torch::randn({8, 601}), {}, {false, true}); }) ==
          ErrorCode::kCapacity);
    CHECK(code_of([&] { enc->encode_target(mix, torch::randn({9, 10}), {}, {false, true}); }) ==
          ErrorCode::kInvalidInput);
    CHECK(code_of([&] { enc->encode_target(mix, {}, {}, {false, true}); }) == ErrorCode::kInvalidInput);
    CHECK(code_of([&] { enc->encode_target(mix, {}, torch::randn({5}), {true, false}); }) ==
          ErrorCode::kInvalidInput);
    auto bad = tiny();
    bad.lora_targets = {"gate"};
    CHECK(code_of([&] { bad.validate(); }) == ErrorCode::kConfig);
    bad = tiny();
    bad.d_model = 15;
    CHECK(code_of([&] { bad.validate(); }) == ErrorCode::kConfig);
  }

  TEST_CASE("archive assignment reports every mismatch") {
    TargetEncoder enc(tiny());
    std::map<std::string, torch::Tensor> archive;
    for (auto& [n, t] : enc->base_parameters()) archive[n] = t.clone();
    archive.erase("conv1.weight");
    archive["ln_post.weight"] = torch::zeros({3});
    archive["extra.weight"] = torch::zeros({1});
    try {
      assign_from_archive(enc->base_parameters(), archive, "");
      FAIL("expected kMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kMismatch);
      const std::string msg = e.what();
      CHECK(msg.find("missing conv1.weight") != std::string::npos);
      CHECK(msg.find("shape of ln_post.weight") != std::string::npos);
      CHECK(msg.find("unexpected extra.weight") != std::string::npos);
    }
  }
}
