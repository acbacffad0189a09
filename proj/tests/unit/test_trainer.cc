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

#include <cstdlib>
#include <fstream>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "fixtures.h"
#include "gentse/config.h"
#include "gentse/trainer.h"
#include "helpers.h"

using namespace gentse;
using gentse::testing::code_of;
using gentse::testing::TempDir;
using gentse::testing::tiny_corpus;
using gentse::testing::tiny_model;
using gentse::testing::tiny_train;

namespace {

std::map<std::string, torch::Tensor> snapshot(TseModelImpl& m) {
  std::map<std::string, torch::Tensor> out;
  for (const auto& p : m.named_parameters()) out[p.key()] = p.value().detach().clone();
  return out;
}

bool starts_with(const std::string& s, const std::string& p) { return s.rfind(p, 0) == 0; }

}  // namespace

TEST_SUITE("trainer") {
  TEST_CASE("learning-rate schedule") {
    TrainConfig c;
    c.lr = 1e-4;
    c.epochs = 10;
    c.lr_decay_epoch = 5;
    CHECK(lr_schedule(c, 0) == 1e-4);
    CHECK(lr_schedule(c, 4) == 1e-4);
    CHECK(lr_schedule(c, 5) == doctest::Approx(1e-5));
    CHECK(lr_schedule(c, 9) == doctest::Approx(1e-5));
    c.micro_batch = 3;
    CHECK(code_of([&] { c.validate(); }) == ErrorCode::kConfig);
  }

  TEST_CASE("trainable set follows the policy") {
    for (bool spk : {false, true}) {
      for (bool enr : {false, true}) {
        for (bool dec : {false, true}) {
          for (int rank : {0, 2}) {
            TseModel m(tiny_model(rank));
            const auto names = m->configure_trainable({{spk, enr}, dec});
            for (const auto& p : m->named_parameters()) {
              const auto& n = p.key();
              bool expect = starts_with(n, "flow.") || (dec && starts_with(n, "decoder.")) ||
                            n.find("lora_") != std::string::npos ||
                            (enr && n == "encoder.enroll_pos") || (spk && starts_with(n, "encoder.speaker_proj."));
              CHECK_MESSAGE(names.count(n) == static_cast<std::size_t>(expect), n);
              CHECK(p.value().requires_grad() == expect);
            }
          }
        }
      }
    }
  }

  TEST_CASE("full fine-tuning opens the whole encoder") {
    auto cfg = tiny_model(0);
    cfg.encoder.full_finetune = true;
    TseModel m(cfg);
    const auto names = m->configure_trainable({{true, true}, false});
    CHECK(names.count("encoder.conv1.weight") == 1);
    CHECK(names.count("decoder.ln_post.weight") == 0);
  }

  TEST_CASE("audit catches tampered flags") {
    TempDir dir("audit");
    auto corpus = tiny_corpus(dir.path());
    JointTrainer tr(TseModel(tiny_model()), &corpus, tiny_train());
    tr.audit_trainable();
    tr.model()->encoder->conv1->weight.set_requires_grad(true);
    CHECK(code_of([&] { tr.audit_trainable(); }) == ErrorCode::kState);
  }

  TEST_CASE("epochs are reproducible example by example") {
    TempDir dir("epoch");
    auto corpus = tiny_corpus(dir.path());
    JointTrainer a(TseModel(tiny_model()), &corpus, tiny_train());
    JointTrainer b(TseModel(tiny_model()), &corpus, tiny_train());
    REQUIRE(a.epoch_size() == corpus.size());
    for (int e = 0; e < 2; ++e) {
      for (std::size_t i = 0; i < a.epoch_size(); ++i) {
        auto x = a.example_at(e, i), y = b.example_at(e, i);
        CHECK(x.mixture == y.mixture);
        CHECK(x.enrollment == y.enrollment);
        CHECK(x.snr_db == y.snr_db);
      }
    }
    CHECK_FALSE(a.example_at(0, 0).mixture == a.example_at(1, 0).mixture);
  }

  TEST_CASE("frozen parameters stay bit-identical") {
    TempDir dir("frozen");
    auto corpus = tiny_corpus(dir.path());
    auto t = tiny_train();
    t.train_decoder = false;
    JointTrainer tr(TseModel(tiny_model()), &corpus, t);
    const auto before = snapshot(*tr.model());
    for (int i = 0; i < 5; ++i) tr.train_step();
    const auto trainable = tr.model()->trainable_names();
    int frozen = 0, moved = 0;
    for (const auto& p : tr.model()->named_parameters()) {
      if (trainable.count(p.key())) {
        moved += !torch::equal(before.at(p.key()), p.value());
      } else {
        ++frozen;
        CHECK_MESSAGE(torch::equal(before.at(p.key()), p.value()), p.key());
      }
    }
    CHECK(frozen > 0);
    CHECK(moved > 0);
  }

  TEST_CASE("without joint training the objective is the flow loss alone") {
    TempDir dir("nojoint");
    auto corpus = tiny_corpus(dir.path());
    auto t = tiny_train();
    t.ablations.no_joint = true;
    JointTrainer tr(TseModel(tiny_model()), &corpus, t);
    auto r = tr.train_step();
    CHECK(r.total == r.cfm);
    CHECK(r.ce > 0.0);
    // The decoder gets no gradient from the flow loss.
    tr.keep_gradients(true);
    tr.train_step();
    for (const auto& [n, g] : tr.last_gradients()) {
      if (starts_with(n, "decoder.")) CHECK_MESSAGE(g.abs().max().item<double>() == 0.0, n);
    }
  }

  TEST_CASE("gradient accumulation is independent of the micro-batch size") {
    TempDir dir("accum");
    auto corpus = tiny_corpus(dir.path());
    std::vector<std::map<std::string, torch::Tensor>> grads;
    for (int micro : {1, 2, 4}) {
      auto t = tiny_train();
      t.global_batch = 4;
      t.micro_batch = micro;
      JointTrainer tr(TseModel(tiny_model()), &corpus, t);
      tr.keep_gradients(true);
      tr.train_step();
      grads.push_back(tr.last_gradients());
    }
    for (std::size_t k = 1; k < grads.size(); ++k) {
      REQUIRE(grads[k].size() == grads[0].size());
      for (const auto& [n, g] : grads[0]) {
        const double scale = std::max(g.abs().max().item<double>(), 1e-8);
        CHECK_MESSAGE((grads[k].at(n) - g).abs().max().item<double>() / scale < 1e-5, n);
      }
    }
  }

  TEST_CASE("checkpoint continuation matches an uninterrupted run") {
    TempDir dir("ckpt");
    auto corpus = tiny_corpus(dir.path());
    auto t = tiny_train();
    JointTrainer straight(TseModel(tiny_model()), &corpus, t);
    straight.fit();

    // Interrupted mid-epoch.
    JointTrainer first(TseModel(tiny_model()), &corpus, t);
    for (int i = 0; i < 3; ++i) first.train_step();
    first.save_checkpoint(dir / "ck");
    JointTrainer second(TseModel(tiny_model()), &corpus, t);
    second.resume(dir / "ck");
    CHECK(second.state().step == 3);
    while (second.state().epoch < t.epochs) second.train_epoch();

    const auto a = snapshot(*straight.model());
    for (const auto& p : second.model()->named_parameters()) CHECK_MESSAGE(torch::equal(a.at(p.key()), p.value()), p.key());
    CHECK((second.state().history == straight.state().history));
    CHECK(second.state().step == straight.state().step);

    auto loaded = load_checkpoint(dir / "ck");
    CHECK(loaded.step == 3);
    const auto f = snapshot(*first.model());
    for (const auto& p : loaded.model->named_parameters()) CHECK(torch::equal(f.at(p.key()), p.value()));
  }

  TEST_CASE("resume refuses mismatched or damaged checkpoints") {
    TempDir dir("ckbad");
    auto corpus = tiny_corpus(dir.path());
    JointTrainer tr(TseModel(tiny_model()), &corpus, tiny_train());
    tr.train_step();
    tr.save_checkpoint(dir / "ck");

    auto other = tiny_train();
    other.lr = 5e-4;
    JointTrainer b(TseModel(tiny_model()), &corpus, other);
    CHECK(code_of([&] { b.resume(dir / "ck"); }) == ErrorCode::kMismatch);
    JointTrainer c(TseModel(tiny_model(3)), &corpus, tiny_train());
    CHECK(code_of([&] { c.resume(dir / "ck"); }) == ErrorCode::kMismatch);
    CHECK(code_of([&] { c.resume(dir / "nothing"); }) == ErrorCode::kMissingFile);

    auto path = dir / "ck" / "manifest.json";
    nlohmann::json m;
    {
      std::ifstream in(path);
      m = nlohmann::json::parse(in);
    }
    m["version"] = 99;
    {
      std::ofstream out(path);
      out << m.dump();
    }
    JointTrainer d(TseModel(tiny_model()), &corpus, tiny_train());
    CHECK(code_of([&] { d.resume(dir / "ck"); }) == ErrorCode::kVersion);
    {
      std::ofstream out(path);
      out << "{";
    }
    CHECK(code_of([&] { d.resume(dir / "ck"); }) == ErrorCode::kCorrupt);
  }

  TEST_CASE("external base weights stay out of checkpoints") {
    TempDir dir("extbase");
    auto corpus = tiny_corpus(dir.path());
    TseModel base(tiny_model());
    base->save_base(dir / "base");
    TseModel m(tiny_model());
    const auto fp = m->load_base(dir / "base");
    JointTrainer tr(m, &corpus, tiny_train(), fp);
    tr.set_base_path(dir / "base");
    tr.train_step();
    tr.save_checkpoint(dir / "ck");
    nlohmann::json man;
    {
      std::ifstream in(dir / "ck" / "manifest.json");
      man = nlohmann::json::parse(in);
    }
    for (const auto& n : man["params"]) CHECK(n.get<std::string>().find("encoder.conv1") == std::string::npos);
    auto loaded = load_checkpoint(dir / "ck");
    const auto s = snapshot(*tr.model());
    for (const auto& p : loaded.model->named_parameters()) CHECK(torch::equal(s.at(p.key()), p.value()));

    // A different base is rejected.
    TseModel other(tiny_model());
    {
      torch::NoGradGuard g;
      other->encoder->conv1->weight.add_(1.0);
    }
    other->save_base(dir / "base2");
    CHECK(code_of([&] { load_checkpoint(dir / "ck", dir / "base2"); }) == ErrorCode::kMismatch);
  }

  TEST_CASE("training log lines") {
    TempDir dir("log");
    auto corpus = tiny_corpus(dir.path());
    JointTrainer tr(TseModel(tiny_model()), &corpus, tiny_train());
    tr.set_log(dir / "log.jsonl");
    tr.train_step();
    tr.train_step();
    std::ifstream in(dir / "log.jsonl");
    int n = 0;
    for (std::string line; std::getline(in, line); ++n) {
      auto j = nlohmann::json::parse(line);
      for (const char* k : {"step", "epoch", "lr", "skipped", "wall_time", "l_ot_cfm", "l_ce", "l"}) CHECK(j.contains(k));
    }
    CHECK(n == 2);
  }

  TEST_CASE("held-out evaluation is deterministic") {
    TempDir dir("heldout");
    auto corpus = tiny_corpus(dir.path());
    auto items = build_eval_set(corpus, make_pairings(corpus, 2, 1), tiny_train().sampler);
    TseModel m(tiny_model());
    auto a = evaluate_held_out(*m, items, {true, true}, 3);
    auto b = evaluate_held_out(*m, items, {true, true}, 3);
    CHECK(a.items == 4u);
    CHECK(a.total == b.total);
    CHECK(a.total == doctest::Approx(a.cfm + a.ce));
    CHECK(std::isfinite(a.wer));
  }
}

TEST_SUITE("config") {
  TEST_CASE("JSON round trip preserves the fingerprint") {
    RunConfig c;
    c.model = tiny_model();
    c.train.ablations.no_enroll = true;
    c.eval.solver = OdeSolver::kMidpoint;
    c.paths.train_manifest = "x.jsonl";
    auto j = to_json(c);
    CHECK(j["eval"]["solver"] == "midpoint");
    auto back = run_config_from_json(j);
    CHECK(back == c);
    CHECK(fingerprint(back) == fingerprint(c));
    c.train.lr *= 2;
    CHECK(fingerprint(back) != fingerprint(c));
  }

  TEST_CASE("unknown keys are rejected with their path") {
    auto j = to_json(RunConfig{});
    j["model"]["encoder"]["lora_rnak"] = 3;
    try {
      run_config_from_json(j);
      FAIL("expected kConfig");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kConfig);
      CHECK(std::string(e.what()).find("model.encoder.lora_rnak") != std::string::npos);
    }
    auto k = to_json(RunConfig{});
    k["eval"]["solver"] = "rk4";
    CHECK(code_of([&] { run_config_from_json(k); }) == ErrorCode::kConfig);
    auto l = to_json(RunConfig{});
    l["train"]["epochs"] = "ten";
    CHECK(code_of([&] { run_config_from_json(l); }) == ErrorCode::kConfig);
  }

  TEST_CASE("absent keys keep defaults") {
    auto c = run_config_from_json(nlohmann::json::parse(R"({"train": {"epochs": 3, "lr_decay_epoch": 2}})"));
    CHECK(c.train.epochs == 3);
    CHECK(c.train.global_batch == TrainConfig{}.global_batch);
    CHECK(c.model == ModelConfig{});
  }

  TEST_CASE("environment overrides") {
    RunConfig c;
    setenv("GENTSE_SEED", "77", 1);
    setenv("GENTSE_OUTPUT_ROOT", "/tmp/somewhere", 1);
    apply_environment(c);
    unsetenv("GENTSE_OUTPUT_ROOT");
    CHECK(c.train.seed == 77u);
    CHECK(c.eval.seed == 77u);
    CHECK(c.pretrain.seed == 77u);
    CHECK(c.paths.output_root == "/tmp/somewhere");
    setenv("GENTSE_SEED", "seven", 1);
    CHECK(code_of([&] { apply_environment(c); }) == ErrorCode::kConfig);
    unsetenv("GENTSE_SEED");
  }

  TEST_CASE("cross-module validation") {
    auto m = tiny_model();
    m.encoder.n_mels = 20;
    CHECK(code_of([&] { m.validate(); }) == ErrorCode::kConfig);
    m = tiny_model();
    m.decoder.vocab_size = 40;
    CHECK(code_of([&] { m.validate(); }) == ErrorCode::kConfig);
  }
}
