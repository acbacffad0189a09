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

#include <cmath>
#include <fstream>
#include <numeric>

#include "gentse/mixing.h"
#include "helpers.h"

using namespace gentse;
using gentse::testing::code_of;
using gentse::testing::TempDir;

namespace {

double power_db(const std::vector<float>& x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += double(x[i]) * x[i];
  return 10.0 * std::log10(s / n);
}

// n_speakers x n_utts random utterances written under `dir`.
Corpus small_corpus(const std::filesystem::path& dir, int n_speakers, int n_utts, std::uint64_t seed = 1) {
  Rng rng(seed);
  std::vector<UtteranceRecord> recs;
  for (int s = 0; s < n_speakers; ++s) {
    for (int u = 0; u < n_utts; ++u) {
      const auto id = "s" + std::to_string(s) + "_" + std::to_string(u);
      auto w = gentse::testing::random_wave(rng, 4000 + rng.below(8000), 0.1 + 0.2 * rng.uniform());
      write_wav(dir / (id + ".wav"), w, WavEncoding::kFloat32);
      recs.push_back({id, id + ".wav", "s" + std::to_string(s), "a b", w.duration_s()});
    }
  }
  write_manifest(dir / "manifest.jsonl", recs);
  return load_manifest(dir / "manifest.jsonl");
}

}  // namespace

TEST_SUITE("mixing") {
  TEST_CASE("equal power at 0 dB leaves the interferer unscaled") {
    Rng rng(2);
    auto a = gentse::testing::random_wave(rng, 5000, 0.2);
    auto b = a;
    std::reverse(b.samples.begin(), b.samples.end());
    auto r = mix_at_snr(a, b, 0.0);
    CHECK(r.interferer_scale == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.clip_gain == 1.0);
  }

  TEST_CASE("constructed SNR matches the request on 1000 random cases") {
    Rng rng(7);
    double worst = 0.0;
    int clipped = 0;
    for (int i = 0; i < 1000; ++i) {
      auto t = gentse::testing::random_wave(rng, 500 + rng.below(4000), 0.05 + rng.uniform());
      auto n = gentse::testing::random_wave(rng, 500 + rng.below(4000), 0.05 + rng.uniform());
      const double snr = rng.uniform(-10.0, 10.0);
      auto r = mix_at_snr(t, n, snr);
      REQUIRE(r.mixture.size() == std::max(t.size(), n.size()));
      const double got = power_db(r.scaled_target.samples, r.target_length) -
                         power_db(r.scaled_interferer.samples, r.interferer_length);
      worst = std::max(worst, std::abs(got - snr));
      clipped += r.clip_gain < 1.0;
      CHECK(peak(r.mixture.samples) <= 0.99f + 1e-6f);
      for (std::size_t k = 0; k < r.mixture.size(); k += 97) {
        CHECK(r.mixture.samples[k] == r.scaled_target.samples[k] + r.scaled_interferer.samples[k]);
      }
    }
    CHECK(worst < 1e-6);
    CHECK(clipped > 0);  // the clip path was exercised
  }

  TEST_CASE("mix_at_snr rejects silence and non-finite SNR") {
    Waveform z(std::vector<float>(100, 0.0f), 16000);
    Waveform x(std::vector<float>(100, 0.1f), 16000);
    CHECK(code_of([&] { mix_at_snr(z, x, 0.0); }) == ErrorCode::kInvalidInput);
    CHECK(code_of([&] { mix_at_snr(x, z, 0.0); }) == ErrorCode::kInvalidInput);
    CHECK(code_of([&] { mix_at_snr(x, x, NAN); }) == ErrorCode::kInvalidInput);
    CHECK(code_of([&] { mix_at_snr(x, Waveform(x.samples, 8000), 0.0); }) == ErrorCode::kInvalidInput);
  }

  TEST_CASE("fix_length") {
    Waveform w(std::vector<float>(100000, 0.25f), 16000);
    CHECK(fix_length(w, 5.0).size() == 80000u);
    auto shortw = fix_length(Waveform(std::vector<float>(10, 1.0f), 16000), 5.0);
    REQUIRE(shortw.size() == 80000u);
    CHECK(shortw.samples[9] == 1.0f);
    CHECK(shortw.samples[10] == 0.0f);
    Rng rng(1);
    CHECK(fix_length_random(w, 5.0, rng).size() == 80000u);
  }

  TEST_CASE("training examples: enrollment length, speakers, SNR range") {
    TempDir dir("mixcorp");
    auto corpus = small_corpus(dir.path(), 3, 3);
    Rng rng(11);
    for (int i = 0; i < 50; ++i) {
      auto ex = sample_training_example(corpus, rng);
      CHECK(ex.enrollment.size() == 80000u);
      CHECK(ex.snr_db >= -5.0);
      CHECK(ex.snr_db <= 5.0);
      const auto& t = corpus.at(corpus.index_of(ex.target_utterance_id));
      const auto& n = corpus.at(corpus.index_of(ex.interferer_utterance_id));
      const auto& e = corpus.at(corpus.index_of(ex.enrollment_utterance_id));
      CHECK(t.speaker_id != n.speaker_id);
      CHECK(e.speaker_id == t.speaker_id);
      CHECK(e.id != t.id);
      CHECK(ex.target_speaker_id == t.speaker_id);
    }
  }

  TEST_CASE("10000-draw SNR distribution") {
    TempDir dir("snrdist");
    auto corpus = small_corpus(dir.path(), 2, 2);
    corpus.preload();
    Rng rng(2024);
    double sum = 0.0, lo = 1e9, hi = -1e9;
    for (int i = 0; i < 10000; ++i) {
      const double s = sample_training_example(corpus, rng).snr_db;
      sum += s;
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    CHECK(std::abs(sum / 10000.0) < 0.15);
    CHECK(lo >= -5.0);
    CHECK(hi <= 5.0);
  }

  TEST_CASE("sampling is a pure function of the rng state") {
    TempDir dir("mixdet");
    auto corpus = small_corpus(dir.path(), 3, 3);
    Rng a(99), b(99);
    for (int i = 0; i < 10; ++i) {
      auto x = sample_training_example(corpus, a);
      auto y = sample_training_example(corpus, b);
      CHECK(x.mixture == y.mixture);
      CHECK(x.enrollment == y.enrollment);
      CHECK(x.snr_db == y.snr_db);
    }
  }

  TEST_CASE("corpus preconditions") {
    TempDir dir("precond");
    auto one = small_corpus(dir.path(), 1, 3);
    CHECK(code_of([&] { validate_for_mixing(one); }) == ErrorCode::kCorpus);
    TempDir dir2("precond2");
    auto single = small_corpus(dir2.path(), 3, 1);
    CHECK(code_of([&] { validate_for_mixing(single); }) == ErrorCode::kCorpus);
  }

  TEST_CASE("manifest errors") {
    TempDir dir("manifest");
    CHECK(code_of([&] { load_manifest(dir / "none.jsonl"); }) == ErrorCode::kMissingFile);
    {
      std::ofstream f(dir / "bad.jsonl");
      f << R"({"id":"a","path":"a.wav","speaker":"s","text":"x","duration":1.0})" << "\n{oops\n";
    }
    try {
      load_manifest(dir / "bad.jsonl");
      FAIL("expected a parse error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kParse);
      CHECK(std::string(e.what()).find(".jsonl:2:") != std::string::npos);
    }
    {
      std::ofstream f(dir / "dup.jsonl");
      f << R"({"id":"a","path":"a.wav","speaker":"s","text":"x","duration":1.0})" << "\n"
        << R"({"id":"a","path":"b.wav","speaker":"s","text":"x","duration":1.0})" << "\n";
    }
    CHECK(code_of([&] { load_manifest(dir / "dup.jsonl"); }) == ErrorCode::kValidation);
    {
      std::ofstream f(dir / "dur.jsonl");
      f << R"({"id":"a","path":"a.wav","speaker":"s","text":"x","duration":0})" << "\n";
    }
    CHECK(code_of([&] { load_manifest(dir / "dur.jsonl"); }) == ErrorCode::kValidation);
  }

  TEST_CASE("missing audio and unknown ids") {
    TempDir dir("resolve");
    write_manifest(dir / "m.jsonl", {{"a", "nope.wav", "s", "x", 1.0}});
    auto c = load_manifest(dir / "m.jsonl");
    CHECK(code_of([&] { c.load(0); }) == ErrorCode::kResolution);
    CHECK(code_of([&] { c.index_of("zzz"); }) == ErrorCode::kResolution);
  }

  TEST_CASE("pairings round trip and evaluation set layout") {
    TempDir dir("pairs");
    auto corpus = small_corpus(dir.path(), 3, 3);
    auto pairs = make_pairings(corpus, 5, 42);
    REQUIRE(pairs.size() == 5u);
    CHECK(make_pairings(corpus, 5, 42).size() == 5u);
    write_pairings(dir / "p.jsonl", pairs);
    auto back = load_pairings(dir / "p.jsonl");
    REQUIRE(back.size() == pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      CHECK(back[i].target_id == pairs[i].target_id);
      CHECK(back[i].interferer_enroll_id == pairs[i].interferer_enroll_id);
      CHECK(back[i].snr_db == pairs[i].snr_db);
    }
    auto items = build_eval_set(corpus, back);
    REQUIRE(items.size() == 10u);
    CHECK(items[0].mixture == items[1].mixture);
    CHECK(items[0].target_utterance_id == items[1].interferer_utterance_id);
    CHECK(items[1].target_utterance_id == items[0].interferer_utterance_id);
    for (const auto& it : items) CHECK(it.enrollment.size() == 80000u);
    auto again = build_eval_set(corpus, back);
    for (std::size_t i = 0; i < items.size(); ++i) CHECK(again[i].mixture == items[i].mixture);

    auto bad = pairs;
    bad[0].enroll_id = bad[0].interferer_id;
    CHECK(code_of([&] { build_eval_set(corpus, bad); }) == ErrorCode::kValidation);
  }
}
