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

#include <torch/torch.h>

#include "gentse/decoder.h"
#include "helpers.h"

using namespace gentse;
using gentse::testing::code_of;
using gentse::testing::TempDir;

namespace {

DecoderConfig tiny_decoder() {
  DecoderConfig c;
  c.vocab_size = 12;
  c.d_model = 16;
  c.n_layers = 2;
  c.n_heads = 2;
  c.max_text_positions = 24;
  return c;
}

TranscriptTokens random_tokens(Rng& rng, int vocab, int body_len) {
  TranscriptTokens t;
  t.condition = {0, 1, 2, 3};
  t.eot = 4;
  for (int i = 0; i < body_len; ++i) t.body.push_back(5 + static_cast<TokenId>(rng.below(vocab - 5)));
  return t;
}

// -sum log softmax written out with explicit exponentials.
double oracle_ce(const torch::Tensor& logits, const TranscriptTokens& t, bool mean) {
  auto l = logits.to(torch::kFloat64).contiguous();
  auto a = l.accessor<double, 2>();
  const auto ys = t.targets();
  const auto first = static_cast<std::int64_t>(t.condition.size()) - 1;
  double total = 0.0;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const auto r = first + static_cast<std::int64_t>(i);
    double mx = -INFINITY;
    for (std::int64_t v = 0; v < l.size(1); ++v) mx = std::max(mx, a[r][v]);
    double z = 0.0;
    for (std::int64_t v = 0; v < l.size(1); ++v) z += std::exp(a[r][v] - mx);
    total += -(a[r][ys[i]] - mx - std::log(z));
  }
  return mean ? total / ys.size() : total;
}

}  // namespace

TEST_SUITE("decoder") {
  TEST_CASE("uniform logits give ln V per token") {
    Rng rng(1);
    for (int v : {6, 33, 1000}) {
      auto t = random_tokens(rng, std::min(v, 33), 6);
      auto logits = torch::zeros({static_cast<std::int64_t>(t.prefix().size()), v}, torch::kFloat64);
      CHECK(ce_loss(logits, t).item<double>() == doctest::Approx(std::log(double(v))).epsilon(1e-15));
      CHECK(ce_loss(logits, t, CeReduction::kSum).item<double>() ==
            doctest::Approx(7 * std::log(double(v))).epsilon(1e-14));
    }
  }

  TEST_CASE("CE matches direct summation on random cases") {
    Rng rng(2);
    torch::manual_seed(2);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const int vocab = 6 + static_cast<int>(rng.below(30));
      auto t = random_tokens(rng, vocab, static_cast<int>(rng.below(8)));
      auto logits = 3.0 * torch::randn({static_cast<std::int64_t>(t.prefix().size()), vocab}, torch::kFloat64);
      for (bool mean : {true, false}) {
        const double got = ce_loss(logits, t, mean ? CeReduction::kMean : CeReduction::kSum).item<double>();
        worst = std::max(worst, std::abs(got - oracle_ce(logits, t, mean)));
      }
    }
    CHECK(worst < 1e-6);
  }

  TEST_CASE("CE gradients match central differences") {
    // logits = X W with W [3, 7]: 21 parameters.
    torch::manual_seed(3);
    Rng rng(3);
    auto t = random_tokens(rng, 7, 4);
    const auto rows = static_cast<std::int64_t>(t.prefix().size());
    auto X = torch::randn({rows, 3}, torch::kFloat64);
    auto W = torch::randn({3, 7}, torch::kFloat64).requires_grad_();
    ce_loss(X.matmul(W), t).backward();
    auto analytic = W.grad().clone();
    torch::NoGradGuard g;
    auto numeric = torch::zeros_like(W);
    const double h = 1e-6;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 7; ++j) {
        const double o = W[i][j].item<double>();
        W[i][j] = o + h;
        const double up = ce_loss(X.matmul(W), t).item<double>();
        W[i][j] = o - h;
        const double dn = ce_loss(X.matmul(W), t).item<double>();
        W[i][j] = o;
        numeric[i][j] = (up - dn) / (2 * h);
      }
    }
    auto denom = torch::maximum(torch::maximum(analytic.abs(), numeric.abs()), torch::full_like(W, 1e-6));
    CHECK(((analytic - numeric).abs() / denom).max().item<double>() < 1e-4);
  }

  TEST_CASE("CE input validation") {
    TranscriptTokens t{{0, 1, 2, 3}, {5, 6}, 4};
    CHECK(code_of([&] { ce_loss(torch::zeros({5, 10}), t); }) == ErrorCode::kInvalidInput);
    t.body = {5, 40};
    CHECK(code_of([&] { ce_loss(torch::zeros({6, 10}), t); }) == ErrorCode::kInvalidInput);
  }

  TEST_CASE("decoder is causal") {
    torch::manual_seed(4);
    TextDecoder dec(tiny_decoder());
    torch::NoGradGuard g;
    TargetSpeechTokens h{torch::randn({9, 16})};
    std::vector<TokenId> prefix{0, 1, 2, 3, 7, 8, 9, 10};
    auto base = dec->decode_logits(h, prefix);
    for (std::size_t j = 1; j < prefix.size(); ++j) {
      auto changed = prefix;
      changed[j] = (changed[j] + 3) % 12;
      auto out = dec->decode_logits(h, changed);
      CHECK(torch::equal(out.narrow(0, 0, static_cast<std::int64_t>(j)), base.narrow(0, 0, static_cast<std::int64_t>(j))));
      CHECK_FALSE(torch::equal(out[j], base[j]));
    }
  }

  TEST_CASE("decoder capacity and vocabulary checks") {
    TextDecoder dec(tiny_decoder());
    TargetSpeechTokens h{torch::randn({3, 16})};
    CHECK(code_of([&] { dec->decode_logits(h, std::vector<TokenId>(25, 5)); }) == ErrorCode::kCapacity);
    CHECK(code_of([&] { dec->decode_logits(h, {0, 12}); }) == ErrorCode::kInvalidInput);
    CHECK(code_of([&] { dec->decode_logits(h, {}); }) == ErrorCode::kInvalidInput);
    CHECK(code_of([&] { dec->decode_logits({torch::randn({3, 8})}, {0}); }) == ErrorCode::kInvalidInput);
  }

  TEST_CASE("greedy decoding stops at EOT or max_len") {
    torch::manual_seed(5);
    TextDecoder dec(tiny_decoder());
    TargetSpeechTokens h{torch::randn({4, 16})};
    auto none = greedy_decode(*dec, h, {0, 1, 2, 3}, 4, 0);
    CHECK(none.truncated);
    CHECK(none.tokens.body.empty());
    auto r = greedy_decode(*dec, h, {0, 1, 2, 3}, 4, 20);
    CHECK(r.tokens.body.size() <= 20u);
    CHECK((r.truncated == (r.tokens.body.size() == 20u)));
    for (auto id : r.tokens.body) CHECK(id != 4);
    CHECK(code_of([&] { greedy_decode(*dec, h, {0, 1, 2, 3}, 4, 21); }) == ErrorCode::kCapacity);
  }
}

TEST_SUITE("tokenizer") {
  TEST_CASE("character tokenizer round trip") {
    CharTokenizer tok;
    CHECK(tok.vocab_size() == 33);
    auto ids = tok.encode("Don't Stop!");
    CHECK(tok.decode(ids) == "don't stop");
    auto t = tok.tokens_for("ab");
    CHECK((t.prefix() == std::vector<TokenId>{0, 1, 2, 3, 6, 7}));
    CHECK((t.targets() == std::vector<TokenId>{6, 7, 4}));
  }

  TEST_CASE("tokenizer file round trip") {
    TempDir dir("tok");
    CharTokenizer tok(" abc");
    tok.save(dir / "tok.json");
    auto back = CharTokenizer::load(dir / "tok.json");
    CHECK(back.alphabet() == " abc");
    CHECK(back.encode("cab") == tok.encode("cab"));
  }
}
