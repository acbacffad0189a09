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

#include "gentse/trainer.h"

#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "gentse/config.h"
#include "gentse/error.h"
#include "gentse/metrics.h"
#include "gentse/rng.h"

namespace gentse {
namespace {

using nlohmann::json;

constexpr std::uint64_t kDataStream = 0x64617461;  // sampler draws
constexpr std::uint64_t kFlowStream = 0x666c6f77;  // flow-matching noise

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) { return splitmix64(seed ^ splitmix64(stream)); }

void set_lr(torch::optim::Optimizer& opt, double lr) {
  for (auto& group : opt.param_groups()) static_cast<torch::optim::AdamWOptions&>(group.options()).lr(lr);
}

json epoch_json(const EpochReport& e) {
  return {{"epoch", e.epoch}, {"cfm", e.cfm}, {"ce", e.ce}, {"total", e.total}, {"steps", e.steps},
          {"skipped", e.skipped}};
}

}  // namespace

void TrainConfig::validate() const {
  require(global_batch >= 1 && micro_batch >= 1 && global_batch % micro_batch == 0, ErrorCode::kConfig,
          "micro_batch must divide global_batch");
  require(epochs >= 0, ErrorCode::kConfig, "epochs must be >= 0");
  require(lr > 0.0 && std::isfinite(lr), ErrorCode::kConfig, "lr must be positive");
  require(lr_decay_factor > 0.0, ErrorCode::kConfig, "lr_decay_factor must be positive");
  require(lr_decay_epoch >= 0 && lr_decay_epoch <= epochs, ErrorCode::kConfig,
          "lr_decay_epoch must lie in [0, epochs]");
  require(ce_weight >= 0.0, ErrorCode::kConfig, "ce_weight must be non-negative");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, ErrorCode::kConfig, "betas must be in [0, 1)");
  require(eps > 0.0 && weight_decay >= 0.0, ErrorCode::kConfig, "eps must be positive, weight_decay non-negative");
  require(max_consecutive_skips >= 1, ErrorCode::kConfig, "max_consecutive_skips must be >= 1");
  require(sampler.snr_min_db <= sampler.snr_max_db, ErrorCode::kConfig, "snr_min_db > snr_max_db");
  require(sampler.enroll_seconds > 0.0, ErrorCode::kConfig, "enroll_seconds must be positive");
}

double lr_schedule(const TrainConfig& cfg, int epoch) {
  require(epoch >= 0, ErrorCode::kInvalidInput, "epoch must be >= 0");
  return epoch < cfg.lr_decay_epoch ? cfg.lr : cfg.lr * cfg.lr_decay_factor;
}

void RunningLosses::add(const LossReport& r) {
  cfm += r.cfm;
  ce += r.ce;
  total += r.total;
  ++steps;
}

JointTrainer::JointTrainer(TseModel model, const Corpus* corpus, TrainConfig cfg,
                           std::optional<std::uint64_t> base_fingerprint)
    : model_(std::move(model)), corpus_(corpus), cfg_(std::move(cfg)), base_fingerprint_(base_fingerprint) {
  cfg_.validate();
  if (corpus_) validate_for_mixing(*corpus_);
  model_->configure_trainable(cfg_.policy());
  std::vector<torch::Tensor> params;
  for (const auto& p : model_->named_parameters()) {
    if (!p.value().requires_grad()) continue;
    params.push_back(p.value());
    trainable_order_.push_back(p.key());
  }
  optimizer_ = std::make_unique<torch::optim::AdamW>(
      params, torch::optim::AdamWOptions(cfg_.lr)
                  .betas({cfg_.beta1, cfg_.beta2})
                  .eps(cfg_.eps)
                  .weight_decay(cfg_.weight_decay));
  started_ = std::chrono::steady_clock::now();
}

std::size_t JointTrainer::epoch_size() const {
  require(corpus_ != nullptr, ErrorCode::kState, "trainer has no corpus");
  return corpus_->size();
}

MixtureExample JointTrainer::example_at(int epoch, std::size_t position) const {
  require(position < epoch_size(), ErrorCode::kInvalidInput, "position beyond the epoch");
  Rng rng(derive_seed(stream_seed(cfg_.seed, kDataStream), static_cast<std::uint64_t>(epoch), position));
  return sample_example_for_target(*corpus_, position, rng, cfg_.sampler);
}

void JointTrainer::set_log(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  log_ = std::make_unique<std::ofstream>(path, std::ios::app);
  require(log_->good(), ErrorCode::kIo, "cannot open training log " + path.string());
}

void JointTrainer::audit_trainable() {
  const auto expected = model_->expected_trainable(cfg_.policy());
  const auto actual = model_->trainable_names();
  if (expected == actual) return;
  std::string report = "trainable-set audit failed:";
  for (const auto& n : expected) {
    if (!actual.count(n)) report += "\n  frozen but expected trainable: " + n;
  }
  for (const auto& n : actual) {
    if (!expected.count(n)) report += "\n  trainable but expected frozen: " + n;
  }
  fail(ErrorCode::kState, report);
}

LossReport JointTrainer::train_step() {
  const auto n = epoch_size();
  require(state_.cursor < n, ErrorCode::kState, "epoch exhausted; call train_epoch()");
  const auto end = std::min(n, state_.cursor + static_cast<std::size_t>(cfg_.global_batch));
  std::vector<MixtureExample> batch;
  for (auto i = state_.cursor; i < end; ++i) batch.push_back(example_at(state_.epoch, i));
  auto r = train_step(batch);
  state_.cursor = end;
  return r;
}

LossReport JointTrainer::train_step(const std::vector<MixtureExample>& batch) {
  require(!batch.empty(), ErrorCode::kInvalidInput, "empty batch");
  LossReport r;
  r.step = state_.step;
  r.epoch = state_.epoch;
  r.lr = lr_schedule(cfg_, state_.epoch);
  r.examples = static_cast<int>(batch.size());
  set_lr(*optimizer_, r.lr);
  optimizer_->zero_grad(true);

  const bool joint = !cfg_.ablations.no_joint;
  const auto switches = cfg_.switches();
  const double inv = 1.0 / static_cast<double>(batch.size());
  const auto flow_seed = stream_seed(cfg_.seed, kFlowStream);
  double cfm_sum = 0.0, ce_sum = 0.0, total_sum = 0.0;
  bool bad = false;
  torch::Tensor pending;
  int in_micro = 0;
  for (std::size_t i = 0; i < batch.size() && !bad; ++i) {
    try {
      auto p = model_->prepare(batch[i]);
      auto gen = at::make_generator<at::CPUGeneratorImpl>(
          derive_seed(flow_seed, static_cast<std::uint64_t>(state_.step), i));
      auto h = model_->encode(p, switches);
      auto cond = model_->conditioning(h, p.target.size(1), p.speaker);
      auto cfm = cfm_loss(model_->flow->as_field(), p.target, cond, gen, model_->config().flow.sigma,
                          model_->config().flow.n_mc);
      torch::Tensor ce, total;
      if (joint) {
        ce = ce_loss(model_->decoder->decode_logits(h, p.transcript.prefix()), p.transcript, cfg_.ce_reduction);
        total = cfg_.ce_weight == 1.0 ? cfm + ce : cfm + cfg_.ce_weight * ce;
      } else {
        torch::NoGradGuard guard;
        TargetSpeechTokens detached{h.values.detach()};
        ce = ce_loss(model_->decoder->decode_logits(detached, p.transcript.prefix()), p.transcript,
                     cfg_.ce_reduction);
        total = cfm;
      }
      const double t = total.item<double>();
      if (!std::isfinite(t)) {
        bad = true;
        break;
      }
      cfm_sum += cfm.item<double>();
      ce_sum += ce.item<double>();
      total_sum += t;
      pending = pending.defined() ? pending + total : total;
      if (++in_micro == cfg_.micro_batch || i + 1 == batch.size()) {
        if (pending.requires_grad()) (pending * inv).backward();
        pending = torch::Tensor();
        in_micro = 0;
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNumeric) throw;
      bad = true;
    }
  }

  if (bad) {
    optimizer_->zero_grad(true);
    r.skipped = true;
    r.cfm = r.ce = r.total = std::numeric_limits<double>::quiet_NaN();
    ++state_.consecutive_skips;
    ++state_.total_skipped;
    ++state_.epoch_skipped;
  } else {
    r.cfm = cfm_sum * inv;
    r.ce = ce_sum * inv;
    r.total = total_sum * inv;
    auto params = model_->trainable_parameters();
    if (keep_grads_) {
      last_grads_.clear();
      for (const auto& p : model_->named_parameters()) {
        if (p.value().requires_grad() && p.value().grad().defined()) last_grads_[p.key()] = p.value().grad().clone();
      }
    }
    if (cfg_.clip_norm > 0.0) torch::nn::utils::clip_grad_norm_(params, cfg_.clip_norm);
    optimizer_->step();
    state_.running.add(r);
    state_.consecutive_skips = 0;
  }
  ++state_.step;

  if (log_) {
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
    json line = {{"step", r.step}, {"epoch", r.epoch}, {"lr", r.lr}, {"skipped", r.skipped}, {"wall_time", wall}};
    line["l_ot_cfm"] = r.skipped ? json(nullptr) : json(r.cfm);
    line["l_ce"] = r.skipped ? json(nullptr) : json(r.ce);
    line["l"] = r.skipped ? json(nullptr) : json(r.total);
    *log_ << line.dump() << '\n';
    log_->flush();
  }
  if (step_cb_) step_cb_(r);
  if (state_.consecutive_skips >= cfg_.max_consecutive_skips) {
    fail(ErrorCode::kNumeric, std::to_string(state_.consecutive_skips) +
                                  " consecutive steps skipped on non-finite losses (last step " +
                                  std::to_string(r.step) + ")");
  }
  return r;
}

EpochReport JointTrainer::train_epoch() {
  audit_trainable();
  const auto n = epoch_size();
  while (state_.cursor < n) train_step();
  EpochReport e{state_.epoch,          state_.running.mean_cfm(), state_.running.mean_ce(),
                state_.running.mean_total(), state_.running.steps, state_.epoch_skipped};
  state_.history.push_back(e);
  ++state_.epoch;
  state_.cursor = 0;
  state_.running = {};
  state_.epoch_skipped = 0;
  return e;
}

std::vector<EpochReport> JointTrainer::fit() {
  std::vector<EpochReport> out;
  while (state_.epoch < cfg_.epochs) out.push_back(train_epoch());
  return out;
}

void JointTrainer::save_checkpoint(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const fs::path tmp = dir.string() + ".partial";
  fs::remove_all(tmp);
  fs::create_directories(tmp);

  const bool external = base_fingerprint_.has_value();
  std::set<std::string> base_names;
  for (auto& [n, t] : model_->base_parameters()) base_names.insert(n);
  NamedTensors params;
  std::vector<std::string> param_names;
  for (const auto& p : model_->named_parameters()) {
    if (external && base_names.count(p.key()) && !p.value().requires_grad()) continue;
    params.emplace_back(p.key(), p.value().detach());
    param_names.push_back(p.key());
  }
  save_archive(tmp / "params", params);

  NamedTensors opt;
  auto& states = optimizer_->state();
  for (const auto& p : model_->named_parameters()) {
    auto it = states.find(p.value().unsafeGetTensorImpl());
    if (it == states.end()) continue;
    const auto& st = static_cast<const torch::optim::AdamWParamState&>(*it->second);
    opt.emplace_back(p.key() + "#step", torch::tensor({st.step()}, torch::kInt64));
    opt.emplace_back(p.key() + "#exp_avg", st.exp_avg());
    opt.emplace_back(p.key() + "#exp_avg_sq", st.exp_avg_sq());
  }
  save_archive(tmp / "optimizer", opt);

  json history = json::array();
  for (const auto& e : state_.history) history.push_back(epoch_json(e));
  json manifest = {
      {"format", "gentse-checkpoint"},
      {"version", kCheckpointVersion},
      {"step", state_.step},
      {"epoch", state_.epoch},
      {"cursor", state_.cursor},
      {"running",
       {{"cfm", state_.running.cfm},
        {"ce", state_.running.ce},
        {"total", state_.running.total},
        {"steps", state_.running.steps}}},
      {"epoch_skipped", state_.epoch_skipped},
      {"consecutive_skips", state_.consecutive_skips},
      {"total_skipped", state_.total_skipped},
      {"history", history},
      {"model_config", to_json(model_->config())},
      {"train_config", to_json(cfg_)},
      {"base",
       {{"external", external},
        {"fingerprint", external ? hex64(*base_fingerprint_) : ""},
        {"path", base_path_.string()}}},
      {"trainable", trainable_order_},
      {"params", param_names},
  };
  {
    std::ofstream out(tmp / "manifest.json");
    out << manifest.dump(2) << '\n';
    require(out.good(), ErrorCode::kIo, "cannot write checkpoint manifest");
  }
  fs::remove_all(dir);
  fs::rename(tmp, dir);
}

namespace {

json read_checkpoint_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  require(in.good(), ErrorCode::kMissingFile, "no checkpoint at " + dir.string());
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::kCorrupt, "checkpoint manifest unreadable: " + std::string(e.what()));
  }
  if (!m.is_object() || m.value("format", "") != "gentse-checkpoint") {
    fail(ErrorCode::kCorrupt, "not a gentse checkpoint: " + dir.string());
  }
  const int version = m.value("version", -1);
  require(version == kCheckpointVersion, ErrorCode::kVersion,
          "checkpoint version " + std::to_string(version) + ", expected " + std::to_string(kCheckpointVersion));
  return m;
}

EpochReport epoch_from_json(const json& e) {
  return {e.at("epoch").get<int>(),  e.at("cfm").get<double>(),        e.at("ce").get<double>(),
          e.at("total").get<double>(), e.at("steps").get<std::int64_t>(), e.at("skipped").get<std::int64_t>()};
}

}  // namespace

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir, const std::filesystem::path& base_dir) {
  const auto m = read_checkpoint_manifest(dir);
  LoadedCheckpoint out;
  try {
    out.model = TseModel(model_config_from_json(m.at("model_config")));
    out.train = train_config_from_json(m.at("train_config"));
    out.step = m.at("step").get<std::int64_t>();
    for (const auto& e : m.at("history")) out.history.push_back(epoch_from_json(e));
    const auto& base = m.at("base");
    if (base.at("external").get<bool>()) {
      const std::filesystem::path path = base_dir.empty() ? base.value("path", "") : base_dir.string();
      require(!path.empty(), ErrorCode::kMissingFile, "checkpoint needs external base weights; none recorded or given");
      const auto fp = out.model->load_base(path);
      require(hex64(fp) == base.at("fingerprint").get<std::string>(), ErrorCode::kMismatch,
              "base weights at " + path.string() + " differ from the ones the checkpoint was trained on");
    }
    auto params = load_archive(dir / "params");
    std::map<std::string, torch::Tensor> by_name;
    for (const auto& p : out.model->named_parameters()) by_name[p.key()] = p.value();
    NamedTensors targets;
    for (const auto& n : m.at("params")) {
      const auto name = n.get<std::string>();
      auto it = by_name.find(name);
      require(it != by_name.end(), ErrorCode::kMismatch, "checkpoint parameter unknown to the model: " + name);
      targets.emplace_back(name, it->second);
    }
    assign_from_archive(targets, params, "");
  } catch (const json::exception& e) {
    fail(ErrorCode::kCorrupt, "checkpoint manifest malformed: " + std::string(e.what()));
  }
  for (auto& p : out.model->parameters()) p.set_requires_grad(false);
  out.model->eval();
  return out;
}

void JointTrainer::resume(const std::filesystem::path& dir) {
  const auto m = read_checkpoint_manifest(dir);
  try {
    require(m.at("model_config") == to_json(model_->config()), ErrorCode::kMismatch,
            "checkpoint model config differs from the trainer's");
    // The epoch budget may grow on resume; everything else must match.
    auto saved = m.at("train_config");
    auto mine = to_json(cfg_);
    saved.erase("epochs");
    mine.erase("epochs");
    require(saved == mine, ErrorCode::kMismatch, "checkpoint training config differs from the trainer's");
    const bool external = m.at("base").at("external").get<bool>();
    if (external) {
      require(base_fingerprint_.has_value() &&
                  hex64(*base_fingerprint_) == m.at("base").at("fingerprint").get<std::string>(),
              ErrorCode::kMismatch, "base weights differ from the ones the checkpoint was trained on");
    }

    auto params = load_archive(dir / "params");
    NamedTensors targets;
    std::map<std::string, torch::Tensor> by_name;
    for (const auto& p : model_->named_parameters()) by_name[p.key()] = p.value();
    for (const auto& n : m.at("params")) {
      const auto name = n.get<std::string>();
      auto it = by_name.find(name);
      require(it != by_name.end(), ErrorCode::kMismatch, "checkpoint parameter unknown to the model: " + name);
      targets.emplace_back(name, it->second);
    }
    assign_from_archive(targets, params, "");

    auto opt = load_archive(dir / "optimizer");
    auto& states = optimizer_->state();
    states.clear();
    for (const auto& p : model_->named_parameters()) {
      auto it = opt.find(p.key() + "#step");
      if (it == opt.end()) continue;
      require(p.value().requires_grad(), ErrorCode::kMismatch, "optimizer state for frozen parameter " + p.key());
      auto st = std::make_unique<torch::optim::AdamWParamState>();
      st->step(it->second.item<std::int64_t>());
      st->exp_avg(opt.at(p.key() + "#exp_avg").clone());
      st->exp_avg_sq(opt.at(p.key() + "#exp_avg_sq").clone());
      states[p.value().unsafeGetTensorImpl()] = std::move(st);
    }

    state_ = {};
    state_.step = m.at("step").get<std::int64_t>();
    state_.epoch = m.at("epoch").get<int>();
    state_.cursor = m.at("cursor").get<std::size_t>();
    const auto& run = m.at("running");
    state_.running.cfm = run.at("cfm").get<double>();
    state_.running.ce = run.at("ce").get<double>();
    state_.running.total = run.at("total").get<double>();
    state_.running.steps = run.at("steps").get<std::int64_t>();
    state_.epoch_skipped = m.at("epoch_skipped").get<std::int64_t>();
    state_.consecutive_skips = m.at("consecutive_skips").get<int>();
    state_.total_skipped = m.at("total_skipped").get<std::int64_t>();
    for (const auto& e : m.at("history")) state_.history.push_back(epoch_from_json(e));
  } catch (const json::exception& e) {
    fail(ErrorCode::kCorrupt, "checkpoint manifest malformed: " + std::string(e.what()));
  }
}

HeldOutReport evaluate_held_out(TseModelImpl& model, const std::vector<MixtureExample>& items, PromptSwitches switches,
                                std::uint64_t seed, double ce_weight, bool decode) {
  torch::NoGradGuard guard;
  HeldOutReport r;
  std::size_t wer_items = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto p = model.prepare(items[i]);
    auto gen = at::make_generator<at::CPUGeneratorImpl>(derive_seed(stream_seed(seed, kFlowStream), i, 0));
    auto h = model.encode(p, switches);
    auto cond = model.conditioning(h, p.target.size(1), p.speaker);
    const double cfm =
        cfm_loss(model.flow->as_field(), p.target, cond, gen, model.config().flow.sigma, model.config().flow.n_mc)
            .item<double>();
    const double ce = ce_loss(model.decoder->decode_logits(h, p.transcript.prefix()), p.transcript).item<double>();
    r.cfm += cfm;
    r.ce += ce;
    r.total += cfm + ce_weight * ce;
    if (decode) {
      const double w = wer_text(model.text_of(model.transcribe(h)), items[i].transcript);
      if (std::isfinite(w)) {
        r.wer += w;
        ++wer_items;
      }
    }
  }
  r.items = items.size();
  if (!items.empty()) {
    const double n = static_cast<double>(items.size());
    r.cfm /= n;
    r.ce /= n;
    r.total /= n;
  }
  if (wer_items) r.wer /= static_cast<double>(wer_items);
  return r;
}

std::vector<double> pretrain_base(TseModelImpl& model, const Corpus& clean, const PretrainConfig& cfg,
                                  const std::function<void(std::int64_t, double)>& on_step) {
  require(!clean.empty(), ErrorCode::kCorpus, "pre-training corpus is empty");
  require(cfg.batch >= 1 && cfg.lr > 0.0, ErrorCode::kConfig, "pretrain batch/lr out of range");
  std::set<std::string> base;
  for (auto& [n, t] : model.base_parameters()) base.insert(n);
  std::vector<torch::Tensor> params;
  for (auto& p : model.named_parameters()) {
    const bool on = base.count(p.key()) > 0;
    p.value().set_requires_grad(on);
    if (on) params.push_back(p.value());
  }
  torch::optim::AdamW opt(params, torch::optim::AdamWOptions(cfg.lr).weight_decay(1e-2));
  const auto tok = model.tokenizer();
  std::vector<double> epoch_means;
  std::int64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(clean.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch), 0));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double sum = 0.0;
    std::int64_t steps = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch)) {
      const auto end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
      const double inv = 1.0 / static_cast<double>(end - start);
      opt.zero_grad(true);
      double batch_loss = 0.0;
      for (auto k = start; k < end; ++k) {
        const auto idx = order[k];
        auto x = model.features(clean.load(idx));
        auto h = model.encoder->encode_base(x);
        auto t = tok.tokens_for(clean.at(idx).text);
        auto loss = ce_loss(model.decoder->decode_logits(h, t.prefix()), t);
        batch_loss += loss.item<double>() * inv;
        (loss * inv).backward();
      }
      if (cfg.clip_norm > 0.0) torch::nn::utils::clip_grad_norm_(params, cfg.clip_norm);
      opt.step();
      sum += batch_loss;
      ++steps;
      if (on_step) on_step(step, batch_loss);
      ++step;
    }
    epoch_means.push_back(steps ? sum / static_cast<double>(steps) : 0.0);
  }
  for (auto& p : model.parameters()) p.set_requires_grad(false);
  return epoch_means;
}

FeatureNorm estimate_feature_norm(const Corpus& corpus, const FeatureConfig& features, std::size_t max_items) {
  require(!corpus.empty(), ErrorCode::kCorpus, "cannot estimate feature statistics on an empty corpus");
  double sum = 0.0, sq = 0.0;
  std::int64_t n = 0;
  for (std::size_t i = 0; i < std::min(max_items, corpus.size()); ++i) {
    auto x = compute_log_mel(corpus.load(i), features).values.to(torch::kFloat64);
    sum += x.sum().item<double>();
    sq += x.square().sum().item<double>();
    n += x.numel();
  }
  const double mean = sum / static_cast<double>(n);
  const double var = std::max(sq / static_cast<double>(n) - mean * mean, 1e-12);
  return {mean, std::sqrt(var)};
}

}  // namespace gentse
