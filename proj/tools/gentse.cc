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

// gentse: dataset preparation, training, extraction, evaluation and plotting.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "gentse/config.h"
#include "gentse/embedder.h"
#include "gentse/error.h"
#include "gentse/evaluation.h"
#include "gentse/plot.h"
#include "gentse/toy_corpus.h"
#include "gentse/trainer.h"
#include "gentse/version.h"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace gentse {
namespace {

struct LoadedConfig {
  RunConfig cfg;
  fs::path root;  // relative paths in the file resolve against this
};

// Precedence: command-line flags (applied by the caller) > environment > file > defaults.
LoadedConfig load_config(const std::string& path) {
  LoadedConfig out;
  if (!path.empty()) {
    out.cfg = load_run_config(path);
    out.root = fs::absolute(path).parent_path();
  } else {
    out.root = fs::current_path();
  }
  apply_environment(out.cfg);
  return out;
}

fs::path resolve(const fs::path& root, const std::string& p) {
  if (p.empty()) return {};
  fs::path q(p);
  return q.is_absolute() ? q : root / q;
}

fs::path require_path(const fs::path& root, const std::string& p, const std::string& key) {
  require(!p.empty(), ErrorCode::kConfig, key + " is not set");
  return resolve(root, p);
}

std::vector<std::string> split_command(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

void write_json(const fs::path& path, const json& j) {
  const auto tmp = fs::path(path.string() + ".partial");
  {
    std::ofstream out(tmp);
    out << j.dump(2) << '\n';
    require(out.good(), ErrorCode::kIo, "cannot write " + path.string());
  }
  fs::rename(tmp, path);
}

// run.json: what produced the directory and from which configuration.
void write_run_info(const fs::path& path, const std::string& command, const json& config,
                    const std::string& fp, json extra = json::object()) {
  json j = {{"command", command},
            {"fingerprint", fp},
            {"git_describe", kGitDescribe},
            {"version", kVersion},
            {"config", config}};
  j.update(extra);
  write_json(path, j);
}

// Removes an output directory this invocation created unless commit() ran.
class OutputDir {
 public:
  explicit OutputDir(fs::path dir) : dir_(std::move(dir)) {
    created_ = !fs::exists(dir_);
    fs::create_directories(dir_);
  }
  ~OutputDir() {
    if (created_ && !committed_) {
      std::error_code ec;
      fs::remove_all(dir_, ec);
    }
  }
  OutputDir(const OutputDir&) = delete;
  OutputDir& operator=(const OutputDir&) = delete;

  const fs::path& path() const { return dir_; }
  void commit() { committed_ = true; }

 private:
  fs::path dir_;
  bool created_ = false;
  bool committed_ = false;
};

void log_line(const std::string& s) { std::cerr << s << std::endl; }

std::unique_ptr<SpeakerEmbedder> eval_embedder(const LoadedConfig& lc, const ModelConfig& model) {
  const auto& e = lc.cfg.eval;
  if (!e.embedder_command.empty()) return std::make_unique<PluginEmbedder>(e.embedder_command, e.embedder_dim);
  if (!lc.cfg.paths.speaker_projection.empty()) {
    return std::make_unique<ProjectedStatsEmbedder>(
        model.features, load_projection(resolve(lc.root, lc.cfg.paths.speaker_projection)), model.embed_active_range);
  }
  return std::make_unique<StatsEmbedder>(model.features, model.embed_active_range);
}

std::vector<MixtureExample> eval_examples(const LoadedConfig& lc) {
  const auto& p = lc.cfg.paths;
  auto corpus = load_manifest(require_path(lc.root, p.eval_manifest, "paths.eval_manifest"));
  std::vector<PairingEntry> pairs;
  if (!p.pairings.empty()) {
    pairs = load_pairings(resolve(lc.root, p.pairings));
  } else {
    pairs = make_pairings(corpus, lc.cfg.eval.n_mixtures, lc.cfg.eval.seed, lc.cfg.train.sampler);
  }
  return build_eval_set(corpus, pairs, lc.cfg.train.sampler);
}

// ---------------------------------------------------------------------------

struct ToyCorpusArgs {
  std::string out;
  int speakers = 6;
  int utterances = 40;
  std::uint64_t seed = 1;
  std::uint64_t speaker_seed = 0;
  std::string prefix = "spk";
};

int cmd_make_toy_corpus(const ToyCorpusArgs& a) {
  ToyCorpusConfig c;
  c.n_speakers = a.speakers;
  c.utterances_per_speaker = a.utterances;
  c.seed = a.seed;
  c.speaker_seed = a.speaker_seed;
  c.speaker_prefix = a.prefix;
  require(c.n_speakers >= 1 && c.utterances_per_speaker >= 1, ErrorCode::kConfig,
          "--speakers and --utterances must be positive");
  OutputDir out(a.out);
  const auto records = write_toy_corpus(out.path(), c);
  json cj = {{"n_speakers", c.n_speakers},
             {"utterances_per_speaker", c.utterances_per_speaker},
             {"seed", c.seed},
             {"speaker_seed", c.speaker_seed},
             {"speaker_prefix", c.speaker_prefix}};
  write_run_info(out.path() / "run.json", "make-toy-corpus", cj, hex64(fnv1a64(canonical_json(cj))));
  out.commit();
  std::cout << records.size() << " utterances -> " << (out.path() / "manifest.jsonl").string() << '\n';
  return 0;
}

struct PretrainArgs {
  std::string config;
  std::string out;
  std::int64_t seed = -1;
};

int cmd_pretrain(const PretrainArgs& a) {
  auto lc = load_config(a.config);
  if (a.seed >= 0) lc.cfg.pretrain.seed = static_cast<std::uint64_t>(a.seed);
  lc.cfg.validate();
  auto corpus = load_manifest(require_path(lc.root, lc.cfg.paths.pretrain_manifest, "paths.pretrain_manifest"));
  corpus.preload();
  OutputDir out(a.out);

  auto cfg = lc.cfg;
  cfg.model.norm = estimate_feature_norm(corpus, cfg.model.features);
  log_line("feature norm: offset " + std::to_string(cfg.model.norm.offset) + " scale " +
           std::to_string(cfg.model.norm.scale));
  TseModel model(cfg.model);
  const auto losses = pretrain_base(*model, corpus, cfg.pretrain, [](std::int64_t step, double ce) {
    if (step % 50 == 0) log_line("pretrain step " + std::to_string(step) + " ce " + std::to_string(ce));
  });
  const auto base_dir = fs::absolute(out.path() / "base");
  model->save_base(base_dir);

  const int n_spk = static_cast<int>(corpus.speakers().size());
  json extra = {{"pretrain_ce", losses}};
  if (n_spk >= 2) {
    const auto proj_dir = fs::absolute(out.path() / "speaker_projection");
    save_projection(proj_dir, fit_speaker_projection(corpus, cfg.model.features, std::min(n_spk - 1, 16)));
    cfg.paths.speaker_projection = proj_dir.string();
  } else {
    log_line("warning: a single pretraining speaker; no speaker projection fitted");
  }
  cfg.paths.base_weights = base_dir.string();
  // Absolute manifest paths keep the emitted config usable from anywhere.
  for (auto* p : {&cfg.paths.train_manifest, &cfg.paths.eval_manifest, &cfg.paths.pairings,
                  &cfg.paths.pretrain_manifest}) {
    if (!p->empty()) *p = fs::absolute(resolve(lc.root, *p)).string();
  }
  write_json(out.path() / "config.json", to_json(cfg));
  write_run_info(out.path() / "run.json", "pretrain", to_json(cfg), fingerprint(cfg), extra);
  out.commit();
  std::cout << "base weights -> " << base_dir.string() << "\nconfig -> " << (out.path() / "config.json").string()
            << '\n';
  return 0;
}

struct EvalSetArgs {
  std::string config;
  std::string out;
  std::int64_t n = -1;
  std::int64_t seed = -1;
};

int cmd_make_eval_set(const EvalSetArgs& a) {
  auto lc = load_config(a.config);
  if (a.seed >= 0) lc.cfg.eval.seed = static_cast<std::uint64_t>(a.seed);
  if (a.n >= 0) lc.cfg.eval.n_mixtures = static_cast<std::size_t>(a.n);
  lc.cfg.validate();
  auto corpus = load_manifest(require_path(lc.root, lc.cfg.paths.eval_manifest, "paths.eval_manifest"));
  const auto pairs = make_pairings(corpus, lc.cfg.eval.n_mixtures, lc.cfg.eval.seed, lc.cfg.train.sampler);
  const fs::path out(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  const auto tmp = fs::path(out.string() + ".partial");
  try {
    write_pairings(tmp, pairs);
  } catch (...) {
    fs::remove(tmp);
    throw;
  }
  fs::rename(tmp, out);
  auto info = out;
  info.replace_extension(".run.json");
  write_run_info(info, "make-eval-set", to_json(lc.cfg), fingerprint(lc.cfg));
  std::cout << pairs.size() << " mixtures (" << 2 * pairs.size() << " examples) -> " << out.string() << '\n';
  return 0;
}

struct TrainArgs {
  std::string config;
  std::string out;
  std::int64_t seed = -1;
  int flow_steps = 0;
  bool no_spk_emb = false;
  bool no_enroll = false;
  bool no_joint = false;
  std::string lora_rank;
  bool train_decoder = false;
  bool freeze_decoder = false;
  int epochs = 0;
  double lr = 0.0;
  bool resume = false;
  bool list_trainable = false;
};

void apply_train_flags(RunConfig& cfg, const TrainArgs& a) {
  if (a.seed >= 0) cfg.train.seed = static_cast<std::uint64_t>(a.seed);
  if (a.flow_steps > 0) cfg.model.flow.n_steps = cfg.eval.flow_steps = a.flow_steps;
  if (a.no_spk_emb) cfg.train.ablations.no_spk_emb = true;
  if (a.no_enroll) cfg.train.ablations.no_enroll = true;
  if (a.no_joint) cfg.train.ablations.no_joint = true;
  if (!a.lora_rank.empty()) {
    if (a.lora_rank == "full") {
      cfg.model.encoder.full_finetune = true;
      cfg.model.encoder.lora_rank = 0;
    } else {
      std::size_t used = 0;
      int r = -1;
      try {
        r = std::stoi(a.lora_rank, &used);
      } catch (const std::exception&) {
      }
      require(used == a.lora_rank.size() && r >= 0, ErrorCode::kConfig,
              "--lora-rank expects a non-negative integer or 'full', got '" + a.lora_rank + "'");
      cfg.model.encoder.full_finetune = false;
      cfg.model.encoder.lora_rank = r;
    }
  }
  if (a.train_decoder) cfg.train.train_decoder = true;
  if (a.freeze_decoder) cfg.train.train_decoder = false;
  if (a.epochs > 0) cfg.train.epochs = a.epochs;
  if (a.lr > 0.0) cfg.train.lr = a.lr;
}

// Drops log lines written after the checkpoint being resumed.
void truncate_log(const fs::path& path, std::int64_t last_step) {
  if (!fs::exists(path)) return;
  std::vector<std::string> keep;
  {
    std::ifstream in(path);
    for (std::string line; std::getline(in, line);) {
      if (line.empty()) continue;
      try {
        if (json::parse(line).value("step", std::int64_t{0}) <= last_step) keep.push_back(line);
      } catch (const json::exception&) {
      }
    }
  }
  std::ofstream out(path, std::ios::trunc);
  for (const auto& l : keep) out << l << '\n';
}

int cmd_train(const TrainArgs& a) {
  const fs::path out_path(a.out);
  const auto ckpt = out_path / "checkpoint";
  std::string config_path = a.config;
  if (a.resume && config_path.empty()) config_path = (out_path / "config.json").string();
  require(!config_path.empty(), ErrorCode::kConfig, "--config is required");
  auto lc = load_config(config_path);
  apply_train_flags(lc.cfg, a);
  lc.cfg.validate();
  auto& cfg = lc.cfg;

  TseModel model(cfg.model);
  std::optional<std::uint64_t> base_fp;
  fs::path base_dir;
  if (!cfg.paths.base_weights.empty()) {
    base_dir = fs::absolute(resolve(lc.root, cfg.paths.base_weights));
    base_fp = model->load_base(base_dir);
  } else {
    log_line("warning: paths.base_weights is empty; training from a randomly initialised base");
  }

  if (a.list_trainable) {
    for (const auto& n : model->configure_trainable(cfg.train.policy())) std::cout << n << '\n';
    return 0;
  }

  if (a.resume) {
    require(fs::exists(ckpt / "manifest.json"), ErrorCode::kMissingFile,
            "nothing to resume: no checkpoint in " + out_path.string());
  } else {
    require(!fs::exists(ckpt), ErrorCode::kConfig,
            out_path.string() + " already holds a checkpoint; pass --resume or choose another --out");
  }
  auto corpus = load_manifest(require_path(lc.root, cfg.paths.train_manifest, "paths.train_manifest"));
  corpus.preload();

  OutputDir out(out_path);
  JointTrainer trainer(model, &corpus, cfg.train, base_fp);
  trainer.set_base_path(base_dir);
  if (a.resume) {
    trainer.resume(ckpt);
    truncate_log(out.path() / "train_log.jsonl", trainer.state().step);
    log_line("resumed at step " + std::to_string(trainer.state().step) + ", epoch " +
             std::to_string(trainer.state().epoch));
  }
  write_json(out.path() / "config.json", to_json(cfg));
  write_run_info(out.path() / "run.json", "train", to_json(cfg), fingerprint(cfg),
                 {{"base_fingerprint", base_fp ? hex64(*base_fp) : ""}});
  trainer.set_log(out.path() / "train_log.jsonl");
  // A fresh directory is kept from the first checkpoint on.
  while (trainer.state().epoch < cfg.train.epochs) {
    const auto e = trainer.train_epoch();
    trainer.save_checkpoint(ckpt);
    out.commit();
    char buf[160];
    std::snprintf(buf, sizeof buf, "epoch %d: loss %.4f (cfm %.4f, ce %.4f) over %lld steps, %lld skipped", e.epoch,
                  e.total, e.cfm, e.ce, static_cast<long long>(e.steps), static_cast<long long>(e.skipped));
    log_line(buf);
  }
  out.commit();
  std::cout << "checkpoint -> " << ckpt.string() << '\n';
  return 0;
}

struct ExtractArgs {
  std::string checkpoint;
  std::string base;
  std::string mixture;
  std::string enrollment;
  std::string out;
  int flow_steps = 0;
  std::uint64_t seed = 0;
  std::string embedder_command;
  int embedder_dim = 0;
};

int cmd_extract(const ExtractArgs& a) {
  auto ck = load_checkpoint(a.checkpoint, a.base);
  auto& model = ck.model;
  const auto& mc = model->config();
  if (!a.embedder_command.empty()) {
    require(a.embedder_dim == mc.encoder.d_speaker, ErrorCode::kConfig,
            "--embedder-dim must equal the model's speaker dimension " + std::to_string(mc.encoder.d_speaker));
    model->set_embedder(std::make_unique<PluginEmbedder>(split_command(a.embedder_command), a.embedder_dim));
  }
  const auto mixture = read_wav(a.mixture);
  const auto enrollment = read_wav(a.enrollment);
  GriffinLimVocoder vocoder(mc.features, mc.vocoder);
  const int steps = a.flow_steps > 0 ? a.flow_steps : mc.flow.n_steps;
  auto result = model->extract(mixture, enrollment, ck.train.switches(), steps, a.seed, vocoder);

  const fs::path out(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  const auto tmp = fs::path(out.string() + ".partial");
  try {
    write_wav(tmp, result.waveform);
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
  fs::rename(tmp, out);
  auto info = out;
  info.replace_extension(".run.json");
  json cj = {{"model", to_json(mc)}, {"train", to_json(ck.train)}, {"flow_steps", steps}, {"seed", a.seed}};
  write_run_info(info, "extract", cj, hex64(fnv1a64(canonical_json(cj))),
                 {{"checkpoint", fs::absolute(a.checkpoint).string()},
                  {"mixture", a.mixture},
                  {"enrollment", a.enrollment},
                  {"transcript", model->text_of(model->transcribe(result.tokens))}});
  std::cout << out.string() << '\n';
  return 0;
}

struct EvaluateArgs {
  std::string config;
  std::string checkpoint;
  std::string base;
  std::string out;
  int flow_steps = 0;
  std::int64_t seed = -1;
  std::string asr_command;
  bool save_audio = false;
};

int cmd_evaluate(const EvaluateArgs& a) {
  auto lc = load_config(a.config);
  if (a.flow_steps > 0) lc.cfg.eval.flow_steps = a.flow_steps;
  if (a.seed >= 0) lc.cfg.eval.seed = static_cast<std::uint64_t>(a.seed);
  lc.cfg.validate();
  auto ck = load_checkpoint(a.checkpoint, a.base);
  auto& model = ck.model;
  const auto examples = eval_examples(lc);
  auto embedder = eval_embedder(lc, model->config());

  std::unique_ptr<Transcriber> transcriber;
  if (a.asr_command.empty()) {
    transcriber = std::make_unique<SelfDecoderTranscriber>(*model, lc.cfg.eval.max_decode_len);
  } else {
    transcriber = std::make_unique<PluginTranscriber>(split_command(a.asr_command));
  }
  std::unique_ptr<ScorerPlugin> dnsmos, sbs;
  if (!lc.cfg.eval.dnsmos_command.empty()) dnsmos = std::make_unique<ScorerPlugin>("dnsmos", lc.cfg.eval.dnsmos_command);
  if (!lc.cfg.eval.sbs_command.empty()) sbs = std::make_unique<ScorerPlugin>("sbs", lc.cfg.eval.sbs_command);

  OutputDir out(a.out);
  BenchmarkOptions opt;
  opt.switches = ck.train.switches();
  opt.flow_steps = lc.cfg.eval.flow_steps;
  opt.solver = lc.cfg.eval.solver;
  opt.seed = lc.cfg.eval.seed;
  if (a.save_audio) opt.output_dir = out.path() / "audio";
  GriffinLimVocoder vocoder(model->config().features, model->config().vocoder);
  auto result = run_benchmark(*model, examples, *embedder, *transcriber, vocoder, opt, {dnsmos.get(), sbs.get()});
  for (const auto& w : result.warnings) log_line("warning: " + w);

  write_results_csv(out.path() / "results.csv", result.rows);
  EvalAggregates mixture_row;
  mixture_row.rows = result.rows.size();
  mixture_row.cos_sim = result.aggregates.cos_sim_mixture;
  const auto table = format_table({{"Mixture", mixture_row}, {fs::path(a.checkpoint).filename().string(),
                                                               result.aggregates}},
                                  transcriber->name());
  {
    std::ofstream t(out.path() / "table.txt");
    t << table;
    require(t.good(), ErrorCode::kIo, "cannot write table.txt");
  }
  write_run_info(out.path() / "run.json", "evaluate", to_json(lc.cfg), fingerprint(lc.cfg),
                 {{"checkpoint", fs::absolute(a.checkpoint).string()},
                  {"embedder", embedder->name()},
                  {"transcriber", transcriber->name()},
                  {"warnings", result.warnings}});
  out.commit();
  std::cout << table;
  return 0;
}

struct PlotArgs {
  std::string config;
  std::string checkpoint;
  std::string base;
  std::string out;
  int n = 4;
};

int cmd_plot(const PlotArgs& a) {
  auto lc = load_config(a.config);
  lc.cfg.validate();
  require(a.n >= 0, ErrorCode::kConfig, "--n must be non-negative");
  auto ck = load_checkpoint(a.checkpoint, a.base);
  auto& model = ck.model;
  auto examples = eval_examples(lc);
  std::sort(examples.begin(), examples.end(), [](const auto& x, const auto& y) { return x.id < y.id; });
  if (static_cast<int>(examples.size()) > a.n) examples.resize(static_cast<std::size_t>(a.n));
  const auto& fc = model->config().features;
  GriffinLimVocoder vocoder(fc, model->config().vocoder);
  std::vector<SpectrogramPanel> panels;
  for (const auto& ex : examples) {
    const auto seed = derive_seed(lc.cfg.eval.seed, fnv1a64(ex.id), 0);
    auto r = model->extract(ex.mixture, ex.enrollment, ck.train.switches(), lc.cfg.eval.flow_steps, seed, vocoder);
    panels.push_back({ex.id, compute_log_mel(ex.mixture, fc).values, r.mel.values, compute_log_mel(ex.target, fc).values});
  }
  OutputDir out(a.out);
  const auto written = plot_spectrograms(panels, out.path());
  write_run_info(out.path() / "run.json", "plot", to_json(lc.cfg), fingerprint(lc.cfg),
                 {{"checkpoint", fs::absolute(a.checkpoint).string()}});
  out.commit();
  for (const auto& p : written) std::cout << p.string() << '\n';
  return 0;
}

struct InspectArgs {
  std::string config;
  std::string out;
};

int cmd_inspect_config(const InspectArgs& a) {
  auto lc = load_config(a.config);
  lc.cfg.validate();
  const auto j = to_json(lc.cfg);
  if (!a.out.empty()) {
    write_json(a.out, j);
  } else {
    std::cout << j.dump(2) << '\n';
  }
  std::cerr << "fingerprint " << fingerprint(lc.cfg) << '\n';
  return 0;
}

}  // namespace
}  // namespace gentse

int main(int argc, char** argv) {
  using namespace gentse;
  CLI::App app{"Generative target speech extraction"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("gentse ") + kVersion + " (" + kGitDescribe + ")");
  int threads = 0;
  app.add_option("--threads", threads, "Intra-op threads (0: library default)");

  ToyCorpusArgs toy;
  auto* c_toy = app.add_subcommand("make-toy-corpus", "Write a synthetic multi-talker corpus");
  c_toy->add_option("--out", toy.out, "Output directory")->required();
  c_toy->add_option("--speakers", toy.speakers, "Number of talkers");
  c_toy->add_option("--utterances", toy.utterances, "Utterances per talker");
  c_toy->add_option("--seed", toy.seed, "Sentence and noise seed");
  c_toy->add_option("--speaker-seed", toy.speaker_seed, "Voice seed (0: --seed)");
  c_toy->add_option("--prefix", toy.prefix, "Speaker id prefix");

  PretrainArgs pre;
  auto* c_pre = app.add_subcommand("pretrain", "Pre-train the base recogniser on clean single-talker speech");
  c_pre->add_option("--config", pre.config, "Run configuration (JSON)");
  c_pre->add_option("--out", pre.out, "Output directory")->required();
  c_pre->add_option("--seed", pre.seed, "Override pretrain.seed");

  EvalSetArgs es;
  auto* c_es = app.add_subcommand("make-eval-set", "Write a fixed pairing file from the evaluation manifest");
  c_es->add_option("--config", es.config, "Run configuration (JSON)");
  c_es->add_option("--out", es.out, "Pairing file (JSON-Lines)")->required();
  c_es->add_option("--n", es.n, "Number of mixtures (two examples each)");
  c_es->add_option("--seed", es.seed, "Override eval.seed");

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("train", "Joint training of the extraction model");
  c_tr->add_option("--config", tr.config, "Run configuration (JSON); defaults to <out>/config.json with --resume");
  c_tr->add_option("--out", tr.out, "Run directory")->required();
  c_tr->add_option("--seed", tr.seed, "Override train.seed");
  c_tr->add_option("--flow-steps", tr.flow_steps, "ODE steps used at inference");
  c_tr->add_flag("--no-spk-emb", tr.no_spk_emb, "Drop the speaker-embedding prompt");
  c_tr->add_flag("--no-enroll", tr.no_enroll, "Drop the enrollment prompt");
  c_tr->add_flag("--no-joint", tr.no_joint, "Train on the flow loss only");
  c_tr->add_option("--lora-rank", tr.lora_rank, "Adapter rank, or 'full' to fine-tune the whole encoder");
  auto* f_td = c_tr->add_flag("--train-decoder", tr.train_decoder, "Update the text decoder");
  auto* f_fd = c_tr->add_flag("--freeze-decoder", tr.freeze_decoder, "Keep the text decoder frozen");
  f_td->excludes(f_fd);
  c_tr->add_option("--epochs", tr.epochs, "Override train.epochs");
  c_tr->add_option("--lr", tr.lr, "Override train.lr");
  c_tr->add_flag("--resume", tr.resume, "Continue from <out>/checkpoint");
  c_tr->add_flag("--list-trainable", tr.list_trainable, "Print the trainable parameter names and exit");

  ExtractArgs ex;
  auto* c_ex = app.add_subcommand("extract", "Extract the enrolled talker from a mixture WAV");
  c_ex->add_option("--checkpoint", ex.checkpoint, "Checkpoint directory")->required();
  c_ex->add_option("--base", ex.base, "Base weights (default: path recorded in the checkpoint)");
  c_ex->add_option("--mixture", ex.mixture, "Mixture WAV")->required();
  c_ex->add_option("--enrollment", ex.enrollment, "Enrollment WAV of the target talker")->required();
  c_ex->add_option("--out", ex.out, "Output WAV")->required();
  c_ex->add_option("--flow-steps", ex.flow_steps, "ODE steps (default: model config)");
  c_ex->add_option("--seed", ex.seed, "Sampling seed");
  c_ex->add_option("--embedder-command", ex.embedder_command, "Speaker embedder plug-in command line");
  c_ex->add_option("--embedder-dim", ex.embedder_dim, "Embedding size produced by the plug-in");

  EvaluateArgs ev;
  auto* c_ev = app.add_subcommand("evaluate", "Score a checkpoint on the evaluation set");
  c_ev->add_option("--config", ev.config, "Run configuration (JSON)");
  c_ev->add_option("--checkpoint", ev.checkpoint, "Checkpoint directory")->required();
  c_ev->add_option("--base", ev.base, "Base weights (default: path recorded in the checkpoint)");
  c_ev->add_option("--out", ev.out, "Output directory")->required();
  c_ev->add_option("--flow-steps", ev.flow_steps, "Override eval.flow_steps");
  c_ev->add_option("--seed", ev.seed, "Override eval.seed");
  c_ev->add_option("--asr-command", ev.asr_command, "External recogniser plug-in (default: the model's decoder)");
  c_ev->add_flag("--save-audio", ev.save_audio, "Keep predictions under <out>/audio");

  PlotArgs pl;
  auto* c_pl = app.add_subcommand("plot", "Mixture / prediction / reference spectrogram panels");
  c_pl->add_option("--config", pl.config, "Run configuration (JSON)");
  c_pl->add_option("--checkpoint", pl.checkpoint, "Checkpoint directory")->required();
  c_pl->add_option("--base", pl.base, "Base weights (default: path recorded in the checkpoint)");
  c_pl->add_option("--out", pl.out, "Output directory")->required();
  c_pl->add_option("--n", pl.n, "Number of evaluation examples");

  InspectArgs in;
  auto* c_in = app.add_subcommand("inspect-config", "Print the effective configuration and its fingerprint");
  c_in->add_option("--config", in.config, "Run configuration (JSON)");
  c_in->add_option("--out", in.out, "Write to a file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  try {
    if (threads > 0) torch::set_num_threads(threads);
    if (*c_toy) return cmd_make_toy_corpus(toy);
    if (*c_pre) return cmd_pretrain(pre);
    if (*c_es) return cmd_make_eval_set(es);
    if (*c_tr) return cmd_train(tr);
    if (*c_ex) return cmd_extract(ex);
    if (*c_ev) return cmd_evaluate(ev);
    if (*c_pl) return cmd_plot(pl);
    if (*c_in) return cmd_inspect_config(in);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
