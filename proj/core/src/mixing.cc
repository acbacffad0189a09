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

#include "gentse/mixing.h"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "gentse/error.h"

namespace gentse {
namespace {

using nlohmann::json;

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kMissingFile, path.string());
  std::vector<json> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::exception& e) {
      fail(ErrorCode::kParse, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    rows.back()["__line"] = lineno;
  }
  return rows;
}

template <typename T>
T field(const json& row, const char* key, const std::filesystem::path& path) {
  try {
    return row.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorCode::kParse, path.string() + ":" + std::to_string(row["__line"].get<std::size_t>()) +
                                ": missing or mistyped field '" + key + "'");
  }
}

std::size_t other_utterance(const Corpus& corpus, const std::string& speaker, std::size_t exclude,
                            Rng& rng) {
  const auto& utts = corpus.utterances_of(speaker);
  if (utts.size() < 2) {
    fail(ErrorCode::kCorpus, "speaker " + speaker + " needs >= 2 utterances for enrollment");
  }
  auto pick = rng.below(utts.size() - 1);
  auto idx = utts[pick];
  return idx == exclude ? utts.back() : idx;
}

std::size_t first_other_utterance(const Corpus& corpus, const std::string& speaker, std::size_t exclude) {
  for (auto idx : corpus.utterances_of(speaker)) {
    if (idx != exclude) return idx;
  }
  fail(ErrorCode::kCorpus, "speaker " + speaker + " needs >= 2 utterances for enrollment");
}

MixtureExample assemble(const Corpus& corpus, std::size_t target, std::size_t interferer,
                        std::size_t enroll, double snr_db, const Waveform& enrollment) {
  const auto& t = corpus.at(target);
  const auto& i = corpus.at(interferer);
  auto mix = mix_at_snr(corpus.load(target), corpus.load(interferer), snr_db);
  MixtureExample ex;
  ex.id = t.id + "__" + i.id;
  ex.mixture = std::move(mix.mixture);
  ex.target = std::move(mix.scaled_target);
  ex.interferer = std::move(mix.scaled_interferer);
  ex.enrollment = enrollment;
  ex.target_speaker_id = t.speaker_id;
  ex.target_utterance_id = t.id;
  ex.interferer_utterance_id = i.id;
  ex.enrollment_utterance_id = corpus.at(enroll).id;
  ex.transcript = t.text;
  ex.snr_db = snr_db;
  return ex;
}

}  // namespace

Corpus::Corpus(std::vector<UtteranceRecord> records, std::filesystem::path root)
    : records_(std::move(records)), root_(std::move(root)) {
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    require(!r.id.empty(), ErrorCode::kValidation, "utterance with empty id");
    require(!r.speaker_id.empty(), ErrorCode::kValidation, "utterance " + r.id + " has empty speaker id");
    require(r.duration_s > 0.0, ErrorCode::kValidation, "utterance " + r.id + " has non-positive duration");
    require(by_id_.emplace(r.id, i).second, ErrorCode::kValidation, "duplicate utterance id " + r.id);
    auto [it, fresh] = by_speaker_.try_emplace(r.speaker_id);
    if (fresh) speakers_.push_back(r.speaker_id);
    it->second.push_back(i);
  }
}

std::size_t Corpus::index_of(const std::string& id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) fail(ErrorCode::kResolution, "unknown utterance id " + id);
  return it->second;
}

const std::vector<std::size_t>& Corpus::utterances_of(const std::string& speaker) const {
  auto it = by_speaker_.find(speaker);
  if (it == by_speaker_.end()) fail(ErrorCode::kResolution, "unknown speaker " + speaker);
  return it->second;
}

std::filesystem::path Corpus::resolve(const UtteranceRecord& r) const {
  return r.path.is_absolute() || root_.empty() ? r.path : root_ / r.path;
}

Waveform Corpus::load(std::size_t i) const {
  if (!audio_.empty()) return audio_.at(i);
  auto path = resolve(records_.at(i));
  if (!std::filesystem::exists(path)) {
    fail(ErrorCode::kResolution, "audio for " + records_[i].id + " not found at " + path.string());
  }
  return read_wav(path);
}

void Corpus::preload() {
  std::vector<Waveform> audio;
  audio.reserve(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) audio.push_back(load(i));
  audio_ = std::move(audio);
}

Corpus load_manifest(const std::filesystem::path& path) {
  std::vector<UtteranceRecord> records;
  for (const auto& row : read_jsonl(path)) {
    UtteranceRecord r;
    r.id = field<std::string>(row, "id", path);
    r.path = field<std::string>(row, "path", path);
    r.speaker_id = field<std::string>(row, "speaker", path);
    r.text = field<std::string>(row, "text", path);
    r.duration_s = field<double>(row, "duration", path);
    records.push_back(std::move(r));
  }
  return Corpus(std::move(records), path.parent_path());
}

void write_manifest(const std::filesystem::path& path, const std::vector<UtteranceRecord>& records) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  for (const auto& r : records) {
    json j{{"id", r.id}, {"path", r.path.string()}, {"speaker", r.speaker_id},
           {"text", r.text}, {"duration", r.duration_s}};
    out << j.dump() << "\n";
  }
}

MixResult mix_at_snr(const Waveform& target, const Waveform& interferer, double snr_db) {
  target.validate();
  interferer.validate();
  require(target.sample_rate == interferer.sample_rate, ErrorCode::kInvalidInput,
          "target and interferer sample rates differ");
  require(std::isfinite(snr_db), ErrorCode::kInvalidInput, "snr must be finite");
  const double p_t = mean_square(target.samples);
  const double p_i = mean_square(interferer.samples);
  require(p_t > 0.0, ErrorCode::kInvalidInput, "silent target");
  require(p_i > 0.0, ErrorCode::kInvalidInput, "silent interferer");

  const double scale = std::sqrt(p_t / (p_i * std::pow(10.0, snr_db / 10.0)));
  const std::size_t n = std::max(target.size(), interferer.size());
  std::vector<double> st(n, 0.0), si(n, 0.0);
  double pk = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (k < target.size()) st[k] = target.samples[k];
    if (k < interferer.size()) si[k] = scale * interferer.samples[k];
    pk = std::max(pk, std::abs(st[k] + si[k]));
  }
  const double gain = pk > 0.99 ? 0.99 / pk : 1.0;

  MixResult r;
  r.interferer_scale = scale;
  r.clip_gain = gain;
  r.target_length = target.size();
  r.interferer_length = interferer.size();
  r.scaled_target = Waveform(std::vector<float>(n), target.sample_rate);
  r.scaled_interferer = Waveform(std::vector<float>(n), target.sample_rate);
  r.mixture = Waveform(std::vector<float>(n), target.sample_rate);
  for (std::size_t k = 0; k < n; ++k) {
    const auto a = static_cast<float>(st[k] * gain);
    const auto b = static_cast<float>(si[k] * gain);
    r.scaled_target.samples[k] = a;
    r.scaled_interferer.samples[k] = b;
    r.mixture.samples[k] = a + b;
  }
  return r;
}

Waveform fix_length(const Waveform& w, double seconds) {
  require(seconds > 0.0, ErrorCode::kInvalidInput, "length must be positive");
  const auto n = static_cast<std::size_t>(std::llround(seconds * w.sample_rate));
  Waveform out(std::vector<float>(n, 0.0f), w.sample_rate);
  std::copy_n(w.samples.begin(), std::min(n, w.size()), out.samples.begin());
  return out;
}

Waveform fix_length_random(const Waveform& w, double seconds, Rng& rng) {
  require(seconds > 0.0, ErrorCode::kInvalidInput, "length must be positive");
  const auto n = static_cast<std::size_t>(std::llround(seconds * w.sample_rate));
  if (w.size() <= n) return fix_length(w, seconds);
  const auto offset = static_cast<std::ptrdiff_t>(rng.below(w.size() - n + 1));
  Waveform out(std::vector<float>(w.samples.begin() + offset, w.samples.begin() + offset + n),
               w.sample_rate);
  return out;
}

void validate_for_mixing(const Corpus& corpus) {
  if (corpus.speakers().size() < 2) {
    fail(ErrorCode::kCorpus, "dynamic mixing needs >= 2 speakers, corpus has " +
                                 std::to_string(corpus.speakers().size()) +
                                 (corpus.speakers().empty() ? "" : " (" + corpus.speakers()[0] + ")"));
  }
  for (const auto& spk : corpus.speakers()) {
    if (corpus.utterances_of(spk).size() < 2) {
      fail(ErrorCode::kCorpus, "speaker " + spk + " has a single utterance; enrollment needs another");
    }
  }
}

MixtureExample sample_example_for_target(const Corpus& corpus, std::size_t target_index, Rng& rng,
                                         const SamplerConfig& cfg) {
  require(corpus.speakers().size() >= 2, ErrorCode::kCorpus, "dynamic mixing needs >= 2 speakers");
  const auto& spk = corpus.at(target_index).speaker_id;

  std::vector<const std::string*> others;
  for (const auto& s : corpus.speakers()) {
    if (s != spk) others.push_back(&s);
  }
  const auto& other_spk = *others[rng.below(others.size())];
  const auto& pool = corpus.utterances_of(other_spk);
  const std::size_t interferer = pool[rng.below(pool.size())];
  const std::size_t enroll = other_utterance(corpus, spk, target_index, rng);
  const double snr = rng.uniform(cfg.snr_min_db, cfg.snr_max_db);

  auto enroll_wav = corpus.load(enroll);
  auto enrollment = cfg.random_enroll_crop ? fix_length_random(enroll_wav, cfg.enroll_seconds, rng)
                                           : fix_length(enroll_wav, cfg.enroll_seconds);
  return assemble(corpus, target_index, interferer, enroll, snr, enrollment);
}

MixtureExample sample_training_example(const Corpus& corpus, Rng& rng, const SamplerConfig& cfg) {
  validate_for_mixing(corpus);
  return sample_example_for_target(corpus, rng.below(corpus.size()), rng, cfg);
}

std::vector<PairingEntry> load_pairings(const std::filesystem::path& path) {
  std::vector<PairingEntry> out;
  for (const auto& row : read_jsonl(path)) {
    PairingEntry p;
    p.target_id = field<std::string>(row, "target_id", path);
    p.interferer_id = field<std::string>(row, "interferer_id", path);
    p.enroll_id = field<std::string>(row, "enroll_id", path);
    if (row.contains("interferer_enroll_id")) {
      p.interferer_enroll_id = field<std::string>(row, "interferer_enroll_id", path);
    }
    p.snr_db = field<double>(row, "snr_db", path);
    out.push_back(std::move(p));
  }
  return out;
}

void write_pairings(const std::filesystem::path& path, const std::vector<PairingEntry>& pairs) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  for (const auto& p : pairs) {
    json j{{"target_id", p.target_id}, {"interferer_id", p.interferer_id}, {"enroll_id", p.enroll_id},
           {"interferer_enroll_id", p.interferer_enroll_id}, {"snr_db", p.snr_db}};
    out << j.dump() << "\n";
  }
}

std::vector<PairingEntry> make_pairings(const Corpus& corpus, std::size_t n_mixtures, std::uint64_t seed,
                                        const SamplerConfig& cfg) {
  validate_for_mixing(corpus);
  Rng rng(seed);
  std::vector<PairingEntry> out;
  for (std::size_t m = 0; m < n_mixtures; ++m) {
    const std::size_t target = rng.below(corpus.size());
    const auto& spk = corpus.at(target).speaker_id;
    std::vector<const std::string*> others;
    for (const auto& s : corpus.speakers()) {
      if (s != spk) others.push_back(&s);
    }
    const auto& other_spk = *others[rng.below(others.size())];
    const auto& pool = corpus.utterances_of(other_spk);
    const std::size_t interferer = pool[rng.below(pool.size())];
    const std::size_t enroll = other_utterance(corpus, spk, target, rng);
    const std::size_t ienroll = other_utterance(corpus, other_spk, interferer, rng);
    const double snr = rng.uniform(cfg.snr_min_db, cfg.snr_max_db);
    out.push_back({corpus.at(target).id, corpus.at(interferer).id, corpus.at(enroll).id,
                   corpus.at(ienroll).id, snr});
  }
  return out;
}

std::vector<MixtureExample> build_eval_set(const Corpus& corpus, const std::vector<PairingEntry>& pairs,
                                           const SamplerConfig& cfg) {
  require(!corpus.empty(), ErrorCode::kCorpus, "cannot build an evaluation set from an empty corpus");
  std::vector<MixtureExample> out;
  out.reserve(2 * pairs.size());
  for (const auto& p : pairs) {
    const auto t = corpus.index_of(p.target_id);
    const auto i = corpus.index_of(p.interferer_id);
    const auto e = corpus.index_of(p.enroll_id);
    const auto& t_spk = corpus.at(t).speaker_id;
    const auto& i_spk = corpus.at(i).speaker_id;
    require(t_spk != i_spk, ErrorCode::kValidation,
            "pairing " + p.target_id + "/" + p.interferer_id + " uses one speaker twice");
    require(corpus.at(e).speaker_id == t_spk && e != t, ErrorCode::kValidation,
            "enrollment " + p.enroll_id + " must be another utterance of speaker " + t_spk);
    const auto ie = p.interferer_enroll_id.empty() ? first_other_utterance(corpus, i_spk, i)
                                                   : corpus.index_of(p.interferer_enroll_id);
    require(corpus.at(ie).speaker_id == i_spk && ie != i, ErrorCode::kValidation,
            "enrollment " + corpus.at(ie).id + " must be another utterance of speaker " + i_spk);

    auto a = assemble(corpus, t, i, e, p.snr_db, fix_length(corpus.load(e), cfg.enroll_seconds));
    MixtureExample b;
    b.id = corpus.at(i).id + "__" + corpus.at(t).id;
    b.mixture = a.mixture;
    b.target = a.interferer;
    b.interferer = a.target;
    b.enrollment = fix_length(corpus.load(ie), cfg.enroll_seconds);
    b.target_speaker_id = i_spk;
    b.target_utterance_id = corpus.at(i).id;
    b.interferer_utterance_id = corpus.at(t).id;
    b.enrollment_utterance_id = corpus.at(ie).id;
    b.transcript = corpus.at(i).text;
    b.snr_db = -p.snr_db;
    out.push_back(std::move(a));
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace gentse
