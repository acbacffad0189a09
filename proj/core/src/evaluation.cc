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

#include "gentse/evaluation.h"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <torch/torch.h>

#include "gentse/archive.h"
#include "gentse/error.h"
#include "gentse/metrics.h"
#include "gentse/rng.h"

namespace gentse {
namespace {

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : ""; }

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> parse_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  cells.push_back(cur);
  return cells;
}

std::optional<double> opt_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  if (s == "inf") return std::numeric_limits<double>::infinity();
  return std::stod(s);
}

std::optional<double> reply_number(const nlohmann::json& j, const char* key) {
  if (!j.is_object() || !j.contains(key) || !j[key].is_number()) return std::nullopt;
  const double v = j[key].get<double>();
  return std::isfinite(v) ? std::optional<double>(v) : std::nullopt;
}

class TempWav {
 public:
  TempWav(const std::string& tag, const Waveform& w) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("gentse-" + tag + "-" + std::to_string(getpid()) + "-" + std::to_string(counter++) + ".wav");
    write_wav(path_, w, WavEncoding::kFloat32);
  }
  ~TempWav() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

template <class F>
std::optional<double> mean_of(const std::vector<EvalRow>& rows, F get) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : rows) {
    if (auto v = get(r); v && std::isfinite(*v)) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

}  // namespace

std::string SelfDecoderTranscriber::transcribe(const Extraction& extraction) {
  return model_.text_of(model_.transcribe(extraction.tokens, max_len_));
}

std::string PluginTranscriber::transcribe(const Extraction& extraction) {
  TempWav wav("asr", extraction.waveform);
  auto reply = process_.request({{"wav_path", wav.path().string()}});
  require(reply.is_object() && reply.contains("text") && reply["text"].is_string(), ErrorCode::kPlugin,
          "transcriber reply lacks a 'text' string");
  return reply["text"].get<std::string>();
}

ScorerPlugin::ScorerPlugin(std::string name, std::vector<std::string> command, std::chrono::milliseconds timeout)
    : name_(std::move(name)), process_(std::move(command), timeout) {}

nlohmann::json ScorerPlugin::score(const std::filesystem::path& wav, const std::filesystem::path& ref) {
  return process_.request({{"wav_path", wav.string()}, {"ref_path", ref.string()}});
}

BenchmarkResult run_benchmark(TseModelImpl& model, const std::vector<MixtureExample>& examples,
                              SpeakerEmbedder& embedder, Transcriber& transcriber, const Vocoder& vocoder,
                              const BenchmarkOptions& options, BenchmarkScorers scorers) {
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return examples[a].id < examples[b].id; });
  if (options.output_dir) std::filesystem::create_directories(*options.output_dir);

  BenchmarkResult result;
  const auto warn = [&](const std::string& id, const std::string& what) {
    result.warnings.push_back(id + ": " + what);
    std::cerr << "warning: " << id << ": " << what << '\n';
  };
  for (auto idx : order) {
    const auto& ex = examples[idx];
    const auto seed = derive_seed(options.seed, fnv1a64(ex.id), 0);
    auto extraction = model.extract(ex.mixture, ex.enrollment, options.switches, options.flow_steps, seed, vocoder);

    EvalRow row;
    row.example_id = ex.id;
    row.target_speaker = ex.target_speaker_id;
    row.snr_db = ex.snr_db;
    row.transcriber = transcriber.name();
    row.ref = normalize_text(ex.transcript);
    try {
      row.hyp = normalize_text(transcriber.transcribe(extraction));
    } catch (const Error& e) {
      warn(ex.id, std::string("transcriber failed: ") + e.what());
    }
    row.wer = wer(split_words(row.hyp), split_words(row.ref));

    try {
      auto target_emb = embedder.embed(ex.target);
      try {
        row.cos_sim = gentse::cosine_similarity(embedder.embed(extraction.waveform), target_emb);
      } catch (const Error& e) {
        warn(ex.id, std::string("prediction embedding: ") + e.what());
      }
      row.cos_sim_mixture = gentse::cosine_similarity(embedder.embed(ex.mixture), target_emb);
    } catch (const Error& e) {
      warn(ex.id, std::string("embedding: ") + e.what());
    }

    if (scorers.dnsmos || scorers.sbs) {
      TempWav pred("pred", extraction.waveform);
      TempWav ref("ref", ex.target);
      if (scorers.dnsmos) {
        try {
          auto reply = scorers.dnsmos->score(pred.path(), ref.path());
          const auto& s = reply.contains("scores") ? reply["scores"] : reply;
          row.dnsmos_sig = reply_number(s, "sig");
          row.dnsmos_bak = reply_number(s, "bak");
          row.dnsmos_ovl = reply_number(s, "ovl");
        } catch (const Error& e) {
          warn(ex.id, "scorer " + scorers.dnsmos->name() + ": " + e.what());
        }
      }
      if (scorers.sbs) {
        try {
          row.sbs = reply_number(scorers.sbs->score(pred.path(), ref.path()), "score");
        } catch (const Error& e) {
          warn(ex.id, "scorer " + scorers.sbs->name() + ": " + e.what());
        }
      }
    }

    if (options.output_dir) {
      write_wav(*options.output_dir / (ex.id + ".wav"), extraction.waveform);
      std::ofstream(*options.output_dir / (ex.id + ".txt")) << row.hyp << '\n';
    }
    result.rows.push_back(std::move(row));
    result.extractions.push_back(std::move(extraction));
  }
  result.aggregates = aggregate(result.rows);
  return result;
}

EvalAggregates aggregate(const std::vector<EvalRow>& rows) {
  EvalAggregates a;
  a.rows = rows.size();
  a.wer = mean_of(rows, [](const EvalRow& r) { return std::optional<double>(r.wer); });
  a.cos_sim = mean_of(rows, [](const EvalRow& r) { return r.cos_sim; });
  a.cos_sim_mixture = mean_of(rows, [](const EvalRow& r) { return r.cos_sim_mixture; });
  a.dnsmos_sig = mean_of(rows, [](const EvalRow& r) { return r.dnsmos_sig; });
  a.dnsmos_bak = mean_of(rows, [](const EvalRow& r) { return r.dnsmos_bak; });
  a.dnsmos_ovl = mean_of(rows, [](const EvalRow& r) { return r.dnsmos_ovl; });
  a.sbs = mean_of(rows, [](const EvalRow& r) { return r.sbs; });
  return a;
}

std::string results_csv(const std::vector<EvalRow>& rows) {
  std::ostringstream os;
  os << "example_id,target_speaker,snr_db,transcriber,wer,cos_sim,cos_sim_mixture,"
        "dnsmos_sig,dnsmos_bak,dnsmos_ovl,sbs,hyp,ref\n";
  for (const auto& r : rows) {
    os << quote(r.example_id) << ',' << quote(r.target_speaker) << ',' << fmt(r.snr_db) << ','
       << quote(r.transcriber) << ',' << fmt(r.wer) << ',' << fmt(r.cos_sim) << ',' << fmt(r.cos_sim_mixture) << ','
       << fmt(r.dnsmos_sig) << ',' << fmt(r.dnsmos_bak) << ',' << fmt(r.dnsmos_ovl) << ',' << fmt(r.sbs) << ','
       << quote(r.hyp) << ',' << quote(r.ref) << '\n';
  }
  return os.str();
}

void write_results_csv(const std::filesystem::path& path, const std::vector<EvalRow>& rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << results_csv(rows);
  require(out.good(), ErrorCode::kIo, "cannot write " + path.string());
}

std::vector<EvalRow> read_results_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kMissingFile, "results file not found: " + path.string());
  std::string line;
  std::getline(in, line);
  require(line.rfind("example_id,", 0) == 0, ErrorCode::kParse, "unexpected results header");
  std::vector<EvalRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto c = parse_csv_line(line);
    require(c.size() == 13, ErrorCode::kParse,
            path.string() + ":" + std::to_string(lineno) + ": expected 13 cells, got " + std::to_string(c.size()));
    EvalRow r;
    r.example_id = c[0];
    r.target_speaker = c[1];
    r.snr_db = std::stod(c[2]);
    r.transcriber = c[3];
    r.wer = *opt_number(c[4]);
    r.cos_sim = opt_number(c[5]);
    r.cos_sim_mixture = opt_number(c[6]);
    r.dnsmos_sig = opt_number(c[7]);
    r.dnsmos_bak = opt_number(c[8]);
    r.dnsmos_ovl = opt_number(c[9]);
    r.sbs = opt_number(c[10]);
    r.hyp = c[11];
    r.ref = c[12];
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string format_table(const std::vector<std::pair<std::string, EvalAggregates>>& systems,
                         const std::string& transcriber) {
  const auto cell = [](const std::optional<double>& v) {
    if (!v) return std::string("-");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", *v);
    return std::string(buf);
  };
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-24s %8s %8s %8s %8s %8s %8s\n", "system", "WER", "CosSim", "SIG", "BAK",
                "OVL", "SBS");
  os << "WER as a fraction, transcriber: " << transcriber << '\n' << line;
  for (const auto& [name, a] : systems) {
    std::snprintf(line, sizeof line, "%-24s %8s %8s %8s %8s %8s %8s\n", name.c_str(), cell(a.wer).c_str(),
                  cell(a.cos_sim).c_str(), cell(a.dnsmos_sig).c_str(), cell(a.dnsmos_bak).c_str(),
                  cell(a.dnsmos_ovl).c_str(), cell(a.sbs).c_str());
    os << line;
  }
  return os.str();
}

}  // namespace gentse
