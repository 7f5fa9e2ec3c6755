// src/data.cc

// Copyright 2026  cmbench authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "cm/data.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "cm/binio.h"
#include "cm/error.h"

namespace cm {

namespace fs = std::filesystem;

namespace {

const char kTsvHeader[] = "trial_id\tlabel\tattack\tcodec\tpath";

std::vector<std::string> SplitTabs(const std::string &line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

std::vector<std::string> SplitWhitespace(const std::string &line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

[[noreturn]] void ParseFail(int line_no, const std::string &what) {
  Fail(ErrorKind::kParse, "protocol line " + std::to_string(line_no) + ": " + what);
}

Label ParseLabel(const std::string &s, int line_no) {
  if (s == "bonafide") return Label::kBonafide;
  if (s == "spoof") return Label::kSpoof;
  ParseFail(line_no, "unknown key '" + s + "' (expected bonafide or spoof)");
}

std::optional<std::string> Optional(const std::string &s) {
  if (s == "-") return std::nullopt;
  return s;
}

bool IsBlank(const std::string &s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

const char *LabelName(Label label) { return label == Label::kBonafide ? "bonafide" : "spoof"; }

ProtocolFormat ParseProtocolFormat(const std::string &name) {
  if (name == "asvspoof_la") return ProtocolFormat::kAsvspoofLa;
  if (name == "canonical_tsv" || name == "tsv") return ProtocolFormat::kCanonicalTsv;
  Fail(ErrorKind::kConfig, "unknown protocol format '" + name + "'");
}

size_t ProtocolSet::Count(Label label) const {
  return size_t(std::count_if(records.begin(), records.end(),
                              [label](const TrialRecord &r) { return r.label == label; }));
}

const TrialRecord &ProtocolSet::Find(const std::string &trial_id) const {
  for (const auto &r : records)
    if (r.trial_id == trial_id) return r;
  Fail(ErrorKind::kLookup, "trial '" + trial_id + "' not in protocol");
}

void ProtocolSet::CheckUnique() const {
  std::set<std::string> seen;
  for (const auto &r : records)
    if (!seen.insert(r.trial_id).second) Fail(ErrorKind::kDuplicate, "duplicate trial_id '" + r.trial_id + "'");
}

std::string AudioPathOf(const ProtocolSet &set, const TrialRecord &record) {
  fs::path rel = record.audio_path ? fs::path(*record.audio_path) : fs::path(record.trial_id + ".wav");
  if (rel.is_absolute() || set.root.empty()) return rel.string();
  return (fs::path(set.root) / rel).string();
}

ProtocolSet ParseProtocolText(const std::string &text, ProtocolFormat format) {
  ProtocolSet set;
  std::set<std::string> seen;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (IsBlank(line)) continue;
    TrialRecord r;
    if (format == ProtocolFormat::kAsvspoofLa) {
      auto f = SplitWhitespace(line);
      if (f.size() != 5) ParseFail(line_no, "expected 5 fields, got " + std::to_string(f.size()));
      r.trial_id = f[1];
      r.attack = Optional(f[3]);
      r.label = ParseLabel(f[4], line_no);
    } else {
      if (!header_seen) {
        if (line != kTsvHeader) ParseFail(line_no, "expected header 'trial_id<TAB>label<TAB>attack<TAB>codec<TAB>path'");
        header_seen = true;
        continue;
      }
      auto f = SplitTabs(line);
      if (f.size() != 5) ParseFail(line_no, "expected 5 tab-separated fields, got " + std::to_string(f.size()));
      r.trial_id = f[0];
      r.label = ParseLabel(f[1], line_no);
      r.attack = Optional(f[2]);
      r.codec = Optional(f[3]);
      r.audio_path = Optional(f[4]);
    }
    if (r.trial_id.empty() || r.trial_id == "-") ParseFail(line_no, "empty trial_id");
    if (r.label == Label::kBonafide && r.attack)
      ParseFail(line_no, "bona fide trial '" + r.trial_id + "' carries attack '" + *r.attack + "'");
    if (!seen.insert(r.trial_id).second)
      Fail(ErrorKind::kDuplicate, "protocol line " + std::to_string(line_no) + ": duplicate trial_id '" +
                                      r.trial_id + "'");
    set.records.push_back(std::move(r));
  }
  if (format == ProtocolFormat::kCanonicalTsv && !header_seen) ParseFail(1, "missing header");
  return set;
}

ProtocolSet ParseProtocol(const std::string &path, ProtocolFormat format) {
  auto bytes = ReadFileBytes(path);
  ProtocolSet set = ParseProtocolText(std::string(bytes.begin(), bytes.end()), format);
  set.root = fs::path(path).parent_path().string();
  return set;
}

std::string ProtocolToTsv(const ProtocolSet &set) {
  auto field = [](const std::optional<std::string> &s) { return s ? *s : std::string("-"); };
  std::string out = std::string(kTsvHeader) + "\n";
  for (const auto &r : set.records)
    out += r.trial_id + "\t" + LabelName(r.label) + "\t" + field(r.attack) + "\t" + field(r.codec) + "\t" +
           field(r.audio_path) + "\n";
  return out;
}

void WriteProtocol(const ProtocolSet &set, const std::string &path) {
  std::string text = ProtocolToTsv(set);
  WriteFileBytes(path, std::span<const uint8_t>(reinterpret_cast<const uint8_t *>(text.data()), text.size()));
}

std::vector<std::pair<int, int>> SegmentBounds(int total, int max_len, int min_tail) {
  if (total < 1) Fail(ErrorKind::kParameter, "cannot segment an empty sequence");
  if (max_len < 1) Fail(ErrorKind::kParameter, "segment length must be positive");
  std::vector<std::pair<int, int>> out;
  for (int start = 0; start < total; start += max_len) out.emplace_back(start, std::min(max_len, total - start));
  if (out.size() > 1 && out.back().second < min_tail) {
    const int tail = out.back().second;
    out.pop_back();
    out.back().second += tail;
  }
  return out;
}

std::vector<Waveform> SliceSegments(const Waveform &wave, double max_dur_s) {
  const int max_len = int(std::lround(max_dur_s * wave.sample_rate_hz));
  const int min_tail = int(std::lround(kMinTailSeconds * wave.sample_rate_hz));
  std::vector<Waveform> out;
  for (auto [start, len] : SegmentBounds(int(wave.samples.size()), max_len, min_tail)) {
    Waveform w;
    w.sample_rate_hz = wave.sample_rate_hz;
    w.samples.assign(wave.samples.begin() + start, wave.samples.begin() + start + len);
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<int> EpochOrder(size_t num_items, uint64_t seed, int epoch) {
  std::vector<int> order(num_items);
  for (size_t i = 0; i < num_items; ++i) order[i] = int(i);
  std::seed_seq seq{uint32_t(seed), uint32_t(seed >> 32), uint32_t(epoch), 0x5eedu};
  std::mt19937_64 rng(seq);
  // Fisher-Yates spelled out: std::shuffle's draw sequence is not pinned
  // down by the standard, which would make batch order library dependent.
  for (size_t i = num_items; i > 1; --i) {
    const size_t j = size_t(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

std::vector<SegmentBatch> MakeBatches(const std::vector<TrainItem> &items, int batch_size, uint64_t seed,
                                      int epoch) {
  if (batch_size < 1) Fail(ErrorKind::kParameter, "batch_size must be >= 1");
  const std::vector<int> order = EpochOrder(items.size(), seed, epoch);
  std::vector<SegmentBatch> batches;
  for (size_t start = 0; start < order.size(); start += size_t(batch_size)) {
    const size_t end = std::min(order.size(), start + size_t(batch_size));
    int max_n = 0;
    for (size_t i = start; i < end; ++i) max_n = std::max(max_n, items[size_t(order[i])].features.dim(1));
    SegmentBatch b;
    for (size_t i = start; i < end; ++i) {
      const TrainItem &it = items[size_t(order[i])];
      const int k = it.features.dim(0), n = it.features.dim(1), d = it.features.dim(2);
      nn::Tensor<float> padded({k, max_n, d});
      for (int l = 0; l < k; ++l)
        std::copy_n(it.features.data.begin() + ptrdiff_t(size_t(l) * n * d), size_t(n) * d,
                    padded.data.begin() + ptrdiff_t(size_t(l) * max_n * d));
      b.features.push_back(std::move(padded));
      b.valid_len.push_back(n);
      b.labels.push_back(it.label);
      b.item_index.push_back(order[i]);
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

// ---------------------------------------------------------------------------
// Synthetic corpus

namespace {

// Two-pole resonator normalized to unit peak gain.
struct Resonator {
  double b0, a1, a2, y1 = 0, y2 = 0;
  Resonator(double freq, double bw, double fs) {
    const double r = std::exp(-std::numbers::pi * bw / fs);
    const double th = 2 * std::numbers::pi * freq / fs;
    a1 = -2 * r * std::cos(th);
    a2 = r * r;
    b0 = (1 - r) * std::sqrt(1 - 2 * r * std::cos(2 * th) + r * r);
  }
  double operator()(double x) {
    const double y = b0 * x - a1 * y1 - a2 * y2;
    y2 = y1;
    y1 = y;
    return y;
  }
};

constexpr double kFloorGain = 0.05;
// Kellet's economy pink-noise filter.
struct PinkFilter {
  double b0 = 0, b1 = 0, b2 = 0;
  double operator()(double w) {
    b0 = 0.99765 * b0 + w * 0.0990460;
    b1 = 0.96300 * b1 + w * 0.2965164;
    b2 = 0.57000 * b2 + w * 1.0526913;
    return b0 + b1 + b2 + w * 0.1848;
  }
};

double Rms(const std::vector<double> &x) {
  double e = 0;
  for (double v : x) e += v * v;
  return std::sqrt(e / double(std::max<size_t>(1, x.size())));
}

}  // namespace

SyntheticPair SynthesizeTrial(const SyntheticConfig &cfg, uint64_t trial_seed, bool with_artifact) {
  const double fs = cfg.sample_rate_hz;
  if (!(cfg.band_low_hz > 0 && cfg.band_high_hz > cfg.band_low_hz && cfg.band_high_hz < fs / 2))
    Fail(ErrorKind::kParameter, "artifact band must lie inside (0, fs/2)");
  std::mt19937_64 rng(trial_seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> nd;
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };

  const size_t n = size_t(std::lround(uniform(cfg.min_dur_s, cfg.max_dur_s) * fs));

  // Formant-like resonances kept in the lower half of the speech band.
  std::vector<Resonator> formants;
  // F1 and F2 stay clear of 800 Hz so a stop band edge there cuts no formant.
  const double centers[3][2] = {{250, 700}, {1000, 1700}, {1700, 2300}};
  std::vector<double> gains;
  for (const auto &c : centers) {
    formants.emplace_back(uniform(c[0], c[1]), uniform(60, 160), fs);
    gains.push_back(uniform(0.3, 1.0));
  }
  // Syllable-rate envelope: a few raised-cosine bursts per second.
  const double rate = uniform(3.0, 5.0), phase = uniform(0, 2 * std::numbers::pi);
  PinkFilter pink;
  std::vector<double> base(n);
  for (size_t t = 0; t < n; ++t) {
    const double e = pink(nd(rng)) * 0.1;
    double v = kFloorGain * e;
    for (size_t k = 0; k < formants.size(); ++k) v += gains[k] * formants[k](e);
    const double env = 0.35 + 0.65 * std::pow(std::sin(std::numbers::pi * rate * double(t) / fs + phase), 2);
    base[t] = v * env;
  }
  const double level = uniform(0.06, 0.08);
  const double scale = level / std::max(Rms(base), 1e-12);
  for (double &v : base) v *= scale;

  SyntheticPair out{std::move(base), std::vector<double>(n, 0.0)};
  if (!with_artifact) return out;

  // Tone cluster inside the band, away from the edges.
  const double margin = 0.15 * (cfg.band_high_hz - cfg.band_low_hz);
  const double ramp = 0.01 * fs;
  std::vector<double> art(n, 0.0);
  for (int k = 0; k < 3; ++k) {
    const double f = uniform(cfg.band_low_hz + margin, cfg.band_high_hz - margin);
    const double ph = uniform(0, 2 * std::numbers::pi);
    for (size_t t = 0; t < n; ++t) art[t] += std::sin(2 * std::numbers::pi * f * double(t) / fs + ph);
  }
  for (size_t t = 0; t < n; ++t) {
    double w = 1.0;
    const double edge = double(std::min(t, n - 1 - t));
    if (edge < ramp) w = 0.5 - 0.5 * std::cos(std::numbers::pi * edge / ramp);
    art[t] *= w;
  }
  const double target = Rms(out.base) * std::pow(10.0, cfg.artifact_db / 20.0);
  const double as = target / std::max(Rms(art), 1e-12);
  for (double &v : art) v *= as;
  out.artifact = std::move(art);
  return out;
}

ProtocolSet GenerateSyntheticDataset(const SyntheticConfig &cfg, const std::string &out_dir) {
  if (cfg.n_per_class < 1) Fail(ErrorKind::kParameter, "n_per_class must be >= 1");
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "wav", ec);
  if (ec) Fail(ErrorKind::kIo, "cannot create '" + out_dir + "': " + ec.message());

  std::mt19937_64 master(cfg.seed);
  const int n = cfg.n_per_class;
  // Split per class so every subset is balanced: 60 / 20 / 20.
  const int n_train = int(std::lround(0.6 * n)), n_dev = int(std::lround(0.2 * n));
  ProtocolSet all, parts[3];
  const char *names[3] = {"train", "dev", "eval"};
  for (int i = 0; i < n; ++i) {
    for (Label label : {Label::kBonafide, Label::kSpoof}) {
      const uint64_t trial_seed = master();
      const bool spoof = label == Label::kSpoof;
      SyntheticPair p = SynthesizeTrial(cfg, trial_seed, spoof);
      Waveform w;
      w.sample_rate_hz = cfg.sample_rate_hz;
      w.samples.resize(p.base.size());
      for (size_t t = 0; t < p.base.size(); ++t) w.samples[t] = float(p.base[t] + p.artifact[t]);
      char id[32];
      std::snprintf(id, sizeof(id), "SYN_%s_%04d", spoof ? "S" : "B", i);
      TrialRecord r;
      r.trial_id = id;
      r.label = label;
      if (spoof) r.attack = "SYN1";
      r.audio_path = std::string("wav/") + id + ".wav";
      WriteWav(fs::path(out_dir) / *r.audio_path, w);
      const int part = i < n_train ? 0 : i < n_train + n_dev ? 1 : 2;
      parts[part].records.push_back(r);
      all.records.push_back(std::move(r));
    }
  }
  for (int k = 0; k < 3; ++k) {
    parts[k].subset = names[k];
    parts[k].root = out_dir;
    WriteProtocol(parts[k], (fs::path(out_dir) / (std::string(names[k]) + ".tsv")).string());
  }
  WriteProtocol(all, (fs::path(out_dir) / "all.tsv").string());
  all.root = out_dir;
  return all;
}

}  // namespace cm
