// src/eval.cc

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

#include "cm/eval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <set>
#include <sstream>

#include "cm/binio.h"
#include "cm/error.h"
#include "cm/parallel.h"

namespace cm {

std::map<std::string, double> ScoreSet::AsMap() const {
  std::map<std::string, double> m;
  for (const auto &[id, s] : scores)
    if (!m.emplace(id, s).second) Fail(ErrorKind::kDuplicate, "duplicate score for trial '" + id + "'");
  return m;
}

double RoundScore(double s) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", s);
  const double r = std::strtod(buf, nullptr);
  return r == 0.0 ? 0.0 : r;  // no negative zero
}

ScoreSet ScoreWith(const nn::ModelParams &params, const ProtocolSet &set, const FeatureFn &features, int jobs) {
  const size_t n = set.size();
  std::vector<double> scores(n);
  std::vector<std::string> failures(n);
  std::vector<ErrorKind> kinds(n, ErrorKind::kIo);
  ParallelFor(n, jobs, [&](size_t i) {
    const TrialRecord &r = set.records[i];
    nn::Tensor<float> x;
    try {
      x = features(r);
    } catch (const Error &e) {
      // Unavailable inputs are gathered; model errors propagate.
      if (e.kind() != ErrorKind::kIo && e.kind() != ErrorKind::kLookup && e.kind() != ErrorKind::kFormat &&
          e.kind() != ErrorKind::kCorrupt && e.kind() != ErrorKind::kUnsupportedFormat)
        throw;
      failures[i] = e.what();
      kinds[i] = e.kind();
      return;
    }
    scores[i] = RoundScore(nn::ScoreFromLogits(nn::ForwardTrial(params, x)));
  });
  std::string missing;
  size_t n_missing = 0;
  ErrorKind kind = ErrorKind::kIo;
  for (size_t i = 0; i < n; ++i)
    if (!failures[i].empty()) {
      if (n_missing++ == 0) kind = kinds[i];
      missing += "\n  " + set.records[i].trial_id + ": " + failures[i];
    }
  if (n_missing)
    Fail(kind, std::to_string(n_missing) + " trial(s) could not be scored:" + missing);
  ScoreSet out;
  out.fingerprint = params.spec.Fingerprint();
  for (size_t i = 0; i < n; ++i) out.scores.emplace_back(set.records[i].trial_id, scores[i]);
  return out;
}

ScoreSet ScoreTrials(const nn::ModelParams &params, const Frontend &frontend, const ProtocolSet &set, int jobs) {
  ScoreSet s = ScoreWith(params, set, [&](const TrialRecord &r) { return frontend.TrialFeatures(set, r); }, jobs);
  s.frontend = FrontendName(frontend.kind());
  return s;
}

std::string FormatScores(const ScoreSet &scores) {
  std::string out;
  char buf[64];
  for (const auto &[id, s] : scores.scores) {
    std::snprintf(buf, sizeof(buf), "\t%.6f\n", s);
    out += id + buf;
  }
  return out;
}

ScoreSet ParseScores(const std::string &text) {
  ScoreSet out;
  std::set<std::string> seen;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const size_t tab = line.find('\t');
    if (tab == std::string::npos || tab == 0)
      Fail(ErrorKind::kParse, "score line " + std::to_string(line_no) + ": expected 'trial_id<TAB>score'");
    const std::string id = line.substr(0, tab), val = line.substr(tab + 1);
    char *end = nullptr;
    const double s = std::strtod(val.c_str(), &end);
    if (val.empty() || *end != '\0' || !std::isfinite(s))
      Fail(ErrorKind::kParse, "score line " + std::to_string(line_no) + ": bad score '" + val + "'");
    if (!seen.insert(id).second)
      Fail(ErrorKind::kDuplicate, "score line " + std::to_string(line_no) + ": duplicate trial_id '" + id + "'");
    out.scores.emplace_back(id, s);
  }
  return out;
}

void WriteScores(const ScoreSet &scores, const std::string &path) {
  const std::string text = FormatScores(scores);
  WriteFileBytes(path, std::span<const uint8_t>(reinterpret_cast<const uint8_t *>(text.data()), text.size()));
}

ScoreSet ReadScores(const std::string &path) {
  auto bytes = ReadFileBytes(path);
  try {
    return ParseScores(std::string(bytes.begin(), bytes.end()));
  } catch (const Error &e) {
    Fail(e.kind(), path + ": " + e.what());
  }
}

ClassScores SplitByClass(const ScoreSet &scores, const ProtocolSet &set) {
  const auto m = scores.AsMap();
  ClassScores out;
  std::string missing;
  size_t n_missing = 0;
  for (const auto &r : set.records) {
    auto it = m.find(r.trial_id);
    if (it == m.end()) {
      if (n_missing++ < 5) missing += " " + r.trial_id;
      continue;
    }
    (r.label == Label::kBonafide ? out.bonafide : out.spoof).push_back(it->second);
  }
  if (n_missing)
    Fail(ErrorKind::kLookup, std::to_string(n_missing) + " protocol trial(s) have no score:" + missing +
                                 (n_missing > 5 ? " ..." : ""));
  return out;
}

// ---------------------------------------------------------------------------

namespace {

// Error rates at every threshold of the sweep, ascending.
struct Sweep {
  std::vector<double> thresholds, pmiss, pfa;
};

Sweep MakeSweep(std::span<const double> bonafide, std::span<const double> spoof) {
  if (bonafide.empty() || spoof.empty())
    Fail(ErrorKind::kMetric, "metrics need at least one bona fide and one spoof score");
  std::vector<double> b(bonafide.begin(), bonafide.end()), s(spoof.begin(), spoof.end());
  for (double v : b)
    if (!std::isfinite(v)) Fail(ErrorKind::kMetric, "non-finite score");
  for (double v : s)
    if (!std::isfinite(v)) Fail(ErrorKind::kMetric, "non-finite score");
  std::sort(b.begin(), b.end());
  std::sort(s.begin(), s.end());
  std::vector<double> all(b);
  all.insert(all.end(), s.begin(), s.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  all.push_back(std::numeric_limits<double>::infinity());
  Sweep sw;
  sw.thresholds = all;
  const double nb = double(b.size()), ns = double(s.size());
  for (double t : all) {
    const auto below_b = std::lower_bound(b.begin(), b.end(), t) - b.begin();
    const auto below_s = std::lower_bound(s.begin(), s.end(), t) - s.begin();
    sw.pmiss.push_back(double(below_b) / nb);
    sw.pfa.push_back(double(s.size() - size_t(below_s)) / ns);
  }
  return sw;
}

}  // namespace

EerResult ComputeEer(std::span<const double> bonafide, std::span<const double> spoof) {
  const Sweep sw = MakeSweep(bonafide, spoof);
  EerResult r;
  r.n_bonafide = bonafide.size();
  r.n_spoof = spoof.size();
  for (size_t i = 0; i < sw.thresholds.size(); ++i)
    if (sw.pmiss[i] >= sw.pfa[i]) {
      r.eer = 0.5 * (sw.pmiss[i] + sw.pfa[i]);
      r.threshold = sw.thresholds[i];
      break;
    }
  return r;
}

EerResult ComputeEer(const ScoreSet &scores, const ProtocolSet &set) {
  const ClassScores c = SplitByClass(scores, set);
  return ComputeEer(c.bonafide, c.spoof);
}

void TdcfParams::Validate() const {
  if (!(c1 > 0 && c2 > 0 && std::isfinite(c1) && std::isfinite(c2)))
    Fail(ErrorKind::kParameter, "t-DCF costs must be positive and finite");
}

double MinTdcf(std::span<const double> bonafide, std::span<const double> spoof, const TdcfParams &p) {
  p.Validate();
  const Sweep sw = MakeSweep(bonafide, spoof);
  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < sw.thresholds.size(); ++i) best = std::min(best, p.c1 * sw.pmiss[i] + p.c2 * sw.pfa[i]);
  return best / std::min(p.c1, p.c2);
}

double MinTdcf(const ScoreSet &scores, const ProtocolSet &set, const TdcfParams &p) {
  const ClassScores c = SplitByClass(scores, set);
  return MinTdcf(c.bonafide, c.spoof, p);
}

DecomposeBy ParseDecomposeBy(const std::string &name) {
  if (name == "attack") return DecomposeBy::kAttack;
  if (name == "codec") return DecomposeBy::kCodec;
  Fail(ErrorKind::kConfig, "--by must be 'attack' or 'codec', got '" + name + "'");
}

std::map<std::string, EerResult> DecomposeEer(const ScoreSet &scores, const ProtocolSet &set, DecomposeBy by) {
  const auto m = scores.AsMap();
  auto score_of = [&](const TrialRecord &r) {
    auto it = m.find(r.trial_id);
    if (it == m.end()) Fail(ErrorKind::kLookup, "protocol trial '" + r.trial_id + "' has no score");
    return it->second;
  };
  std::map<std::string, ClassScores> groups;
  if (by == DecomposeBy::kAttack) {
    std::vector<double> bona;
    for (const auto &r : set.records)
      if (r.label == Label::kBonafide) bona.push_back(score_of(r));
      else if (r.attack) groups[*r.attack].spoof.push_back(score_of(r));
    for (auto &[k, g] : groups) g.bonafide = bona;
  } else {
    for (const auto &r : set.records)
      if (r.codec) (r.label == Label::kBonafide ? groups[*r.codec].bonafide : groups[*r.codec].spoof).push_back(score_of(r));
  }
  if (groups.empty())
    Fail(ErrorKind::kMetric, std::string("no trial carries a") + (by == DecomposeBy::kAttack ? "n attack" : " codec") + " tag");
  std::map<std::string, EerResult> out;
  for (const auto &[k, g] : groups) {
    if (g.bonafide.empty() || g.spoof.empty())
      Fail(ErrorKind::kMetric, "group '" + k + "' lacks " + (g.bonafide.empty() ? "bona fide" : "spoof") + " trials");
    out.emplace(k, ComputeEer(g.bonafide, g.spoof));
  }
  return out;
}

std::string DecomposeCsv(const std::map<std::string, EerResult> &table, DecomposeBy by) {
  std::string out = std::string(by == DecomposeBy::kAttack ? "attack" : "codec") + ",eer,threshold,n_bonafide,n_spoof\n";
  char buf[160];
  for (const auto &[k, r] : table) {
    std::snprintf(buf, sizeof(buf), ",%.6f,%.6f,%zu,%zu\n", r.eer, r.threshold, r.n_bonafide, r.n_spoof);
    out += k + buf;
  }
  return out;
}

Histogram ScoreHistogram(std::span<const double> bonafide, std::span<const double> spoof, int n_bins) {
  if (n_bins < 1) Fail(ErrorKind::kParameter, "histogram needs n_bins >= 1");
  if (bonafide.empty() && spoof.empty()) Fail(ErrorKind::kMetric, "histogram of an empty score set");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (auto span : {bonafide, spoof})
    for (double v : span) lo = std::min(lo, v), hi = std::max(hi, v);
  Histogram h;
  for (int i = 0; i <= n_bins; ++i) h.edges.push_back(i == n_bins ? hi : lo + (hi - lo) * i / n_bins);
  h.bonafide.assign(size_t(n_bins), 0);
  h.spoof.assign(size_t(n_bins), 0);
  auto bin = [&](double v) {
    if (hi == lo) return 0;
    return std::clamp(int(std::floor((v - lo) / (hi - lo) * n_bins)), 0, n_bins - 1);
  };
  for (double v : bonafide) ++h.bonafide[size_t(bin(v))];
  for (double v : spoof) ++h.spoof[size_t(bin(v))];
  return h;
}

Histogram ScoreHistogram(const ScoreSet &scores, const ProtocolSet &set, int n_bins) {
  const ClassScores c = SplitByClass(scores, set);
  return ScoreHistogram(c.bonafide, c.spoof, n_bins);
}

std::string Histogram::ToCsv() const {
  std::string out = "edges";
  char buf[64];
  for (double e : edges) {
    std::snprintf(buf, sizeof(buf), ",%.6f", e);
    out += buf;
  }
  out += "\nbonafide";
  for (size_t c : bonafide) out += "," + std::to_string(c);
  out += "\nspoof";
  for (size_t c : spoof) out += "," + std::to_string(c);
  return out + "\n";
}

}  // namespace cm
