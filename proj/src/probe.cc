// src/probe.cc

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

#include "cm/probe.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <sstream>

#include "cm/binio.h"
#include "cm/dsp.h"
#include "cm/error.h"
#include "cm/log.h"

namespace cm {

namespace fs = std::filesystem;

namespace {

constexpr int kProbeRate = 16000;

std::string HzString(double hz) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", hz);
  return buf;
}

void WriteText(const fs::path &path, const std::string &text) {
  WriteFileBytes(path, std::span<const uint8_t>(reinterpret_cast<const uint8_t *>(text.data()), text.size()));
}

// Partial Fisher-Yates over the candidates with an explicit draw rule.
std::vector<size_t> Sample(std::vector<size_t> pool, size_t k, std::mt19937_64 &rng) {
  for (size_t i = 0; i < k; ++i) {
    const size_t j = i + size_t(rng() % (pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

}  // namespace

std::vector<Band> DefaultBands() {
  return {{0, 100}, {0, 800}, {800, 2400}, {2400, 4000}, {4000, 5600}, {5600, 7200}, {7200, 8000}};
}

std::vector<Band> ParseBands(const std::string &spec) {
  if (spec == "default") return DefaultBands();
  std::vector<Band> out;
  if (spec.empty() || spec == "none") return out;
  std::istringstream is(spec);
  std::string item;
  while (std::getline(is, item, ',')) {
    const size_t dash = item.find('-');
    Band b;
    try {
      if (dash == std::string::npos) throw std::invalid_argument(item);
      size_t used = 0;
      b.low_hz = std::stod(item.substr(0, dash), &used);
      if (used != dash) throw std::invalid_argument(item);
      b.high_hz = std::stod(item.substr(dash + 1), &used);
      if (used != item.size() - dash - 1) throw std::invalid_argument(item);
    } catch (const std::exception &) {
      Fail(ErrorKind::kConfig, "bad band '" + item + "' (expected low-high in Hz)");
    }
    out.push_back(b);
  }
  return out;
}

ProtocolSet SubsetTrials(const ProtocolSet &set, size_t n, uint64_t seed) {
  if (n > set.size())
    Fail(ErrorKind::kParameter, "subset of " + std::to_string(n) + " from " + std::to_string(set.size()) + " trials");
  if (n == set.size()) return set;
  std::vector<size_t> bona, spoof;
  for (size_t i = 0; i < set.size(); ++i) (set.records[i].label == Label::kBonafide ? bona : spoof).push_back(i);
  size_t nb = size_t(std::llround(double(n) * double(bona.size()) / double(set.size())));
  nb = std::min(nb, bona.size());
  if (n - nb > spoof.size()) nb = n - spoof.size();
  std::mt19937_64 rng(seed);
  std::vector<size_t> pick = Sample(bona, nb, rng);
  for (size_t i : Sample(spoof, n - nb, rng)) pick.push_back(i);
  std::sort(pick.begin(), pick.end());
  ProtocolSet out;
  out.subset = set.subset;
  out.root = set.root;
  for (size_t i : pick) out.records.push_back(set.records[i]);
  return out;
}

ProbeReport RunProbe(const nn::ModelParams &params, const Frontend &frontend, const ProtocolSet &full,
                     const ProbeConfig &cfg) {
  if (!frontend.HasWaveformAccess())
    Fail(ErrorKind::kUnsupportedFrontend,
         std::string("probing needs audio, but front end '") + FrontendName(frontend.kind()) +
             "' reads stored features; filter the audio, re-export the features offline and evaluate those");
  if (cfg.order < 2 || cfg.order % 2) Fail(ErrorKind::kConfig, "probe filter order must be even and >= 2");
  std::vector<IirFilter> filters;
  for (const Band &b : cfg.bands) filters.push_back(DesignBandstop(b.low_hz, b.high_hz, cfg.order, kProbeRate));

  const ProtocolSet set = cfg.subset_size ? SubsetTrials(full, *cfg.subset_size, cfg.seed) : full;
  ProbeReport report;
  auto add = [&](std::optional<Band> band, ScoreSet scores) {
    ProbeEntry e;
    e.band = band;
    e.eer = ComputeEer(scores, set);
    e.histogram = ScoreHistogram(scores, set, cfg.hist_bins);
    e.scores = std::move(scores);
    report.entries.push_back(std::move(e));
  };
  add(std::nullopt, ScoreTrials(params, frontend, set, cfg.jobs));
  for (size_t k = 0; k < filters.size(); ++k) {
    const IirFilter &f = filters[k];
    ScoreSet s = ScoreWith(
        params, set,
        [&](const TrialRecord &r) {
          const Waveform w = ReadWav(AudioPathOf(set, r));
          return frontend.WaveFeatures(ApplyFilter(f, w));
        },
        cfg.jobs);
    s.frontend = FrontendName(frontend.kind());
    add(cfg.bands[k], std::move(s));
    CM_VLOG << "band " << cfg.bands[k].low_hz << "-" << cfg.bands[k].high_hz << " EER " << report.entries.back().eer.eer;
  }
  return report;
}

std::string ProbeReport::SummaryCsv() const {
  std::string out = "band_low,band_high,eer,threshold\n";
  char buf[96];
  for (const auto &e : entries) {
    std::snprintf(buf, sizeof(buf), ",%.6f,%.6f\n", e.eer.eer, e.eer.threshold);
    out += (e.band ? HzString(e.band->low_hz) + "," + HzString(e.band->high_hz) : std::string("-,-")) + buf;
  }
  return out;
}

void ProbeReport::Write(const std::string &dir) const {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) Fail(ErrorKind::kIo, "cannot create '" + dir + "': " + ec.message());
  WriteText(fs::path(dir) / "summary.csv", SummaryCsv());
  for (const auto &e : entries) {
    const std::string name =
        e.band ? "hist_" + HzString(e.band->low_hz) + "_" + HzString(e.band->high_hz) + ".csv" : "hist_baseline.csv";
    WriteText(fs::path(dir) / name, e.histogram.ToCsv());
  }
}

}  // namespace cm
