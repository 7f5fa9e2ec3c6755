// tests/data_test.cc

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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "cm/data.h"
#include "cm/error.h"
#include "test_util.h"

using namespace cm;
using cm::testing::KindOf;
using cm::testing::Slurp;
using cm::testing::TempDir;

TEST_CASE("asvspoof_la lines") {
  const ProtocolSet s = ParseProtocolText(
      "LA_0079 LA_T_1138215 - - bonafide\n"
      "\n"
      "LA_0079 LA_T_0000001 - A07 spoof\n",
      ProtocolFormat::kAsvspoofLa);
  REQUIRE(s.size() == 2);
  CHECK(s.records[0].trial_id == "LA_T_1138215");
  CHECK(s.records[0].label == Label::kBonafide);
  CHECK_FALSE(s.records[0].attack.has_value());
  CHECK(s.records[1].label == Label::kSpoof);
  CHECK(s.records[1].attack == std::optional<std::string>("A07"));
  CHECK(s.Count(Label::kSpoof) == 1);
  CHECK(s.Find("LA_T_0000001").attack == std::optional<std::string>("A07"));
  CHECK(KindOf([&] { s.Find("nope"); }) == ErrorKind::kLookup);
}

TEST_CASE("asvspoof_la errors name the line") {
  auto msg = [](const std::string &text) -> std::string {
    try {
      ParseProtocolText(text, ProtocolFormat::kAsvspoofLa);
    } catch (const Error &e) {
      return std::to_string(int(e.kind())) + ":" + e.what();
    }
    return "";
  };
  const std::string arity = msg("A B - - bonafide\nA C - bonafide\n");
  CHECK(arity.rfind(std::to_string(int(ErrorKind::kParse)) + ":", 0) == 0);
  CHECK(arity.find("2") != std::string::npos);
  const std::string key = msg("A B - - genuine\n");
  CHECK(key.rfind(std::to_string(int(ErrorKind::kParse)) + ":", 0) == 0);
  CHECK(KindOf([] { ParseProtocolText("A B - - bonafide\nA B - A07 spoof\n", ProtocolFormat::kAsvspoofLa); }) ==
        ErrorKind::kDuplicate);
  CHECK(KindOf([] { ParseProtocolFormat("csv"); }) != ErrorKind::kContract);
}

TEST_CASE("canonical TSV round trip is a fixpoint") {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    ProtocolSet s;
    const int n = 1 + int(rng() % 30);
    for (int i = 0; i < n; ++i) {
      TrialRecord r;
      r.trial_id = "T" + std::to_string(rep) + "_" + std::to_string(i);
      r.label = rng() % 2 ? Label::kSpoof : Label::kBonafide;
      if (r.label == Label::kSpoof && rng() % 3) r.attack = "A" + std::to_string(7 + rng() % 13);
      if (rng() % 2) r.codec = "LA-C" + std::to_string(1 + rng() % 7);
      if (rng() % 2) r.audio_path = "flac/" + r.trial_id + ".wav";
      s.records.push_back(r);
    }
    const std::string tsv = ProtocolToTsv(s);
    CHECK(tsv.rfind("trial_id\tlabel\tattack\tcodec\tpath\n", 0) == 0);
    const ProtocolSet back = ParseProtocolText(tsv, ProtocolFormat::kCanonicalTsv);
    CHECK(back.records == s.records);
    CHECK(ProtocolToTsv(back) == tsv);
  }
  TempDir dir("protocol");
  ProtocolSet s = ParseProtocolText("x y - A10 spoof\n", ProtocolFormat::kAsvspoofLa);
  WriteProtocol(s, (dir / "p.tsv").string());
  CHECK(ParseProtocol((dir / "p.tsv").string(), ProtocolFormat::kCanonicalTsv).records == s.records);
  CHECK(KindOf([&] { ParseProtocol((dir / "absent.tsv").string(), ProtocolFormat::kCanonicalTsv); }) ==
        ErrorKind::kIo);
}

TEST_CASE("audio path falls back to <root>/<id>.wav") {
  ProtocolSet s;
  s.root = "/data";
  TrialRecord a{"A", Label::kBonafide, {}, {}, std::string("x/a.wav")};
  TrialRecord b{"B", Label::kSpoof, {}, {}, {}};
  CHECK(AudioPathOf(s, a) == "/data/x/a.wav");
  CHECK(AudioPathOf(s, b) == "/data/B.wav");
}

TEST_CASE("slice_segments: 10 s -> 4 + 4 + 2, 3 s -> 3") {
  Waveform w = cm::testing::Noise(160000, 1);
  auto seg = SliceSegments(w);
  REQUIRE(seg.size() == 3);
  CHECK(seg[0].samples.size() == 64000);
  CHECK(seg[1].samples.size() == 64000);
  CHECK(seg[2].samples.size() == 32000);
  Waveform s3 = cm::testing::Noise(48000, 2);
  auto one = SliceSegments(s3);
  REQUIRE(one.size() == 1);
  CHECK(one[0].samples == s3.samples);
}

TEST_CASE("short tail merges into the previous segment") {
  // 8.3 s: the 0.3 s remainder is below 0.5 s.
  auto b = SegmentBounds(132800, 64000, 8000);
  REQUIRE(b.size() == 2);
  CHECK(b[1] == std::pair<int, int>(64000, 68800));
  // 8.5 s keeps its tail.
  CHECK(SegmentBounds(136000, 64000, 8000).size() == 3);
}

TEST_CASE("segments partition every length bit-exactly") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 200; ++rep) {
    const size_t n = 1 + rng() % 200000;
    Waveform w = cm::testing::Noise(n, rep);
    std::vector<float> cat;
    for (const Waveform &s : SliceSegments(w)) {
      CHECK(s.samples.size() <= size_t(64000 + 8000));
      cat.insert(cat.end(), s.samples.begin(), s.samples.end());
    }
    CHECK(cat == w.samples);
  }
}

namespace {

std::vector<TrainItem> Items(int count, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<TrainItem> items;
  for (int i = 0; i < count; ++i) {
    TrainItem it;
    const int n = 3 + int(rng() % 8);
    it.features = nn::Tensor<float>({1, n, 2});
    for (auto &v : it.features.data) v = float(i) + 0.25f;
    it.label = i % 2 ? Label::kSpoof : Label::kBonafide;
    items.push_back(std::move(it));
  }
  return items;
}

}  // namespace

TEST_CASE("make_batches: one batch when batch_size covers everything") {
  auto items = Items(5, 1);
  auto batches = MakeBatches(items, 8, 0, 0);
  REQUIRE(batches.size() == 1);
  CHECK(batches[0].features.size() == 5);
}

TEST_CASE("make_batches: padding, labels, valid lengths") {
  auto items = Items(13, 2);
  for (const SegmentBatch &b : MakeBatches(items, 4, 9, 3)) {
    int max_n = 0;
    for (int idx : b.item_index) max_n = std::max(max_n, items[idx].features.shape[1]);
    for (size_t k = 0; k < b.features.size(); ++k) {
      const TrainItem &it = items[b.item_index[k]];
      const auto &f = b.features[k];
      CHECK(f.shape == std::vector<int>{1, max_n, 2});
      CHECK(b.valid_len[k] == it.features.shape[1]);
      CHECK(b.valid_len[k] <= max_n);
      CHECK(b.labels[k] == it.label);
      for (int t = 0; t < max_n; ++t)
        for (int d = 0; d < 2; ++d) {
          const float v = f.data[size_t(t) * 2 + d];
          CHECK(v == (t < b.valid_len[k] ? it.features.data[size_t(t) * 2 + d] : 0.0f));
        }
    }
  }
}

TEST_CASE("make_batches is deterministic and keeps the multiset") {
  auto items = Items(37, 3);
  for (int epoch = 0; epoch < 20; ++epoch) {
    auto a = MakeBatches(items, 5, 42, epoch);
    auto b = MakeBatches(items, 5, 42, epoch);
    REQUIRE(a.size() == b.size());
    std::vector<int> seen;
    for (size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].item_index == b[i].item_index);
      for (size_t k = 0; k < a[i].features.size(); ++k) CHECK(a[i].features[k].data == b[i].features[k].data);
      seen.insert(seen.end(), a[i].item_index.begin(), a[i].item_index.end());
    }
    std::sort(seen.begin(), seen.end());
    for (int i = 0; i < 37; ++i) CHECK(seen[i] == i);
    CHECK(seen.size() == 37);
  }
  CHECK(EpochOrder(37, 42, 0) != EpochOrder(37, 42, 1));
  CHECK(EpochOrder(37, 42, 0) != EpochOrder(37, 43, 0));
}

TEST_CASE("shuffle: each of 4 items leads 200-300 times in 1000 epochs") {
  int first[4] = {0, 0, 0, 0};
  for (int epoch = 0; epoch < 1000; ++epoch) first[EpochOrder(4, 2024, epoch)[0]]++;
  for (int c : first) {
    CHECK(c >= 200);
    CHECK(c <= 300);
  }
}

namespace {

// Fraction of the energy of x in [lo, hi] Hz, from a direct DFT.
double BandEnergyFraction(const std::vector<double> &x, double fs, double lo, double hi) {
  const size_t n = x.size();
  double in = 0, total = 0;
  for (size_t k = 0; k <= n / 2; ++k) {
    std::complex<double> acc = 0;
    for (size_t t = 0; t < n; ++t)
      acc += x[t] * std::polar(1.0, -2 * std::numbers::pi * double((k * t) % n) / double(n));
    const double e = std::norm(acc) * ((k == 0 || 2 * k == n) ? 1.0 : 2.0);
    total += e;
    const double f = double(k) * fs / double(n);
    if (f >= lo && f <= hi) in += e;
  }
  return in / total;
}

}  // namespace

TEST_CASE("synthetic artifact energy sits in its band") {
  SyntheticConfig cfg;
  cfg.min_dur_s = 0.4;
  cfg.max_dur_s = 0.5;
  for (uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    const SyntheticPair p = SynthesizeTrial(cfg, seed, true);
    double eb = 0, ea = 0;
    for (size_t t = 0; t < p.base.size(); ++t) eb += p.base[t] * p.base[t], ea += p.artifact[t] * p.artifact[t];
    CHECK(10 * std::log10(ea / eb) == doctest::Approx(-20.0).epsilon(1e-6));
    CHECK(BandEnergyFraction(p.artifact, cfg.sample_rate_hz, cfg.band_low_hz, cfg.band_high_hz) >= 0.9);
    // The bona fide rendering of the same seed is the base alone.
    const SyntheticPair q = SynthesizeTrial(cfg, seed, false);
    CHECK(q.base == p.base);
    CHECK(std::all_of(q.artifact.begin(), q.artifact.end(), [](double v) { return v == 0.0; }));
  }
  SyntheticConfig bad;
  bad.band_high_hz = 9000;
  CHECK(KindOf([&] { SynthesizeTrial(bad, 1, true); }) == ErrorKind::kParameter);
}

TEST_CASE("synthetic corpus: split arithmetic and byte-identical reruns") {
  SyntheticConfig cfg;
  cfg.n_per_class = 50;
  cfg.min_dur_s = 0.3;
  cfg.max_dur_s = 0.4;
  TempDir a("syn_a"), b("syn_b");
  const ProtocolSet all = GenerateSyntheticDataset(cfg, a.path().string());
  GenerateSyntheticDataset(cfg, b.path().string());
  CHECK(all.size() == 100);
  CHECK(all.Count(Label::kSpoof) == 50);
  const auto train = ParseProtocol((a / "train.tsv").string(), ProtocolFormat::kCanonicalTsv);
  const auto dev = ParseProtocol((a / "dev.tsv").string(), ProtocolFormat::kCanonicalTsv);
  const auto eval = ParseProtocol((a / "eval.tsv").string(), ProtocolFormat::kCanonicalTsv);
  CHECK(train.size() == 60);
  CHECK(dev.size() == 20);
  CHECK(eval.size() == 20);
  CHECK(train.Count(Label::kBonafide) == 30);
  for (const char *f : {"train.tsv", "dev.tsv", "eval.tsv", "all.tsv"}) CHECK(Slurp(a / f) == Slurp(b / f));
  for (const auto &r : all.records) {
    CHECK(Slurp(a.path() / *r.audio_path) == Slurp(b.path() / *r.audio_path));
    CHECK(r.attack.has_value() == (r.label == Label::kSpoof));
  }
  CHECK(KindOf([&] { GenerateSyntheticDataset(cfg, "/proc/cmbench_no_such_dir"); }) == ErrorKind::kIo);
}
