// tests/eval_test.cc

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
#include <limits>
#include <random>
#include <set>

#include "cm/eval.h"
#include "oracles.h"
#include "test_util.h"

using namespace cm;
using cm::testing::EerOracle;
using cm::testing::KindOf;
using cm::testing::MakeSet;
using cm::testing::MinSumOracle;
using cm::testing::RandomSet;
using cm::testing::TempDir;

namespace {

ProtocolSet MakeProtocol(const std::vector<std::pair<Label, std::optional<std::string>>> &rows) {
  ProtocolSet p;
  for (size_t i = 0; i < rows.size(); ++i)
    p.records.push_back(TrialRecord{"T" + std::to_string(i), rows[i].first, {}, {}, {}});
  return p;
}

}  // namespace

TEST_CASE("EER edge examples") {
  const std::vector<double> b = {0.9, 0.8}, s = {0.1, 0.2};
  CHECK(ComputeEer(b, s).eer == 0.0);
  const std::vector<double> same = {0.3, 0.1, 0.7, 0.7};
  CHECK(ComputeEer(same, same).eer == 0.5);
  CHECK(KindOf([&] { ComputeEer(b, std::vector<double>{}); }) == ErrorKind::kMetric);
  // Fully inverted scores: every bona fide trial is a miss before the first
  // spoof one stops being a false alarm.
  const EerResult worst = ComputeEer(s, b);
  CHECK(worst.eer == 1.0);
  CHECK(worst.threshold == 0.8);
  // Nothing crosses before the sentinel.
  const EerResult top = ComputeEer(std::vector<double>{1.0}, std::vector<double>{1.0});
  CHECK(top.eer == 0.5);
  CHECK(std::isinf(top.threshold));
  // A coarse grid can push a better-than-chance system past 0.5.
  CHECK(ComputeEer(std::vector<double>{4}, std::vector<double>{4, 1, 4, 5, 0, 0}).eer == doctest::Approx(7.0 / 12));
}

TEST_CASE("EER matches the counting oracle on 200 random sets") {
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 200; ++rep) {
    const RandomSet r = MakeSet(rng, rep);
    const EerResult got = ComputeEer(r.b, r.s);
    const EerResult want = EerOracle(r.b, r.s);
    CHECK(std::abs(got.eer - want.eer) < 1e-9);
    CHECK(got.threshold == want.threshold);
    CHECK(got.n_bonafide == r.b.size());
    CHECK(got.eer >= 0.0);
    CHECK(got.eer <= 1.0);
    // Strictly increasing transform.
    std::vector<double> tb, ts;
    for (double v : r.b) tb.push_back(3 * v * v * v + v - 7);
    for (double v : r.s) ts.push_back(3 * v * v * v + v - 7);
    CHECK(std::abs(ComputeEer(tb, ts).eer - got.eer) < 1e-12);
  }
}

// The 0.5 ceiling belongs to systems better than chance, not to the metric:
// here at least 5 trials per class and bona fide shifted up by >= 2 sigma.
TEST_CASE("EER of systems that rank bona fide higher stays in [0, 0.5]") {
  std::mt19937_64 rng(19);
  for (int rep = 0; rep < 200; ++rep) {
    const RandomSet r = MakeSet(rng, rep, 2.0, 5);
    const EerResult got = ComputeEer(r.b, r.s);
    CHECK(got.eer == EerOracle(r.b, r.s).eer);
    CHECK(got.eer >= 0.0);
    CHECK(got.eer <= 0.5);
  }
}

TEST_CASE("min t-DCF against the oracle") {
  std::mt19937_64 rng(23);
  const TdcfParams unit{1.0, 1.0}, dflt;
  for (int rep = 0; rep < 200; ++rep) {
    const RandomSet r = MakeSet(rng, rep);
    CHECK(std::abs(MinTdcf(r.b, r.s, unit) - MinSumOracle(r.b, r.s)) < 1e-9);
    const double d = MinTdcf(r.b, r.s, dflt);
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);
  }
  const std::vector<double> b = {0.9, 0.8}, s = {0.1, 0.2};
  CHECK(MinTdcf(b, s, dflt) == 0.0);
  CHECK(MinTdcf(s, b, dflt) == 1.0);
  CHECK(KindOf([] { TdcfParams{0.0, 1.0}.Validate(); }) == ErrorKind::kParameter);
}

TEST_CASE("decomposed EER") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> g;
  ProtocolSet set;
  ScoreSet scores;
  const char *attacks[3] = {"A07", "A08", "A09"};
  const char *codecs[2] = {"C1", "C2"};
  for (int i = 0; i < 90; ++i) {
    TrialRecord r;
    r.trial_id = "T" + std::to_string(i);
    r.label = i % 3 == 0 ? Label::kBonafide : Label::kSpoof;
    if (r.label == Label::kSpoof) r.attack = attacks[rng() % 3];
    r.codec = codecs[rng() % 2];
    set.records.push_back(r);
    scores.scores.emplace_back(r.trial_id, g(rng) + (r.label == Label::kBonafide ? 1.0 : 0.0));
  }
  const auto m = scores.AsMap();
  const auto by_attack = DecomposeEer(scores, set, DecomposeBy::kAttack);
  REQUIRE(by_attack.size() == 3);
  for (const auto &[a, res] : by_attack) {
    std::vector<double> b, s;
    for (const auto &r : set.records)
      if (r.label == Label::kBonafide) b.push_back(m.at(r.trial_id));
      else if (*r.attack == a) s.push_back(m.at(r.trial_id));
    CHECK(res.eer == EerOracle(b, s).eer);
    CHECK(res.n_bonafide == 30);
  }
  const auto by_codec = DecomposeEer(scores, set, DecomposeBy::kCodec);
  REQUIRE(by_codec.size() == 2);
  for (const auto &[c, res] : by_codec) {
    std::vector<double> b, s;
    for (const auto &r : set.records)
      if (*r.codec == c) (r.label == Label::kBonafide ? b : s).push_back(m.at(r.trial_id));
    CHECK(res.eer == EerOracle(b, s).eer);
  }
  const std::string csv = DecomposeCsv(by_attack, DecomposeBy::kAttack);
  CHECK(csv.rfind("attack,eer,threshold,n_bonafide,n_spoof\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);

  // One attack: a single row equal to the pooled EER.
  ProtocolSet one = set;
  for (auto &r : one.records)
    if (r.attack) r.attack = "A10";
  const auto single = DecomposeEer(scores, one, DecomposeBy::kAttack);
  REQUIRE(single.size() == 1);
  CHECK(single.at("A10").eer == ComputeEer(scores, one).eer);

  // An attack scored below every bona fide trial has EER 0 whatever the pool does.
  ProtocolSet easy = set;
  ScoreSet easy_scores = scores;
  for (size_t i = 0; i < easy.records.size(); ++i)
    if (easy.records[i].attack && *easy.records[i].attack == "A09") easy_scores.scores[i].second = -100.0;
  CHECK(DecomposeEer(easy_scores, easy, DecomposeBy::kAttack).at("A09").eer == 0.0);
  CHECK(ComputeEer(easy_scores, easy).eer > 0.0);

  ProtocolSet untagged = set;
  for (auto &r : untagged.records) r.codec.reset();
  CHECK(KindOf([&] { DecomposeEer(scores, untagged, DecomposeBy::kCodec); }) == ErrorKind::kMetric);
}

TEST_CASE("histogram") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> b(5000), s(3000);
  for (double &v : b) v = u(rng);
  for (double &v : s) v = u(rng);
  b[0] = 0.0;
  s[0] = 1.0;
  const Histogram h = ScoreHistogram(b, s, 10);
  REQUIRE(h.edges.size() == 11);
  size_t sb = 0, ss = 0;
  for (int i = 0; i < 10; ++i) {
    sb += h.bonafide[size_t(i)];
    ss += h.spoof[size_t(i)];
    const double sigma = std::sqrt(5000 * 0.1 * 0.9);
    CHECK(std::abs(double(h.bonafide[size_t(i)]) - 500.0) < 5 * sigma);
  }
  CHECK(sb == 5000);
  CHECK(ss == 3000);

  const std::vector<double> flat = {0.25, 0.25, 0.25};
  const Histogram f = ScoreHistogram(flat, std::vector<double>{0.25}, 5);
  CHECK(f.bonafide[0] == 3);
  CHECK(f.spoof[0] == 1);
  for (int i = 1; i < 5; ++i) CHECK(f.bonafide[size_t(i)] + f.spoof[size_t(i)] == 0);
  CHECK(KindOf([] { ScoreHistogram(std::vector<double>{}, std::vector<double>{}, 5); }) == ErrorKind::kMetric);
  const std::string csv = f.ToCsv();
  CHECK(csv.find("\nbonafide,3,0,0,0,0\n") != std::string::npos);
}

TEST_CASE("score files") {
  ScoreSet s;
  s.scores = {{"a", 1.25}, {"b", -0.0000004}, {"c", 3.1234567}};
  const std::string text = FormatScores(s);
  CHECK(text == "a\t1.250000\nb\t-0.000000\nc\t3.123457\n");
  const ScoreSet back = ParseScores(text);
  CHECK(back.scores[2].second == RoundScore(3.1234567));
  CHECK(FormatScores(back) == text);
  CHECK(RoundScore(-0.0000004) == 0.0);
  CHECK_FALSE(std::signbit(RoundScore(-0.0000004)));
  CHECK(KindOf([] { ParseScores("a\t1\na\t2\n"); }) == ErrorKind::kDuplicate);
  CHECK(KindOf([] { ParseScores("a 1\n"); }) == ErrorKind::kParse);
  CHECK(KindOf([] { ParseScores("a\tnan\n"); }) == ErrorKind::kParse);
  const ProtocolSet p = MakeProtocol({{Label::kBonafide, {}}, {Label::kSpoof, {}}});
  ScoreSet partial;
  partial.scores = {{"T0", 1.0}};
  CHECK(KindOf([&] { ComputeEer(partial, p); }) == ErrorKind::kLookup);
}

namespace {

Waveform Chirp(double seconds, uint64_t seed) {
  Waveform w = cm::testing::Noise(size_t(seconds * 16000), seed, 0.1);
  for (size_t i = 0; i < w.samples.size(); ++i)
    w.samples[i] += float(0.3 * std::sin(2 * std::numbers::pi * (200.0 + 30.0 * double(i) / 16000) * double(i) / 16000));
  return w;
}

}  // namespace

TEST_CASE("trials are scored whole, not as a mean of slices") {
  TempDir dir("whole");
  WriteWav(dir / "long.wav", Chirp(10.0, 1));
  ProtocolSet set;
  set.root = dir.path().string();
  set.records.push_back(TrialRecord{"long", Label::kBonafide, {}, {}, {}});
  auto fe = MakeFrontend(FrontendConfig{});
  for (nn::BackendKind kind : {nn::BackendKind::kGF, nn::BackendKind::kLGF}) {
    const nn::ModelParams params = nn::InitModel(fe->Spec(kind), 3);
    const ScoreSet scored = ScoreTrials(params, *fe, set);
    const double whole = nn::ScoreFromLogits(nn::ForwardTrial(params, fe->TrialFeatures(set, set.records[0])));
    CHECK(scored.scores[0].second == RoundScore(whole));
    double mean = 0;
    const auto segs = fe->TrainingSegments(set, set.records[0], 4.0);
    REQUIRE(segs.size() == 3);
    for (const auto &seg : segs) mean += nn::ScoreFromLogits(nn::ForwardTrial(params, seg)) / 3.0;
    CHECK(std::abs(mean - whole) > 1e-5);
    // Repeated and parallel runs agree exactly.
    CHECK(FormatScores(ScoreTrials(params, *fe, set, 4)) == FormatScores(scored));
  }
}

TEST_CASE("zero-parameter GF scores 0; missing trials are listed together") {
  TempDir dir("zero");
  for (int i = 0; i < 3; ++i) WriteWav(dir / ("t" + std::to_string(i) + ".wav"), Chirp(1.0, uint64_t(i)));
  ProtocolSet set;
  set.root = dir.path().string();
  for (int i = 0; i < 3; ++i)
    set.records.push_back(TrialRecord{"t" + std::to_string(i), i ? Label::kSpoof : Label::kBonafide, {}, {}, {}});
  auto fe = MakeFrontend(FrontendConfig{});
  nn::ModelParams params = nn::InitModel(fe->Spec(nn::BackendKind::kGF), 1);
  for (auto &[name, t] : params.weights) std::fill(t.data.begin(), t.data.end(), 0.0f);
  for (const auto &[id, s] : ScoreTrials(params, *fe, set).scores) CHECK(s == 0.0);

  set.records.push_back(TrialRecord{"gone1", Label::kSpoof, {}, {}, {}});
  set.records.push_back(TrialRecord{"gone2", Label::kSpoof, {}, {}, {}});
  try {
    ScoreTrials(params, *fe, set);
    FAIL("expected an error");
  } catch (const Error &e) {
    const std::string what = e.what();
    CHECK(what.find("2 trial(s)") != std::string::npos);
    CHECK(what.find("gone1") != std::string::npos);
    CHECK(what.find("gone2") != std::string::npos);
  }
}
