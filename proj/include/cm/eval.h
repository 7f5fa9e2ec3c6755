// include/cm/eval.h

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

#ifndef CM_EVAL_H_
#define CM_EVAL_H_

#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cm/backend.h"
#include "cm/data.h"
#include "cm/frontend.h"

namespace cm {

// Scores in protocol order. Values are stored as written to score files
// (six decimals) so metrics agree with re-ingested files.
struct ScoreSet {
  std::vector<std::pair<std::string, double>> scores;
  std::string fingerprint;
  std::string frontend;

  size_t size() const { return scores.size(); }
  std::map<std::string, double> AsMap() const;
};

double RoundScore(double s);

using FeatureFn = std::function<nn::Tensor<float>(const TrialRecord &)>;

// Scores every trial of the set as a whole. Trials whose features cannot be
// produced are collected; the run then fails listing all of them.
ScoreSet ScoreWith(const nn::ModelParams &params, const ProtocolSet &set, const FeatureFn &features, int jobs = 1);
ScoreSet ScoreTrials(const nn::ModelParams &params, const Frontend &frontend, const ProtocolSet &set, int jobs = 1);

std::string FormatScores(const ScoreSet &scores);
ScoreSet ParseScores(const std::string &text);
void WriteScores(const ScoreSet &scores, const std::string &path);
ScoreSet ReadScores(const std::string &path);

// Splits scores of the protocol's trials by class. Every protocol trial must
// have a score; scores of other trials are ignored.
struct ClassScores {
  std::vector<double> bonafide, spoof;
};
ClassScores SplitByClass(const ScoreSet &scores, const ProtocolSet &set);

struct EerResult {
  double eer = 0;
  double threshold = 0;  // +inf when only the sentinel crosses
  size_t n_bonafide = 0;
  size_t n_spoof = 0;
};

// Pmiss(t) = #bona < t / nb, Pfa(t) = #spoof >= t / ns, t over the sorted
// unique scores plus +inf; EER = (Pmiss + Pfa) / 2 at the first t with
// Pmiss >= Pfa.
EerResult ComputeEer(std::span<const double> bonafide, std::span<const double> spoof);
EerResult ComputeEer(const ScoreSet &scores, const ProtocolSet &set);

struct TdcfParams {
  double c1 = 1.0;   // weighted miss cost
  double c2 = 10.0;  // weighted false-alarm cost
  void Validate() const;
};

// min over the EER sweep of (C1 Pmiss + C2 Pfa) / min(C1, C2).
double MinTdcf(std::span<const double> bonafide, std::span<const double> spoof, const TdcfParams &p);
double MinTdcf(const ScoreSet &scores, const ProtocolSet &set, const TdcfParams &p);

enum class DecomposeBy { kAttack, kCodec };
DecomposeBy ParseDecomposeBy(const std::string &name);

std::map<std::string, EerResult> DecomposeEer(const ScoreSet &scores, const ProtocolSet &set, DecomposeBy by);
std::string DecomposeCsv(const std::map<std::string, EerResult> &table, DecomposeBy by);

struct Histogram {
  std::vector<double> edges;  // n_bins + 1
  std::vector<size_t> bonafide, spoof;
  std::string ToCsv() const;
};

Histogram ScoreHistogram(std::span<const double> bonafide, std::span<const double> spoof, int n_bins);
Histogram ScoreHistogram(const ScoreSet &scores, const ProtocolSet &set, int n_bins);

}  // namespace cm

#endif  // CM_EVAL_H_
