// include/cm/stats.h

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

#ifndef CM_STATS_H_
#define CM_STATS_H_

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cm/data.h"
#include "cm/eval.h"

namespace cm {

// Per-trial error indicators (in protocol order) at the system's own EER
// threshold: bona fide below it, or spoof at or above it.
std::vector<bool> ErrorIndicators(const ScoreSet &scores, const ProtocolSet &set);

// Two-sided two-proportion z-test on error indicators; p = 1 when both
// indicator vectors are identical.
double ErrorRatePValue(const std::vector<bool> &a, const std::vector<bool> &b);

// Both score sets must cover exactly the same trials.
double EerSignificancePair(const ScoreSet &a, const ScoreSet &b, const ProtocolSet &set);

// Holm step-down; flags in input order.
std::vector<bool> HolmBonferroni(std::span<const double> pvalues, double alpha);

struct SignificanceMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> p;
  std::vector<std::vector<bool>> reject;
  double alpha = 0.05;

  // One row per tested pair: labelA,labelB,p,reject.
  std::string ToCsv() const;
};

SignificanceMatrix BuildMatrix(const std::vector<std::pair<std::string, ScoreSet>> &systems, const ProtocolSet &set,
                               double alpha);

}  // namespace cm

#endif  // CM_STATS_H_
