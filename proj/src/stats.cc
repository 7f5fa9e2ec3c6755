// src/stats.cc

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

#include "cm/stats.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "cm/error.h"

namespace cm {

std::vector<bool> ErrorIndicators(const ScoreSet &scores, const ProtocolSet &set) {
  const EerResult eer = ComputeEer(scores, set);
  const auto m = scores.AsMap();
  std::vector<bool> err;
  err.reserve(set.size());
  for (const auto &r : set.records) {
    const double s = m.at(r.trial_id);
    err.push_back(r.label == Label::kBonafide ? s < eer.threshold : s >= eer.threshold);
  }
  return err;
}

double ErrorRatePValue(const std::vector<bool> &a, const std::vector<bool> &b) {
  if (a.size() != b.size() || a.empty()) Fail(ErrorKind::kParameter, "error vectors must be nonempty and equally long");
  if (a == b) return 1.0;
  const double n = double(a.size());
  const double ea = double(std::count(a.begin(), a.end(), true));
  const double eb = double(std::count(b.begin(), b.end(), true));
  const double pa = ea / n, pb = eb / n, pooled = (ea + eb) / (2 * n);
  const double var = pooled * (1 - pooled) * (2 / n);
  if (var <= 0) return 1.0;
  const double z = (pa - pb) / std::sqrt(var);
  return std::min(1.0, std::erfc(std::abs(z) / std::sqrt(2.0)));
}

double EerSignificancePair(const ScoreSet &a, const ScoreSet &b, const ProtocolSet &set) {
  const auto ma = a.AsMap(), mb = b.AsMap();
  bool same = ma.size() == mb.size();
  for (auto ia = ma.begin(), ib = mb.begin(); same && ia != ma.end(); ++ia, ++ib) same = ia->first == ib->first;
  if (!same) Fail(ErrorKind::kParameter, "score sets cover different trials");
  return ErrorRatePValue(ErrorIndicators(a, set), ErrorIndicators(b, set));
}

std::vector<bool> HolmBonferroni(std::span<const double> pvalues, double alpha) {
  if (!(alpha > 0 && alpha < 1)) Fail(ErrorKind::kParameter, "alpha must lie in (0, 1)");
  for (double p : pvalues)
    if (!(p >= 0 && p <= 1)) Fail(ErrorKind::kParameter, "p-value outside [0, 1]");
  const size_t m = pvalues.size();
  std::vector<size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t x, size_t y) { return pvalues[x] < pvalues[y]; });
  std::vector<bool> reject(m, false);
  for (size_t k = 0; k < m; ++k) {
    if (pvalues[order[k]] > alpha / double(m - k)) break;
    reject[order[k]] = true;
  }
  return reject;
}

SignificanceMatrix BuildMatrix(const std::vector<std::pair<std::string, ScoreSet>> &systems, const ProtocolSet &set,
                               double alpha) {
  const size_t m = systems.size();
  if (m < 2) Fail(ErrorKind::kInsufficientInput, "significance testing needs at least two score sets");
  SignificanceMatrix out;
  out.alpha = alpha;
  out.p.assign(m, std::vector<double>(m, 1.0));
  out.reject.assign(m, std::vector<bool>(m, false));
  std::vector<std::vector<bool>> errors;
  for (const auto &[label, s] : systems) {
    out.labels.push_back(label);
    errors.push_back(ErrorIndicators(s, set));
  }
  std::vector<double> flat;
  std::vector<std::pair<size_t, size_t>> pairs;
  for (size_t i = 0; i < m; ++i)
    for (size_t j = i + 1; j < m; ++j) {
      flat.push_back(EerSignificancePair(systems[i].second, systems[j].second, set));
      pairs.emplace_back(i, j);
    }
  const std::vector<bool> rej = HolmBonferroni(flat, alpha);
  for (size_t k = 0; k < pairs.size(); ++k) {
    auto [i, j] = pairs[k];
    out.p[i][j] = out.p[j][i] = flat[k];
    out.reject[i][j] = out.reject[j][i] = rej[k];
  }
  return out;
}

std::string SignificanceMatrix::ToCsv() const {
  std::string out = "labelA,labelB,p,reject\n";
  char buf[64];
  for (size_t i = 0; i < labels.size(); ++i)
    for (size_t j = i + 1; j < labels.size(); ++j) {
      std::snprintf(buf, sizeof(buf), ",%.6g,%d\n", p[i][j], int(reject[i][j]));
      out += labels[i] + "," + labels[j] + buf;
    }
  return out;
}

}  // namespace cm
