// tests/oracles.h

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

#ifndef CM_TESTS_ORACLES_H_
#define CM_TESTS_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "cm/eval.h"

// Brute-force reference implementations. Shared by the unit tests and the
// acceptance binary.
namespace cm::testing {

struct Rates {
  double pmiss, pfa;
};

inline Rates CountAt(const std::vector<double> &b, const std::vector<double> &s, double t) {
  double m = 0, f = 0;
  for (double v : b) m += v < t;
  for (double v : s) f += v >= t;
  return {m / double(b.size()), f / double(s.size())};
}

inline std::vector<double> Candidates(const std::vector<double> &b, const std::vector<double> &s) {
  std::set<double> c(b.begin(), b.end());
  c.insert(s.begin(), s.end());
  c.insert(std::numeric_limits<double>::infinity());
  return {c.begin(), c.end()};
}

// Direct counting at every candidate threshold; the first crossing wins.
inline EerResult EerOracle(const std::vector<double> &b, const std::vector<double> &s) {
  for (double t : Candidates(b, s)) {
    const Rates r = CountAt(b, s, t);
    if (r.pmiss >= r.pfa) return EerResult{0.5 * (r.pmiss + r.pfa), t, b.size(), s.size()};
  }
  return {};
}

inline double MinSumOracle(const std::vector<double> &b, const std::vector<double> &s) {
  double best = 2;
  for (double t : Candidates(b, s)) {
    const Rates r = CountAt(b, s, t);
    best = std::min(best, r.pmiss + r.pfa);
  }
  return best;
}

struct RandomSet {
  std::vector<double> b, s;
};

// Half the sets use a small integer grid so ties are common.
inline RandomSet MakeSet(std::mt19937_64 &rng, int rep, double min_shift = -INFINITY, size_t min_n = 1) {
  RandomSet out;
  const size_t nb = min_n + rng() % (26 - min_n), ns = min_n + rng() % (26 - min_n);
  std::normal_distribution<double> g;
  const double shift = std::isinf(min_shift) ? g(rng) : min_shift + std::abs(g(rng));
  for (size_t i = 0; i < nb + ns; ++i) {
    double v = g(rng) + (i < nb ? shift : 0.0);
    if (rep % 2) v = std::round(v * 2.0);
    (i < nb ? out.b : out.s).push_back(v);
  }
  return out;
}

// Holm as written: walk the sorted list with thresholds alpha / (m - k + 1).
inline std::vector<bool> HolmOracle(const std::vector<double> &p, double alpha) {
  const size_t m = p.size();
  std::vector<std::pair<double, size_t>> sorted;
  for (size_t i = 0; i < m; ++i) sorted.emplace_back(p[i], i);
  std::sort(sorted.begin(), sorted.end());
  std::vector<bool> out(m, false);
  for (size_t k = 1; k <= m; ++k) {
    if (!(sorted[k - 1].first <= alpha / double(m - k + 1))) break;
    out[sorted[k - 1].second] = true;
  }
  return out;
}

}  // namespace cm::testing

#endif  // CM_TESTS_ORACLES_H_
