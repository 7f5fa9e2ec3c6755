// include/cm/probe.h

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

#ifndef CM_PROBE_H_
#define CM_PROBE_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cm/backend.h"
#include "cm/data.h"
#include "cm/eval.h"
#include "cm/frontend.h"

namespace cm {

struct Band {
  double low_hz = 0;
  double high_hz = 0;
  bool operator==(const Band &) const = default;
};

// 0-0.1, 0-0.8, 0.8-2.4, 2.4-4.0, 4.0-5.6, 5.6-7.2, 7.2-8.0 kHz.
std::vector<Band> DefaultBands();
// "default" or a comma list of low-high pairs in Hz, e.g. "0-100,2400-4000".
std::vector<Band> ParseBands(const std::string &spec);

struct ProbeConfig {
  std::vector<Band> bands = DefaultBands();
  int order = 10;
  std::optional<size_t> subset_size;
  uint64_t seed = 0;
  int hist_bins = 50;
  int jobs = 1;
};

// Class-stratified seeded sample without replacement, in protocol order.
ProtocolSet SubsetTrials(const ProtocolSet &set, size_t n, uint64_t seed);

struct ProbeEntry {
  std::optional<Band> band;  // none for the unfiltered baseline
  EerResult eer;
  Histogram histogram;
  ScoreSet scores;
};

struct ProbeReport {
  std::vector<ProbeEntry> entries;  // baseline first, then bands in order

  std::string SummaryCsv() const;
  // summary.csv plus hist_baseline.csv and hist_<low>_<high>.csv.
  void Write(const std::string &dir) const;
};

ProbeReport RunProbe(const nn::ModelParams &params, const Frontend &frontend, const ProtocolSet &set,
                     const ProbeConfig &cfg);

}  // namespace cm

#endif  // CM_PROBE_H_
