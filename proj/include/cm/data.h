// include/cm/data.h

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

#ifndef CM_DATA_H_
#define CM_DATA_H_

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cm/autodiff.h"
#include "cm/dsp.h"
#include "cm/ops.h"

namespace cm {

using nn::Label;

const char *LabelName(Label label);

struct TrialRecord {
  std::string trial_id;
  Label label = Label::kBonafide;
  std::optional<std::string> attack;
  std::optional<std::string> codec;
  std::optional<std::string> audio_path;  // relative to the protocol's root

  bool operator==(const TrialRecord &) const = default;
};

enum class ProtocolFormat { kAsvspoofLa, kCanonicalTsv };

ProtocolFormat ParseProtocolFormat(const std::string &name);

struct ProtocolSet {
  std::vector<TrialRecord> records;
  std::string subset;  // train, dev, eval or empty
  std::string root;    // directory relative audio paths resolve against

  size_t size() const { return records.size(); }
  size_t Count(Label label) const;
  // Throws kLookup for unknown ids.
  const TrialRecord &Find(const std::string &trial_id) const;
  // Throws kDuplicate on repeated ids.
  void CheckUnique() const;
};

// Audio file of a record: its path under root, or root/<trial_id>.wav.
std::string AudioPathOf(const ProtocolSet &set, const TrialRecord &record);

ProtocolSet ParseProtocolText(const std::string &text, ProtocolFormat format);
ProtocolSet ParseProtocol(const std::string &path, ProtocolFormat format);

// Canonical TSV: trial_id, label, attack, codec, path; "-" for absent fields.
std::string ProtocolToTsv(const ProtocolSet &set);
void WriteProtocol(const ProtocolSet &set, const std::string &path);

// Non-overlapping chunks of at most max_len; a trailing remainder shorter than
// min_tail is merged into the previous chunk. Returns [start, length) pairs.
std::vector<std::pair<int, int>> SegmentBounds(int total, int max_len, int min_tail);

constexpr double kMaxSegmentSeconds = 4.0;
constexpr double kMinTailSeconds = 0.5;

std::vector<Waveform> SliceSegments(const Waveform &wave, double max_dur_s = kMaxSegmentSeconds);

// One training example: raw features [K x N x D].
struct TrainItem {
  nn::Tensor<float> features;
  Label label = Label::kBonafide;
};

struct SegmentBatch {
  std::vector<nn::Tensor<float>> features;  // each [K x max_N x D], zero padded
  std::vector<int> valid_len;
  std::vector<Label> labels;
  std::vector<int> item_index;  // position in the input list
};

// Seeded shuffle keyed on (seed, epoch), then consecutive batches.
std::vector<int> EpochOrder(size_t num_items, uint64_t seed, int epoch);
std::vector<SegmentBatch> MakeBatches(const std::vector<TrainItem> &items, int batch_size,
                                      uint64_t seed, int epoch);

struct SyntheticConfig {
  uint64_t seed = 7;
  int n_per_class = 200;
  double band_low_hz = 2800.0;
  double band_high_hz = 3200.0;
  int sample_rate_hz = 16000;
  double min_dur_s = 1.0;
  double max_dur_s = 3.0;
  double artifact_db = -20.0;  // relative to the base signal
};

// A bona fide rendering and its narrowband artifact. A spoof trial is
// base + artifact.
struct SyntheticPair {
  std::vector<double> base;
  std::vector<double> artifact;
};

SyntheticPair SynthesizeTrial(const SyntheticConfig &cfg, uint64_t trial_seed, bool with_artifact);

// Writes WAVs under out_dir/wav and train.tsv, dev.tsv, eval.tsv plus
// all.tsv. Returns the full set.
ProtocolSet GenerateSyntheticDataset(const SyntheticConfig &cfg, const std::string &out_dir);

}  // namespace cm

#endif  // CM_DATA_H_
