// include/cm/train.h

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

#ifndef CM_TRAIN_H_
#define CM_TRAIN_H_

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "cm/backend.h"
#include "cm/data.h"
#include "cm/frontend.h"

namespace cm {

struct TrainConfig {
  double lr0 = 3e-4;
  int halve_every = 10;
  int batch_size = 64;
  int max_epochs = 50;
  int patience = 5;
  uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 5.0;  // global gradient norm; <= 0 disables
  bool desk_scale = false;
  double max_segment_s = kMaxSegmentSeconds;

  void Validate() const;
};

// "lfcc": batch 64, lr0 3e-4. "external": batch 8, lr0 1e-6 scaled by 100 to
// 1e-4 (desk_scale = true). "external_verbatim": batch 8, lr0 1e-6.
TrainConfig TrainPreset(const std::string &name);

// lr0 * 0.5^floor(epoch / halve_every).
double LrAtEpoch(const TrainConfig &cfg, int epoch);

struct AdamState {
  nn::TensorMap<float> m, v;
  int64_t step = 0;
};

// One Adam update with bias correction. Non-finite gradients abort with
// kNumeric before anything is modified.
void AdamStep(nn::TensorMap<float> &params, const nn::TensorMap<float> &grads, AdamState &state, double lr,
              const TrainConfig &cfg);

// Scales grads so their global L2 norm is at most max_norm; returns the norm
// before clipping.
double ClipGlobalNorm(nn::TensorMap<float> &grads, double max_norm);

// Tracks the best dev loss; Update returns true on strict improvement.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience) : patience_(patience) {}
  bool Update(double dev_loss);
  bool ShouldStop() const { return since_best_ >= patience_; }
  double best() const { return best_; }

 private:
  int patience_;
  int since_best_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
};

struct Checkpoint {
  nn::ModelParams params;
  AdamState optim;
  int epoch = -1;
  double best_dev_loss = std::numeric_limits<double>::infinity();
  std::string frontend;  // informational

  std::string Fingerprint() const { return params.spec.Fingerprint(); }
};

constexpr uint32_t kCheckpointVersion = 1;

std::vector<uint8_t> EncodeCheckpoint(const Checkpoint &ckpt);
Checkpoint DecodeCheckpoint(std::span<const uint8_t> bytes);
void SaveCheckpoint(const Checkpoint &ckpt, const std::string &path);
Checkpoint LoadCheckpoint(const std::string &path);

// Throws kKindMismatch when the checkpoint was trained for another layout.
void CheckCompatible(const Checkpoint &ckpt, const nn::ModelSpec &expected);

struct EpochLog {
  int epoch = 0;
  double lr = 0;
  double train_loss = 0;
  double dev_loss = 0;
};

std::string EpochCsvHeader();
std::string EpochCsvRow(const EpochLog &e);

struct TrainData {
  std::vector<TrainItem> train;  // segments
  std::vector<TrainItem> dev;    // whole trials
};

// Extracts training segments and whole dev trials. jobs > 1 extracts in
// parallel; the result does not depend on it.
TrainData PrepareTrainData(const Frontend &frontend, const ProtocolSet &train_set, const ProtocolSet &dev_set,
                           const TrainConfig &cfg, int jobs = 1);

// Mean cross-entropy over whole trials, inference mode.
double MeanLoss(const nn::ModelParams &params, const std::vector<TrainItem> &items);

// One optimization step on a batch; returns the per-item losses.
std::vector<double> TrainStep(nn::ModelParams &params, AdamState &state, const SegmentBatch &batch, double lr,
                              const TrainConfig &cfg);

struct TrainResult {
  Checkpoint best;
  std::vector<EpochLog> log;
};

using EpochCallback = std::function<void(const EpochLog &)>;

// Epoch loop with dev-loss early stopping; returns the best-dev checkpoint.
TrainResult Train(const TrainConfig &cfg, const nn::ModelSpec &spec, const TrainData &data,
                  const EpochCallback &on_epoch = {});

// Seeds of the k rounds: seed + 0 .. seed + k - 1.
std::vector<uint64_t> RoundSeeds(uint64_t seed, int rounds);

}  // namespace cm

#endif  // CM_TRAIN_H_
