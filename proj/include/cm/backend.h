// include/cm/backend.h

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

#ifndef CM_BACKEND_H_
#define CM_BACKEND_H_

#include <cstdint>
#include <string>
#include <vector>

#include "cm/autodiff.h"
#include "cm/dsp.h"
#include "cm/ops.h"

namespace cm::nn {

// GF = GAP -> FC; LGF = BLSTM x2 -> GAP -> FC; LLGF = LCNN -> BLSTM x2 -> GAP -> FC.
enum class BackendKind { kGF, kLGF, kLLGF };

const char *BackendName(BackendKind kind);
BackendKind ParseBackend(const std::string &name);

// Trainable layout of a full countermeasure: optional layer weighting and
// projection in front of the back end.
struct ModelSpec {
  BackendKind backend = BackendKind::kGF;
  int feature_dim = 60;   // D of the stored / extracted features
  int num_layers = 1;     // K
  bool weighted_layers = false;
  bool project = false;
  int proj_dim = 128;

  int BackendInputDim() const { return project ? proj_dim : feature_dim; }
  // Stable text identity used to refuse incompatible checkpoints.
  std::string Fingerprint() const;
};

struct ModelParams {
  ModelSpec spec;
  uint64_t seed = 0;
  TensorMap<float> weights;  // trainable
  TensorMap<float> buffers;  // batchnorm running statistics
};

ModelParams InitModel(const ModelSpec &spec, uint64_t seed);

// Number of sequence steps and width the LCNN stack produces.
int LcnnSteps(int num_frames);
int LcnnWidth(int input_dim);
// Shortest input the back end accepts.
int MinFrames(BackendKind kind);

struct Logits {
  double bonafide = 0.0;
  double spoof = 0.0;
};

// Higher is more bona fide.
inline double ScoreFromLogits(const Logits &l) { return l.bonafide - l.spoof; }

// Stabilized -log softmax(l)[label].
double CrossEntropyValue(const Logits &l, Label label);

// Builds the back end on a list of [N_i x Din] sequences (valid frames only)
// and returns one [2] logit variable per item. Batchnorm statistics are
// shared across the list in training mode.
template <typename T>
std::vector<Var> BackendForward(Graph<T> &g, ParamBinding<T> &params, TensorMap<T> &buffers,
                                BackendKind kind, const std::vector<Var> &inputs);

// Full model on raw features: each input is [K x N_i x D].
template <typename T>
std::vector<Var> ModelForward(Graph<T> &g, ParamBinding<T> &params, TensorMap<T> &buffers,
                              const ModelSpec &spec, const std::vector<const Tensor<T> *> &inputs);

struct BackendResult {
  Logits logits;
  Graph<float> tape;
};

// Back end only, inference mode. features.dim must equal the back-end input
// dimension; frames at or beyond valid_len never influence the logits.
BackendResult ForwardBackend(const ModelParams &params, const FeatureSequence &features,
                             int valid_len);

// Full model on one trial's raw [K x N x D] features, inference mode.
Logits ForwardTrial(const ModelParams &params, const Tensor<float> &raw);

}  // namespace cm::nn

#endif  // CM_BACKEND_H_
