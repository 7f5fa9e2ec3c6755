// include/cm/frontend.h

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

#ifndef CM_FRONTEND_H_
#define CM_FRONTEND_H_

#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cm/autodiff.h"
#include "cm/backend.h"
#include "cm/data.h"
#include "cm/dsp.h"

namespace cm {

// K layers of N x D features, layer-major.
struct MultiLayerFeatures {
  int num_layers = 0;
  int num_frames = 0;
  int dim = 0;
  std::vector<float> data;

  MultiLayerFeatures() = default;
  MultiLayerFeatures(int k, int n, int d) : num_layers(k), num_frames(n), dim(d), data(size_t(k) * n * d, 0.0f) {}

  float *layer(int k) { return data.data() + size_t(k) * num_frames * dim; }
  const float *layer(int k) const { return data.data() + size_t(k) * num_frames * dim; }
  FeatureSequence Layer(int k) const;
  nn::Tensor<float> ToTensor() const;
  static MultiLayerFeatures FromSequence(const FeatureSequence &seq);
  static MultiLayerFeatures FromTensor(const nn::Tensor<float> &t);
};

// CMFEAT: "CMF1", u32 version, K, N, D, K*N*D f32, u32 CRC32 of the floats;
// everything little-endian.
constexpr uint32_t kCmfeatVersion = 1;

std::vector<uint8_t> EncodeFeatures(const MultiLayerFeatures &f);
MultiLayerFeatures DecodeFeatures(std::span<const uint8_t> bytes);
void WriteFeatures(const std::filesystem::path &path, const MultiLayerFeatures &f);
MultiLayerFeatures ReadFeatures(const std::filesystem::path &path);

struct FeatureShape {
  int num_layers = 0, num_frames = 0, dim = 0;
};
// Header only; validates magic, version and the size implied by the shape.
FeatureShape PeekFeatures(const std::filesystem::path &path);

// trial_id -> feature file, with the K and D every file shares.
class FeatureManifest {
 public:
  // Paths resolve against the manifest's directory. Every file must exist
  // and agree on K and D.
  static FeatureManifest Load(const std::string &path);
  static void Write(const std::string &path, const std::vector<std::pair<std::string, std::string>> &rows);

  bool has(const std::string &trial_id) const { return paths_.count(trial_id) > 0; }
  const std::string &PathOf(const std::string &trial_id) const;
  MultiLayerFeatures LoadFeatures(const std::string &trial_id) const;
  int num_layers() const { return num_layers_; }
  int dim() const { return dim_; }
  size_t size() const { return paths_.size(); }

 private:
  std::map<std::string, std::string> paths_;
  int num_layers_ = 0;
  int dim_ = 0;
};

// softmax(raw)-weighted sum of the layers.
FeatureSequence CombineLayers(const MultiLayerFeatures &features, std::span<const float> raw);

// Per-frame affine map: weight [D x Dout], bias [Dout].
FeatureSequence Project(const FeatureSequence &features, const nn::Tensor<float> &weight,
                        const nn::Tensor<float> &bias);

enum class FrontendKind { kLfcc, kExternal, kExternalWeighted };

const char *FrontendName(FrontendKind kind);
FrontendKind ParseFrontend(const std::string &name);

struct FrontendConfig {
  FrontendKind kind = FrontendKind::kLfcc;
  LfccConfig lfcc;
  std::string manifest;             // external kinds
  bool project = true;              // external kinds only
  int proj_dim = 128;
  double frames_per_second = 50.0;  // external feature rate, for segmentation
};

// Turns trials into raw model input [K x N x D]. Projection and layer
// weighting are trainable and live in the model (see ModelSpec).
class Frontend {
 public:
  virtual ~Frontend() = default;
  virtual FrontendKind kind() const = 0;
  // Model layout this front end feeds.
  virtual nn::ModelSpec Spec(nn::BackendKind backend) const = 0;
  // Whole trial, as scored at inference.
  virtual nn::Tensor<float> TrialFeatures(const ProtocolSet &set, const TrialRecord &r) const = 0;
  // Training segments of at most max_dur_s each.
  virtual std::vector<nn::Tensor<float>> TrainingSegments(const ProtocolSet &set, const TrialRecord &r,
                                                          double max_dur_s) const = 0;
  // Whether features can be recomputed from (filtered) audio.
  virtual bool HasWaveformAccess() const { return false; }
  virtual nn::Tensor<float> WaveFeatures(const Waveform &wave) const;
};

std::unique_ptr<Frontend> MakeFrontend(const FrontendConfig &cfg);

// Front-end output after layer weighting and projection, inference mode:
// the sequence the back end consumes.
FeatureSequence FrontendOutput(const nn::ModelParams &params, const nn::Tensor<float> &raw);

}  // namespace cm

#endif  // CM_FRONTEND_H_
