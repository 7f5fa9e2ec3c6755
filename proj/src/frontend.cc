// src/frontend.cc

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

#include "cm/frontend.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <filesystem>
#include <sstream>

#include "cm/binio.h"
#include "cm/error.h"

namespace cm {

namespace fs = std::filesystem;

namespace {

const uint8_t kMagic[4] = {'C', 'M', 'F', '1'};
constexpr size_t kHeaderBytes = 20;

FeatureShape ParseHeader(ByteReader &r, size_t total) {
  auto magic = r.Take(4);
  if (!std::equal(magic.begin(), magic.end(), kMagic)) Fail(ErrorKind::kCorrupt, "not a CMFEAT file (bad magic)");
  const uint32_t version = r.U32();
  if (version != kCmfeatVersion)
    Fail(ErrorKind::kVersion, "unsupported CMFEAT version " + std::to_string(version));
  const uint32_t k = r.U32(), n = r.U32(), d = r.U32();
  if (k == 0 || n == 0 || d == 0 || k > (1u << 16) || n > (1u << 28) || d > (1u << 20))
    Fail(ErrorKind::kCorrupt, "CMFEAT shape out of range");
  const uint64_t count = uint64_t(k) * n * d;
  if (total != kHeaderBytes + 4 * count + 4)
    Fail(ErrorKind::kCorrupt, "CMFEAT size " + std::to_string(total) + " does not match shape " +
                                  std::to_string(k) + "x" + std::to_string(n) + "x" + std::to_string(d));
  return FeatureShape{int(k), int(n), int(d)};
}

}  // namespace

FeatureSequence MultiLayerFeatures::Layer(int k) const {
  if (k < 0 || k >= num_layers) Fail(ErrorKind::kParameter, "layer index out of range");
  FeatureSequence s(num_frames, dim);
  std::copy_n(layer(k), size_t(num_frames) * dim, s.data.begin());
  return s;
}

nn::Tensor<float> MultiLayerFeatures::ToTensor() const { return nn::Tensor<float>({num_layers, num_frames, dim}, data); }

MultiLayerFeatures MultiLayerFeatures::FromSequence(const FeatureSequence &seq) {
  MultiLayerFeatures f(1, seq.num_frames, seq.dim);
  f.data = seq.data;
  return f;
}

MultiLayerFeatures MultiLayerFeatures::FromTensor(const nn::Tensor<float> &t) {
  if (t.rank() != 3) Fail(ErrorKind::kShape, "features must be [K x N x D]");
  MultiLayerFeatures f(t.dim(0), t.dim(1), t.dim(2));
  f.data = t.data;
  return f;
}

std::vector<uint8_t> EncodeFeatures(const MultiLayerFeatures &f) {
  if (f.num_layers < 1 || f.num_frames < 1 || f.dim < 1)
    Fail(ErrorKind::kShape, "CMFEAT needs K, N, D >= 1");
  if (f.data.size() != size_t(f.num_layers) * f.num_frames * f.dim)
    Fail(ErrorKind::kShape, "feature data size does not match K x N x D");
  ByteWriter w;
  w.PutBytes(kMagic);
  w.PutU32(kCmfeatVersion);
  w.PutU32(uint32_t(f.num_layers));
  w.PutU32(uint32_t(f.num_frames));
  w.PutU32(uint32_t(f.dim));
  for (float v : f.data) w.PutF32(v);
  const uint32_t crc = Crc32(std::span<const uint8_t>(w.bytes()).subspan(kHeaderBytes));
  w.PutU32(crc);
  return std::move(w.bytes());
}

MultiLayerFeatures DecodeFeatures(std::span<const uint8_t> bytes) {
  if (bytes.size() < kHeaderBytes + 4) Fail(ErrorKind::kCorrupt, "CMFEAT file truncated");
  ByteReader r(bytes);
  FeatureShape s = ParseHeader(r, bytes.size());
  auto payload = bytes.subspan(kHeaderBytes, bytes.size() - kHeaderBytes - 4);
  ByteReader tail(bytes.subspan(bytes.size() - 4));
  if (Crc32(payload) != tail.U32()) Fail(ErrorKind::kCorrupt, "CMFEAT checksum mismatch");
  MultiLayerFeatures f(s.num_layers, s.num_frames, s.dim);
  for (float &v : f.data) {
    v = r.F32();
    if (!std::isfinite(v)) Fail(ErrorKind::kCorrupt, "CMFEAT holds non-finite values");
  }
  return f;
}

void WriteFeatures(const fs::path &path, const MultiLayerFeatures &f) { WriteFileBytes(path, EncodeFeatures(f)); }

MultiLayerFeatures ReadFeatures(const fs::path &path) {
  try {
    return DecodeFeatures(ReadFileBytes(path));
  } catch (const Error &e) {
    if (e.kind() == ErrorKind::kIo) throw;
    Fail(e.kind(), path.string() + ": " + e.what());
  }
}

FeatureShape PeekFeatures(const fs::path &path) {
  std::error_code ec;
  const auto total = fs::file_size(path, ec);
  if (ec) Fail(ErrorKind::kIo, "cannot stat '" + path.string() + "': " + ec.message());
  std::ifstream in(path, std::ios::binary);
  std::vector<uint8_t> head(kHeaderBytes);
  if (!in.read(reinterpret_cast<char *>(head.data()), std::streamsize(head.size())))
    Fail(ErrorKind::kCorrupt, path.string() + ": CMFEAT file truncated");
  ByteReader r(head);
  try {
    return ParseHeader(r, size_t(total));
  } catch (const Error &e) {
    Fail(e.kind(), path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

FeatureManifest FeatureManifest::Load(const std::string &path) {
  auto bytes = ReadFileBytes(path);
  std::istringstream is(std::string(bytes.begin(), bytes.end()));
  const fs::path root = fs::path(path).parent_path();
  FeatureManifest m;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "trial_id\tpath") Fail(ErrorKind::kParse, path + ": expected header 'trial_id<TAB>path'");
      continue;
    }
    const size_t tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos || tab == 0 ||
        tab + 1 == line.size())
      Fail(ErrorKind::kParse, path + " line " + std::to_string(line_no) + ": expected 'trial_id<TAB>path'");
    const std::string id = line.substr(0, tab);
    fs::path file = line.substr(tab + 1);
    if (file.is_relative()) file = root / file;
    if (m.paths_.count(id))
      Fail(ErrorKind::kDuplicate, path + " line " + std::to_string(line_no) + ": duplicate trial_id '" + id + "'");
    if (!fs::exists(file)) Fail(ErrorKind::kIo, path + ": feature file for '" + id + "' missing: " + file.string());
    const FeatureShape s = PeekFeatures(file);
    if (m.paths_.empty()) {
      m.num_layers_ = s.num_layers;
      m.dim_ = s.dim;
    } else if (s.num_layers != m.num_layers_ || s.dim != m.dim_) {
      Fail(ErrorKind::kCorrupt, file.string() + ": K=" + std::to_string(s.num_layers) + " D=" + std::to_string(s.dim) +
                                    " disagrees with manifest K=" + std::to_string(m.num_layers_) +
                                    " D=" + std::to_string(m.dim_));
    }
    m.paths_.emplace(id, file.string());
  }
  if (m.paths_.empty()) Fail(ErrorKind::kConfig, path + ": manifest lists no trials");
  return m;
}

void FeatureManifest::Write(const std::string &path, const std::vector<std::pair<std::string, std::string>> &rows) {
  std::string text = "trial_id\tpath\n";
  for (const auto &[id, p] : rows) text += id + "\t" + p + "\n";
  WriteFileBytes(path, std::span<const uint8_t>(reinterpret_cast<const uint8_t *>(text.data()), text.size()));
}

const std::string &FeatureManifest::PathOf(const std::string &trial_id) const {
  auto it = paths_.find(trial_id);
  if (it == paths_.end()) Fail(ErrorKind::kLookup, "trial '" + trial_id + "' not in feature manifest");
  return it->second;
}

MultiLayerFeatures FeatureManifest::LoadFeatures(const std::string &trial_id) const {
  MultiLayerFeatures f = ReadFeatures(PathOf(trial_id));
  if (f.num_layers != num_layers_ || f.dim != dim_)
    Fail(ErrorKind::kCorrupt, PathOf(trial_id) + ": shape changed since the manifest was loaded");
  return f;
}

// ---------------------------------------------------------------------------

FeatureSequence CombineLayers(const MultiLayerFeatures &features, std::span<const float> raw) {
  if (int(raw.size()) != features.num_layers)
    Fail(ErrorKind::kShape, "layer weights K=" + std::to_string(raw.size()) + " but features K=" +
                                std::to_string(features.num_layers));
  std::vector<double> w(raw.begin(), raw.end());
  w = nn::Softmax(w);
  FeatureSequence out(features.num_frames, features.dim);
  const size_t plane = out.data.size();
  for (size_t i = 0; i < plane; ++i) {
    double acc = 0.0;
    for (int k = 0; k < features.num_layers; ++k) acc += w[size_t(k)] * features.layer(k)[i];
    out.data[i] = float(acc);
  }
  return out;
}

FeatureSequence Project(const FeatureSequence &features, const nn::Tensor<float> &weight,
                        const nn::Tensor<float> &bias) {
  if (weight.rank() != 2 || weight.dim(0) != features.dim || bias.rank() != 1 || bias.dim(0) != weight.dim(1))
    Fail(ErrorKind::kShape, "projection " + nn::ShapeString(weight.shape) + " does not accept dim " +
                                std::to_string(features.dim));
  const int dout = weight.dim(1);
  FeatureSequence out(features.num_frames, dout, features.frame_shift_s);
  for (int t = 0; t < features.num_frames; ++t)
    for (int j = 0; j < dout; ++j) {
      double acc = bias[size_t(j)];
      for (int i = 0; i < features.dim; ++i) acc += double(features.at(t, i)) * weight[size_t(i) * dout + j];
      out.at(t, j) = float(acc);
    }
  return out;
}

const char *FrontendName(FrontendKind kind) {
  switch (kind) {
    case FrontendKind::kLfcc: return "lfcc";
    case FrontendKind::kExternal: return "external";
    case FrontendKind::kExternalWeighted: return "external_weighted";
  }
  return "?";
}

FrontendKind ParseFrontend(const std::string &name) {
  if (name == "lfcc") return FrontendKind::kLfcc;
  if (name == "external") return FrontendKind::kExternal;
  if (name == "external_weighted") return FrontendKind::kExternalWeighted;
  Fail(ErrorKind::kConfig, "unknown front end '" + name + "' (expected lfcc, external or external_weighted)");
}

nn::Tensor<float> Frontend::WaveFeatures(const Waveform &) const {
  Fail(ErrorKind::kUnsupportedFrontend,
       std::string("front end '") + FrontendName(kind()) +
           "' reads stored features; filter the audio and re-export the features offline instead");
}

namespace {

class LfccFrontend : public Frontend {
 public:
  explicit LfccFrontend(const LfccConfig &cfg) : cfg_(cfg) {}

  FrontendKind kind() const override { return FrontendKind::kLfcc; }

  nn::ModelSpec Spec(nn::BackendKind backend) const override {
    nn::ModelSpec s;
    s.backend = backend;
    s.feature_dim = cfg_.OutputDim();
    return s;
  }

  nn::Tensor<float> TrialFeatures(const ProtocolSet &set, const TrialRecord &r) const override {
    return WaveFeatures(ReadWav(AudioPathOf(set, r)));
  }

  std::vector<nn::Tensor<float>> TrainingSegments(const ProtocolSet &set, const TrialRecord &r,
                                                  double max_dur_s) const override {
    std::vector<nn::Tensor<float>> out;
    for (const Waveform &seg : SliceSegments(ReadWav(AudioPathOf(set, r)), max_dur_s))
      out.push_back(WaveFeatures(seg));
    return out;
  }

  bool HasWaveformAccess() const override { return true; }

  nn::Tensor<float> WaveFeatures(const Waveform &wave) const override {
    return MultiLayerFeatures::FromSequence(ExtractLfcc(wave, cfg_)).ToTensor();
  }

 private:
  LfccConfig cfg_;
};

class ExternalFrontend : public Frontend {
 public:
  explicit ExternalFrontend(const FrontendConfig &cfg)
      : cfg_(cfg), manifest_(FeatureManifest::Load(cfg.manifest)) {}

  FrontendKind kind() const override { return cfg_.kind; }

  nn::ModelSpec Spec(nn::BackendKind backend) const override {
    nn::ModelSpec s;
    s.backend = backend;
    s.feature_dim = manifest_.dim();
    s.num_layers = manifest_.num_layers();
    s.weighted_layers = cfg_.kind == FrontendKind::kExternalWeighted;
    s.project = cfg_.project;
    s.proj_dim = cfg_.proj_dim;
    return s;
  }

  nn::Tensor<float> TrialFeatures(const ProtocolSet &, const TrialRecord &r) const override {
    return manifest_.LoadFeatures(r.trial_id).ToTensor();
  }

  std::vector<nn::Tensor<float>> TrainingSegments(const ProtocolSet &set, const TrialRecord &r,
                                                  double max_dur_s) const override {
    const nn::Tensor<float> whole = TrialFeatures(set, r);
    const int k = whole.dim(0), n = whole.dim(1), d = whole.dim(2);
    const int max_len = std::max(1, int(std::lround(max_dur_s * cfg_.frames_per_second)));
    const int min_tail = int(std::lround(kMinTailSeconds * cfg_.frames_per_second));
    std::vector<nn::Tensor<float>> out;
    for (auto [start, len] : SegmentBounds(n, max_len, min_tail)) {
      nn::Tensor<float> seg({k, len, d});
      for (int l = 0; l < k; ++l)
        std::copy_n(whole.data.begin() + ptrdiff_t((size_t(l) * n + start) * d), size_t(len) * d,
                    seg.data.begin() + ptrdiff_t(size_t(l) * len * d));
      out.push_back(std::move(seg));
    }
    return out;
  }

 private:
  FrontendConfig cfg_;
  FeatureManifest manifest_;
};

}  // namespace

std::unique_ptr<Frontend> MakeFrontend(const FrontendConfig &cfg) {
  if (cfg.kind == FrontendKind::kLfcc) {
    cfg.lfcc.Validate(16000);
    return std::make_unique<LfccFrontend>(cfg.lfcc);
  }
  if (cfg.manifest.empty())
    Fail(ErrorKind::kConfig, std::string("front end '") + FrontendName(cfg.kind) + "' needs a feature manifest");
  if (cfg.project && cfg.proj_dim < 1) Fail(ErrorKind::kConfig, "proj_dim must be >= 1");
  if (!(cfg.frames_per_second > 0)) Fail(ErrorKind::kConfig, "frames_per_second must be positive");
  return std::make_unique<ExternalFrontend>(cfg);
}

FeatureSequence FrontendOutput(const nn::ModelParams &params, const nn::Tensor<float> &raw) {
  const nn::ModelSpec &spec = params.spec;
  MultiLayerFeatures f = MultiLayerFeatures::FromTensor(raw);
  if (f.num_layers != spec.num_layers || f.dim != spec.feature_dim)
    Fail(ErrorKind::kShape, "features " + nn::ShapeString(raw.shape) + " do not fit model " + spec.Fingerprint());
  FeatureSequence a = spec.weighted_layers ? CombineLayers(f, params.weights.at("frontend.layer_weights").data)
                                           : f.Layer(f.num_layers - 1);
  if (spec.project) a = Project(a, params.weights.at("frontend.proj.weight"), params.weights.at("frontend.proj.bias"));
  return a;
}

}  // namespace cm
