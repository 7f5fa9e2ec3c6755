// src/backend.cc

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

#include "cm/backend.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace cm::nn {

namespace {

enum class Step { kConv, kMfm, kPool, kNorm };

struct LcnnStep {
  Step step;
  const char *name = "";
  int in = 0, out = 0, kernel = 0;
};

// LCNN stack: four blocks, 2x2 pooling closes each block.
const std::vector<LcnnStep> &LcnnTable() {
  static const std::vector<LcnnStep> table = {
      {Step::kConv, "lcnn.conv1", 1, 32, 5}, {Step::kMfm}, {Step::kPool},
      {Step::kConv, "lcnn.conv2", 16, 32, 1}, {Step::kMfm}, {Step::kNorm, "lcnn.bn1", 16},
      {Step::kConv, "lcnn.conv3", 16, 48, 3}, {Step::kMfm}, {Step::kPool}, {Step::kNorm, "lcnn.bn2", 24},
      {Step::kConv, "lcnn.conv4", 24, 48, 1}, {Step::kMfm}, {Step::kNorm, "lcnn.bn3", 24},
      {Step::kConv, "lcnn.conv5", 24, 64, 3}, {Step::kMfm}, {Step::kPool},
      {Step::kConv, "lcnn.conv6", 32, 64, 1}, {Step::kMfm}, {Step::kNorm, "lcnn.bn4", 32},
      {Step::kConv, "lcnn.conv7", 32, 32, 3}, {Step::kMfm}, {Step::kNorm, "lcnn.bn5", 16},
      {Step::kConv, "lcnn.conv8", 16, 32, 1}, {Step::kMfm}, {Step::kNorm, "lcnn.bn6", 16},
      {Step::kConv, "lcnn.conv9", 16, 32, 3}, {Step::kMfm}, {Step::kPool},
  };
  return table;
}

constexpr int kLcnnChannels = 16;
constexpr int kLcnnPools = 4;

class Initializer {
 public:
  explicit Initializer(uint64_t seed) : rng_(seed) {}

  Tensor<float> Uniform(std::vector<int> shape, double bound) {
    Tensor<float> t(std::move(shape));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (float &v : t.data) v = float(u(rng_));
    return t;
  }

 private:
  std::mt19937_64 rng_;
};

void AddLinear(TensorMap<float> &w, Initializer &init, const std::string &name, int din, int dout) {
  const double bound = 1.0 / std::sqrt(double(din));
  w[name + ".weight"] = init.Uniform({din, dout}, bound);
  w[name + ".bias"] = init.Uniform({dout}, bound);
}

void AddBlstm(TensorMap<float> &w, Initializer &init, const std::string &name, int dim) {
  if (dim % 2 != 0)
    Fail(ErrorKind::kShape, "blstm width must be even, got " + std::to_string(dim));
  const int h = dim / 2;
  const double bound = 1.0 / std::sqrt(double(h));
  for (const char *dir : {".fwd", ".bwd"}) {
    const std::string p = name + dir;
    w[p + ".w_ih"] = init.Uniform({dim, 4 * h}, bound);
    w[p + ".w_hh"] = init.Uniform({h, 4 * h}, bound);
    Tensor<float> bias = init.Uniform({4 * h}, bound);
    for (int j = h; j < 2 * h; ++j) bias.data[size_t(j)] += 1.0f;  // forget gate
    w[p + ".bias"] = std::move(bias);
  }
}

template <typename T>
LstmWeights BindLstm(ParamBinding<T> &p, const std::string &name) {
  return LstmWeights{p(name + ".w_ih"), p(name + ".w_hh"), p(name + ".bias")};
}

template <typename T>
Var Blstm(ParamBinding<T> &p, Var x, const std::string &name) {
  return BlstmLayer(p.graph(), x, BindLstm(p, name + ".fwd"), BindLstm(p, name + ".bwd"));
}

template <typename T>
std::vector<Var> LcnnForward(Graph<T> &g, ParamBinding<T> &p, TensorMap<T> &buffers,
                             std::vector<Var> xs) {
  for (const LcnnStep &s : LcnnTable()) {
    switch (s.step) {
      case Step::kConv:
        for (Var &x : xs) x = Conv2d(g, x, p(std::string(s.name) + ".weight"), p(std::string(s.name) + ".bias"));
        break;
      case Step::kMfm:
        for (Var &x : xs) x = Mfm(g, x);
        break;
      case Step::kPool:
        for (Var &x : xs) x = MaxPool2(g, x);
        break;
      case Step::kNorm: {
        const std::string n = s.name;
        Var gamma = p(n + ".gamma"), beta = p(n + ".beta");
        Tensor<T> *rm = &buffers.at(n + ".running_mean");
        Tensor<T> *rv = &buffers.at(n + ".running_var");
        if (g.training() && xs.size() > 1) {
          std::vector<int> heights;
          for (Var x : xs) heights.push_back(g.value(x).dim(1));
          Var joint = BatchNorm(g, ConcatAxis1(g, xs), gamma, beta, rm, rv);
          int start = 0;
          for (size_t i = 0; i < xs.size(); ++i) {
            xs[i] = SliceAxis1(g, joint, start, heights[i]);
            start += heights[i];
          }
        } else {
          for (Var &x : xs) x = BatchNorm(g, x, gamma, beta, rm, rv);
        }
        break;
      }
    }
  }
  return xs;
}

}  // namespace

const char *BackendName(BackendKind kind) {
  switch (kind) {
    case BackendKind::kGF: return "GF";
    case BackendKind::kLGF: return "LGF";
    case BackendKind::kLLGF: return "LLGF";
  }
  return "?";
}

BackendKind ParseBackend(const std::string &name) {
  std::string up = name;
  std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return char(std::toupper(c)); });
  if (up == "GF") return BackendKind::kGF;
  if (up == "LGF") return BackendKind::kLGF;
  if (up == "LLGF") return BackendKind::kLLGF;
  Fail(ErrorKind::kConfig, "unknown back end '" + name + "' (expected GF, LGF or LLGF)");
}

std::string ModelSpec::Fingerprint() const {
  std::ostringstream os;
  os << "backend=" << BackendName(backend) << ";dim=" << feature_dim << ";layers=" << num_layers
     << ";weighted=" << weighted_layers << ";project=" << project;
  if (project) os << ";proj_dim=" << proj_dim;
  return os.str();
}

int LcnnSteps(int num_frames) { return num_frames >> kLcnnPools; }

int LcnnWidth(int input_dim) { return kLcnnChannels * (input_dim >> kLcnnPools); }

int MinFrames(BackendKind kind) { return kind == BackendKind::kLLGF ? 1 << kLcnnPools : 1; }

ModelParams InitModel(const ModelSpec &spec, uint64_t seed) {
  if (spec.feature_dim < 1 || spec.num_layers < 1)
    Fail(ErrorKind::kShape, "model needs feature_dim >= 1 and num_layers >= 1");
  ModelParams m;
  m.spec = spec;
  m.seed = seed;
  Initializer init(seed);
  if (spec.weighted_layers) m.weights["frontend.layer_weights"] = Tensor<float>({spec.num_layers});
  if (spec.project) AddLinear(m.weights, init, "frontend.proj", spec.feature_dim, spec.proj_dim);

  const int din = spec.BackendInputDim();
  int fc_in = din;
  switch (spec.backend) {
    case BackendKind::kGF:
      break;
    case BackendKind::kLGF:
      AddBlstm(m.weights, init, "blstm0", din);
      AddBlstm(m.weights, init, "blstm1", din);
      break;
    case BackendKind::kLLGF: {
      if (LcnnWidth(din) < 1)
        Fail(ErrorKind::kShape, "LLGF needs input dim >= 16, got " + std::to_string(din));
      for (const LcnnStep &s : LcnnTable()) {
        if (s.step == Step::kConv) {
          const double bound = 1.0 / std::sqrt(double(s.in * s.kernel * s.kernel));
          m.weights[std::string(s.name) + ".weight"] = init.Uniform({s.out, s.in, s.kernel, s.kernel}, bound);
          m.weights[std::string(s.name) + ".bias"] = init.Uniform({s.out}, bound);
        } else if (s.step == Step::kNorm) {
          const std::string n = s.name;
          m.weights[n + ".gamma"] = Tensor<float>({s.in}, 1.0f);
          m.weights[n + ".beta"] = Tensor<float>({s.in}, 0.0f);
          m.buffers[n + ".running_mean"] = Tensor<float>({s.in}, 0.0f);
          m.buffers[n + ".running_var"] = Tensor<float>({s.in}, 1.0f);
        }
      }
      fc_in = LcnnWidth(din);
      AddBlstm(m.weights, init, "blstm0", fc_in);
      AddBlstm(m.weights, init, "blstm1", fc_in);
      break;
    }
  }
  AddLinear(m.weights, init, "fc", fc_in, 2);
  return m;
}

double CrossEntropyValue(const Logits &l, Label label) {
  const double mx = std::max(l.bonafide, l.spoof);
  const double lse = mx + std::log(std::exp(l.bonafide - mx) + std::exp(l.spoof - mx));
  return lse - (label == Label::kBonafide ? l.bonafide : l.spoof);
}

template <typename T>
std::vector<Var> BackendForward(Graph<T> &g, ParamBinding<T> &p, TensorMap<T> &buffers,
                                BackendKind kind, const std::vector<Var> &inputs) {
  std::vector<Var> xs = inputs;
  const int min_frames = MinFrames(kind);
  for (Var x : xs)
    if (g.value(x).rank() != 2 || g.value(x).dim(0) < min_frames)
      Fail(ErrorKind::kShape, std::string(BackendName(kind)) + " needs [N x D] input with N >= " +
                                  std::to_string(min_frames) + ", got " + ShapeString(g.value(x).shape));
  if (kind == BackendKind::kLLGF) {
    for (Var &x : xs) x = ToImage(g, x);
    xs = LcnnForward(g, p, buffers, xs);
    for (Var &x : xs) x = ToSequence(g, x);
  }
  if (kind != BackendKind::kGF) {
    for (Var &x : xs) x = Blstm(p, x, "blstm0");
    for (Var &x : xs) x = Blstm(p, x, "blstm1");
  }
  std::vector<Var> logits;
  for (Var x : xs) {
    Var pooled = GlobalAvgPool(g, x, g.value(x).dim(0));
    logits.push_back(Linear(g, pooled, p("fc.weight"), p("fc.bias")));
  }
  return logits;
}

template <typename T>
std::vector<Var> ModelForward(Graph<T> &g, ParamBinding<T> &p, TensorMap<T> &buffers,
                              const ModelSpec &spec, const std::vector<const Tensor<T> *> &inputs) {
  std::vector<Var> feats;
  for (const Tensor<T> *raw : inputs) {
    if (raw->rank() != 3 || raw->dim(0) != spec.num_layers || raw->dim(2) != spec.feature_dim)
      Fail(ErrorKind::kShape, "model expects [" + std::to_string(spec.num_layers) + " x N x " +
                                  std::to_string(spec.feature_dim) + "] features, got " +
                                  ShapeString(raw->shape));
    const int n = raw->dim(1), d = raw->dim(2);
    Var a;
    if (spec.weighted_layers) {
      a = WeightedLayerSum(g, g.Leaf(*raw, false, "features"), p("frontend.layer_weights"));
    } else {
      // Unweighted use takes the last stored layer.
      const size_t plane = size_t(n) * d;
      Tensor<T> last({n, d});
      std::copy_n(raw->data.begin() + ptrdiff_t(plane * size_t(raw->dim(0) - 1)), plane, last.data.begin());
      a = g.Leaf(std::move(last), false, "features");
    }
    if (spec.project) a = Linear(g, a, p("frontend.proj.weight"), p("frontend.proj.bias"));
    feats.push_back(a);
  }
  return BackendForward(g, p, buffers, spec.backend, feats);
}

BackendResult ForwardBackend(const ModelParams &params, const FeatureSequence &features, int valid_len) {
  const int din = params.spec.BackendInputDim();
  if (features.dim != din)
    Fail(ErrorKind::kShape, std::string(BackendName(params.spec.backend)) + " expects dim " +
                                std::to_string(din) + ", got " + std::to_string(features.dim));
  if (valid_len < 1 || valid_len > features.num_frames)
    Fail(ErrorKind::kParameter, "valid_len " + std::to_string(valid_len) + " outside [1, " +
                                    std::to_string(features.num_frames) + "]");
  BackendResult out{Logits{}, Graph<float>(false)};
  Graph<float> &g = out.tape;
  TensorMap<float> buffers = params.buffers;
  ParamBinding<float> binding(g, params.weights, true);
  Tensor<float> x({valid_len, din});
  std::copy_n(features.data.begin(), size_t(valid_len) * din, x.data.begin());
  auto logits = BackendForward(g, binding, buffers, params.spec.backend, {g.Leaf(std::move(x), false, "features")});
  const auto &v = g.value(logits[0]);
  out.logits = Logits{double(v[0]), double(v[1])};
  return out;
}

Logits ForwardTrial(const ModelParams &params, const Tensor<float> &raw) {
  Graph<float> g(false);
  TensorMap<float> buffers = params.buffers;
  ParamBinding<float> binding(g, params.weights, false);
  auto logits = ModelForward(g, binding, buffers, params.spec, {&raw});
  const auto &v = g.value(logits[0]);
  return Logits{double(v[0]), double(v[1])};
}

template std::vector<Var> BackendForward(Graph<float> &, ParamBinding<float> &, TensorMap<float> &,
                                         BackendKind, const std::vector<Var> &);
template std::vector<Var> BackendForward(Graph<double> &, ParamBinding<double> &, TensorMap<double> &,
                                         BackendKind, const std::vector<Var> &);
template std::vector<Var> ModelForward(Graph<float> &, ParamBinding<float> &, TensorMap<float> &,
                                       const ModelSpec &, const std::vector<const Tensor<float> *> &);
template std::vector<Var> ModelForward(Graph<double> &, ParamBinding<double> &, TensorMap<double> &,
                                       const ModelSpec &, const std::vector<const Tensor<double> *> &);

}  // namespace cm::nn
