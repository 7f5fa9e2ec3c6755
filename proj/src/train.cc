// src/train.cc

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

#include "cm/train.h"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "cm/binio.h"
#include "cm/error.h"
#include "cm/log.h"
#include "cm/parallel.h"
#include "json.hpp"

namespace cm {

using nn::Graph;
using nn::ParamBinding;
using nn::Tensor;
using nn::TensorMap;
using nn::Var;

void TrainConfig::Validate() const {
  if (!(lr0 > 0) || !std::isfinite(lr0)) Fail(ErrorKind::kConfig, "lr0 must be positive");
  if (halve_every < 1) Fail(ErrorKind::kConfig, "halve_every must be >= 1");
  if (batch_size < 1) Fail(ErrorKind::kConfig, "batch_size must be >= 1");
  if (max_epochs < 1) Fail(ErrorKind::kConfig, "max_epochs must be >= 1");
  if (patience < 1) Fail(ErrorKind::kConfig, "patience must be >= 1");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) Fail(ErrorKind::kConfig, "Adam betas must lie in [0, 1)");
  if (!(epsilon > 0)) Fail(ErrorKind::kConfig, "epsilon must be positive");
  if (!(max_segment_s > 0)) Fail(ErrorKind::kConfig, "max_segment_s must be positive");
}

TrainConfig TrainPreset(const std::string &name) {
  TrainConfig c;
  if (name == "lfcc") return c;
  if (name == "external" || name == "external_verbatim") {
    c.batch_size = 8;
    c.lr0 = 1e-6;
    if (name == "external") {
      c.lr0 *= 100;
      c.desk_scale = true;
    }
    return c;
  }
  Fail(ErrorKind::kConfig, "unknown training preset '" + name + "'");
}

double LrAtEpoch(const TrainConfig &cfg, int epoch) {
  if (epoch < 0) Fail(ErrorKind::kParameter, "epoch must be >= 0");
  return cfg.lr0 * std::pow(0.5, epoch / cfg.halve_every);
}

void AdamStep(TensorMap<float> &params, const TensorMap<float> &grads, AdamState &state, double lr,
              const TrainConfig &cfg) {
  for (const auto &[name, g] : grads) {
    auto it = params.find(name);
    if (it == params.end()) Fail(ErrorKind::kLookup, "gradient for unknown parameter '" + name + "'");
    if (it->second.shape != g.shape) Fail(ErrorKind::kShape, "gradient shape mismatch for '" + name + "'");
    for (float v : g.data)
      if (!std::isfinite(v)) Fail(ErrorKind::kNumeric, "non-finite gradient for '" + name + "'");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, double(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, double(state.step));
  for (const auto &[name, g] : grads) {
    Tensor<float> &p = params.at(name);
    auto [mi, m_new] = state.m.try_emplace(name, Tensor<float>(g.shape));
    auto [vi, v_new] = state.v.try_emplace(name, Tensor<float>(g.shape));
    Tensor<float> &m = mi->second, &v = vi->second;
    for (size_t i = 0; i < g.size(); ++i) {
      const double gi = g.data[i];
      const double mv = cfg.beta1 * m.data[i] + (1 - cfg.beta1) * gi;
      const double vv = cfg.beta2 * v.data[i] + (1 - cfg.beta2) * gi * gi;
      m.data[i] = float(mv);
      v.data[i] = float(vv);
      p.data[i] = float(p.data[i] - lr * (mv / c1) / (std::sqrt(vv / c2) + cfg.epsilon));
    }
  }
}

double ClipGlobalNorm(TensorMap<float> &grads, double max_norm) {
  double sq = 0.0;
  for (const auto &[name, g] : grads)
    for (float v : g.data) sq += double(v) * v;
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto &[name, g] : grads)
      for (float &v : g.data) v = float(v * s);
  }
  return norm;
}

bool EarlyStopper::Update(double dev_loss) {
  if (dev_loss < best_) {
    best_ = dev_loss;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

// ---------------------------------------------------------------------------
// CMCK container

namespace {

const uint8_t kCkptMagic[4] = {'C', 'M', 'C', 'K'};
constexpr uint8_t kDtypeF32 = 0;

void PutTensors(ByteWriter &w, const std::string &prefix, const TensorMap<float> &m) {
  for (const auto &[name, t] : m) {
    w.PutString(prefix + name);
    w.PutU8(kDtypeF32);
    w.PutU32(uint32_t(t.rank()));
    for (int e : t.shape) w.PutU32(uint32_t(e));
    for (float v : t.data) w.PutF32(v);
  }
}

size_t CountTensors(const Checkpoint &c) {
  return c.params.weights.size() + c.params.buffers.size() + c.optim.m.size() + c.optim.v.size();
}

}  // namespace

std::vector<uint8_t> EncodeCheckpoint(const Checkpoint &c) {
  const nn::ModelSpec &s = c.params.spec;
  nlohmann::json meta = {
      {"fingerprint", s.Fingerprint()},
      {"backend", nn::BackendName(s.backend)},
      {"feature_dim", s.feature_dim},
      {"num_layers", s.num_layers},
      {"weighted_layers", s.weighted_layers},
      {"project", s.project},
      {"proj_dim", s.proj_dim},
      {"seed", c.params.seed},
      {"epoch", c.epoch},
      {"adam_step", c.optim.step},
      {"frontend", c.frontend},
  };
  meta["best_dev_loss"] = std::isfinite(c.best_dev_loss) ? nlohmann::json(c.best_dev_loss) : nlohmann::json();
  ByteWriter w;
  w.PutBytes(kCkptMagic);
  w.PutU32(kCheckpointVersion);
  w.PutString(meta.dump());
  w.PutU32(uint32_t(CountTensors(c)));
  PutTensors(w, "param/", c.params.weights);
  PutTensors(w, "buffer/", c.params.buffers);
  PutTensors(w, "adam_m/", c.optim.m);
  PutTensors(w, "adam_v/", c.optim.v);
  const uint32_t crc = Crc32(w.bytes());
  w.PutU32(crc);
  return std::move(w.bytes());
}

Checkpoint DecodeCheckpoint(std::span<const uint8_t> bytes) {
  if (bytes.size() < 12) Fail(ErrorKind::kCorrupt, "checkpoint truncated");
  ByteReader r(bytes);
  auto magic = r.Take(4);
  if (!std::equal(magic.begin(), magic.end(), kCkptMagic)) Fail(ErrorKind::kCorrupt, "not a checkpoint (bad magic)");
  const uint32_t version = r.U32();
  ByteReader tail(bytes.subspan(bytes.size() - 4));
  if (Crc32(bytes.first(bytes.size() - 4)) != tail.U32()) Fail(ErrorKind::kCorrupt, "checkpoint checksum mismatch");
  if (version != kCheckpointVersion) Fail(ErrorKind::kVersion, "unsupported checkpoint version " + std::to_string(version));

  Checkpoint c;
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(r.String());
    nn::ModelSpec &s = c.params.spec;
    s.backend = nn::ParseBackend(meta.at("backend").get<std::string>());
    s.feature_dim = meta.at("feature_dim").get<int>();
    s.num_layers = meta.at("num_layers").get<int>();
    s.weighted_layers = meta.at("weighted_layers").get<bool>();
    s.project = meta.at("project").get<bool>();
    s.proj_dim = meta.at("proj_dim").get<int>();
    c.params.seed = meta.at("seed").get<uint64_t>();
    c.epoch = meta.at("epoch").get<int>();
    c.optim.step = meta.at("adam_step").get<int64_t>();
    c.frontend = meta.at("frontend").get<std::string>();
    if (!meta.at("best_dev_loss").is_null()) c.best_dev_loss = meta.at("best_dev_loss").get<double>();
    if (meta.at("fingerprint").get<std::string>() != s.Fingerprint())
      Fail(ErrorKind::kCorrupt, "checkpoint fingerprint disagrees with its metadata");
  } catch (const nlohmann::json::exception &e) {
    Fail(ErrorKind::kCorrupt, std::string("checkpoint metadata: ") + e.what());
  }
  const uint32_t count = r.U32();
  for (uint32_t i = 0; i < count; ++i) {
    const std::string name = r.String();
    if (r.U8() != kDtypeF32) Fail(ErrorKind::kCorrupt, "checkpoint tensor '" + name + "' has unknown dtype");
    const uint32_t rank = r.U32();
    if (rank > 8) Fail(ErrorKind::kCorrupt, "checkpoint tensor '" + name + "' has rank " + std::to_string(rank));
    std::vector<int> shape;
    uint64_t n = 1;
    for (uint32_t k = 0; k < rank; ++k) {
      const uint32_t e = r.U32();
      if (e == 0 || e > (1u << 30)) Fail(ErrorKind::kCorrupt, "checkpoint tensor '" + name + "' has a bad extent");
      shape.push_back(int(e));
      n *= e;
    }
    if (n * 4 > r.remaining()) Fail(ErrorKind::kCorrupt, "checkpoint tensor '" + name + "' overruns the file");
    Tensor<float> t(shape);
    for (float &v : t.data) v = r.F32();
    const size_t slash = name.find('/');
    const std::string group = name.substr(0, slash), key = slash == std::string::npos ? "" : name.substr(slash + 1);
    TensorMap<float> *dst = group == "param"    ? &c.params.weights
                            : group == "buffer" ? &c.params.buffers
                            : group == "adam_m" ? &c.optim.m
                            : group == "adam_v" ? &c.optim.v
                                                : nullptr;
    if (!dst || key.empty()) Fail(ErrorKind::kCorrupt, "checkpoint tensor '" + name + "' has an unknown group");
    if (!dst->emplace(key, std::move(t)).second) Fail(ErrorKind::kCorrupt, "duplicate checkpoint tensor '" + name + "'");
  }
  if (r.remaining() != 4) Fail(ErrorKind::kCorrupt, "trailing bytes in checkpoint");

  // The stored tensors must be exactly those of the declared layout.
  const nn::ModelParams ref = nn::InitModel(c.params.spec, 0);
  auto same_layout = [](const TensorMap<float> &a, const TensorMap<float> &b) {
    if (a.size() != b.size()) return false;
    for (const auto &[k, t] : a) {
      auto it = b.find(k);
      if (it == b.end() || it->second.shape != t.shape) return false;
    }
    return true;
  };
  if (!same_layout(ref.weights, c.params.weights) || !same_layout(ref.buffers, c.params.buffers))
    Fail(ErrorKind::kCorrupt, "checkpoint tensors do not match layout " + c.Fingerprint());
  return c;
}

void SaveCheckpoint(const Checkpoint &ckpt, const std::string &path) { WriteFileBytes(path, EncodeCheckpoint(ckpt)); }

Checkpoint LoadCheckpoint(const std::string &path) {
  try {
    return DecodeCheckpoint(ReadFileBytes(path));
  } catch (const Error &e) {
    if (e.kind() == ErrorKind::kIo) throw;
    Fail(e.kind(), path + ": " + e.what());
  }
}

void CheckCompatible(const Checkpoint &ckpt, const nn::ModelSpec &expected) {
  if (ckpt.Fingerprint() != expected.Fingerprint())
    Fail(ErrorKind::kKindMismatch, "checkpoint is " + ckpt.Fingerprint() + " but this run needs " + expected.Fingerprint());
}

// ---------------------------------------------------------------------------

std::string EpochCsvHeader() { return "epoch,lr,train_loss,dev_loss"; }

std::string EpochCsvRow(const EpochLog &e) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%d,%.6g,%.6f,%.6f", e.epoch, e.lr, e.train_loss, e.dev_loss);
  return buf;
}

TrainData PrepareTrainData(const Frontend &frontend, const ProtocolSet &train_set, const ProtocolSet &dev_set,
                           const TrainConfig &cfg, int jobs) {
  if (train_set.size() == 0 || dev_set.size() == 0) Fail(ErrorKind::kInsufficientInput, "train and dev sets must be nonempty");
  std::vector<std::vector<Tensor<float>>> segs(train_set.size());
  ParallelFor(train_set.size(), jobs, [&](size_t i) {
    segs[i] = frontend.TrainingSegments(train_set, train_set.records[i], cfg.max_segment_s);
  });
  std::vector<Tensor<float>> dev(dev_set.size());
  ParallelFor(dev_set.size(), jobs, [&](size_t i) { dev[i] = frontend.TrialFeatures(dev_set, dev_set.records[i]); });
  TrainData data;
  for (size_t i = 0; i < segs.size(); ++i)
    for (auto &t : segs[i]) data.train.push_back(TrainItem{std::move(t), train_set.records[i].label});
  for (size_t i = 0; i < dev.size(); ++i) data.dev.push_back(TrainItem{std::move(dev[i]), dev_set.records[i].label});
  return data;
}

double MeanLoss(const nn::ModelParams &params, const std::vector<TrainItem> &items) {
  if (items.empty()) Fail(ErrorKind::kInsufficientInput, "no items to evaluate");
  double total = 0.0;
  for (const auto &it : items) total += nn::CrossEntropyValue(nn::ForwardTrial(params, it.features), it.label);
  return total / double(items.size());
}

std::vector<double> TrainStep(nn::ModelParams &params, AdamState &state, const SegmentBatch &batch, double lr,
                              const TrainConfig &cfg) {
  Graph<float> g(true);
  ParamBinding<float> binding(g, params.weights, true);
  std::vector<Tensor<float>> inputs;
  for (size_t i = 0; i < batch.features.size(); ++i) {
    const Tensor<float> &padded = batch.features[i];
    const int k = padded.dim(0), n = padded.dim(1), d = padded.dim(2), len = batch.valid_len[i];
    Tensor<float> x({k, len, d});
    for (int l = 0; l < k; ++l)
      std::copy_n(padded.data.begin() + ptrdiff_t(size_t(l) * n * d), size_t(len) * d,
                  x.data.begin() + ptrdiff_t(size_t(l) * len * d));
    inputs.push_back(std::move(x));
  }
  std::vector<const Tensor<float> *> ptrs;
  for (const auto &x : inputs) ptrs.push_back(&x);
  auto logits = nn::ModelForward(g, binding, params.buffers, params.spec, ptrs);
  std::vector<Var> losses;
  std::vector<double> values;
  for (size_t i = 0; i < logits.size(); ++i) {
    losses.push_back(nn::CrossEntropy(g, logits[i], batch.labels[i]));
    values.push_back(g.value(losses.back())[0]);
  }
  g.Backward(nn::MeanOf(g, losses));
  TensorMap<float> grads = binding.Gradients();
  ClipGlobalNorm(grads, cfg.clip_norm);
  AdamStep(params.weights, grads, state, lr, cfg);
  return values;
}

TrainResult Train(const TrainConfig &cfg, const nn::ModelSpec &spec, const TrainData &data,
                  const EpochCallback &on_epoch) {
  cfg.Validate();
  if (data.train.empty() || data.dev.empty()) Fail(ErrorKind::kInsufficientInput, "train and dev data must be nonempty");
  TrainResult result;
  Checkpoint cur;
  cur.params = nn::InitModel(spec, cfg.seed);
  EarlyStopper stopper(cfg.patience);
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const double lr = LrAtEpoch(cfg, epoch);
    double total = 0.0;
    size_t count = 0;
    int batch_no = 0;
    for (const SegmentBatch &b : MakeBatches(data.train, cfg.batch_size, cfg.seed, epoch)) {
      std::vector<double> losses;
      try {
        losses = TrainStep(cur.params, cur.optim, b, lr, cfg);
      } catch (const Error &e) {
        if (e.kind() != ErrorKind::kNumeric) throw;
        Fail(ErrorKind::kNumeric, "training diverged at epoch " + std::to_string(epoch) + ", batch " +
                                      std::to_string(batch_no) + " (lr " + std::to_string(lr) + "): " + e.what());
      }
      for (double l : losses) total += l;
      count += losses.size();
      ++batch_no;
    }
    EpochLog log{epoch, lr, total / double(count), MeanLoss(cur.params, data.dev)};
    if (!std::isfinite(log.train_loss) || !std::isfinite(log.dev_loss))
      Fail(ErrorKind::kNumeric, "training diverged at epoch " + std::to_string(epoch));
    result.log.push_back(log);
    CM_VLOG << "epoch " << epoch << " lr " << lr << " train " << log.train_loss << " dev " << log.dev_loss;
    if (on_epoch) on_epoch(log);
    cur.epoch = epoch;
    if (stopper.Update(log.dev_loss)) {
      cur.best_dev_loss = log.dev_loss;
      result.best = cur;
    }
    if (stopper.ShouldStop()) break;
  }
  return result;
}

std::vector<uint64_t> RoundSeeds(uint64_t seed, int rounds) {
  if (rounds < 1) Fail(ErrorKind::kConfig, "rounds must be >= 1");
  std::vector<uint64_t> out;
  for (int i = 0; i < rounds; ++i) out.push_back(seed + uint64_t(i));
  return out;
}

}  // namespace cm
