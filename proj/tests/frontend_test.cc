// tests/frontend_test.cc

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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <random>

#include "cm/binio.h"
#include "cm/frontend.h"
#include "test_util.h"

using namespace cm;
using cm::testing::KindOf;
using cm::testing::TempDir;

namespace {

MultiLayerFeatures RandomFeatures(int k, int n, int d, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g;
  MultiLayerFeatures f(k, n, d);
  for (float &v : f.data) v = g(rng);
  return f;
}

// Bitwise reflected CRC-32 (polynomial 0xEDB88320).
uint32_t SlowCrc32(const uint8_t *p, size_t n) {
  uint32_t c = 0xFFFFFFFFu;
  for (size_t i = 0; i < n; ++i) {
    c ^= p[i];
    for (int b = 0; b < 8; ++b) c = (c >> 1) ^ (0xEDB88320u & (0u - (c & 1u)));
  }
  return ~c;
}

void PutLe32(std::vector<uint8_t> &out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(uint8_t(v >> (8 * i)));
}

}  // namespace

TEST_CASE("CMFEAT bytes follow the documented layout") {
  MultiLayerFeatures f = RandomFeatures(2, 3, 4, 1);
  std::vector<uint8_t> expect = {0x43, 0x4D, 0x46, 0x31};
  PutLe32(expect, 1);
  PutLe32(expect, 2);
  PutLe32(expect, 3);
  PutLe32(expect, 4);
  for (float v : f.data) {
    uint32_t u;
    std::memcpy(&u, &v, 4);
    PutLe32(expect, u);
  }
  PutLe32(expect, SlowCrc32(expect.data() + 20, expect.size() - 20));
  CHECK(EncodeFeatures(f) == expect);
}

TEST_CASE("CMFEAT round trip is byte-exact for many shapes") {
  TempDir dir("cmfeat");
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 30; ++rep) {
    const int k = 1 + int(rng() % 4), n = 1 + int(rng() % 40), d = 1 + int(rng() % 20);
    MultiLayerFeatures f = RandomFeatures(k, n, d, rep);
    const auto path = dir / ("f" + std::to_string(rep) + ".cmf");
    WriteFeatures(path, f);
    MultiLayerFeatures g = ReadFeatures(path);
    CHECK(g.num_layers == k);
    CHECK(g.num_frames == n);
    CHECK(g.dim == d);
    CHECK(std::memcmp(g.data.data(), f.data.data(), f.data.size() * 4) == 0);
    CHECK(EncodeFeatures(g) == ReadFileBytes(path));
    const FeatureShape s = PeekFeatures(path);
    CHECK(s.num_layers == k);
    CHECK(s.num_frames == n);
    CHECK(s.dim == d);
  }
}

TEST_CASE("CMFEAT rejects damage") {
  const std::vector<uint8_t> good = EncodeFeatures(RandomFeatures(2, 5, 3, 9));
  auto decode = [](std::vector<uint8_t> b) { return [b] { DecodeFeatures(b); }; };
  for (size_t cut : {size_t(0), size_t(10), size_t(20), good.size() - 1}) {
    std::vector<uint8_t> t(good.begin(), good.begin() + ptrdiff_t(cut));
    CHECK(KindOf(decode(t)) == ErrorKind::kCorrupt);
  }
  std::vector<uint8_t> flipped = good;
  flipped[30] ^= 0x01;
  CHECK(KindOf(decode(flipped)) == ErrorKind::kCorrupt);
  std::vector<uint8_t> magic = good;
  magic[0] = 'X';
  CHECK(KindOf(decode(magic)) == ErrorKind::kCorrupt);
  std::vector<uint8_t> version = good;
  version[4] = 2;
  CHECK(KindOf(decode(version)) == ErrorKind::kVersion);
  std::vector<uint8_t> shape = good;
  shape[12] = 6;  // N=6 with the payload of N=5
  CHECK(KindOf(decode(shape)) == ErrorKind::kCorrupt);
  MultiLayerFeatures empty;
  CHECK(KindOf([&] { EncodeFeatures(empty); }) == ErrorKind::kShape);
}

TEST_CASE("feature manifest") {
  TempDir dir("manifest");
  WriteFeatures(dir / "a.cmf", RandomFeatures(2, 4, 3, 1));
  WriteFeatures(dir / "b.cmf", RandomFeatures(2, 7, 3, 2));
  WriteFeatures(dir / "c.cmf", RandomFeatures(1, 7, 3, 3));
  const std::string m = (dir / "m.tsv").string();
  FeatureManifest::Write(m, {{"A", "a.cmf"}, {"B", (dir / "b.cmf").string()}});
  FeatureManifest man = FeatureManifest::Load(m);
  CHECK(man.size() == 2);
  CHECK(man.num_layers() == 2);
  CHECK(man.dim() == 3);
  CHECK(man.LoadFeatures("B").num_frames == 7);
  CHECK(man.LoadFeatures("A").data == RandomFeatures(2, 4, 3, 1).data);
  CHECK(KindOf([&] { man.LoadFeatures("Z"); }) == ErrorKind::kLookup);

  FeatureManifest::Write(m, {{"A", "a.cmf"}, {"C", "c.cmf"}});
  CHECK(KindOf([&] { FeatureManifest::Load(m); }) == ErrorKind::kCorrupt);
  FeatureManifest::Write(m, {{"A", "a.cmf"}, {"A", "b.cmf"}});
  CHECK(KindOf([&] { FeatureManifest::Load(m); }) == ErrorKind::kDuplicate);
  FeatureManifest::Write(m, {{"A", "missing.cmf"}});
  CHECK(KindOf([&] { FeatureManifest::Load(m); }) == ErrorKind::kIo);
  FeatureManifest::Write(m, {});
  CHECK(KindOf([&] { FeatureManifest::Load(m); }) == ErrorKind::kConfig);
  WriteFileBytes(m, std::vector<uint8_t>{'i', 'd', '\n'});
  CHECK(KindOf([&] { FeatureManifest::Load(m); }) == ErrorKind::kParse);
}

TEST_CASE("combine_layers") {
  MultiLayerFeatures one = RandomFeatures(1, 5, 4, 1);
  for (float raw : {-3.0f, 0.0f, 7.5f}) {
    const std::vector<float> w = {raw};
    CHECK(CombineLayers(one, w).data == one.data);
  }
  MultiLayerFeatures sym(2, 5, 4);
  const MultiLayerFeatures f = RandomFeatures(1, 5, 4, 2);
  for (size_t i = 0; i < f.data.size(); ++i) sym.data[i] = f.data[i], sym.data[f.data.size() + i] = -f.data[i];
  for (float v : CombineLayers(sym, std::vector<float>{0, 0}).data) CHECK(v == 0.0f);

  std::mt19937_64 rng(4);
  std::normal_distribution<float> g;
  for (int rep = 0; rep < 20; ++rep) {
    const MultiLayerFeatures x = RandomFeatures(3, 6, 5, 100 + rep);
    std::vector<float> raw = {g(rng), g(rng), g(rng)};
    const double z = std::exp(double(raw[0])) + std::exp(double(raw[1])) + std::exp(double(raw[2]));
    const FeatureSequence out = CombineLayers(x, raw);
    for (int n = 0; n < 6; ++n)
      for (int d = 0; d < 5; ++d) {
        double ref = 0;
        for (int k = 0; k < 3; ++k) ref += std::exp(double(raw[size_t(k)])) / z * x.layer(k)[n * 5 + d];
        CHECK(std::abs(out.at(n, d) - ref) < 1e-6);
      }
    // Adding a constant to every raw weight changes nothing.
    std::vector<float> shifted = raw;
    for (float &v : shifted) v += 2.5f;
    const FeatureSequence out2 = CombineLayers(x, shifted);
    for (size_t i = 0; i < out.data.size(); ++i) CHECK(std::abs(out.data[i] - out2.data[i]) < 1e-6);
  }
  CHECK(KindOf([&] { CombineLayers(one, std::vector<float>{0, 0}); }) == ErrorKind::kShape);
}

TEST_CASE("project") {
  FeatureSequence x(9, 128);
  std::mt19937_64 rng(6);
  std::normal_distribution<float> g;
  for (float &v : x.data) v = g(rng);
  nn::Tensor<float> eye({128, 128}), zero_b({128});
  for (int i = 0; i < 128; ++i) eye.data[size_t(i) * 128 + i] = 1.0f;
  CHECK(Project(x, eye, zero_b).data == x.data);

  nn::Tensor<float> zw({128, 16}), b({16});
  for (int j = 0; j < 16; ++j) b.data[size_t(j)] = float(j) - 3.5f;
  const FeatureSequence y = Project(x, zw, b);
  for (int t = 0; t < 9; ++t)
    for (int j = 0; j < 16; ++j) CHECK(y.at(t, j) == b.data[size_t(j)]);

  // Frame-local: permuting frames permutes outputs.
  nn::Tensor<float> w({128, 16});
  for (float &v : w.data) v = g(rng);
  const FeatureSequence p = Project(x, w, b);
  FeatureSequence xr(9, 128);
  for (int t = 0; t < 9; ++t)
    for (int d = 0; d < 128; ++d) xr.at(t, d) = x.at(8 - t, d);
  const FeatureSequence pr = Project(xr, w, b);
  for (int t = 0; t < 9; ++t)
    for (int j = 0; j < 16; ++j) CHECK(pr.at(t, j) == p.at(8 - t, j));

  CHECK(KindOf([&] { Project(x, nn::Tensor<float>({60, 16}), b); }) == ErrorKind::kShape);
}

TEST_CASE("front end kinds") {
  CHECK(ParseFrontend("lfcc") == FrontendKind::kLfcc);
  CHECK(ParseFrontend("external_weighted") == FrontendKind::kExternalWeighted);
  CHECK(KindOf([] { ParseFrontend("mfcc"); }) == ErrorKind::kConfig);
  FrontendConfig ext;
  ext.kind = FrontendKind::kExternal;
  CHECK(KindOf([&] { MakeFrontend(ext); }) == ErrorKind::kConfig);

  auto lfcc = MakeFrontend(FrontendConfig{});
  Waveform silence;
  silence.samples.assign(16000, 0.0f);
  const nn::Tensor<float> t = lfcc->WaveFeatures(silence);
  CHECK(t.shape == std::vector<int>{1, 99, 60});
  const nn::ModelSpec ls = lfcc->Spec(nn::BackendKind::kGF);
  CHECK_FALSE(ls.project);
  CHECK(ls.BackendInputDim() == 60);
  CHECK(lfcc->HasWaveformAccess());

  TempDir dir("kinds");
  WriteFeatures(dir / "a.cmf", RandomFeatures(1, 30, 24, 1));
  FeatureManifest::Write((dir / "m.tsv").string(), {{"A", "a.cmf"}});
  ext.manifest = (dir / "m.tsv").string();
  auto e = MakeFrontend(ext);
  const nn::ModelSpec es = e->Spec(nn::BackendKind::kGF);
  CHECK(es.project);
  CHECK(es.BackendInputDim() == 128);
  CHECK_FALSE(e->HasWaveformAccess());
  CHECK(KindOf([&] { e->WaveFeatures(silence); }) == ErrorKind::kUnsupportedFrontend);

  ProtocolSet set;
  set.records.push_back(TrialRecord{"A", Label::kBonafide, {}, {}, {}});
  const nn::Tensor<float> raw = e->TrialFeatures(set, set.records[0]);
  const nn::ModelParams params = nn::InitModel(es, 3);
  const FeatureSequence out = FrontendOutput(params, raw);
  CHECK(out.dim == 128);
  CHECK(out.num_frames == 30);

  // Weighted with K = 1 equals the plain external front end.
  FrontendConfig wcfg = ext;
  wcfg.kind = FrontendKind::kExternalWeighted;
  auto w = MakeFrontend(wcfg);
  nn::ModelParams wp = nn::InitModel(w->Spec(nn::BackendKind::kGF), 3);
  wp.weights["frontend.layer_weights"].data[0] = 4.0f;
  wp.weights["frontend.proj.weight"] = params.weights.at("frontend.proj.weight");
  wp.weights["frontend.proj.bias"] = params.weights.at("frontend.proj.bias");
  CHECK(FrontendOutput(wp, raw).data == out.data);

  // Training segments: 4 s at 50 frames/s is 200 frames.
  WriteFeatures(dir / "long.cmf", RandomFeatures(1, 520, 24, 2));
  FeatureManifest::Write((dir / "m.tsv").string(), {{"L", "long.cmf"}});
  auto e2 = MakeFrontend(ext);
  set.records[0].trial_id = "L";
  auto segs = e2->TrainingSegments(set, set.records[0], 4.0);
  REQUIRE(segs.size() == 3);
  CHECK(segs[0].dim(1) == 200);
  CHECK(segs[2].dim(1) == 120);
}
