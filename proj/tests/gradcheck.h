// tests/gradcheck.h

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

#ifndef CM_TESTS_GRADCHECK_H_
#define CM_TESTS_GRADCHECK_H_

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "cm/autodiff.h"
#include "cm/ops.h"

// Central finite-difference checks of the 64-bit tape. Shared by the unit
// tests and the acceptance binary.
namespace cm::testing {

using nn::Graph;
using nn::ParamBinding;
using nn::Tensor;
using nn::TensorMap;
using nn::Var;

using LossFn = std::function<Var(Graph<double> &, ParamBinding<double> &)>;

struct GradCase {
  std::string op;
  TensorMap<double> inputs;
  LossFn loss;
  bool training = true;
};

constexpr double kStep = 1e-5;
// Magnitudes below this are compared absolutely; keeps exact zeros (pooled-away
// or masked entries) from dividing by round-off.
constexpr double kFloor = 1e-6;

inline double GradRelErr(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), kFloor});
}

inline double LossValue(const GradCase &c, const TensorMap<double> &inputs) {
  Graph<double> g(c.training);
  ParamBinding<double> p(g, inputs, false);
  return g.value(c.loss(g, p))[0];
}

// Largest relative error between backward() and central differences over
// every element of every input.
inline double MaxGradError(const GradCase &c) {
  Graph<double> g(c.training);
  ParamBinding<double> p(g, c.inputs, true);
  g.Backward(c.loss(g, p));
  const TensorMap<double> analytic = p.Gradients();
  double worst = 0.0;
  TensorMap<double> probe = c.inputs;
  for (auto &[name, t] : probe) {
    const Tensor<double> &ga = analytic.at(name);
    for (size_t i = 0; i < t.data.size(); ++i) {
      const double keep = t.data[i];
      t.data[i] = keep + kStep;
      const double up = LossValue(c, probe);
      t.data[i] = keep - kStep;
      const double down = LossValue(c, probe);
      t.data[i] = keep;
      worst = std::max(worst, GradRelErr(ga.data[i], (up - down) / (2 * kStep)));
    }
  }
  return worst;
}

inline Tensor<double> RandomTensor(std::mt19937_64 &rng, std::vector<int> shape, double scale = 1.0) {
  Tensor<double> t(std::move(shape));
  std::uniform_real_distribution<double> u(-scale, scale);
  for (double &v : t.data) v = u(rng);
  return t;
}

// sum(x * w) with w held constant: turns any output into a scalar whose
// gradient exercises every output element differently.
inline Var Contract(Graph<double> &g, Var x, const Tensor<double> &w) {
  const auto &xv = g.value(x);
  double s = 0.0;
  for (size_t i = 0; i < xv.data.size(); ++i) s += xv.data[i] * w.data[i];
  const int xid = x.id;
  return g.Add("contract", {x}, Tensor<double>({1}, std::vector<double>{s}),
               [xid, w](Graph<double> &g, int self) {
                 const double up = g.grad(Var{self})[0];
                 auto &gx = g.GradRef(xid);
                 for (size_t i = 0; i < gx.data.size(); ++i) gx.data[i] += up * w.data[i];
               });
}

// Shape of an output is only known after a forward pass; the weights are
// derived from a fixed seed so every pass of one case sees the same ones.
inline Var ContractSeeded(Graph<double> &g, Var x, uint64_t seed) {
  std::mt19937_64 rng(seed);
  return Contract(g, x, RandomTensor(rng, g.value(x).shape));
}

// Random instances of every differentiable op.
inline std::vector<GradCase> GradientSuite(uint64_t seed, int per_op) {
  using namespace nn;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> small(1, 4);
  std::vector<GradCase> cases;
  for (int k = 0; k < per_op; ++k) {
    const uint64_t cs = rng();
    {
      const int ci = small(rng), co = small(rng), h = small(rng) + 2, w = small(rng) + 2;
      const int kh = 2 * (small(rng) % 2) + 1, kw = 2 * (small(rng) % 2) + 1;
      GradCase c{"conv2d", {}, nullptr};
      c.inputs["x"] = RandomTensor(rng, {ci, h, w});
      c.inputs["k"] = RandomTensor(rng, {co, ci, kh, kw});
      c.inputs["b"] = RandomTensor(rng, {co});
      c.loss = [cs](Graph<double> &g, ParamBinding<double> &p) {
        return ContractSeeded(g, Conv2d(g, p("x"), p("k"), p("b")), cs);
      };
      cases.push_back(std::move(c));
    }
    {
      GradCase c{"mfm", {}, nullptr};
      c.inputs["x"] = RandomTensor(rng, {2 * small(rng), small(rng), small(rng)});
      c.loss = [cs](Graph<double> &g, ParamBinding<double> &p) { return ContractSeeded(g, Mfm(g, p("x")), cs); };
      cases.push_back(std::move(c));
    }
    {
      const int ch = small(rng);
      GradCase c{"batchnorm", {}, nullptr};
      c.inputs["x"] = RandomTensor(rng, {ch, small(rng) + 1, small(rng) + 1});
      c.inputs["gamma"] = RandomTensor(rng, {ch});
      c.inputs["beta"] = RandomTensor(rng, {ch});
      c.loss = [cs](Graph<double> &g, ParamBinding<double> &p) {
        return ContractSeeded(g, BatchNorm<double>(g, p("x"), p("gamma"), p("beta"), nullptr, nullptr), cs);
      };
      cases.push_back(std::move(c));
    }
    {
      const int n = small(rng), h = small(rng), d = 2 * small(rng);
      GradCase c{"blstm_layer", {}, nullptr};
      c.inputs["x"] = RandomTensor(rng, {n, d});
      for (const char *dir : {"f", "b"}) {
        const std::string s = dir;
        c.inputs[s + ".w_ih"] = RandomTensor(rng, {d, 4 * h});
        c.inputs[s + ".w_hh"] = RandomTensor(rng, {h, 4 * h});
        c.inputs[s + ".bias"] = RandomTensor(rng, {4 * h});
      }
      c.loss = [cs](Graph<double> &g, ParamBinding<double> &p) {
        LstmWeights f{p("f.w_ih"), p("f.w_hh"), p("f.bias")};
        LstmWeights b{p("b.w_ih"), p("b.w_hh"), p("b.bias")};
        return ContractSeeded(g, BlstmLayer(g, p("x"), f, b), cs);
      };
      cases.push_back(std::move(c));
    }
    {
      const int n = small(rng) + 1;
      const int valid = std::uniform_int_distribution<int>(1, n)(rng);
      GradCase c{"global_avg_pool", {}, nullptr};
      c.inputs["x"] = RandomTensor(rng, {n, small(rng)});
      c.loss = [cs, valid](Graph<double> &g, ParamBinding<double> &p) {
        return ContractSeeded(g, GlobalAvgPool(g, p("x"), valid), cs);
      };
      cases.push_back(std::move(c));
    }
    {
      const int n = small(rng), din = small(rng), dout = small(rng);
      GradCase c{"projection", {}, nullptr};
      c.inputs["x"] = RandomTensor(rng, {n, din});
      c.inputs["w"] = RandomTensor(rng, {din, dout});
      c.inputs["b"] = RandomTensor(rng, {dout});
      c.loss = [cs](Graph<double> &g, ParamBinding<double> &p) {
        return ContractSeeded(g, Linear(g, p("x"), p("w"), p("b")), cs);
      };
      cases.push_back(std::move(c));
    }
    {
      const int layers = small(rng);
      GradCase c{"combine_layers", {}, nullptr};
      c.inputs["z"] = RandomTensor(rng, {layers, small(rng), small(rng)});
      c.inputs["raw"] = RandomTensor(rng, {layers});
      c.loss = [cs](Graph<double> &g, ParamBinding<double> &p) {
        return ContractSeeded(g, WeightedLayerSum(g, p("z"), p("raw")), cs);
      };
      cases.push_back(std::move(c));
    }
    {
      GradCase c{"cross_entropy", {}, nullptr};
      c.inputs["l"] = RandomTensor(rng, {2}, 3.0);
      const Label label = (rng() & 1) ? Label::kSpoof : Label::kBonafide;
      c.loss = [label](Graph<double> &g, ParamBinding<double> &p) { return CrossEntropy(g, p("l"), label); };
      cases.push_back(std::move(c));
    }
  }
  return cases;
}

}  // namespace cm::testing

#endif  // CM_TESTS_GRADCHECK_H_
