// include/cm/ops.h

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

#ifndef CM_OPS_H_
#define CM_OPS_H_

#include <vector>

#include "cm/autodiff.h"

// Differentiable operators. Shapes use the layout noted on each op; a single
// trial is processed at a time (no batch axis) and cross-item statistics go
// through Concat/Slice.
namespace cm::nn {

enum class Label : int { kBonafide = 0, kSpoof = 1 };

// x [N x Din] or [Din], w [Din x Dout], b [Dout] -> [N x Dout] or [Dout].
template <typename T>
Var Linear(Graph<T> &g, Var x, Var w, Var b);

// Cross-correlation with zero "same" padding, stride 1.
// x [Cin x H x W], k [Cout x Cin x kh x kw] (odd kh, kw), b [Cout].
template <typename T>
Var Conv2d(Graph<T> &g, Var x, Var k, Var b);

// Max-feature-map over axis 0: out[c] = max(x[c], x[c + C]); ties pick the
// first half.
template <typename T>
Var Mfm(Graph<T> &g, Var x);

// 2x2 max pooling with stride 2 on [C x H x W]; odd trailing rows/cols drop.
template <typename T>
Var MaxPool2(Graph<T> &g, Var x);

struct BatchNormConfig {
  double momentum = 0.1;
  double eps = 1e-5;
};

// Per-channel normalization of [C x H x W]. In training mode uses batch
// statistics and, when running stats are given, updates them in place.
template <typename T>
Var BatchNorm(Graph<T> &g, Var x, Var gamma, Var beta, Tensor<T> *running_mean,
              Tensor<T> *running_var, const BatchNormConfig &cfg = {});

// Concatenate rank-3 tensors along axis 1 / take rows [start, start+len).
template <typename T>
Var ConcatAxis1(Graph<T> &g, const std::vector<Var> &xs);
template <typename T>
Var SliceAxis1(Graph<T> &g, Var x, int start, int len);

// [C x H x W] -> [H x (C*W)], out[h][c*W + w] = x[c][h][w].
template <typename T>
Var ToSequence(Graph<T> &g, Var x);

// [N x D] -> [1 x N x D].
template <typename T>
Var ToImage(Graph<T> &g, Var x);

struct LstmWeights {
  Var w_ih;  // [D x 4H], gate blocks i, f, g, o
  Var w_hh;  // [H x 4H]
  Var bias;  // [4H]
};

// Bidirectional LSTM over x [N x D]; output [N x 2H] = [fwd | bwd].
template <typename T>
Var BlstmLayer(Graph<T> &g, Var x, const LstmWeights &fwd, const LstmWeights &bwd);

// Mean over the first valid_len rows of x [N x D] -> [D].
template <typename T>
Var GlobalAvgPool(Graph<T> &g, Var x, int valid_len);

// -log softmax(logits)[label] for logits [2]; scalar [1].
template <typename T>
Var CrossEntropy(Graph<T> &g, Var logits, Label label);

// layers [K x N x D], raw [K] -> sum_i softmax(raw)_i * layers[i].
template <typename T>
Var WeightedLayerSum(Graph<T> &g, Var layers, Var raw);

template <typename T>
Var Sum(Graph<T> &g, Var x);
template <typename T>
Var AddVars(Graph<T> &g, Var a, Var b);
// Mean of scalar variables.
template <typename T>
Var MeanOf(Graph<T> &g, const std::vector<Var> &scalars);

template <typename T>
std::vector<T> Softmax(const std::vector<T> &x);

}  // namespace cm::nn

#endif  // CM_OPS_H_
