// include/cm/autodiff.h

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

#ifndef CM_AUTODIFF_H_
#define CM_AUTODIFF_H_

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cm/error.h"

namespace cm::nn {

// Dense row-major tensor. T is float at runtime, double for gradient checks.
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s, T fill = T(0)) : shape(std::move(s)) {
    data.assign(NumElements(shape), fill);
  }
  Tensor(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != NumElements(shape)) Fail(ErrorKind::kShape, "tensor data/shape size mismatch");
  }

  static size_t NumElements(const std::vector<int> &s) {
    size_t n = 1;
    for (int e : s) {
      if (e <= 0) Fail(ErrorKind::kShape, "tensor extents must be positive");
      n *= size_t(e);
    }
    return n;
  }

  size_t size() const { return data.size(); }
  int rank() const { return int(shape.size()); }
  int dim(int i) const { return shape[size_t(i)]; }
  bool empty() const { return data.empty(); }
  T &operator[](size_t i) { return data[i]; }
  T operator[](size_t i) const { return data[i]; }
};

template <typename To, typename From>
Tensor<To> CastTensor(const Tensor<From> &t) {
  Tensor<To> out;
  out.shape = t.shape;
  out.data.assign(t.data.begin(), t.data.end());
  return out;
}

template <typename T>
using TensorMap = std::map<std::string, Tensor<T>>;

template <typename To, typename From>
TensorMap<To> CastTensors(const TensorMap<From> &m) {
  TensorMap<To> out;
  for (const auto &[k, v] : m) out.emplace(k, CastTensor<To>(v));
  return out;
}

std::string ShapeString(const std::vector<int> &shape);

struct Var {
  int id = -1;
};

// Append-only tape; records are in topological order by construction.
template <typename T>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph &, int)>;

  struct Record {
    std::string op;
    std::vector<int> inputs;
    Tensor<T> value;
    Tensor<T> grad;
    BackwardFn backward;
    bool needs_grad = false;
  };

  explicit Graph(bool training = false) : training_(training) {}

  bool training() const { return training_; }

  Var Leaf(Tensor<T> value, bool requires_grad, std::string op = "leaf");
  Var Add(std::string op, const std::vector<Var> &inputs, Tensor<T> value, BackwardFn backward);

  const Tensor<T> &value(Var v) const { return rec(v.id).value; }
  const Tensor<T> &value(int id) const { return rec(id).value; }
  // Upstream gradient of a record; zero-filled if nothing flowed into it.
  const Tensor<T> &grad(Var v);
  Tensor<T> &GradRef(int id);
  bool needs_grad(int id) const { return rec(id).needs_grad; }
  const Record &record(int id) const { return rec(id); }
  size_t size() const { return records_.size(); }

  // Reverse sweep from a scalar root. Each record is visited at most once.
  void Backward(Var root);
  size_t backward_visits() const { return visits_; }

 private:
  const Record &rec(int id) const {
    if (id < 0 || size_t(id) >= records_.size()) Fail(ErrorKind::kContract, "variable not on this tape");
    return records_[size_t(id)];
  }
  Record &rec(int id) {
    if (id < 0 || size_t(id) >= records_.size()) Fail(ErrorKind::kContract, "variable not on this tape");
    return records_[size_t(id)];
  }

  std::vector<Record> records_;
  bool training_;
  bool backward_done_ = false;
  size_t visits_ = 0;
};

// Binds named parameters to leaf variables on first use and collects their
// gradients after Backward().
template <typename T>
class ParamBinding {
 public:
  ParamBinding(Graph<T> &graph, const TensorMap<T> &params, bool requires_grad = true)
      : graph_(graph), params_(params), requires_grad_(requires_grad) {}

  Var operator()(const std::string &name);
  bool has(const std::string &name) const { return params_.count(name) > 0; }
  Graph<T> &graph() { return graph_; }

  // One entry per parameter in the map; zeros for parameters never used.
  TensorMap<T> Gradients();

 private:
  Graph<T> &graph_;
  const TensorMap<T> &params_;
  bool requires_grad_;
  std::map<std::string, Var> bound_;
};

}  // namespace cm::nn

#endif  // CM_AUTODIFF_H_
