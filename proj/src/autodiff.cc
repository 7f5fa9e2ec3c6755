// src/autodiff.cc

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

#include "cm/autodiff.h"

#include <cmath>
#include <sstream>

namespace cm::nn {

std::string ShapeString(const std::vector<int> &shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

template <typename T>
Var Graph<T>::Leaf(Tensor<T> value, bool requires_grad, std::string op) {
  Record r;
  r.op = std::move(op);
  r.value = std::move(value);
  r.needs_grad = requires_grad;
  records_.push_back(std::move(r));
  return Var{int(records_.size()) - 1};
}

template <typename T>
Var Graph<T>::Add(std::string op, const std::vector<Var> &inputs, Tensor<T> value,
                  BackwardFn backward) {
  Record r;
  r.op = std::move(op);
  for (Var v : inputs) {
    rec(v.id);
    r.inputs.push_back(v.id);
    r.needs_grad = r.needs_grad || rec(v.id).needs_grad;
  }
  for (T x : value.data)
    if (!std::isfinite(double(x))) Fail(ErrorKind::kNumeric, "non-finite value produced by " + r.op);
  r.value = std::move(value);
  if (r.needs_grad) r.backward = std::move(backward);
  records_.push_back(std::move(r));
  return Var{int(records_.size()) - 1};
}

template <typename T>
const Tensor<T> &Graph<T>::grad(Var v) {
  return GradRef(v.id);
}

template <typename T>
Tensor<T> &Graph<T>::GradRef(int id) {
  Record &r = rec(id);
  if (r.grad.empty()) r.grad = Tensor<T>(r.value.shape);
  return r.grad;
}

template <typename T>
void Graph<T>::Backward(Var root) {
  Record &r = rec(root.id);
  if (r.value.size() != 1)
    Fail(ErrorKind::kContract, "backward requires a scalar root, got " + ShapeString(r.value.shape));
  if (backward_done_) Fail(ErrorKind::kContract, "backward already ran on this tape");
  backward_done_ = true;
  GradRef(root.id).data[0] = T(1);
  for (int id = root.id; id >= 0; --id) {
    Record &cur = records_[size_t(id)];
    ++visits_;
    if (!cur.needs_grad || !cur.backward || cur.grad.empty()) continue;
    cur.backward(*this, id);
  }
}

template <typename T>
Var ParamBinding<T>::operator()(const std::string &name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  auto p = params_.find(name);
  if (p == params_.end()) Fail(ErrorKind::kLookup, "unknown parameter '" + name + "'");
  Var v = graph_.Leaf(p->second, requires_grad_, "param:" + name);
  bound_.emplace(name, v);
  return v;
}

template <typename T>
TensorMap<T> ParamBinding<T>::Gradients() {
  TensorMap<T> out;
  for (const auto &[name, value] : params_) {
    auto it = bound_.find(name);
    if (it == bound_.end()) out.emplace(name, Tensor<T>(value.shape));
    else out.emplace(name, graph_.grad(it->second));
  }
  return out;
}

template class Graph<float>;
template class Graph<double>;
template class ParamBinding<float>;
template class ParamBinding<double>;

}  // namespace cm::nn
