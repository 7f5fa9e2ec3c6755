// src/ops.cc

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

#include "cm/ops.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <string>

namespace cm::nn {

namespace {

void RequireRank(const std::vector<int> &shape, int rank, const char *op) {
  if (int(shape.size()) != rank)
    Fail(ErrorKind::kShape, std::string(op) + ": expected rank " + std::to_string(rank) +
                                ", got " + ShapeString(shape));
}

template <typename T>
T Sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

}  // namespace

template <typename T>
std::vector<T> Softmax(const std::vector<T> &x) {
  std::vector<T> out(x.size());
  if (x.empty()) return out;
  const T mx = *std::max_element(x.begin(), x.end());
  T total = 0;
  for (size_t i = 0; i < x.size(); ++i) total += (out[i] = std::exp(x[i] - mx));
  for (T &v : out) v /= total;
  return out;
}

// ---------------------------------------------------------------------------

template <typename T>
Var Linear(Graph<T> &g, Var x, Var w, Var b) {
  const auto &xv = g.value(x);
  const auto &wv = g.value(w);
  const auto &bv = g.value(b);
  RequireRank(wv.shape, 2, "linear weight");
  RequireRank(bv.shape, 1, "linear bias");
  const bool vec = xv.rank() == 1;
  if (!vec) RequireRank(xv.shape, 2, "linear input");
  const int n = vec ? 1 : xv.dim(0);
  const int din = vec ? xv.dim(0) : xv.dim(1);
  const int dout = wv.dim(1);
  if (din != wv.dim(0) || bv.dim(0) != dout)
    Fail(ErrorKind::kShape, "linear: input " + ShapeString(xv.shape) + " vs weight " +
                                ShapeString(wv.shape) + " and bias " + ShapeString(bv.shape));
  Tensor<T> y(vec ? std::vector<int>{dout} : std::vector<int>{n, dout});
  for (int r = 0; r < n; ++r) {
    T *yr = &y.data[size_t(r) * dout];
    for (int o = 0; o < dout; ++o) yr[o] = bv[size_t(o)];
    const T *xr = &xv.data[size_t(r) * din];
    for (int i = 0; i < din; ++i) {
      const T xi = xr[i];
      const T *wr = &wv.data[size_t(i) * dout];
      for (int o = 0; o < dout; ++o) yr[o] += xi * wr[o];
    }
  }
  const int xid = x.id, wid = w.id, bid = b.id;
  return g.Add("linear", {x, w, b}, std::move(y), [=](Graph<T> &g, int self) {
    const auto &dy = g.GradRef(self);
    const auto &xv = g.value(xid);
    const auto &wv = g.value(wid);
    if (g.needs_grad(xid)) {
      auto &dx = g.GradRef(xid);
      for (int r = 0; r < n; ++r)
        for (int i = 0; i < din; ++i) {
          T acc = 0;
          for (int o = 0; o < dout; ++o) acc += dy.data[size_t(r) * dout + o] * wv.data[size_t(i) * dout + o];
          dx.data[size_t(r) * din + i] += acc;
        }
    }
    if (g.needs_grad(wid)) {
      auto &dw = g.GradRef(wid);
      for (int r = 0; r < n; ++r)
        for (int i = 0; i < din; ++i) {
          const T xi = xv.data[size_t(r) * din + i];
          for (int o = 0; o < dout; ++o) dw.data[size_t(i) * dout + o] += xi * dy.data[size_t(r) * dout + o];
        }
    }
    if (g.needs_grad(bid)) {
      auto &db = g.GradRef(bid);
      for (int r = 0; r < n; ++r)
        for (int o = 0; o < dout; ++o) db.data[size_t(o)] += dy.data[size_t(r) * dout + o];
    }
  });
}

// ---------------------------------------------------------------------------

template <typename T>
Var Conv2d(Graph<T> &g, Var x, Var k, Var b) {
  const auto &xv = g.value(x);
  const auto &kv = g.value(k);
  const auto &bv = g.value(b);
  RequireRank(xv.shape, 3, "conv2d input");
  RequireRank(kv.shape, 4, "conv2d kernel");
  RequireRank(bv.shape, 1, "conv2d bias");
  const int ci = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  const int co = kv.dim(0), kh = kv.dim(2), kw = kv.dim(3);
  if (kv.dim(1) != ci || bv.dim(0) != co || kh % 2 == 0 || kw % 2 == 0)
    Fail(ErrorKind::kShape, "conv2d: input " + ShapeString(xv.shape) + " vs kernel " +
                                ShapeString(kv.shape) + " and bias " + ShapeString(bv.shape));
  const int ph = kh / 2, pw = kw / 2;
  const size_t plane = size_t(h) * w;

  // Visits every (output, input, tap) triple with in-range rows and columns.
  auto for_each_tap = [=](auto &&fn) {
    for (int o = 0; o < co; ++o)
      for (int c = 0; c < ci; ++c)
        for (int ky = 0; ky < kh; ++ky)
          for (int kx = 0; kx < kw; ++kx) {
            const size_t kidx = ((size_t(o) * ci + c) * kh + ky) * kw + kx;
            const int y0 = std::max(0, ph - ky), y1 = std::min(h, h + ph - ky);
            const int x0 = std::max(0, pw - kx), x1 = std::min(w, w + pw - kx);
            fn(o, c, kidx, ky - ph, kx - pw, y0, y1, x0, x1);
          }
  };

  Tensor<T> y({co, h, w});
  for (int o = 0; o < co; ++o)
    std::fill_n(y.data.begin() + ptrdiff_t(o * plane), plane, bv[size_t(o)]);
  for_each_tap([&](int o, int c, size_t kidx, int dy, int dx, int y0, int y1, int x0, int x1) {
    const T wt = kv.data[kidx];
    for (int r = y0; r < y1; ++r) {
      T *out = &y.data[o * plane + size_t(r) * w];
      const T *in = &xv.data[c * plane + size_t(r + dy) * w + dx];
      for (int col = x0; col < x1; ++col) out[col] += wt * in[col];
    }
  });

  const int xid = x.id, kid = k.id, bid = b.id;
  return g.Add("conv2d", {x, k, b}, std::move(y), [=](Graph<T> &g, int self) {
    const auto &gy = g.GradRef(self);
    const auto &xv = g.value(xid);
    const auto &kv = g.value(kid);
    Tensor<T> *gx = g.needs_grad(xid) ? &g.GradRef(xid) : nullptr;
    Tensor<T> *gk = g.needs_grad(kid) ? &g.GradRef(kid) : nullptr;
    for_each_tap([&](int o, int c, size_t kidx, int dy, int dx, int y0, int y1, int x0, int x1) {
      const T wt = kv.data[kidx];
      T acc = 0;
      for (int r = y0; r < y1; ++r) {
        const T *up = &gy.data[o * plane + size_t(r) * w];
        const size_t in_off = c * plane + size_t(r + dy) * w + dx;
        if (gx) {
          T *din = &gx->data[in_off];
          for (int col = x0; col < x1; ++col) din[col] += wt * up[col];
        }
        if (gk) {
          const T *in = &xv.data[in_off];
          for (int col = x0; col < x1; ++col) acc += up[col] * in[col];
        }
      }
      if (gk) gk->data[kidx] += acc;
    });
    if (g.needs_grad(bid)) {
      auto &gb = g.GradRef(bid);
      for (int o = 0; o < co; ++o) {
        T acc = 0;
        for (size_t i = 0; i < plane; ++i) acc += gy.data[o * plane + i];
        gb.data[size_t(o)] += acc;
      }
    }
  });
}

// ---------------------------------------------------------------------------

template <typename T>
Var Mfm(Graph<T> &g, Var x) {
  const auto &xv = g.value(x);
  if (xv.rank() < 1 || xv.dim(0) % 2 != 0)
    Fail(ErrorKind::kShape, "mfm: channel extent must be even, got " + ShapeString(xv.shape));
  std::vector<int> shape = xv.shape;
  shape[0] /= 2;
  Tensor<T> y(shape);
  const size_t half = y.size();
  for (size_t i = 0; i < half; ++i)
    y.data[i] = xv.data[i] >= xv.data[i + half] ? xv.data[i] : xv.data[i + half];
  const int xid = x.id;
  return g.Add("mfm", {x}, std::move(y), [=](Graph<T> &g, int self) {
    const auto &gy = g.GradRef(self);
    const auto &xv = g.value(xid);
    auto &gx = g.GradRef(xid);
    for (size_t i = 0; i < half; ++i) {
      if (xv.data[i] >= xv.data[i + half]) gx.data[i] += gy.data[i];
      else gx.data[i + half] += gy.data[i];
    }
  });
}

// ---------------------------------------------------------------------------

template <typename T>
Var MaxPool2(Graph<T> &g, Var x) {
  const auto &xv = g.value(x);
  RequireRank(xv.shape, 3, "maxpool input");
  const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  const int oh = h / 2, ow = w / 2;
  if (oh < 1 || ow < 1)
    Fail(ErrorKind::kShape, "maxpool: input " + ShapeString(xv.shape) + " too small for 2x2 pooling");
  Tensor<T> y({c, oh, ow});
  auto argmax = std::make_shared<std::vector<size_t>>(y.size());
  for (int ch = 0; ch < c; ++ch)
    for (int r = 0; r < oh; ++r)
      for (int col = 0; col < ow; ++col) {
        size_t best = (size_t(ch) * h + 2 * r) * w + 2 * col;
        for (int dr = 0; dr < 2; ++dr)
          for (int dc = 0; dc < 2; ++dc) {
            const size_t idx = (size_t(ch) * h + 2 * r + dr) * w + 2 * col + dc;
            if (xv.data[idx] > xv.data[best]) best = idx;
          }
        const size_t out = (size_t(ch) * oh + r) * ow + col;
        y.data[out] = xv.data[best];
        (*argmax)[out] = best;
      }
  const int xid = x.id;
  return g.Add("maxpool2", {x}, std::move(y), [=](Graph<T> &g, int self) {
    const auto &gy = g.GradRef(self);
    auto &gx = g.GradRef(xid);
    for (size_t i = 0; i < argmax->size(); ++i) gx.data[(*argmax)[i]] += gy.data[i];
  });
}

// ---------------------------------------------------------------------------

template <typename T>
Var BatchNorm(Graph<T> &g, Var x, Var gamma, Var beta, Tensor<T> *running_mean,
              Tensor<T> *running_var, const BatchNormConfig &cfg) {
  const auto &xv = g.value(x);
  RequireRank(xv.shape, 3, "batchnorm input");
  const int c = xv.dim(0);
  const size_t m = size_t(xv.dim(1)) * xv.dim(2);
  const auto &gv = g.value(gamma);
  const auto &bv = g.value(beta);
  if (gv.size() != size_t(c) || bv.size() != size_t(c))
    Fail(ErrorKind::kShape, "batchnorm: " + std::to_string(c) + " channels vs affine " +
                                ShapeString(gv.shape));
  const bool training = g.training();
  if (!training && (running_mean == nullptr || running_var == nullptr))
    Fail(ErrorKind::kContract, "batchnorm inference needs running statistics");

  auto mean = std::make_shared<std::vector<T>>(size_t(c));
  auto inv_std = std::make_shared<std::vector<T>>(size_t(c));
  for (int ch = 0; ch < c; ++ch) {
    const T *p = &xv.data[size_t(ch) * m];
    T mu, var;
    if (training) {
      T acc = 0;
      for (size_t i = 0; i < m; ++i) acc += p[i];
      mu = acc / T(m);
      T sq = 0;
      for (size_t i = 0; i < m; ++i) sq += (p[i] - mu) * (p[i] - mu);
      var = sq / T(m);
      if (running_mean && running_var) {
        const T mom = T(cfg.momentum);
        const T unbiased = m > 1 ? sq / T(m - 1) : var;
        running_mean->data[size_t(ch)] = (T(1) - mom) * running_mean->data[size_t(ch)] + mom * mu;
        running_var->data[size_t(ch)] = (T(1) - mom) * running_var->data[size_t(ch)] + mom * unbiased;
      }
    } else {
      mu = running_mean->data[size_t(ch)];
      var = running_var->data[size_t(ch)];
    }
    (*mean)[size_t(ch)] = mu;
    (*inv_std)[size_t(ch)] = T(1) / std::sqrt(var + T(cfg.eps));
  }
  Tensor<T> y(xv.shape);
  for (int ch = 0; ch < c; ++ch)
    for (size_t i = 0; i < m; ++i) {
      const size_t idx = size_t(ch) * m + i;
      y.data[idx] = gv[size_t(ch)] * (xv.data[idx] - (*mean)[size_t(ch)]) * (*inv_std)[size_t(ch)] +
                    bv[size_t(ch)];
    }

  const int xid = x.id, gid = gamma.id, bid = beta.id;
  return g.Add("batchnorm", {x, gamma, beta}, std::move(y), [=](Graph<T> &g, int self) {
    const auto &gy = g.GradRef(self);
    const auto &xv = g.value(xid);
    const auto &gv = g.value(gid);
    for (int ch = 0; ch < c; ++ch) {
      const T mu = (*mean)[size_t(ch)], is = (*inv_std)[size_t(ch)];
      T sum_dy = 0, sum_dy_xhat = 0;
      for (size_t i = 0; i < m; ++i) {
        const size_t idx = size_t(ch) * m + i;
        const T xhat = (xv.data[idx] - mu) * is;
        sum_dy += gy.data[idx];
        sum_dy_xhat += gy.data[idx] * xhat;
      }
      if (g.needs_grad(gid)) g.GradRef(gid).data[size_t(ch)] += sum_dy_xhat;
      if (g.needs_grad(bid)) g.GradRef(bid).data[size_t(ch)] += sum_dy;
      if (!g.needs_grad(xid)) continue;
      auto &gx = g.GradRef(xid);
      const T scale = gv[size_t(ch)] * is;
      for (size_t i = 0; i < m; ++i) {
        const size_t idx = size_t(ch) * m + i;
        if (training) {
          const T xhat = (xv.data[idx] - mu) * is;
          gx.data[idx] += scale * (gy.data[idx] - sum_dy / T(m) - xhat * sum_dy_xhat / T(m));
        } else {
          gx.data[idx] += scale * gy.data[idx];
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------

template <typename T>
Var ConcatAxis1(Graph<T> &g, const std::vector<Var> &xs) {
  if (xs.empty()) Fail(ErrorKind::kShape, "concat of zero tensors");
  const auto &first = g.value(xs[0]);
  RequireRank(first.shape, 3, "concat input");
  const int c = first.dim(0), w = first.dim(2);
  std::vector<int> offsets;
  int total = 0;
  for (Var v : xs) {
    const auto &t = g.value(v);
    RequireRank(t.shape, 3, "concat input");
    if (t.dim(0) != c || t.dim(2) != w)
      Fail(ErrorKind::kShape, "concat: " + ShapeString(t.shape) + " vs " + ShapeString(first.shape));
    offsets.push_back(total);
    total += t.dim(1);
  }
  Tensor<T> y({c, total, w});
  std::vector<int> ids, heights;
  for (size_t n = 0; n < xs.size(); ++n) {
    const auto &t = g.value(xs[n]);
    ids.push_back(xs[n].id);
    heights.push_back(t.dim(1));
    for (int ch = 0; ch < c; ++ch)
      std::copy_n(t.data.begin() + ptrdiff_t(size_t(ch) * t.dim(1) * w), size_t(t.dim(1)) * w,
                  y.data.begin() + ptrdiff_t((size_t(ch) * total + offsets[n]) * w));
  }
  return g.Add("concat1", xs, std::move(y), [=](Graph<T> &g, int self) {
    const auto &gy = g.GradRef(self);
    for (size_t n = 0; n < ids.size(); ++n) {
      if (!g.needs_grad(ids[n])) continue;
      auto &gx = g.GradRef(ids[n]);
      for (int ch = 0; ch < c; ++ch)
        for (size_t i = 0; i < size_t(heights[n]) * w; ++i)
          gx.data[size_t(ch) * heights[n] * w + i] += gy.data[(size_t(ch) * total + offsets[n]) * w + i];
    }
  });
}

template <typename T>
Var SliceAxis1(Graph<T> &g, Var x, int start, int len) {
  const auto &xv = g.value(x);
  RequireRank(xv.shape, 3, "slice input");
  const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  if (start < 0 || len < 1 || start + len > h)
    Fail(ErrorKind::kShape, "slice [" + std::to_string(start) + ", +" + std::to_string(len) +
                                ") out of " + ShapeString(xv.shape));
  Tensor<T> y({c, len, w});
  for (int ch = 0; ch < c; ++ch)
    std::copy_n(xv.data.begin() + ptrdiff_t((size_t(ch) * h + start) * w), size_t(len) * w,
                y.data.begin() + ptrdiff_t(size_t(ch) * len * w));
  const int xid = x.id;
  return g.Add("slice1", {x}, std::move(y), [=](Graph<T> &g, int self) {
    const auto &gy = g.GradRef(self);
    auto &gx = g.GradRef(xid);
    for (int ch = 0; ch < c; ++ch)
      for (size_t i = 0; i < size_t(len) * w; ++i)
        gx.data[(size_t(ch) * h + start) * w + i] += gy.data[size_t(ch) * len * w + i];
  });
}

template <typename T>
Var ToSequence(Graph<T> &g, Var x) {
  const auto &xv = g.value(x);
  RequireRank(xv.shape, 3, "to_sequence input");
  const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  Tensor<T> y({h, c * w});
  auto index = [=](int ch, int r, int col) {
    return std::pair<size_t, size_t>{(size_t(ch) * h + r) * w + col, size_t(r) * c * w + size_t(ch) * w + col};
  };
  for (int ch = 0; ch < c; ++ch)
    for (int r = 0; r < h; ++r)
      for (int col = 0; col < w; ++col) {
        auto [src, dst] = index(ch, r, col);
        y.data[dst] = xv.data[src];
      }
  const int xid = x.id;
  return g.Add("to_sequence", {x}, std::move(y), [=](Graph<T> &g, int self) {
    const auto &gy = g.GradRef(self);
    auto &gx = g.GradRef(xid);
    for (int ch = 0; ch < c; ++ch)
      for (int r = 0; r < h; ++r)
        for (int col = 0; col < w; ++col) {
          auto [src, dst] = index(ch, r, col);
          gx.data[src] += gy.data[dst];
        }
  });
}

template <typename T>
Var ToImage(Graph<T> &g, Var x) {
  const auto &xv = g.value(x);
  RequireRank(xv.shape, 2, "to_image input");
  Tensor<T> y({1, xv.dim(0), xv.dim(1)}, xv.data);
  const int xid = x.id;
  return g.Add("to_image", {x}, std::move(y), [=](Graph<T> &g, int self) {
    const auto &gy = g.GradRef(self);
    auto &gx = g.GradRef(xid);
    for (size_t i = 0; i < gy.size(); ++i) gx.data[i] += gy.data[i];
  });
}

// ---------------------------------------------------------------------------

namespace {

template <typename T>
struct LstmCache {
  // Per step (in processing order): gates i f g o, cell c, tanh(c), h.
  std::vector<T> gates, cell, tanh_cell, hidden;
};

// Runs one direction; writes h into out[:, col_offset : col_offset + H].
template <typename T>
void LstmForward(const Tensor<T> &x, const Tensor<T> &w_ih, const Tensor<T> &w_hh,
                 const Tensor<T> &bias, bool reverse, int col_offset, int out_width,
                 Tensor<T> &out, LstmCache<T> &cache) {
  const int n = x.dim(0), d = x.dim(1), hsz = w_hh.dim(0), g4 = 4 * hsz;
  cache.gates.assign(size_t(n) * g4, T(0));
  cache.cell.assign(size_t(n) * hsz, T(0));
  cache.tanh_cell.assign(size_t(n) * hsz, T(0));
  cache.hidden.assign(size_t(n) * hsz, T(0));
  std::vector<T> z(static_cast<size_t>(g4));
  for (int s = 0; s < n; ++s) {
    const int t = reverse ? n - 1 - s : s;
    for (int j = 0; j < g4; ++j) z[size_t(j)] = bias[size_t(j)];
    for (int i = 0; i < d; ++i) {
      const T xi = x.data[size_t(t) * d + i];
      const T *row = &w_ih.data[size_t(i) * g4];
      for (int j = 0; j < g4; ++j) z[size_t(j)] += xi * row[j];
    }
    if (s > 0) {
      const T *hp = &cache.hidden[size_t(s - 1) * hsz];
      for (int i = 0; i < hsz; ++i) {
        const T *row = &w_hh.data[size_t(i) * g4];
        for (int j = 0; j < g4; ++j) z[size_t(j)] += hp[i] * row[j];
      }
    }
    T *gates = &cache.gates[size_t(s) * g4];
    for (int j = 0; j < hsz; ++j) {
      const T ig = Sigmoid(z[size_t(j)]);
      const T fg = Sigmoid(z[size_t(hsz + j)]);
      const T gg = std::tanh(z[size_t(2 * hsz + j)]);
      const T og = Sigmoid(z[size_t(3 * hsz + j)]);
      gates[j] = ig;
      gates[hsz + j] = fg;
      gates[2 * hsz + j] = gg;
      gates[3 * hsz + j] = og;
      const T prev = s > 0 ? cache.cell[size_t(s - 1) * hsz + j] : T(0);
      const T cval = fg * prev + ig * gg;
      const T tc = std::tanh(cval);
      cache.cell[size_t(s) * hsz + j] = cval;
      cache.tanh_cell[size_t(s) * hsz + j] = tc;
      cache.hidden[size_t(s) * hsz + j] = og * tc;
      out.data[size_t(t) * out_width + col_offset + j] = og * tc;
    }
  }
}

template <typename T>
void LstmBackward(const Tensor<T> &x, const Tensor<T> &w_ih, const Tensor<T> &w_hh,
                  bool reverse, int col_offset, int out_width, const Tensor<T> &gy,
                  const LstmCache<T> &cache, Tensor<T> *gx, Tensor<T> *gw_ih, Tensor<T> *gw_hh,
                  Tensor<T> *gbias) {
  const int n = x.dim(0), d = x.dim(1), hsz = w_hh.dim(0), g4 = 4 * hsz;
  std::vector<T> dh_next(size_t(hsz), T(0)), dc_next(size_t(hsz), T(0)), dz(static_cast<size_t>(g4));
  for (int s = n - 1; s >= 0; --s) {
    const int t = reverse ? n - 1 - s : s;
    const T *gates = &cache.gates[size_t(s) * g4];
    for (int j = 0; j < hsz; ++j) {
      const T dh = gy.data[size_t(t) * out_width + col_offset + j] + dh_next[size_t(j)];
      const T ig = gates[j], fg = gates[hsz + j], gg = gates[2 * hsz + j], og = gates[3 * hsz + j];
      const T tc = cache.tanh_cell[size_t(s) * hsz + j];
      const T dc = dc_next[size_t(j)] + dh * og * (T(1) - tc * tc);
      const T prev = s > 0 ? cache.cell[size_t(s - 1) * hsz + j] : T(0);
      dz[size_t(j)] = dc * gg * ig * (T(1) - ig);
      dz[size_t(hsz + j)] = dc * prev * fg * (T(1) - fg);
      dz[size_t(2 * hsz + j)] = dc * ig * (T(1) - gg * gg);
      dz[size_t(3 * hsz + j)] = dh * tc * og * (T(1) - og);
      dc_next[size_t(j)] = dc * fg;
    }
    if (gbias)
      for (int j = 0; j < g4; ++j) gbias->data[size_t(j)] += dz[size_t(j)];
    for (int i = 0; i < d; ++i) {
      const T *row = &w_ih.data[size_t(i) * g4];
      const T xi = x.data[size_t(t) * d + i];
      T acc = 0;
      for (int j = 0; j < g4; ++j) {
        acc += dz[size_t(j)] * row[j];
        if (gw_ih) gw_ih->data[size_t(i) * g4 + j] += xi * dz[size_t(j)];
      }
      if (gx) gx->data[size_t(t) * d + i] += acc;
    }
    std::fill(dh_next.begin(), dh_next.end(), T(0));
    if (s > 0) {
      const T *hp = &cache.hidden[size_t(s - 1) * hsz];
      for (int i = 0; i < hsz; ++i) {
        const T *row = &w_hh.data[size_t(i) * g4];
        T acc = 0;
        for (int j = 0; j < g4; ++j) {
          acc += dz[size_t(j)] * row[j];
          if (gw_hh) gw_hh->data[size_t(i) * g4 + j] += hp[i] * dz[size_t(j)];
        }
        dh_next[size_t(i)] = acc;
      }
    }
  }
}

}  // namespace

template <typename T>
Var BlstmLayer(Graph<T> &g, Var x, const LstmWeights &fwd, const LstmWeights &bwd) {
  const auto &xv = g.value(x);
  RequireRank(xv.shape, 2, "blstm input");
  const int n = xv.dim(0), d = xv.dim(1);
  int hsz = 0;
  for (const LstmWeights *lw : {&fwd, &bwd}) {
    const auto &wi = g.value(lw->w_ih);
    const auto &wh = g.value(lw->w_hh);
    const auto &bb = g.value(lw->bias);
    RequireRank(wi.shape, 2, "lstm w_ih");
    RequireRank(wh.shape, 2, "lstm w_hh");
    hsz = wh.dim(0);
    if (wi.dim(0) != d || wi.dim(1) != 4 * hsz || wh.dim(1) != 4 * hsz || bb.size() != size_t(4 * hsz))
      Fail(ErrorKind::kShape, "blstm: input " + ShapeString(xv.shape) + " vs w_ih " +
                                  ShapeString(wi.shape) + ", w_hh " + ShapeString(wh.shape));
  }
  const int width = 2 * hsz;
  Tensor<T> y({n, width});
  auto caches = std::make_shared<std::array<LstmCache<T>, 2>>();
  LstmForward(xv, g.value(fwd.w_ih), g.value(fwd.w_hh), g.value(fwd.bias), false, 0, width, y,
              (*caches)[0]);
  LstmForward(xv, g.value(bwd.w_ih), g.value(bwd.w_hh), g.value(bwd.bias), true, hsz, width, y,
              (*caches)[1]);
  const int xid = x.id;
  const std::array<LstmWeights, 2> dirs{fwd, bwd};
  return g.Add("blstm", {x, fwd.w_ih, fwd.w_hh, fwd.bias, bwd.w_ih, bwd.w_hh, bwd.bias}, std::move(y),
               [=](Graph<T> &g, int self) {
                 const auto &gy = g.GradRef(self);
                 for (int dir = 0; dir < 2; ++dir) {
                   const LstmWeights &lw = dirs[size_t(dir)];
                   auto grad_of = [&g](Var v) { return g.needs_grad(v.id) ? &g.GradRef(v.id) : nullptr; };
                   Tensor<T> *gx = g.needs_grad(xid) ? &g.GradRef(xid) : nullptr;
                   LstmBackward(g.value(xid), g.value(lw.w_ih), g.value(lw.w_hh), dir == 1, dir * hsz,
                                width, gy, (*caches)[size_t(dir)], gx, grad_of(lw.w_ih),
                                grad_of(lw.w_hh), grad_of(lw.bias));
                 }
               });
}

// ---------------------------------------------------------------------------

template <typename T>
Var GlobalAvgPool(Graph<T> &g, Var x, int valid_len) {
  const auto &xv = g.value(x);
  RequireRank(xv.shape, 2, "global_avg_pool input");
  const int n = xv.dim(0), d = xv.dim(1);
  if (valid_len < 1 || valid_len > n)
    Fail(ErrorKind::kParameter, "global_avg_pool: valid_len " + std::to_string(valid_len) +
                                    " outside [1, " + std::to_string(n) + "]");
  Tensor<T> y({d});
  for (int t = 0; t < valid_len; ++t)
    for (int j = 0; j < d; ++j) y.data[size_t(j)] += xv.data[size_t(t) * d + j];
  for (T &v : y.data) v /= T(valid_len);
  const int xid = x.id;
  return g.Add("gap", {x}, std::move(y), [=](Graph<T> &g, int self) {
    const auto &gy = g.GradRef(self);
    auto &gx = g.GradRef(xid);
    for (int t = 0; t < valid_len; ++t)
      for (int j = 0; j < d; ++j) gx.data[size_t(t) * d + j] += gy.data[size_t(j)] / T(valid_len);
  });
}

template <typename T>
Var CrossEntropy(Graph<T> &g, Var logits, Label label) {
  const auto &lv = g.value(logits);
  RequireRank(lv.shape, 1, "cross_entropy logits");
  const int k = int(lv.size());
  const int target = static_cast<int>(label);
  if (target < 0 || target >= k) Fail(ErrorKind::kParameter, "cross_entropy: label out of range");
  const T mx = *std::max_element(lv.data.begin(), lv.data.end());
  T total = 0;
  for (T v : lv.data) total += std::exp(v - mx);
  const T lse = mx + std::log(total);
  Tensor<T> y({1}, std::vector<T>{lse - lv[size_t(target)]});
  const int lid = logits.id;
  return g.Add("cross_entropy", {logits}, std::move(y), [=](Graph<T> &g, int self) {
    const T up = g.GradRef(self).data[0];
    const auto p = Softmax(g.value(lid).data);
    auto &gl = g.GradRef(lid);
    for (int i = 0; i < k; ++i) gl.data[size_t(i)] += up * (p[size_t(i)] - (i == target ? T(1) : T(0)));
  });
}

template <typename T>
Var WeightedLayerSum(Graph<T> &g, Var layers, Var raw) {
  const auto &lv = g.value(layers);
  const auto &rv = g.value(raw);
  RequireRank(lv.shape, 3, "weighted_layer_sum layers");
  RequireRank(rv.shape, 1, "weighted_layer_sum weights");
  const int k = lv.dim(0);
  if (rv.dim(0) != k)
    Fail(ErrorKind::kShape, "weighted_layer_sum: " + std::to_string(k) + " layers vs " +
                                std::to_string(rv.dim(0)) + " weights");
  const size_t plane = size_t(lv.dim(1)) * lv.dim(2);
  const auto s = Softmax(rv.data);
  Tensor<T> y({lv.dim(1), lv.dim(2)});
  for (int i = 0; i < k; ++i)
    for (size_t e = 0; e < plane; ++e) y.data[e] += s[size_t(i)] * lv.data[size_t(i) * plane + e];
  const int lid = layers.id, rid = raw.id;
  return g.Add("weighted_layer_sum", {layers, raw}, std::move(y), [=](Graph<T> &g, int self) {
    const auto &gy = g.GradRef(self);
    const auto &lv = g.value(lid);
    if (g.needs_grad(lid)) {
      auto &gl = g.GradRef(lid);
      for (int i = 0; i < k; ++i)
        for (size_t e = 0; e < plane; ++e) gl.data[size_t(i) * plane + e] += s[size_t(i)] * gy.data[e];
    }
    if (g.needs_grad(rid)) {
      std::vector<T> ds(size_t(k), T(0));
      for (int i = 0; i < k; ++i)
        for (size_t e = 0; e < plane; ++e) ds[size_t(i)] += gy.data[e] * lv.data[size_t(i) * plane + e];
      T dot = 0;
      for (int i = 0; i < k; ++i) dot += s[size_t(i)] * ds[size_t(i)];
      auto &gr = g.GradRef(rid);
      for (int j = 0; j < k; ++j) gr.data[size_t(j)] += s[size_t(j)] * (ds[size_t(j)] - dot);
    }
  });
}

template <typename T>
Var Sum(Graph<T> &g, Var x) {
  T acc = 0;
  for (T v : g.value(x).data) acc += v;
  const int xid = x.id;
  return g.Add("sum", {x}, Tensor<T>({1}, std::vector<T>{acc}), [=](Graph<T> &g, int self) {
    const T up = g.GradRef(self).data[0];
    for (T &v : g.GradRef(xid).data) v += up;
  });
}

template <typename T>
Var AddVars(Graph<T> &g, Var a, Var b) {
  const auto &av = g.value(a);
  const auto &bv = g.value(b);
  if (av.shape != bv.shape)
    Fail(ErrorKind::kShape, "add: " + ShapeString(av.shape) + " vs " + ShapeString(bv.shape));
  Tensor<T> y = av;
  for (size_t i = 0; i < y.size(); ++i) y.data[i] += bv.data[i];
  const int aid = a.id, bid = b.id;
  return g.Add("add", {a, b}, std::move(y), [=](Graph<T> &g, int self) {
    const auto &gy = g.GradRef(self);
    for (int id : {aid, bid}) {
      if (!g.needs_grad(id)) continue;
      auto &gx = g.GradRef(id);
      for (size_t i = 0; i < gy.size(); ++i) gx.data[i] += gy.data[i];
    }
  });
}

template <typename T>
Var MeanOf(Graph<T> &g, const std::vector<Var> &scalars) {
  if (scalars.empty()) Fail(ErrorKind::kShape, "mean of zero terms");
  T acc = 0;
  std::vector<int> ids;
  for (Var v : scalars) {
    const auto &t = g.value(v);
    if (t.size() != 1) Fail(ErrorKind::kShape, "mean_of expects scalars, got " + ShapeString(t.shape));
    acc += t.data[0];
    ids.push_back(v.id);
  }
  const T n = T(scalars.size());
  return g.Add("mean_of", scalars, Tensor<T>({1}, std::vector<T>{acc / n}), [=](Graph<T> &g, int self) {
    const T up = g.GradRef(self).data[0] / n;
    for (int id : ids)
      if (g.needs_grad(id)) g.GradRef(id).data[0] += up;
  });
}

#define CM_INSTANTIATE_OPS(T)                                                            \
  template std::vector<T> Softmax(const std::vector<T> &);                               \
  template Var Linear(Graph<T> &, Var, Var, Var);                                        \
  template Var Conv2d(Graph<T> &, Var, Var, Var);                                        \
  template Var Mfm(Graph<T> &, Var);                                                     \
  template Var MaxPool2(Graph<T> &, Var);                                                \
  template Var BatchNorm(Graph<T> &, Var, Var, Var, Tensor<T> *, Tensor<T> *,            \
                         const BatchNormConfig &);                                       \
  template Var ConcatAxis1(Graph<T> &, const std::vector<Var> &);                        \
  template Var SliceAxis1(Graph<T> &, Var, int, int);                                    \
  template Var ToSequence(Graph<T> &, Var);                                              \
  template Var ToImage(Graph<T> &, Var);                                                 \
  template Var BlstmLayer(Graph<T> &, Var, const LstmWeights &, const LstmWeights &);    \
  template Var GlobalAvgPool(Graph<T> &, Var, int);                                      \
  template Var CrossEntropy(Graph<T> &, Var, Label);                                     \
  template Var WeightedLayerSum(Graph<T> &, Var, Var);                                   \
  template Var Sum(Graph<T> &, Var);                                                     \
  template Var AddVars(Graph<T> &, Var, Var);                                            \
  template Var MeanOf(Graph<T> &, const std::vector<Var> &);

CM_INSTANTIATE_OPS(float)
CM_INSTANTIATE_OPS(double)

}  // namespace cm::nn
