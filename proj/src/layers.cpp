// Copyright (c) 2026 The PPN Engine Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ppn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ppn/error.hpp"
#include "ppn/kernels.hpp"

namespace ppn {

const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::kDense: return "dense";
    case LayerKind::kConv1d: return "conv1d";
    case LayerKind::kGru: return "gru";
    case LayerKind::kAffine: return "affine";
  }
  return "?";
}

const char* to_string(Activation a) {
  switch (a) {
    case Activation::kLinear: return "linear";
    case Activation::kTanh: return "tanh";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kRelu: return "relu";
  }
  return "?";
}

namespace {

template <typename T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

// d activation / d pre-activation, expressed through the activation output.
template <typename T>
T activation_grad(Activation act, T y) {
  switch (act) {
    case Activation::kLinear: return T(1);
    case Activation::kTanh: return T(1) - y * y;
    case Activation::kSigmoid: return y * (T(1) - y);
    case Activation::kRelu: return y > T(0) ? T(1) : T(0);
  }
  return T(1);
}

void check_cols(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw InputError(std::string(what) + ": expected " + std::to_string(want) +
                     " input channels, got " + std::to_string(got));
  }
}

template <typename T>
void require_cache(const LayerCache<T>& c, const char* what) {
  if (!c.valid) throw StateError(std::string(what) + ": backward called before forward");
}

template <typename T>
void add_bias_rows(Tensor2D<T>& y, const std::vector<T>& b) {
  for (std::size_t t = 0; t < y.rows; ++t) {
    T* r = y.data.data() + t * y.cols;
    for (std::size_t j = 0; j < y.cols; ++j) r[j] += b[j];
  }
}

// dz = dy * act'(y); bias gradient accumulates the column sums.
template <typename T>
Tensor2D<T> pre_activation_grad(Activation act, const Tensor2D<T>& dy, const Tensor2D<T>& y,
                                std::vector<T>& db) {
  Tensor2D<T> dz(dy.rows, dy.cols);
  for (std::size_t t = 0; t < dy.rows; ++t) {
    for (std::size_t j = 0; j < dy.cols; ++j) {
      const T g = dy(t, j) * activation_grad(act, y(t, j));
      dz(t, j) = g;
      db[j] += g;
    }
  }
  return dz;
}

}  // namespace

template <typename T>
void activate(Activation act, std::span<T> v) {
  switch (act) {
    case Activation::kLinear: break;
    case Activation::kTanh:
      for (auto& x : v) x = std::tanh(x);
      break;
    case Activation::kSigmoid:
      for (auto& x : v) x = sigmoid(x);
      break;
    case Activation::kRelu:
      for (auto& x : v) x = std::max(x, T(0));
      break;
  }
}

template <typename T>
std::size_t LayerParams<T>::param_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.size();
  return n;
}

template <typename T>
void LayerParams<T>::zero_grad() {
  for (auto& t : tensors) std::fill(t.grad.begin(), t.grad.end(), T(0));
}

template <typename T>
void init_glorot(LayerParams<T>& p, Rng& rng) {
  auto fill = [&rng](std::vector<T>& v, double limit) {
    for (auto& x : v) x = T(rng.uniform(-limit, limit));
  };
  switch (p.kind) {
    case LayerKind::kDense:
      fill(p.tensors[0].value, std::sqrt(6.0 / double(p.in + p.out)));
      std::fill(p.tensors[1].value.begin(), p.tensors[1].value.end(), T(0));
      break;
    case LayerKind::kConv1d: {
      const double k = double(p.kernel_width);
      fill(p.tensors[0].value, std::sqrt(6.0 / (k * double(p.in) + k * double(p.out))));
      std::fill(p.tensors[1].value.begin(), p.tensors[1].value.end(), T(0));
      break;
    }
    case LayerKind::kGru:
      fill(p.tensors[0].value, std::sqrt(6.0 / double(p.in + p.out)));
      fill(p.tensors[1].value, std::sqrt(6.0 / double(2 * p.out)));
      std::fill(p.tensors[2].value.begin(), p.tensors[2].value.end(), T(0));
      break;
    case LayerKind::kAffine:
      std::fill(p.tensors[0].value.begin(), p.tensors[0].value.end(), T(1));
      std::fill(p.tensors[1].value.begin(), p.tensors[1].value.end(), T(0));
      break;
  }
}

template <typename Dst, typename Src>
void copy_values(LayerParams<Dst>& dst, const LayerParams<Src>& src) {
  if (dst.kind != src.kind || dst.in != src.in || dst.out != src.out ||
      dst.kernel_width != src.kernel_width || dst.tensors.size() != src.tensors.size()) {
    throw InputError("copy_values: layer shape mismatch");
  }
  for (std::size_t i = 0; i < src.tensors.size(); ++i) {
    auto& d = dst.tensors[i].value;
    const auto& s = src.tensors[i].value;
    if (d.size() != s.size()) throw InputError("copy_values: tensor size mismatch");
    std::transform(s.begin(), s.end(), d.begin(), [](Src v) { return static_cast<Dst>(v); });
  }
}

// ---------------------------------------------------------------- dense

template <typename T>
Dense<T>::Dense(std::size_t in, std::size_t out, Activation act) {
  this->p_.kind = LayerKind::kDense;
  this->p_.activation = act;
  this->p_.in = in;
  this->p_.out = out;
  this->p_.tensors.emplace_back("W", out * in);
  this->p_.tensors.emplace_back("b", out);
}

template <typename T>
Tensor2D<T> Dense<T>::forward(const Tensor2D<T>& x, LayerCache<T>& cache) const {
  const auto& p = this->p_;
  check_cols(x.cols, p.in, "dense");
  Tensor2D<T> y(x.rows, p.out);
  kernels::gemm_bt(x.data.data(), p.tensors[0].value.data(), y.data.data(), x.rows, p.out,
                   p.in);
  add_bias_rows(y, p.tensors[1].value);
  activate<T>(p.activation, y.data);
  cache.input = x;
  cache.output = y;
  cache.valid = true;
  return y;
}

template <typename T>
Tensor2D<T> Dense<T>::backward(const Tensor2D<T>& dy, const LayerCache<T>& cache) {
  require_cache(cache, "dense");
  auto& p = this->p_;
  const auto& x = cache.input;
  Tensor2D<T> dz = pre_activation_grad(p.activation, dy, cache.output, p.tensors[1].grad);
  kernels::gemm_atb(dz.data.data(), x.data.data(), p.tensors[0].grad.data(), p.out, p.in,
                    x.rows);
  Tensor2D<T> dx(x.rows, p.in);
  kernels::gemm_ab(dz.data.data(), p.tensors[0].value.data(), dx.data.data(), x.rows, p.in,
                   p.out);
  return dx;
}

template <typename T>
void Dense<T>::step(std::span<const T> x, std::span<T> y, StepState<T>&) const {
  const auto& p = this->p_;
  kernels::matvec(p.tensors[0].value.data(), x.data(), y.data(), p.out, p.in);
  const auto& b = p.tensors[1].value;
  for (std::size_t j = 0; j < p.out; ++j) y[j] += b[j];
  activate<T>(p.activation, y.first(p.out));
}

// ---------------------------------------------------------------- conv1d

template <typename T>
Conv1d<T>::Conv1d(std::size_t in, std::size_t out, std::size_t kernel_width, Activation act) {
  if (kernel_width == 0) throw ConfigError("conv1d kernel width must be positive");
  this->p_.kind = LayerKind::kConv1d;
  this->p_.activation = act;
  this->p_.in = in;
  this->p_.out = out;
  this->p_.kernel_width = kernel_width;
  this->p_.causal = true;
  this->p_.tensors.emplace_back("W", out * kernel_width * in);
  this->p_.tensors.emplace_back("b", out);
}

template <typename T>
Tensor2D<T> Conv1d<T>::forward(const Tensor2D<T>& x, LayerCache<T>& cache) const {
  const auto& p = this->p_;
  check_cols(x.cols, p.in, "conv1d");
  const std::size_t k = p.kernel_width;
  const std::size_t width = k * p.in;
  Tensor2D<T> unfolded(x.rows, width);
  for (std::size_t t = 0; t < x.rows; ++t) {
    for (std::size_t j = 0; j < k; ++j) {
      const long src = long(t) - long(k - 1) + long(j);
      if (src < 0) continue;
      std::copy_n(x.data.data() + std::size_t(src) * p.in, p.in,
                  unfolded.data.data() + t * width + j * p.in);
    }
  }
  Tensor2D<T> y(x.rows, p.out);
  kernels::gemm_bt(unfolded.data.data(), p.tensors[0].value.data(), y.data.data(), x.rows,
                   p.out, width);
  add_bias_rows(y, p.tensors[1].value);
  activate<T>(p.activation, y.data);
  cache.input = std::move(unfolded);
  cache.output = y;
  cache.valid = true;
  return y;
}

template <typename T>
Tensor2D<T> Conv1d<T>::backward(const Tensor2D<T>& dy, const LayerCache<T>& cache) {
  require_cache(cache, "conv1d");
  auto& p = this->p_;
  const auto& u = cache.input;
  const std::size_t k = p.kernel_width;
  const std::size_t width = k * p.in;
  Tensor2D<T> dz = pre_activation_grad(p.activation, dy, cache.output, p.tensors[1].grad);
  kernels::gemm_atb(dz.data.data(), u.data.data(), p.tensors[0].grad.data(), p.out, width,
                    u.rows);
  Tensor2D<T> du(u.rows, width);
  kernels::gemm_ab(dz.data.data(), p.tensors[0].value.data(), du.data.data(), u.rows, width,
                   p.out);
  Tensor2D<T> dx(u.rows, p.in);
  for (std::size_t t = 0; t < u.rows; ++t) {
    for (std::size_t j = 0; j < k; ++j) {
      const long src = long(t) - long(k - 1) + long(j);
      if (src < 0) continue;
      T* d = dx.data.data() + std::size_t(src) * p.in;
      const T* g = du.data.data() + t * width + j * p.in;
      for (std::size_t c = 0; c < p.in; ++c) d[c] += g[c];
    }
  }
  return dx;
}

template <typename T>
StepState<T> Conv1d<T>::make_state() const {
  StepState<T> s;
  s.history.assign((this->p_.kernel_width - 1) * this->p_.in, T(0));
  s.scratch.assign(this->p_.kernel_width * this->p_.in, T(0));
  return s;
}

template <typename T>
void Conv1d<T>::step(std::span<const T> x, std::span<T> y, StepState<T>& s) const {
  const auto& p = this->p_;
  const std::size_t hist = (p.kernel_width - 1) * p.in;
  std::copy_n(s.history.begin(), hist, s.scratch.begin());
  std::copy_n(x.begin(), p.in, s.scratch.begin() + long(hist));
  kernels::matvec(p.tensors[0].value.data(), s.scratch.data(), y.data(), p.out,
                  p.kernel_width * p.in);
  const auto& b = p.tensors[1].value;
  for (std::size_t j = 0; j < p.out; ++j) y[j] += b[j];
  activate<T>(p.activation, y.first(p.out));
  std::copy_n(s.scratch.begin() + long(p.in), hist, s.history.begin());
}

// ---------------------------------------------------------------- gru

template <typename T>
Gru<T>::Gru(std::size_t in, std::size_t units) {
  this->p_.kind = LayerKind::kGru;
  this->p_.activation = Activation::kTanh;
  this->p_.in = in;
  this->p_.out = units;
  this->p_.tensors.emplace_back("W", 3 * units * in);
  this->p_.tensors.emplace_back("U", 3 * units * units);
  this->p_.tensors.emplace_back("b", 3 * units);
}

template <typename T>
Tensor2D<T> Gru<T>::forward(const Tensor2D<T>& x, LayerCache<T>& cache) const {
  const auto& p = this->p_;
  check_cols(x.cols, p.in, "gru");
  const std::size_t n = p.out;
  const std::size_t steps = x.rows;
  const T* u = p.tensors[1].value.data();

  Tensor2D<T> xp(steps, 3 * n);
  kernels::gemm_bt(x.data.data(), p.tensors[0].value.data(), xp.data.data(), steps, 3 * n,
                   p.in);
  add_bias_rows(xp, p.tensors[2].value);

  cache.update.resize(steps, n);
  cache.reset.resize(steps, n);
  cache.cand.resize(steps, n);
  cache.reset_hidden.resize(steps, n);
  cache.prev_hidden.resize(steps, n);
  Tensor2D<T> h(steps, n);
  std::vector<T> uzr(2 * n), uc(n), zero(n, T(0));

  for (std::size_t t = 0; t < steps; ++t) {
    const T* hp = t == 0 ? zero.data() : h.data.data() + (t - 1) * n;
    std::copy_n(hp, n, cache.prev_hidden.data.data() + t * n);
    kernels::matvec(u, hp, uzr.data(), 2 * n, n);
    const T* a = xp.data.data() + t * 3 * n;
    T* z = cache.update.data.data() + t * n;
    T* r = cache.reset.data.data() + t * n;
    T* rh = cache.reset_hidden.data.data() + t * n;
    for (std::size_t i = 0; i < n; ++i) {
      z[i] = sigmoid(a[i] + uzr[i]);
      r[i] = sigmoid(a[n + i] + uzr[n + i]);
      rh[i] = r[i] * hp[i];
    }
    kernels::matvec(u + 2 * n * n, rh, uc.data(), n, n);
    T* c = cache.cand.data.data() + t * n;
    T* ht = h.data.data() + t * n;
    for (std::size_t i = 0; i < n; ++i) {
      c[i] = std::tanh(a[2 * n + i] + uc[i]);
      ht[i] = (T(1) - z[i]) * hp[i] + z[i] * c[i];
    }
  }
  cache.input = x;
  cache.output = h;
  cache.valid = true;
  return h;
}

template <typename T>
Tensor2D<T> Gru<T>::backward(const Tensor2D<T>& dy, const LayerCache<T>& cache) {
  require_cache(cache, "gru");
  auto& p = this->p_;
  const std::size_t n = p.out;
  const std::size_t steps = cache.output.rows;
  const T* u = p.tensors[1].value.data();

  Tensor2D<T> da(steps, 3 * n);     // pre-activation grads, all gates
  Tensor2D<T> da_zr(steps, 2 * n);  // update and reset gates
  Tensor2D<T> da_c(steps, n);       // candidate
  std::vector<T> dh(n), dh_next(n, T(0)), drh(n);

  for (std::size_t t = steps; t-- > 0;) {
    const T* z = cache.update.data.data() + t * n;
    const T* r = cache.reset.data.data() + t * n;
    const T* c = cache.cand.data.data() + t * n;
    const T* hp = cache.prev_hidden.data.data() + t * n;
    T* a = da.data.data() + t * 3 * n;
    for (std::size_t i = 0; i < n; ++i) dh[i] = dy(t, i) + dh_next[i];

    for (std::size_t i = 0; i < n; ++i) {
      const T dc = dh[i] * z[i];
      a[2 * n + i] = dc * (T(1) - c[i] * c[i]);
      a[i] = dh[i] * (c[i] - hp[i]) * z[i] * (T(1) - z[i]);
      dh_next[i] = dh[i] * (T(1) - z[i]);
    }
    std::fill(drh.begin(), drh.end(), T(0));
    kernels::gemm_ab(a + 2 * n, u + 2 * n * n, drh.data(), 1, n, n);
    for (std::size_t i = 0; i < n; ++i) {
      a[n + i] = drh[i] * hp[i] * r[i] * (T(1) - r[i]);
      dh_next[i] += drh[i] * r[i];
    }
    kernels::gemm_ab(a, u, dh_next.data(), 1, n, 2 * n);
    std::copy_n(a, 2 * n, da_zr.data.data() + t * 2 * n);
    std::copy_n(a + 2 * n, n, da_c.data.data() + t * n);
  }

  const auto& x = cache.input;
  kernels::gemm_atb(da.data.data(), x.data.data(), p.tensors[0].grad.data(), 3 * n, p.in,
                    steps);
  kernels::gemm_atb(da_zr.data.data(), cache.prev_hidden.data.data(), p.tensors[1].grad.data(),
                    2 * n, n, steps);
  kernels::gemm_atb(da_c.data.data(), cache.reset_hidden.data.data(),
                    p.tensors[1].grad.data() + 2 * n * n, n, n, steps);
  auto& db = p.tensors[2].grad;
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t j = 0; j < 3 * n; ++j) db[j] += da(t, j);
  }
  Tensor2D<T> dx(steps, p.in);
  kernels::gemm_ab(da.data.data(), p.tensors[0].value.data(), dx.data.data(), steps, p.in,
                   3 * n);
  return dx;
}

template <typename T>
StepState<T> Gru<T>::make_state() const {
  StepState<T> s;
  s.hidden.assign(this->p_.out, T(0));
  s.scratch.assign(7 * this->p_.out, T(0));
  return s;
}

template <typename T>
void Gru<T>::step_from(std::span<const T> x, std::span<const T> h_prev, std::span<T> h_next,
                       std::span<T> scratch) const {
  const auto& p = this->p_;
  const std::size_t n = p.out;
  T* xp = scratch.data();          // 3n
  T* uzr = xp + 3 * n;             // 2n
  T* rh = uzr + 2 * n;             // n
  T* uc = rh + n;                  // n
  const T* u = p.tensors[1].value.data();
  const auto& b = p.tensors[2].value;
  kernels::matvec(p.tensors[0].value.data(), x.data(), xp, 3 * n, p.in);
  for (std::size_t j = 0; j < 3 * n; ++j) xp[j] += b[j];
  kernels::matvec(u, h_prev.data(), uzr, 2 * n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const T r = sigmoid(xp[n + i] + uzr[n + i]);
    rh[i] = r * h_prev[i];
  }
  kernels::matvec(u + 2 * n * n, rh, uc, n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const T z = sigmoid(xp[i] + uzr[i]);
    const T c = std::tanh(xp[2 * n + i] + uc[i]);
    h_next[i] = (T(1) - z) * h_prev[i] + z * c;
  }
}

template <typename T>
void Gru<T>::step(std::span<const T> x, std::span<T> y, StepState<T>& s) const {
  step_from(x, s.hidden, y, s.scratch);
  std::copy_n(y.begin(), this->p_.out, s.hidden.begin());
}

// ---------------------------------------------------------------- affine

template <typename T>
Affine<T>::Affine(std::size_t dim) {
  this->p_.kind = LayerKind::kAffine;
  this->p_.activation = Activation::kLinear;
  this->p_.in = dim;
  this->p_.out = dim;
  this->p_.tensors.emplace_back("scale", dim, false);
  this->p_.tensors.emplace_back("shift", dim, false);
  std::fill(this->p_.tensors[0].value.begin(), this->p_.tensors[0].value.end(), T(1));
}

template <typename T>
Tensor2D<T> Affine<T>::forward(const Tensor2D<T>& x, LayerCache<T>& cache) const {
  const auto& p = this->p_;
  check_cols(x.cols, p.in, "affine");
  Tensor2D<T> y(x.rows, p.out);
  const auto& s = p.tensors[0].value;
  const auto& b = p.tensors[1].value;
  for (std::size_t t = 0; t < x.rows; ++t) {
    for (std::size_t j = 0; j < p.in; ++j) y(t, j) = x(t, j) * s[j] + b[j];
  }
  cache.valid = true;
  return y;
}

template <typename T>
Tensor2D<T> Affine<T>::backward(const Tensor2D<T>& dy, const LayerCache<T>& cache) {
  require_cache(cache, "affine");
  const auto& s = this->p_.tensors[0].value;
  Tensor2D<T> dx(dy.rows, dy.cols);
  for (std::size_t t = 0; t < dy.rows; ++t) {
    for (std::size_t j = 0; j < dy.cols; ++j) dx(t, j) = dy(t, j) * s[j];
  }
  return dx;
}

template <typename T>
void Affine<T>::step(std::span<const T> x, std::span<T> y, StepState<T>&) const {
  const auto& s = this->p_.tensors[0].value;
  const auto& b = this->p_.tensors[1].value;
  for (std::size_t j = 0; j < this->p_.in; ++j) y[j] = x[j] * s[j] + b[j];
}

// ---------------------------------------------------------------- sequential

template <typename T>
Tensor2D<T> Sequential<T>::forward(const Tensor2D<T>& x,
                                   std::vector<LayerCache<T>>& caches) const {
  caches.resize(layers_.size());
  Tensor2D<T> h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) h = layers_[i]->forward(h, caches[i]);
  return h;
}

template <typename T>
Tensor2D<T> Sequential<T>::backward(const Tensor2D<T>& dy,
                                    const std::vector<LayerCache<T>>& caches) {
  if (caches.size() != layers_.size()) throw StateError("sequential: backward before forward");
  Tensor2D<T> g = dy;
  for (std::size_t i = layers_.size(); i-- > 0;) g = layers_[i]->backward(g, caches[i]);
  return g;
}

template <typename T>
std::vector<LayerParams<T>*> Sequential<T>::layers() {
  std::vector<LayerParams<T>*> out;
  for (auto& l : layers_) out.push_back(&l->params());
  return out;
}

template <typename T>
std::size_t Sequential<T>::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l->params().param_count();
  return n;
}

#define PPN_INSTANTIATE(T)                                                   \
  template struct LayerParams<T>;                                            \
  template class Dense<T>;                                                   \
  template class Conv1d<T>;                                                  \
  template class Gru<T>;                                                     \
  template class Affine<T>;                                                  \
  template class Sequential<T>;                                              \
  template void init_glorot<T>(LayerParams<T>&, Rng&);                       \
  template void activate<T>(Activation, std::span<T>);

PPN_INSTANTIATE(float)
PPN_INSTANTIATE(double)
#undef PPN_INSTANTIATE

template void copy_values<float, double>(LayerParams<float>&, const LayerParams<double>&);
template void copy_values<double, float>(LayerParams<double>&, const LayerParams<float>&);
template void copy_values<float, float>(LayerParams<float>&, const LayerParams<float>&);
template void copy_values<double, double>(LayerParams<double>&, const LayerParams<double>&);

}  // namespace ppn
