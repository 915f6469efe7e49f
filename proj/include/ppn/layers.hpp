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

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ppn/rng.hpp"
#include "ppn/tensor.hpp"

namespace ppn {

enum class LayerKind : std::uint32_t { kDense = 0, kConv1d = 1, kGru = 2, kAffine = 3 };
enum class Activation : std::uint32_t { kLinear = 0, kTanh = 1, kSigmoid = 2, kRelu = 3 };

const char* to_string(LayerKind k);
const char* to_string(Activation a);

template <typename T>
struct Param {
  std::string name;
  std::vector<T> value;
  std::vector<T> grad;
  bool trainable = true;

  explicit Param(std::string n = {}, std::size_t size = 0, bool train = true)
      : name(std::move(n)), value(size, T(0)), grad(size, T(0)), trainable(train) {}
  std::size_t size() const { return value.size(); }
};

/// Kind, shape and tensors of one layer.
///
///   dense:  W [out x in], b [out]
///   conv1d: W [out x (kernel * in)], b [out]; tap j multiplies x[t - kernel + 1 + j]
///   gru:    W [3N x in], U [3N x N], b [3N]; gate rows ordered update, reset, candidate
///   affine: scale [in], shift [in]; fixed elementwise map, never trained
template <typename T>
struct LayerParams {
  LayerKind kind = LayerKind::kDense;
  Activation activation = Activation::kLinear;
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t kernel_width = 1;
  bool causal = true;
  std::vector<Param<T>> tensors;

  std::size_t param_count() const;
  void zero_grad();
};

/// Per-sequence record of a forward pass, consumed by backward.
template <typename T>
struct LayerCache {
  Tensor2D<T> input;   // x, or the unfolded taps for conv1d
  Tensor2D<T> output;  // post-activation output (hidden states for gru)
  Tensor2D<T> update, reset, cand, reset_hidden, prev_hidden;  // gru only
  bool valid = false;
};

/// Recurrent/ring state for frame-by-frame inference.
template <typename T>
struct StepState {
  std::vector<T> history;  // conv1d: last kernel-1 inputs, oldest first
  std::vector<T> hidden;   // gru
  std::vector<T> scratch;
};

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;

  /// Forward over a [time x in] sequence; records what backward needs.
  virtual Tensor2D<T> forward(const Tensor2D<T>& x, LayerCache<T>& cache) const = 0;
  /// Accumulates parameter gradients and returns d loss / d input. Throws
  /// StateError when `cache` holds no forward pass.
  virtual Tensor2D<T> backward(const Tensor2D<T>& dy, const LayerCache<T>& cache) = 0;

  virtual StepState<T> make_state() const = 0;
  /// One time step; allocation-free once `state` exists.
  virtual void step(std::span<const T> x, std::span<T> y, StepState<T>& state) const = 0;

  LayerParams<T>& params() { return p_; }
  const LayerParams<T>& params() const { return p_; }
  std::size_t in() const { return p_.in; }
  std::size_t out() const { return p_.out; }

 protected:
  LayerParams<T> p_;
};

template <typename T>
class Dense final : public Layer<T> {
 public:
  Dense(std::size_t in, std::size_t out, Activation act);
  Tensor2D<T> forward(const Tensor2D<T>& x, LayerCache<T>& cache) const override;
  Tensor2D<T> backward(const Tensor2D<T>& dy, const LayerCache<T>& cache) override;
  StepState<T> make_state() const override { return {}; }
  void step(std::span<const T> x, std::span<T> y, StepState<T>& state) const override;
};

/// Causal 1-D convolution along time: output t sees inputs t-kernel+1 .. t.
template <typename T>
class Conv1d final : public Layer<T> {
 public:
  Conv1d(std::size_t in, std::size_t out, std::size_t kernel_width, Activation act);
  Tensor2D<T> forward(const Tensor2D<T>& x, LayerCache<T>& cache) const override;
  Tensor2D<T> backward(const Tensor2D<T>& dy, const LayerCache<T>& cache) override;
  StepState<T> make_state() const override;
  void step(std::span<const T> x, std::span<T> y, StepState<T>& state) const override;
};

/// z = s(Wz x + Uz h + bz), r = s(Wr x + Ur h + br),
/// c = tanh(Wc x + Uc (r * h) + bc), h' = (1 - z) h + z c. Initial state zero.
template <typename T>
class Gru final : public Layer<T> {
 public:
  Gru(std::size_t in, std::size_t units);
  Tensor2D<T> forward(const Tensor2D<T>& x, LayerCache<T>& cache) const override;
  Tensor2D<T> backward(const Tensor2D<T>& dy, const LayerCache<T>& cache) override;
  StepState<T> make_state() const override;
  void step(std::span<const T> x, std::span<T> y, StepState<T>& state) const override;

  /// Single update from an explicit previous state.
  void step_from(std::span<const T> x, std::span<const T> h_prev, std::span<T> h_next,
                 std::span<T> scratch) const;
};

/// Fixed per-channel y = x * scale + shift (input standardization).
template <typename T>
class Affine final : public Layer<T> {
 public:
  explicit Affine(std::size_t dim);
  Tensor2D<T> forward(const Tensor2D<T>& x, LayerCache<T>& cache) const override;
  Tensor2D<T> backward(const Tensor2D<T>& dy, const LayerCache<T>& cache) override;
  StepState<T> make_state() const override { return {}; }
  void step(std::span<const T> x, std::span<T> y, StepState<T>& state) const override;
};

/// Glorot-uniform weights, zero biases. Affine layers reset to identity.
template <typename T>
void init_glorot(LayerParams<T>& p, Rng& rng);

/// Applies `act` in place.
template <typename T>
void activate(Activation act, std::span<T> v);

/// Converts parameter values between precisions; shapes must already match.
template <typename Dst, typename Src>
void copy_values(LayerParams<Dst>& dst, const LayerParams<Src>& src);

/// A plain chain of layers (used for tests and simple models).
template <typename T>
class Sequential {
 public:
  void add(std::unique_ptr<Layer<T>> layer) { layers_.push_back(std::move(layer)); }
  Tensor2D<T> forward(const Tensor2D<T>& x, std::vector<LayerCache<T>>& caches) const;
  Tensor2D<T> backward(const Tensor2D<T>& dy, const std::vector<LayerCache<T>>& caches);
  std::vector<LayerParams<T>*> layers();
  std::size_t param_count() const;

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

}  // namespace ppn
