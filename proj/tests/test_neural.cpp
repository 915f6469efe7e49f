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

#include <cmath>
#include <functional>
#include <memory>

#include "doctest.h"
#include "oracles.hpp"
#include "ppn/adam.hpp"
#include "ppn/error.hpp"
#include "ppn/layers.hpp"
#include "ppn/weights_io.hpp"

using namespace ppn;

namespace {

Tensor2D<double> random_tensor(std::size_t rows, std::size_t cols, Rng& rng,
                               double scale = 1.0) {
  Tensor2D<double> t(rows, cols);
  for (auto& v : t.data) v = rng.uniform(-scale, scale);
  return t;
}

void randomize(LayerParams<double>& p, Rng& rng, double scale = 0.5) {
  for (auto& t : p.tensors)
    for (auto& v : t.value) v = rng.uniform(-scale, scale);
}

// loss = sum c * y + 0.5 * y^2, so dloss/dy = c + y.
struct QuadraticProbe {
  Tensor2D<double> c;
  double loss(const Tensor2D<double>& y) const {
    double l = 0;
    for (std::size_t i = 0; i < y.size(); ++i) l += c.data[i] * y.data[i] + 0.5 * y.data[i] * y.data[i];
    return l;
  }
  Tensor2D<double> grad(const Tensor2D<double>& y) const {
    Tensor2D<double> g = y;
    for (std::size_t i = 0; i < y.size(); ++i) g.data[i] += c.data[i];
    return g;
  }
};

// Checks every parameter and every input element of `net` by central differences.
double max_gradient_error(const std::function<Tensor2D<double>(const Tensor2D<double>&)>& fwd,
                          const std::function<Tensor2D<double>(const Tensor2D<double>&)>& bwd,
                          std::vector<LayerParams<double>*> layers, Tensor2D<double> x,
                          Rng& rng) {
  const Tensor2D<double> y0 = fwd(x);
  QuadraticProbe probe{random_tensor(y0.rows, y0.cols, rng)};
  for (auto* l : layers) l->zero_grad();
  const Tensor2D<double> y = fwd(x);
  const Tensor2D<double> dx = bwd(probe.grad(y));

  double worst = 0.0;
  auto loss = [&] { return probe.loss(fwd(x)); };
  for (auto* l : layers) {
    for (auto& t : l->tensors) {
      if (!t.trainable) continue;
      for (std::size_t i = 0; i < t.size(); ++i) {
        const double num = oracle::central_difference(loss, &t.value[i], 1e-4);
        worst = std::max(worst, oracle::relative_error(t.grad[i], num));
      }
    }
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double num = oracle::central_difference(loss, &x.data[i], 1e-4);
    worst = std::max(worst, oracle::relative_error(dx.data[i], num));
  }
  return worst;
}

template <typename L>
double layer_gradient_error(L& layer, std::size_t steps, Rng& rng) {
  randomize(layer.params(), rng);
  LayerCache<double> cache;
  auto fwd = [&](const Tensor2D<double>& x) { return layer.forward(x, cache); };
  auto bwd = [&](const Tensor2D<double>& dy) { return layer.backward(dy, cache); };
  return max_gradient_error(fwd, bwd, {&layer.params()}, random_tensor(steps, layer.in(), rng),
                            rng);
}

}  // namespace

TEST_CASE("dense forward: identity, sigmoid midpoint, and matrix-product oracle") {
  Dense<double> id(4, 4, Activation::kLinear);
  for (std::size_t i = 0; i < 4; ++i) id.params().tensors[0].value[i * 4 + i] = 1.0;
  Rng rng(1);
  const auto x = random_tensor(5, 4, rng);
  LayerCache<double> c;
  CHECK(id.forward(x, c).data == x.data);

  Dense<double> sig(3, 2, Activation::kSigmoid);
  const auto y = sig.forward(Tensor2D<double>(1, 3), c);
  CHECK(y(0, 0) == 0.5);
  CHECK(y(0, 1) == 0.5);

  Dense<double> d(7, 5, Activation::kTanh);
  randomize(d.params(), rng);
  const auto xr = random_tensor(6, 7, rng);
  const auto got = d.forward(xr, c);
  const auto want = oracle::dense(xr.data, 6, 7, d.params().tensors[0].value,
                                  d.params().tensors[1].value, 5, 1);
  for (std::size_t i = 0; i < want.size(); ++i) CHECK(got.data[i] == doctest::Approx(want[i]).epsilon(1e-12));
}

TEST_CASE("conv1d forward: identity, impulse response, causality") {
  Rng rng(2);
  Conv1d<double> id(3, 3, 1, Activation::kLinear);
  for (std::size_t i = 0; i < 3; ++i) id.params().tensors[0].value[i * 3 + i] = 1.0;
  LayerCache<double> c;
  const auto x = random_tensor(8, 3, rng);
  CHECK(id.forward(x, c).data == x.data);

  Conv1d<double> conv(2, 3, 4, Activation::kLinear);
  randomize(conv.params(), rng);
  std::fill(conv.params().tensors[1].value.begin(), conv.params().tensors[1].value.end(), 0.0);
  Tensor2D<double> impulse(10, 2);
  impulse(3, 1) = 1.0;
  const auto y = conv.forward(impulse, c);
  const auto& w = conv.params().tensors[0].value;
  for (std::size_t t = 0; t < 10; ++t)
    for (std::size_t o = 0; o < 3; ++o) {
      // Output at 3 + d picks up tap k - 1 - d: the kernel, time-reversed.
      const long d = long(t) - 3;
      const double want = (d >= 0 && d < 4) ? w[o * 8 + std::size_t(3 - d) * 2 + 1] : 0.0;
      CHECK(y(t, o) == doctest::Approx(want).epsilon(1e-12));
    }

  randomize(conv.params(), rng);
  const auto xr = random_tensor(12, 2, rng);
  const auto oracle_y = oracle::conv1d(xr.data, 12, 2, conv.params().tensors[0].value,
                                       conv.params().tensors[1].value, 3, 4, 0);
  const auto got = conv.forward(xr, c);
  for (std::size_t i = 0; i < oracle_y.size(); ++i) CHECK(got.data[i] == doctest::Approx(oracle_y[i]).epsilon(1e-12));

  auto perturbed = xr;
  perturbed(7, 0) += 1.0;
  const auto y2 = conv.forward(perturbed, c);
  for (std::size_t t = 0; t < 7; ++t)
    for (std::size_t o = 0; o < 3; ++o) CHECK(y2(t, o) == got(t, o));
  CHECK(y2(7, 0) != got(7, 0));
}

TEST_CASE("gru step: zero weights, closed update gate, scalar-loop oracle") {
  Gru<double> g(4, 3);
  auto st = g.make_state();
  std::vector<double> x(4, 0.7), y(3);
  g.step(x, y, st);
  for (double v : y) CHECK(v == 0.0);

  Rng rng(3);
  randomize(g.params(), rng);
  auto& b = g.params().tensors[2].value;
  for (std::size_t i = 0; i < 3; ++i) b[i] = -100.0;  // update gate closed
  std::vector<double> h_prev = {0.3, -0.2, 0.9}, h_next(3), scratch(21);
  g.step_from(x, h_prev, h_next, scratch);
  for (std::size_t i = 0; i < 3; ++i) CHECK(h_next[i] == doctest::Approx(h_prev[i]).epsilon(1e-6));

  Gru<double> r(5, 4);
  randomize(r.params(), rng, 0.8);
  std::vector<double> xr(5), hr(4), out(4), scr(28);
  for (auto& v : xr) v = rng.uniform(-1, 1);
  for (auto& v : hr) v = rng.uniform(-1, 1);
  r.step_from(xr, hr, out, scr);
  const auto want = oracle::gru_step(xr, hr, r.params().tensors[0].value,
                                     r.params().tensors[1].value, r.params().tensors[2].value, 5, 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(out[i] == doctest::Approx(want[i]).epsilon(1e-6));
    CHECK(std::abs(out[i]) < 1.0);
  }
}

TEST_CASE("sequence forward equals step-by-step inference") {
  Rng rng(4);
  Sequential<float> net;
  net.add(std::make_unique<Dense<float>>(6, 8, Activation::kTanh));
  net.add(std::make_unique<Conv1d<float>>(8, 8, 3, Activation::kTanh));
  net.add(std::make_unique<Gru<float>>(8, 5));
  for (auto* l : net.layers()) init_glorot(*l, rng);

  Tensor2D<float> x(20, 6);
  for (auto& v : x.data) v = float(rng.uniform(-1, 1));
  std::vector<LayerCache<float>> caches;
  const auto y = net.forward(x, caches);

  Dense<float> d0(6, 8, Activation::kTanh);
  Conv1d<float> c1(8, 8, 3, Activation::kTanh);
  Gru<float> g2(8, 5);
  auto layers = net.layers();
  copy_values(d0.params(), *layers[0]);
  copy_values(c1.params(), *layers[1]);
  copy_values(g2.params(), *layers[2]);
  auto s0 = d0.make_state(), s1 = c1.make_state(), s2 = g2.make_state();
  std::vector<float> a(8), b(8), o(5);
  for (std::size_t t = 0; t < 20; ++t) {
    d0.step(x.row(t), a, s0);
    c1.step(a, b, s1);
    g2.step(b, o, s2);
    for (std::size_t i = 0; i < 5; ++i) CHECK(o[i] == y(t, i));
  }
}

TEST_CASE("backward: zero upstream, closed-form dense gradient, state error") {
  Rng rng(5);
  Dense<double> d(3, 2, Activation::kLinear);
  randomize(d.params(), rng);
  LayerCache<double> cache;
  CHECK_THROWS_AS(d.backward(Tensor2D<double>(1, 2), cache), StateError);

  const auto x = random_tensor(1, 3, rng);
  d.forward(x, cache);
  d.params().zero_grad();
  d.backward(Tensor2D<double>(1, 2), cache);
  for (const auto& t : d.params().tensors)
    for (double g : t.grad) CHECK(g == 0.0);

  Tensor2D<double> dy(1, 2);
  dy(0, 0) = 0.5;
  dy(0, 1) = -2.0;
  d.backward(dy, cache);
  const auto& gw = d.params().tensors[0].grad;
  for (std::size_t o = 0; o < 2; ++o)
    for (std::size_t i = 0; i < 3; ++i) CHECK(gw[o * 3 + i] == doctest::Approx(dy(0, o) * x(0, i)));

  Gru<double> g(2, 2);
  LayerCache<double> gc;
  CHECK_THROWS_AS(g.backward(Tensor2D<double>(3, 2), gc), StateError);
}

TEST_CASE("finite-difference gradients for every layer kind") {
  Rng rng(6);
  for (Activation act : {Activation::kLinear, Activation::kTanh, Activation::kSigmoid}) {
    Dense<double> d(5, 4, act);
    CHECK(layer_gradient_error(d, 3, rng) < 1e-4);
    Conv1d<double> c(3, 4, 3, act);
    CHECK(layer_gradient_error(c, 6, rng) < 1e-4);
  }
  Gru<double> g(4, 5);
  CHECK(layer_gradient_error(g, 7, rng) < 1e-4);
  Affine<double> a(4);
  for (auto& v : a.params().tensors[0].value) v = rng.uniform(0.5, 2.0);
  LayerCache<double> cache;
  auto fwd = [&](const Tensor2D<double>& x) { return a.forward(x, cache); };
  auto bwd = [&](const Tensor2D<double>& dy) { return a.backward(dy, cache); };
  CHECK(max_gradient_error(fwd, bwd, {&a.params()}, random_tensor(3, 4, rng), rng) < 1e-4);
}

TEST_CASE("finite-difference gradients for composed networks") {
  Rng rng(7);
  Sequential<double> two;
  two.add(std::make_unique<Dense<double>>(4, 6, Activation::kTanh));
  two.add(std::make_unique<Dense<double>>(6, 3, Activation::kSigmoid));
  for (auto* l : two.layers()) randomize(*l, rng);
  std::vector<LayerCache<double>> caches;
  auto fwd = [&](const Tensor2D<double>& x) { return two.forward(x, caches); };
  auto bwd = [&](const Tensor2D<double>& dy) { return two.backward(dy, caches); };
  CHECK(max_gradient_error(fwd, bwd, two.layers(), random_tensor(3, 4, rng), rng) < 1e-4);

  Sequential<double> deep;
  deep.add(std::make_unique<Affine<double>>(3));
  deep.add(std::make_unique<Conv1d<double>>(3, 5, 2, Activation::kTanh));
  deep.add(std::make_unique<Gru<double>>(5, 4));
  deep.add(std::make_unique<Gru<double>>(4, 3));
  deep.add(std::make_unique<Dense<double>>(3, 2, Activation::kSigmoid));
  for (auto* l : deep.layers())
    if (l->kind != LayerKind::kAffine) randomize(*l, rng);
  std::vector<LayerCache<double>> dc;
  auto f2 = [&](const Tensor2D<double>& x) { return deep.forward(x, dc); };
  auto b2 = [&](const Tensor2D<double>& dy) { return deep.backward(dy, dc); };
  CHECK(max_gradient_error(f2, b2, deep.layers(), random_tensor(6, 3, rng), rng) < 1e-4);
}

TEST_CASE("gru state stays inside (-1, 1) over 1e5 random steps") {
  Rng rng(8);
  Gru<float> g(8, 16);
  for (auto& t : g.params().tensors)
    for (auto& v : t.value) v = float(rng.uniform(-3.0, 3.0));
  auto st = g.make_state();
  std::vector<float> x(8), h(16);
  float worst = 0.0f;
  for (int step = 0; step < 100000; ++step) {
    for (auto& v : x) v = float(rng.uniform(-10.0, 10.0));
    g.step(x, h, st);
    for (float v : h) worst = std::max(worst, std::abs(v));
  }
  CHECK(worst <= 1.0f);
}

TEST_CASE("fixed seed gives bit-identical init, forward and backward") {
  auto run = [] {
    Rng rng(99);
    Sequential<double> net;
    net.add(std::make_unique<Conv1d<double>>(4, 6, 3, Activation::kTanh));
    net.add(std::make_unique<Gru<double>>(6, 5));
    for (auto* l : net.layers()) init_glorot(*l, rng);
    Tensor2D<double> x(9, 4);
    for (auto& v : x.data) v = rng.normal();
    std::vector<LayerCache<double>> c;
    auto y = net.forward(x, c);
    net.backward(y, c);
    std::vector<double> all = y.data;
    for (auto* l : net.layers())
      for (auto& t : l->tensors) {
        all.insert(all.end(), t.value.begin(), t.value.end());
        all.insert(all.end(), t.grad.begin(), t.grad.end());
      }
    return all;
  };
  CHECK(run() == run());
}

TEST_CASE("adam clips the global gradient norm and moves against the gradient") {
  Dense<double> d(2, 1, Activation::kLinear);
  d.params().tensors[0].grad = {30.0, 40.0};
  Adam opt({&d.params()});
  const double norm = opt.step();
  CHECK(norm == doctest::Approx(50.0));
  CHECK(d.params().tensors[0].value[0] == doctest::Approx(-1e-3).epsilon(1e-6));
  CHECK(d.params().tensors[0].value[1] == doctest::Approx(-1e-3).epsilon(1e-6));
  d.params().tensors[0].grad = {std::nan(""), 0.0};
  CHECK_THROWS_AS(opt.step(), NumericError);
}

TEST_CASE("weight files: bit-exact round trip, checksum and version errors") {
  Rng rng(10);
  Sequential<double> net;
  net.add(std::make_unique<Dense<double>>(5, 4, Activation::kTanh));
  net.add(std::make_unique<Conv1d<double>>(4, 3, 2, Activation::kSigmoid));
  net.add(std::make_unique<Gru<double>>(3, 2));
  for (auto* l : net.layers()) init_glorot(*l, rng);
  std::vector<const LayerParams<double>*> cl;
  for (auto* l : net.layers()) cl.push_back(l);

  const auto bytes = encode_weights(pack_layers(ModelKind::kGeneric, "a = 1\n", cl));
  const auto decoded = decode_weights(bytes);
  CHECK(decoded.config == "a = 1\n");
  Sequential<double> other;
  other.add(std::make_unique<Dense<double>>(5, 4, Activation::kTanh));
  other.add(std::make_unique<Conv1d<double>>(4, 3, 2, Activation::kSigmoid));
  other.add(std::make_unique<Gru<double>>(3, 2));
  unpack_layers(decoded, other.layers());
  std::vector<const LayerParams<double>*> ol;
  for (auto* l : other.layers()) ol.push_back(l);
  CHECK(encode_weights(pack_layers(ModelKind::kGeneric, "a = 1\n", ol)) == bytes);

  // Header plus four bytes per parameter.
  CHECK(bytes.size() > 4 * net.param_count());
  CHECK(bytes.size() < 4 * net.param_count() + 256);

  for (std::size_t cut : {std::size_t(0), std::size_t(10), bytes.size() / 2, bytes.size() - 1}) {
    std::vector<std::uint8_t> truncated(bytes.begin(), bytes.begin() + long(cut));
    CHECK_THROWS_AS(decode_weights(truncated), DataError);
  }
  auto flipped = bytes;
  flipped[40] ^= 0x10;
  CHECK_THROWS_WITH_AS(decode_weights(flipped), doctest::Contains("checksum"), DataError);

  // Re-sealed with a valid checksum but a future version number.
  auto future = bytes;
  future[4] = 2;
  future.resize(future.size() - 4);
  const std::uint32_t crc = crc32(future);
  for (int i = 0; i < 4; ++i) future.push_back(std::uint8_t(crc >> (8 * i)));
  CHECK_THROWS_WITH_AS(decode_weights(future), doctest::Contains("version"), DataError);

  Sequential<double> wrong;
  wrong.add(std::make_unique<Dense<double>>(5, 3, Activation::kTanh));
  wrong.add(std::make_unique<Conv1d<double>>(4, 3, 2, Activation::kSigmoid));
  wrong.add(std::make_unique<Gru<double>>(3, 2));
  CHECK_THROWS_AS(unpack_layers(decoded, wrong.layers()), DataError);
}
