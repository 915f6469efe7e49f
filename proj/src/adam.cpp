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

#include "ppn/adam.hpp"

#include <algorithm>
#include <cmath>

#include "ppn/error.hpp"

namespace ppn {

Adam::Adam(std::vector<LayerParams<double>*> layers, AdamConfig config) : config_(config) {
  for (auto* layer : layers) {
    for (auto& t : layer->tensors) {
      if (!t.trainable) continue;
      slots_.push_back({t.value.data(), t.grad.data(), t.size(),
                        std::vector<double>(t.size(), 0.0), std::vector<double>(t.size(), 0.0)});
    }
  }
}

void Adam::add_scalar(double* value, double* grad) {
  slots_.push_back({value, grad, 1, {0.0}, {0.0}});
}

void Adam::zero_grad() {
  for (auto& s : slots_) std::fill(s.grad, s.grad + s.size, 0.0);
}

double Adam::step() {
  double sq = 0.0;
  for (const auto& s : slots_) {
    for (std::size_t i = 0; i < s.size; ++i) sq += s.grad[i] * s.grad[i];
  }
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw NumericError("non-finite gradient norm");
  const double scale =
      config_.clip_norm > 0.0 && norm > config_.clip_norm ? config_.clip_norm / norm : 1.0;

  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, double(t_));
  const double c2 = 1.0 - std::pow(b2, double(t_));
  for (auto& s : slots_) {
    for (std::size_t i = 0; i < s.size; ++i) {
      const double g = s.grad[i] * scale;
      s.m[i] = b1 * s.m[i] + (1.0 - b1) * g;
      s.v[i] = b2 * s.v[i] + (1.0 - b2) * g * g;
      const double mhat = s.m[i] / c1;
      const double vhat = s.v[i] / c2;
      s.value[i] -= config_.learning_rate * mhat / (std::sqrt(vhat) + config_.epsilon);
    }
  }
  return norm;
}

}  // namespace ppn
