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
#include <vector>

#include "ppn/layers.hpp"

namespace ppn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 5.0;  // global gradient-norm clip; <= 0 disables
};

/// Adam over every trainable tensor of the given layers, plus optional extra
/// scalar parameters (e.g. the GE2E scale and bias).
class Adam {
 public:
  Adam(std::vector<LayerParams<double>*> layers, AdamConfig config = {});

  /// Registers a scalar parameter updated alongside the layers.
  void add_scalar(double* value, double* grad);

  /// Clips, updates, and returns the pre-clip global gradient norm.
  double step();
  void zero_grad();
  std::size_t steps_taken() const { return t_; }

 private:
  struct Slot {
    double* value;
    double* grad;
    std::size_t size;
    std::vector<double> m, v;
  };
  std::vector<Slot> slots_;
  AdamConfig config_;
  std::size_t t_ = 0;
};

}  // namespace ppn
