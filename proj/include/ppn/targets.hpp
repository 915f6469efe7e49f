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

#include <span>
#include <vector>

#include "ppn/erb.hpp"

namespace ppn {

/// A frame is target-active when its clean energy is within this many dB of
/// the loudest clean frame.
inline constexpr double kVadRangeDb = 40.0;

/// Per-frame training targets aligned with the analysis frames.
struct SupervisionTargets {
  std::vector<BandVector> gains;      // ideal band ratio masks
  std::vector<BandVector> strengths;  // clean per-band pitch coherence
  std::vector<int> vad;               // 1 when the target talks
  std::size_t frames() const { return gains.size(); }
};

/// g_b = min(1, sqrt(clean_b / max(noisy_b, 1e-12))).
BandVector compute_target_gains(const BandVector& clean_energy, const BandVector& noisy_energy);

/// Frame labels from clean frame energies.
std::vector<int> vad_labels(std::span<const double> clean_frame_energy);

struct FrameFeatures;

/// Analyzes both signals hop by hop and derives every target. The mixture
/// features computed on the way are stored in `mixture_features` when given.
SupervisionTargets compute_targets(std::span<const float> clean, std::span<const float> mixture,
                                   std::vector<FrameFeatures>* mixture_features = nullptr);

}  // namespace ppn
