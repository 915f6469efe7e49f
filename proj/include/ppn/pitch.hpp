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

#include <optional>
#include <span>
#include <vector>

#include "ppn/frame_spec.hpp"

namespace ppn {

struct PitchEstimate {
  std::optional<int> period;  // samples, in [kMinPeriod, kMaxPeriod]
  float correlation = 0.0f;   // 0 when period is absent
};

inline constexpr float kVoicingThreshold = 0.3f;
inline constexpr float kOctaveRatio = 0.85f;

/// Normalized-autocorrelation pitch search over lags [96, 768].
///
/// Correlates the newest 768 samples of the history against every lagged
/// copy. The chosen lag is the smallest local maximum whose correlation
/// reaches 0.85 of the global peak, which suppresses octave-down errors.
/// A peak below 0.3 reports no pitch. Keeps its scratch buffers between calls.
class PitchEstimator {
 public:
  PitchEstimator();

  /// `history` must hold at least kPitchHistory (1536) samples; only the
  /// newest 1536 are used.
  PitchEstimate estimate(std::span<const float> history);

  /// Normalized correlation per lag from the most recent call, index 0 = lag 96.
  std::span<const double> correlations() const { return corr_; }

 private:
  std::vector<double> xcorr_;
  std::vector<double> corr_;
  std::vector<double> prefix_;
};

PitchEstimate estimate_pitch(std::span<const float> history);

}  // namespace ppn
