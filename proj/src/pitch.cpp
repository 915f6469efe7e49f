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

#include "ppn/pitch.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ppn/error.hpp"
#include "ppn/kernels.hpp"

namespace ppn {

namespace {
constexpr std::size_t kLags = std::size_t(kMaxPeriod - kMinPeriod + 1);
}

PitchEstimator::PitchEstimator()
    : xcorr_(kLags, 0.0), corr_(kLags, 0.0), prefix_(kPitchHistory + 1, 0.0) {}

PitchEstimate PitchEstimator::estimate(std::span<const float> history) {
  if (history.size() < kPitchHistory) {
    throw InputError("pitch estimation needs " + std::to_string(kPitchHistory) +
                     " samples of history, got " + std::to_string(history.size()));
  }
  const auto x = history.last(kPitchHistory);
  const std::size_t start = kPitchHistory - kPitchWindow;

  prefix_[0] = 0.0;
  for (std::size_t n = 0; n < kPitchHistory; ++n) {
    prefix_[n + 1] = prefix_[n] + double(x[n]) * double(x[n]);
  }
  const double e0 = prefix_[kPitchHistory] - prefix_[start];
  std::fill(corr_.begin(), corr_.end(), 0.0);
  if (!(e0 > 1e-12)) return {};

  kernels::lag_xcorr(x, start, kPitchWindow, std::size_t(kMinPeriod),
                     std::size_t(kMaxPeriod), xcorr_);

  double peak = 0.0;
  for (std::size_t i = 0; i < kLags; ++i) {
    const std::size_t lag = std::size_t(kMinPeriod) + i;
    const double el = prefix_[start + kPitchWindow - lag] - prefix_[start - lag];
    const double denom = std::sqrt(e0 * el);
    corr_[i] = denom > 1e-12 ? std::clamp(xcorr_[i] / denom, -1.0, 1.0) : 0.0;
    peak = std::max(peak, corr_[i]);
  }
  if (peak < kVoicingThreshold) return {};

  const double floor = kOctaveRatio * peak;
  for (std::size_t i = 0; i < kLags; ++i) {
    const double r = corr_[i];
    if (r < floor) continue;
    const bool left_ok = i == 0 || r >= corr_[i - 1];
    const bool right_ok = i + 1 == kLags || r >= corr_[i + 1];
    if (left_ok && right_ok) {
      return {kMinPeriod + int(i), float(r)};
    }
  }
  // Unreachable: the global peak is itself a local maximum above the floor.
  return {};
}

PitchEstimate estimate_pitch(std::span<const float> history) {
  PitchEstimator est;
  return est.estimate(history);
}

}  // namespace ppn
