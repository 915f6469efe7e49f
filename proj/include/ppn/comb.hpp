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

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "ppn/erb.hpp"
#include "ppn/frame_spec.hpp"
#include "ppn/transform.hpp"

namespace ppn {

/// Per-frame network outputs, all in [0, 1].
struct EnhancerOutputs {
  BandVector gains{};
  BandVector strengths{};
  float vad = 0.0f;

  static EnhancerOutputs identity();  // gains 1, strengths 0, vad 1
  void clamp();
};

/// Comb taps for shifts -2P .. +2P.
inline constexpr std::array<float, 5> kCombTaps = {0.125f, 0.25f, 0.25f, 0.25f, 0.125f};

/// Raw-sample delay line feeding the comb filter.
///
/// Holds enough past samples for two periods behind the oldest frame that is
/// still due, the frame itself, and the look-ahead. Samples are addressed by
/// absolute stream index; indices before the stream start read as zero.
class CombState {
 public:
  explicit CombState(std::size_t lookahead_samples = kLookaheadFrames * kHop);

  void push(std::span<const float> samples);
  /// One past the newest sample.
  long long end() const { return end_; }
  float at(long long index) const;
  std::size_t capacity() const { return buf_.size(); }

 private:
  std::vector<float> buf_;
  long long end_ = 0;
};

/// y[n] = sum_k w_k x[start + n + k P] for k in -2..2.
///
/// Forward taps use the largest multiple of P that fits inside the buffered
/// look-ahead, so with 30 ms of look-ahead the +2 tap falls back to +1 once
/// P > 720. Without a period the frame is copied through unchanged.
void comb_filter_frame(const CombState& state, long long frame_start,
                       std::optional<int> period, std::span<float> out);

/// Blends noisy and comb-filtered spectra per bin with the interpolated
/// strengths, then applies the interpolated gains:
/// out = g_bin ((1 - r_bin) X_noisy + r_bin X_comb).
void apply_per_band(const Spectrum& noisy, const Spectrum& combed, const BandVector& gains,
                    const BandVector& strengths, const ErbFilterbank& fb, Spectrum& out);

/// Inverse transform plus overlap-add. Each call consumes one frame spectrum
/// and yields the 480 samples that are now complete.
class Synthesizer {
 public:
  void synthesize(const Spectrum& frame, std::span<float> out);
  void reset() { tail_.fill(0.0f); }

 private:
  Transform transform_;
  std::array<float, kWindow> frame_{};
  std::array<float, kHop> tail_{};
};

}  // namespace ppn
