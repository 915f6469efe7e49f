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
#include <functional>
#include <span>
#include <vector>

#include "ppn/audio.hpp"
#include "ppn/erb.hpp"
#include "ppn/pitch.hpp"
#include "ppn/transform.hpp"

namespace ppn {

inline constexpr float kEnergyEpsilon = 1e-9f;
inline constexpr float kLogFloor = -9.0f;

/// The 68-dim per-frame feature vector.
struct FrameFeatures {
  BandVector band_mag{};         // log10(E + 1e-9), floor -9
  BandVector pitch_coherence{};  // [0, 1]
  // normalized period, pitch correlation, frame log-energy, log-energy delta
  std::array<float, kGeneralFeatures> general{};

  static constexpr std::size_t size() { return kFeatureDim; }
  /// Flat layout: band_mag, pitch_coherence, general.
  void write_to(std::span<float> out) const;
  std::array<float, kFeatureDim> flat() const;
};

/// Per-band normalized cross-correlation between two spectra, clamped to [0, 1].
BandVector pitch_coherence(const Spectrum& frame, const Spectrum& delayed,
                           const ErbFilterbank& fb);
/// Time-domain overload: both inputs are 960-sample windows, `delayed` taken
/// one pitch period earlier. Returns zeros when `pitch` has no period.
BandVector pitch_coherence(std::span<const float> window, std::span<const float> delayed,
                           const PitchEstimate& pitch, const ErbFilterbank& fb);

/// Carries the previous frame's log-energy for the delta feature.
struct FrameEnergyState {
  float prev_log_energy = kLogFloor;
};

FrameFeatures assemble_features(const BandVector& energies, const BandVector& coherences,
                                const PitchEstimate& pitch, FrameEnergyState& state);

/// Everything the pipeline knows about one analysis frame.
struct FrameAnalysis {
  std::size_t index = 0;
  Spectrum spectrum{};
  BandVector energies{};
  PitchEstimate pitch;
  FrameFeatures features;
};

/// Streaming analysis session for one 48 kHz stream.
///
/// Frame t covers input samples [480 (t - 1), 480 (t + 1)); samples before
/// the start of the stream read as zero. Not thread-safe; one per stream.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(const ErbFilterbank& fb = default_filterbank());

  /// Consumes exactly one 480-sample hop and analyzes the frame it completes.
  const FrameAnalysis& process_hop(std::span<const float> hop);

  std::size_t frames_processed() const { return frames_; }
  void reset();

 private:
  const ErbFilterbank* fb_;
  Transform transform_;
  PitchEstimator pitch_;
  FrameEnergyState energy_state_;
  std::vector<float> history_;  // newest sample last
  Spectrum delayed_spectrum_{};
  FrameAnalysis current_;
  std::size_t frames_ = 0;
};

/// Arbitrary-chunk front end with the look-ahead delay line.
///
/// When hop t completes, the callback receives the newest frame (what the
/// network consumes) and, once t >= lookahead, frame t - lookahead (the frame
/// whose output is due). Frames are released exactly `lookahead` hops late.
class FeatureStream {
 public:
  using Callback = std::function<void(const FrameAnalysis& newest, const FrameAnalysis* due)>;

  explicit FeatureStream(std::size_t lookahead_frames = kLookaheadFrames,
                         const ErbFilterbank& fb = default_filterbank());

  void push(std::span<const float> samples, const Callback& cb);
  std::size_t lookahead_frames() const { return lookahead_; }

 private:
  FeatureExtractor extractor_;
  std::size_t lookahead_;
  std::vector<float> pending_;
  std::size_t pending_fill_ = 0;
  std::vector<FrameAnalysis> ring_;
};

/// Whole-buffer analysis, one FrameFeatures per complete hop. Runs the same
/// per-hop code as the streaming path.
std::vector<FrameFeatures> extract_features(std::span<const float> audio);
std::vector<FrameAnalysis> analyze_signal(std::span<const float> audio);

}  // namespace ppn
