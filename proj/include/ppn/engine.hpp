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
#include <functional>
#include <span>
#include <vector>

#include "ppn/comb.hpp"
#include "ppn/embedder.hpp"
#include "ppn/enhancer.hpp"
#include "ppn/features.hpp"

namespace ppn {

struct EngineOptions {
  /// Bypasses the network: gains 1, strengths 0. Only the analysis and
  /// synthesis path remains.
  bool identity = false;
  /// Used when no model is given; otherwise the model's value applies.
  std::size_t lookahead_frames = kLookaheadFrames;
};

/// Real-time target-voice enhancer for one 48 kHz mono stream.
///
/// Every completed input hop yields one 480-sample output hop. The output is
/// the input delayed by `latency_samples()` and filtered. After construction
/// `process` performs no heap allocation.
class StreamingEnhancer {
 public:
  /// `model` may be null only in identity mode. The model must outlive the
  /// enhancer.
  StreamingEnhancer(const EnhancerModel* model, const SpeakerEmbedding& embedding,
                    EngineOptions options = {});

  StreamingEnhancer(const StreamingEnhancer&) = delete;
  StreamingEnhancer& operator=(const StreamingEnhancer&) = delete;

  /// Consumes any number of samples and writes the completed output hops to
  /// `out`, returning how many samples were written. `out` must hold at
  /// least `max_output(in.size())` samples. InputError on non-finite input.
  std::size_t process(std::span<const float> in, std::span<float> out);

  /// Upper bound on the output of the next `process` call.
  std::size_t max_output(std::size_t input_samples) const;

  std::size_t latency_samples() const { return kHop * (1 + lookahead_); }
  std::size_t lookahead_frames() const { return lookahead_; }
  std::size_t hops_processed() const { return hops_; }

  /// Network outputs of the most recent output hop.
  const EnhancerOutputs& last_outputs() const { return last_; }

  /// Called with (frame index, outputs) for every released frame.
  using FrameObserver = std::function<void(std::size_t, const EnhancerOutputs&)>;
  void set_observer(FrameObserver observer) { observer_ = std::move(observer); }

 private:
  void on_frame(const FrameAnalysis& newest, const FrameAnalysis* due);

  const EnhancerModel* model_;
  bool identity_;
  std::size_t lookahead_;
  FeatureStream stream_;
  FeatureStream::Callback callback_;
  CombState comb_state_;
  EnhancerNet<float>::Session session_;
  Transform comb_transform_;
  Synthesizer synth_;
  std::array<float, kFeatureDim> features_{};
  std::array<float, kWindow> comb_frame_{};
  Spectrum comb_spectrum_{};
  Spectrum enhanced_{};
  EnhancerOutputs last_ = EnhancerOutputs::identity();
  FrameObserver observer_;
  std::size_t hop_fill_ = 0;  // samples of the current hop already pushed
  std::size_t hops_ = 0;
  std::span<float> out_;
  std::size_t written_ = 0;
};

/// Offline wrapper: runs the stream over `audio`, flushes the delay with
/// zeros and returns a signal aligned with the input and of equal length.
std::vector<float> enhance_signal(const EnhancerModel* model, const SpeakerEmbedding& embedding,
                                  std::span<const float> audio, EngineOptions options = {},
                                  std::vector<EnhancerOutputs>* frame_outputs = nullptr);

}  // namespace ppn
