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

#include "ppn/engine.hpp"

#include <algorithm>
#include <cmath>

#include "ppn/error.hpp"

namespace ppn {

StreamingEnhancer::StreamingEnhancer(const EnhancerModel* model, const SpeakerEmbedding& embedding,
                                     EngineOptions options)
    : model_(model),
      identity_(options.identity),
      lookahead_(model ? model->config().lookahead_frames : options.lookahead_frames),
      stream_(lookahead_),
      comb_state_(lookahead_ * kHop) {
  if (!model_ && !identity_) throw ConfigError("a model is required unless identity mode is on");
  if (model_) session_ = model_->net().make_session(embedding.values);
  callback_ = [this](const FrameAnalysis& newest, const FrameAnalysis* due) { on_frame(newest, due); };
}

std::size_t StreamingEnhancer::max_output(std::size_t input_samples) const {
  return (hop_fill_ + input_samples) / kHop * kHop;
}

std::size_t StreamingEnhancer::process(std::span<const float> in, std::span<float> out) {
  for (float v : in)
    if (!std::isfinite(v)) throw InputError("input contains NaN or infinite samples");
  if (out.size() < max_output(in.size())) throw InputError("output buffer too small");
  out_ = out;
  written_ = 0;
  std::size_t pos = 0;
  while (pos < in.size()) {
    // Hop-aligned pieces keep the comb delay line in step with the analysis.
    const std::size_t take = std::min(kHop - hop_fill_, in.size() - pos);
    const auto piece = in.subspan(pos, take);
    comb_state_.push(piece);
    hop_fill_ = (hop_fill_ + take) % kHop;
    stream_.push(piece, callback_);
    pos += take;
  }
  out_ = {};
  return written_;
}

void StreamingEnhancer::on_frame(const FrameAnalysis& newest, const FrameAnalysis* due) {
  EnhancerOutputs y = EnhancerOutputs::identity();
  if (model_ && !identity_) {
    newest.features.write_to(features_);
    model_->net().step(features_, session_, y);
  }
  const auto block = out_.subspan(written_, kHop);
  written_ += kHop;
  ++hops_;
  if (!due) {
    std::fill(block.begin(), block.end(), 0.0f);
    return;
  }
  last_ = y;
  if (observer_) observer_(due->index, y);
  if (identity_) {
    synth_.synthesize(due->spectrum, block);
    return;
  }
  const long long start = (static_cast<long long>(due->index) - 1) * static_cast<long long>(kHop);
  comb_filter_frame(comb_state_, start, due->pitch.period, comb_frame_);
  comb_transform_.analyze(comb_frame_, comb_spectrum_);
  apply_per_band(due->spectrum, comb_spectrum_, y.gains, y.strengths, default_filterbank(), enhanced_);
  synth_.synthesize(enhanced_, block);
}

std::vector<float> enhance_signal(const EnhancerModel* model, const SpeakerEmbedding& embedding,
                                  std::span<const float> audio, EngineOptions options,
                                  std::vector<EnhancerOutputs>* frame_outputs) {
  StreamingEnhancer engine(model, embedding, options);
  if (frame_outputs) {
    frame_outputs->clear();
    engine.set_observer([frame_outputs](std::size_t, const EnhancerOutputs& y) {
      frame_outputs->push_back(y);
    });
  }
  const std::size_t delay = engine.latency_samples();
  const std::size_t total = (audio.size() + delay + kHop - 1) / kHop * kHop;
  std::vector<float> padded(total, 0.0f);
  std::copy(audio.begin(), audio.end(), padded.begin());
  std::vector<float> out(engine.max_output(total));
  const std::size_t n = engine.process(padded, out);
  out.resize(n);
  std::vector<float> aligned(audio.size(), 0.0f);
  for (std::size_t i = 0; i < audio.size() && i + delay < n; ++i) aligned[i] = out[i + delay];
  return aligned;
}

}  // namespace ppn
