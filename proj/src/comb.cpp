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

#include "ppn/comb.hpp"

#include <algorithm>
#include <string>

#include "ppn/error.hpp"

namespace ppn {

EnhancerOutputs EnhancerOutputs::identity() {
  EnhancerOutputs o;
  o.gains.fill(1.0f);
  o.strengths.fill(0.0f);
  o.vad = 1.0f;
  return o;
}

void EnhancerOutputs::clamp() {
  for (auto& g : gains) g = std::clamp(g, 0.0f, 1.0f);
  for (auto& r : strengths) r = std::clamp(r, 0.0f, 1.0f);
  vad = std::clamp(vad, 0.0f, 1.0f);
}

CombState::CombState(std::size_t lookahead_samples)
    : buf_(2 * std::size_t(kMaxPeriod) + kWindow + kHop + lookahead_samples, 0.0f) {}

void CombState::push(std::span<const float> samples) {
  if (samples.size() >= buf_.size()) {
    std::copy(samples.end() - long(buf_.size()), samples.end(), buf_.begin());
  } else {
    std::copy(buf_.begin() + long(samples.size()), buf_.end(), buf_.begin());
    std::copy(samples.begin(), samples.end(), buf_.end() - long(samples.size()));
  }
  end_ += static_cast<long long>(samples.size());
}

float CombState::at(long long index) const {
  const long long oldest = end_ - static_cast<long long>(buf_.size());
  if (index < 0) return 0.0f;
  if (index < oldest || index >= end_) {
    throw InputError("comb delay line does not hold sample " + std::to_string(index));
  }
  return buf_[std::size_t(index - oldest)];
}

void comb_filter_frame(const CombState& state, long long frame_start,
                       std::optional<int> period, std::span<float> out) {
  if (out.size() != kWindow) throw InputError("comb_filter_frame writes 960 samples");
  if (!period) {
    for (std::size_t n = 0; n < kWindow; ++n) out[n] = state.at(frame_start + static_cast<long long>(n));
    return;
  }
  const long long p = *period;
  if (p < kMinPeriod || p > kMaxPeriod) {
    throw InputError("comb period " + std::to_string(p) + " outside [96, 768]");
  }
  const long long lead = state.end() - (frame_start + static_cast<long long>(kWindow));
  if (lead < 0) throw InputError("comb frame extends past the buffered audio");

  long long shifts[5];
  for (int k = -2; k <= 2; ++k) {
    long long m = k;
    while (m > 0 && m * p > lead) --m;
    shifts[k + 2] = m * p;
  }
  for (std::size_t n = 0; n < kWindow; ++n) {
    const long long i = frame_start + static_cast<long long>(n);
    float acc = 0.0f;
    for (int k = 0; k < 5; ++k) acc += kCombTaps[std::size_t(k)] * state.at(i + shifts[k]);
    out[n] = acc;
  }
}

void apply_per_band(const Spectrum& noisy, const Spectrum& combed, const BandVector& gains,
                    const BandVector& strengths, const ErbFilterbank& fb, Spectrum& out) {
  if (fb.n_bins() != kBins) throw InputError("apply_per_band: filterbank bin count mismatch");
  std::array<float, kBins> g{}, r{};
  fb.interpolate(gains, g);
  fb.interpolate(strengths, r);
  for (std::size_t k = 0; k < kBins; ++k) {
    const std::complex<float> blend = (1.0f - r[k]) * noisy[k] + r[k] * combed[k];
    out[k] = g[k] * blend;
  }
}

void Synthesizer::synthesize(const Spectrum& frame, std::span<float> out) {
  if (out.size() != kHop) throw InputError("synthesize emits 480 samples per frame");
  transform_.synthesize(frame, frame_);
  for (std::size_t n = 0; n < kHop; ++n) {
    out[n] = tail_[n] + frame_[n];
    tail_[n] = frame_[n + kHop];
  }
}

}  // namespace ppn
