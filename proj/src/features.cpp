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

#include "ppn/features.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ppn/error.hpp"

namespace ppn {

namespace {
// Samples kept for the current window plus a window delayed by the longest period.
constexpr std::size_t kHistory = kWindow + std::size_t(kMaxPeriod);
static_assert(kHistory >= kPitchHistory);
}  // namespace

void FrameFeatures::write_to(std::span<float> out) const {
  if (out.size() < kFeatureDim) throw InputError("feature output span too small");
  std::copy(band_mag.begin(), band_mag.end(), out.begin());
  std::copy(pitch_coherence.begin(), pitch_coherence.end(), out.begin() + kBands);
  std::copy(general.begin(), general.end(), out.begin() + 2 * kBands);
}

std::array<float, kFeatureDim> FrameFeatures::flat() const {
  std::array<float, kFeatureDim> v{};
  write_to(v);
  return v;
}

BandVector pitch_coherence(const Spectrum& frame, const Spectrum& delayed,
                           const ErbFilterbank& fb) {
  BandVector out{};
  for (std::size_t b = 0; b < kBands; ++b) {
    const auto w = fb.band_weights(b);
    double cross = 0.0, ex = 0.0, ep = 0.0;
    for (std::size_t k = fb.band_begin(b); k < fb.band_end(b); ++k) {
      const std::complex<double> x = frame[k];
      const std::complex<double> p = delayed[k];
      cross += w[k] * (x.real() * p.real() + x.imag() * p.imag());
      ex += w[k] * std::norm(x);
      ep += w[k] * std::norm(p);
    }
    const double denom = std::sqrt(ex * ep);
    out[b] = denom > 1e-18 ? float(std::clamp(cross / denom, 0.0, 1.0)) : 0.0f;
  }
  return out;
}

BandVector pitch_coherence(std::span<const float> window, std::span<const float> delayed,
                           const PitchEstimate& pitch, const ErbFilterbank& fb) {
  if (!pitch.period) return BandVector{};
  return pitch_coherence(analyze_frame(window), analyze_frame(delayed), fb);
}

FrameFeatures assemble_features(const BandVector& energies, const BandVector& coherences,
                                const PitchEstimate& pitch, FrameEnergyState& state) {
  FrameFeatures f;
  double total = 0.0;
  for (std::size_t b = 0; b < kBands; ++b) {
    f.band_mag[b] = std::max(kLogFloor, std::log10(energies[b] + kEnergyEpsilon));
    f.pitch_coherence[b] = std::clamp(coherences[b], 0.0f, 1.0f);
    total += energies[b];
  }
  if (pitch.period) {
    f.general[0] = float(*pitch.period - kMinPeriod) / float(kMaxPeriod - kMinPeriod);
    f.general[1] = pitch.correlation;
  }
  const float log_energy = std::max(kLogFloor, float(std::log10(total + kEnergyEpsilon)));
  f.general[2] = log_energy;
  f.general[3] = log_energy - state.prev_log_energy;
  state.prev_log_energy = log_energy;
  return f;
}

FeatureExtractor::FeatureExtractor(const ErbFilterbank& fb)
    : fb_(&fb), history_(kHistory, 0.0f) {
  if (fb.n_bins() != kBins) throw ConfigError("feature extractor needs a 481-bin filterbank");
}

void FeatureExtractor::reset() {
  std::fill(history_.begin(), history_.end(), 0.0f);
  energy_state_ = {};
  frames_ = 0;
}

const FrameAnalysis& FeatureExtractor::process_hop(std::span<const float> hop) {
  if (hop.size() != kHop) {
    throw InputError("process_hop expects " + std::to_string(kHop) + " samples");
  }
  std::copy(history_.begin() + kHop, history_.end(), history_.begin());
  std::copy(hop.begin(), hop.end(), history_.end() - kHop);

  const std::span<const float> hist(history_);
  const auto window = hist.last(kWindow);

  current_.index = frames_++;
  transform_.analyze(window, current_.spectrum);
  current_.energies = band_energies(current_.spectrum, *fb_);
  current_.pitch = pitch_.estimate(hist);

  BandVector coherence{};
  if (current_.pitch.period) {
    const std::size_t lag = std::size_t(*current_.pitch.period);
    const auto delayed = hist.subspan(kHistory - kWindow - lag, kWindow);
    transform_.analyze(delayed, delayed_spectrum_);
    coherence = pitch_coherence(current_.spectrum, delayed_spectrum_, *fb_);
  }
  current_.features =
      assemble_features(current_.energies, coherence, current_.pitch, energy_state_);
  return current_;
}

FeatureStream::FeatureStream(std::size_t lookahead_frames, const ErbFilterbank& fb)
    : extractor_(fb),
      lookahead_(lookahead_frames),
      pending_(kHop, 0.0f),
      ring_(lookahead_frames + 1) {}

void FeatureStream::push(std::span<const float> samples, const Callback& cb) {
  std::size_t pos = 0;
  while (pos < samples.size()) {
    const std::size_t take = std::min(kHop - pending_fill_, samples.size() - pos);
    std::copy_n(samples.begin() + pos, take, pending_.begin() + pending_fill_);
    pending_fill_ += take;
    pos += take;
    if (pending_fill_ < kHop) break;
    pending_fill_ = 0;

    const FrameAnalysis& newest = extractor_.process_hop(pending_);
    const std::size_t slot = newest.index % ring_.size();
    ring_[slot] = newest;
    const FrameAnalysis* due = nullptr;
    if (newest.index >= lookahead_) {
      due = &ring_[(newest.index - lookahead_) % ring_.size()];
    }
    cb(ring_[slot], due);
  }
}

std::vector<FrameAnalysis> analyze_signal(std::span<const float> audio) {
  FeatureExtractor fe;
  const std::size_t frames = audio.size() / kHop;
  std::vector<FrameAnalysis> out;
  out.reserve(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    out.push_back(fe.process_hop(audio.subspan(t * kHop, kHop)));
  }
  return out;
}

std::vector<FrameFeatures> extract_features(std::span<const float> audio) {
  FeatureExtractor fe;
  const std::size_t frames = audio.size() / kHop;
  std::vector<FrameFeatures> out;
  out.reserve(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    out.push_back(fe.process_hop(audio.subspan(t * kHop, kHop)).features);
  }
  return out;
}

}  // namespace ppn
