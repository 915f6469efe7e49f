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

#include "ppn/targets.hpp"

#include <algorithm>
#include <cmath>

#include "ppn/error.hpp"
#include "ppn/features.hpp"

namespace ppn {

BandVector compute_target_gains(const BandVector& clean_energy, const BandVector& noisy_energy) {
  BandVector g{};
  for (std::size_t b = 0; b < kBands; ++b) {
    const double ratio = double(clean_energy[b]) / std::max(double(noisy_energy[b]), 1e-12);
    g[b] = float(std::min(1.0, std::sqrt(std::max(0.0, ratio))));
  }
  return g;
}

std::vector<int> vad_labels(std::span<const double> clean_frame_energy) {
  double peak = 0.0;
  for (double e : clean_frame_energy) peak = std::max(peak, e);
  const double floor = peak * std::pow(10.0, -kVadRangeDb / 10.0);
  std::vector<int> out(clean_frame_energy.size(), 0);
  if (peak <= 0.0) return out;
  for (std::size_t t = 0; t < out.size(); ++t) out[t] = clean_frame_energy[t] > floor ? 1 : 0;
  return out;
}

SupervisionTargets compute_targets(std::span<const float> clean, std::span<const float> mixture,
                                   std::vector<FrameFeatures>* mixture_features) {
  if (clean.size() != mixture.size()) throw InputError("compute_targets: clean and mixture lengths differ");
  FeatureExtractor clean_fe, mix_fe;
  const std::size_t frames = clean.size() / kHop;
  SupervisionTargets t;
  t.gains.reserve(frames);
  t.strengths.reserve(frames);
  std::vector<double> energy(frames);
  if (mixture_features) {
    mixture_features->clear();
    mixture_features->reserve(frames);
  }
  for (std::size_t f = 0; f < frames; ++f) {
    const auto& c = clean_fe.process_hop(clean.subspan(f * kHop, kHop));
    const auto& m = mix_fe.process_hop(mixture.subspan(f * kHop, kHop));
    t.gains.push_back(compute_target_gains(c.energies, m.energies));
    t.strengths.push_back(c.features.pitch_coherence);
    if (mixture_features) mixture_features->push_back(m.features);
    double e = 0;
    for (float v : c.energies) e += v;
    energy[f] = e;
  }
  t.vad = vad_labels(energy);
  return t;
}

}  // namespace ppn
