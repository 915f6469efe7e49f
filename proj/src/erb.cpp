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

#include "ppn/erb.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ppn/error.hpp"

namespace ppn {

double erb_rate(double hz) { return 21.4 * std::log10(1.0 + 0.00437 * hz); }
double erb_rate_to_hz(double erb) { return (std::pow(10.0, erb / 21.4) - 1.0) / 0.00437; }
double erb_bandwidth(double hz) { return 24.7 * (4.37 * hz / 1000.0 + 1.0); }

ErbFilterbank design_erb_filterbank(std::size_t n_bins, int sample_rate) {
  if (sample_rate != kSampleRate) {
    throw ConfigError("filterbank requires a 48000 Hz sample rate, got " +
                      std::to_string(sample_rate));
  }
  if (n_bins < 64) {
    throw ConfigError("filterbank needs at least 64 bins, got " + std::to_string(n_bins));
  }

  const double nyquist = sample_rate / 2.0;
  const double bin_hz = nyquist / double(n_bins - 1);
  const double top = erb_rate(nyquist);

  ErbFilterbank fb;
  fb.n_bins_ = n_bins;
  fb.center_bins_.resize(kBands);
  fb.center_bins_[0] = 0.0;
  for (std::size_t b = 1; b < kBands; ++b) {
    const double hz = erb_rate_to_hz(top * double(b) / double(kBands - 1));
    fb.center_bins_[b] = std::max(hz / bin_hz, fb.center_bins_[b - 1] + 1.0);
  }
  const double last = double(n_bins - 1);
  if (fb.center_bins_[kBands - 1] > last + 1e-9) {
    throw ConfigError(std::to_string(n_bins) +
                      " bins cannot give every band a dedicated bin");
  }
  fb.center_bins_[kBands - 1] = last;

  fb.centers_hz_.resize(kBands);
  for (std::size_t b = 0; b < kBands; ++b) fb.centers_hz_[b] = fb.center_bins_[b] * bin_hz;

  fb.weights_.assign(kBands * n_bins, 0.0f);
  std::size_t band = 0;
  for (std::size_t k = 0; k < n_bins; ++k) {
    const double f = double(k);
    while (band + 1 < kBands - 1 && f >= fb.center_bins_[band + 1]) ++band;
    const double lo = fb.center_bins_[band];
    const double hi = fb.center_bins_[band + 1];
    if (f >= hi) {
      fb.weights_[(band + 1) * n_bins + k] = 1.0f;
      continue;
    }
    const float w_lo = float((hi - f) / (hi - lo));
    fb.weights_[band * n_bins + k] = w_lo;
    fb.weights_[(band + 1) * n_bins + k] = 1.0f - w_lo;
  }

  fb.begin_.resize(kBands);
  fb.end_.resize(kBands);
  for (std::size_t b = 0; b < kBands; ++b) {
    std::size_t first = n_bins, stop = 0;
    for (std::size_t k = 0; k < n_bins; ++k) {
      if (fb.weights_[b * n_bins + k] > 0.0f) {
        first = std::min(first, k);
        stop = k + 1;
      }
    }
    if (first == n_bins) throw ConfigError("band " + std::to_string(b) + " covers no bins");
    fb.begin_[b] = first;
    fb.end_[b] = stop;
  }
  return fb;
}

const ErbFilterbank& default_filterbank() {
  static const ErbFilterbank fb = design_erb_filterbank(kBins, kSampleRate);
  return fb;
}

void ErbFilterbank::interpolate(const BandVector& bands, std::span<float> bins) const {
  if (bins.size() != n_bins_) throw InputError("interpolate: bin count mismatch");
  std::fill(bins.begin(), bins.end(), 0.0f);
  for (std::size_t b = 0; b < kBands; ++b) {
    const float v = bands[b];
    const float* w = weights_.data() + b * n_bins_;
    for (std::size_t k = begin_[b]; k < end_[b]; ++k) bins[k] += w[k] * v;
  }
}

BandVector band_energies(const Spectrum& spectrum, const ErbFilterbank& fb) {
  if (fb.n_bins() != spectrum.size()) throw InputError("band_energies: bin count mismatch");
  BandVector e{};
  for (std::size_t b = 0; b < kBands; ++b) {
    const auto w = fb.band_weights(b);
    double acc = 0.0;
    for (std::size_t k = fb.band_begin(b); k < fb.band_end(b); ++k) {
      acc += double(w[k]) * double(std::norm(spectrum[k]));
    }
    e[b] = float(acc);
  }
  return e;
}

}  // namespace ppn
