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
#include <span>
#include <vector>

#include "ppn/frame_spec.hpp"
#include "ppn/transform.hpp"

namespace ppn {

using BandVector = std::array<float, kBands>;

/// ERB-rate of a frequency in Hz, 21.4 * log10(1 + 0.00437 f).
double erb_rate(double hz);
/// Inverse of erb_rate.
double erb_rate_to_hz(double erb);
/// Equivalent rectangular bandwidth at f Hz, 24.7 * (4.37 f / 1000 + 1).
double erb_bandwidth(double hz);

/// 32 triangular bands over the spectrum bins.
///
/// Band centers sit at uniform ERB-rate steps from DC to Nyquist, pushed up
/// where needed so consecutive centers are at least one bin apart. Adjacent
/// triangles cross-fade linearly, so the weights at every bin sum to one and
/// at most two bands are non-zero at any bin. Immutable once built.
class ErbFilterbank {
 public:
  std::size_t n_bands() const { return kBands; }
  std::size_t n_bins() const { return n_bins_; }

  float weight(std::size_t band, std::size_t bin) const {
    return weights_[band * n_bins_ + bin];
  }
  std::span<const float> band_weights(std::size_t band) const {
    return {weights_.data() + band * n_bins_, n_bins_};
  }
  /// Support of band `band` as a half-open bin range.
  std::size_t band_begin(std::size_t band) const { return begin_[band]; }
  std::size_t band_end(std::size_t band) const { return end_[band]; }

  const std::vector<double>& center_bins() const { return center_bins_; }
  const std::vector<double>& band_centers_hz() const { return centers_hz_; }

  /// Expands per-band values to per-bin values with the same triangles.
  void interpolate(const BandVector& bands, std::span<float> bins) const;

 private:
  friend ErbFilterbank design_erb_filterbank(std::size_t n_bins, int sample_rate);

  std::size_t n_bins_ = 0;
  std::vector<float> weights_;
  std::vector<double> center_bins_;
  std::vector<double> centers_hz_;
  std::vector<std::size_t> begin_, end_;
};

ErbFilterbank design_erb_filterbank(std::size_t n_bins = kBins,
                                    int sample_rate = kSampleRate);

/// Shared analysis filterbank for 481-bin spectra.
const ErbFilterbank& default_filterbank();

/// E[band] = sum over bins of weight * |X|^2.
BandVector band_energies(const Spectrum& spectrum, const ErbFilterbank& fb);

}  // namespace ppn
