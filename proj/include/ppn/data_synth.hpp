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

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ppn/features.hpp"
#include "ppn/targets.hpp"

namespace ppn {

// ---------------------------------------------------------------------------
// Synthetic talkers

/// Fixed voice characteristics derived from a speaker seed.
struct SpeakerTraits {
  double base_f0 = 0;        // Hz, in [90, 280]
  double vibrato_rate = 0;   // Hz
  double vibrato_depth = 0;  // fraction of F0
  double formants[3] = {};   // Hz
  double bandwidths[3] = {};
  double open_quotient = 0;
  double aspiration = 0;
  double fricative_hz = 0;
};

SpeakerTraits speaker_traits(std::uint64_t speaker_seed);

struct SynthUtterance {
  std::vector<float> samples;
  std::vector<float> f0;             // per sample, 0 outside voiced segments
  std::vector<std::uint8_t> voiced;  // per sample
};

/// Glottal pulse train through three formant resonators, with voiced,
/// unvoiced and silent segments. The voice comes from `speaker_seed`, the
/// wording from `utterance_seed`. InputError below 1 s.
SynthUtterance synth_speaker(std::uint64_t speaker_seed, double duration_s,
                             std::uint64_t utterance_seed = 0);

/// Coloured background noise with a seeded spectral slope and slow level drift.
std::vector<float> synth_noise(std::uint64_t seed, std::size_t samples);

/// Stationary noise with a speech-like long-term spectrum.
std::vector<float> speech_shaped_noise(std::uint64_t seed, std::size_t samples);

// ---------------------------------------------------------------------------
// Augmentation

struct AugmentSpec {
  std::optional<double> lowpass_hz;          // [3000, 20000]
  std::optional<double> tilt_db_per_octave;  // referenced to 1 kHz
  bool enabled() const { return lowpass_hz || tilt_db_per_octave; }
};

/// Magnitude response of the augmentation at `hz`: a 4th-order Butterworth
/// low-pass magnitude times 10^(tilt log2(f / 1000) / 20), with f >= 50 Hz.
double augment_gain(const AugmentSpec& spec, double hz);

/// Applies an arbitrary real gain per frequency with the pipeline's
/// analysis/synthesis frames. Zero phase, same length as the input.
std::vector<float> spectral_shape(std::span<const float> audio,
                                  const std::function<double(double)>& gain_at_hz);

/// ConfigError when the cutoff lies outside [3000, 20000] Hz.
std::vector<float> augment(std::span<const float> audio, const AugmentSpec& spec);

// ---------------------------------------------------------------------------
// Mixing

struct MixResult {
  std::vector<float> mixture;
  double scale = 0;  // applied to `other`
};

/// Scales `other` so that E_signal / E_scaled_other == 10^(ratio / 10) and
/// adds it. InputError on length mismatch or silence.
MixResult mix_at_ratio(std::span<const float> signal, std::span<const float> other,
                       double ratio_db);

/// 10 log10(E_a / E_b).
double energy_ratio_db(std::span<const float> a, std::span<const float> b);

inline constexpr double kNoInterferer = std::numeric_limits<double>::infinity();

struct MixtureSpec {
  double snr_db = 0;
  double sir_db = kNoInterferer;  // +inf leaves the interferer out
  std::uint64_t seed = 0;
  AugmentSpec augment;
};

/// Stored components are already scaled and augmented, so
/// mixture == clean_target + interferer + noise exactly.
struct MixtureExample {
  MixtureSpec spec;
  std::vector<float> mixture;
  std::vector<float> clean_target;
  std::vector<float> interferer;
  std::vector<float> noise;
  std::vector<float> enrollment;
  double achieved_snr_db = 0;  // measured before augmentation
  double achieved_sir_db = kNoInterferer;
  std::size_t target_speaker = 0;
  std::size_t interferer_speaker = 0;
  SupervisionTargets targets;
  std::vector<FrameFeatures> features;  // of the mixture
};

/// Interferer scaled for the SIR, then noise for the SNR (both relative to
/// the target), then augmentation of every component, then targets.
MixtureExample make_mixture(const MixtureSpec& spec, std::span<const float> target,
                            std::span<const float> interferer, std::span<const float> noise);

// ---------------------------------------------------------------------------
// Dataset presets

struct DatasetPreset {
  std::string name;
  double snr_lo = 0, snr_hi = 0;
  double sir_lo = 0, sir_hi = 0;
  bool augment = false;
  double lowpass_lo = 3000, lowpass_hi = 20000;
  double tilt_lo = -3, tilt_hi = 3;
  double duration_s = 20;
  double enrollment_s = 6;
  std::size_t speakers = 8;
  std::uint64_t speaker_pool_seed = 1000;
};

/// "train", "eval", "toy-train", "toy-eval", "toy-oracle".
DatasetPreset dataset_preset(const std::string& name);

std::uint64_t speaker_seed(const DatasetPreset& preset, std::size_t speaker);

/// Enrollment audio for one pool speaker; disjoint from every mixture utterance.
std::vector<float> enrollment_audio(const DatasetPreset& preset, std::size_t speaker);

/// Example `index` of the dataset identified by (preset, seed).
MixtureExample synth_example(const DatasetPreset& preset, std::uint64_t seed, std::size_t index);

}  // namespace ppn
