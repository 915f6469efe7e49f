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

#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "ppn/data_synth.hpp"
#include "ppn/error.hpp"
#include "ppn/eval.hpp"
#include "ppn/metrics.hpp"
#include "ppn/pitch.hpp"

using namespace ppn;

namespace {

double sum_sq(std::span<const float> x) {
  double e = 0;
  for (float v : x) e += double(v) * v;
  return e;
}

std::vector<float> tone(double hz, std::size_t n, double amp = 0.1) {
  std::vector<float> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = float(amp * std::sin(2 * std::numbers::pi * hz * double(i) / kSampleRate));
  return x;
}

// Energy of the middle of a signal, away from the edges.
double mid_energy(std::span<const float> x) { return sum_sq(x.subspan(x.size() / 4, x.size() / 2)); }

// Mean log band energy over a whole signal.
std::vector<double> long_term_spectrum(std::span<const float> x) {
  std::vector<double> acc(kBands, 0.0);
  const auto frames = analyze_signal(x);
  for (const auto& f : frames)
    for (std::size_t b = 0; b < kBands; ++b) acc[b] += f.energies[b];
  for (auto& v : acc) v = 10.0 * std::log10(v / double(frames.size()) + 1e-12);
  return acc;
}

double log_spectral_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s / double(a.size()));
}

}  // namespace

TEST_CASE("mix_at_ratio: energy-ratio oracle") {
  const auto a = tone(300, 48000);
  const auto b = tone(1100, 48000);
  CHECK(mix_at_ratio(a, b, 0.0).scale == doctest::Approx(1.0).epsilon(1e-6));

  for (double ratio : {10.0, -5.0, 3.7}) {
    const auto r = mix_at_ratio(a, b, ratio);
    std::vector<float> scaled(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) scaled[i] = float(r.scale) * b[i];
    CHECK(10.0 * std::log10(sum_sq(a) / sum_sq(scaled)) == doctest::Approx(ratio).epsilon(1e-4));
    for (std::size_t i = 0; i < a.size(); i += 977) CHECK(r.mixture[i] == doctest::Approx(a[i] + scaled[i]).epsilon(1e-6));
  }
  CHECK_THROWS_AS(mix_at_ratio(a, std::vector<float>(10), 0), InputError);
  CHECK_THROWS_AS(mix_at_ratio(a, std::vector<float>(a.size(), 0.0f), 0), InputError);
}

TEST_CASE("make_mixture: exact sums, missing interferer, achieved ratios") {
  const auto t = synth_speaker(1, 2.0).samples;
  const auto i = synth_speaker(2, 2.0).samples;
  const auto n = synth_noise(3, t.size());

  MixtureSpec spec;
  spec.snr_db = 7.5;
  spec.sir_db = 2.5;
  const auto ex = make_mixture(spec, t, i, n);
  for (std::size_t k = 0; k < t.size(); ++k) {
    REQUIRE(ex.mixture[k] == ex.clean_target[k] + ex.interferer[k] + ex.noise[k]);
  }
  CHECK(std::abs(energy_ratio_db(ex.clean_target, ex.noise) - 7.5) < 0.01);
  CHECK(std::abs(energy_ratio_db(ex.clean_target, ex.interferer) - 2.5) < 0.01);
  CHECK(ex.targets.frames() == t.size() / kHop);
  CHECK(ex.features.size() == ex.targets.frames());

  MixtureSpec solo;
  solo.snr_db = 5;
  const auto s = make_mixture(solo, t, {}, n);
  CHECK(sum_sq(s.interferer) == 0.0);
  for (std::size_t k = 0; k < t.size(); ++k) REQUIRE(s.mixture[k] == t[k] + s.noise[k]);
  CHECK(std::isinf(s.achieved_sir_db));

  CHECK_THROWS_AS(make_mixture(spec, t, std::vector<float>(5), n), InputError);
  CHECK_THROWS_AS(make_mixture(spec, t, i, std::vector<float>(5)), InputError);
}

TEST_CASE("dataset presets: ranges, determinism, disjoint enrollment") {
  const auto eval = dataset_preset("eval");
  CHECK(eval.snr_lo == 3.0);
  CHECK(eval.snr_hi == 15.0);
  CHECK(eval.sir_lo == 3.0);
  CHECK(eval.sir_hi == 15.0);
  CHECK(eval.duration_s == 20.0);
  const auto train = dataset_preset("train");
  CHECK(train.snr_lo == -5.0);
  CHECK(train.snr_hi == 35.0);
  CHECK(train.augment);
  CHECK_THROWS_AS(dataset_preset("bogus"), ConfigError);

  const auto toy = dataset_preset("toy-eval");
  for (std::size_t k = 0; k < 10; ++k) {
    const auto a = synth_example(toy, 7, k);
    CHECK(a.spec.snr_db >= 3.0);
    CHECK(a.spec.snr_db <= 15.0);
    CHECK(a.spec.sir_db >= 3.0);
    CHECK(a.spec.sir_db <= 15.0);
    CHECK(std::abs(a.achieved_snr_db - a.spec.snr_db) < 0.01);
    CHECK(std::abs(a.achieved_sir_db - a.spec.sir_db) < 0.01);
    CHECK(a.target_speaker != a.interferer_speaker);
  }
  const auto a = synth_example(toy, 7, 3);
  const auto b = synth_example(toy, 7, 3);
  CHECK(a.mixture == b.mixture);
  CHECK(a.clean_target == b.clean_target);
  CHECK(a.interferer == b.interferer);
  CHECK(a.noise == b.noise);
  CHECK(a.enrollment == b.enrollment);
  CHECK(a.targets.gains == b.targets.gains);
  CHECK(a.targets.vad == b.targets.vad);
  CHECK(synth_example(toy, 8, 3).mixture != a.mixture);

  const auto enr = enrollment_audio(toy, a.target_speaker);
  CHECK(enr.size() == std::size_t(toy.enrollment_s * kSampleRate));
  CHECK(a.enrollment == enr);
}

TEST_CASE("augmentation: response oracle and probes") {
  AugmentSpec lp;
  lp.lowpass_hz = 5000.0;
  for (double f : {100.0, 1000.0, 5000.0, 9000.0}) {
    CHECK(augment_gain(lp, f) == doctest::Approx(1.0 / std::sqrt(1.0 + std::pow(f / 5000.0, 8.0))).epsilon(1e-9));
  }

  AugmentSpec wide;
  wide.lowpass_hz = 20000.0;
  wide.tilt_db_per_octave = 0.0;
  const auto speech = synth_speaker(9, 2.0).samples;
  CHECK(mid_energy(augment(speech, wide)) >= 0.99 * mid_energy(speech));

  AugmentSpec narrow;
  narrow.lowpass_hz = 3000.0;
  const auto hi = tone(8000, 48000);
  CHECK(10.0 * std::log10(mid_energy(hi) / mid_energy(augment(hi, narrow))) > 30.0);

  AugmentSpec tilt;
  tilt.tilt_db_per_octave = -3.0;
  const auto t1 = tone(1000, 48000);
  const auto t4 = tone(4000, 48000);
  const double drop1 = 10.0 * std::log10(mid_energy(augment(t1, tilt)) / mid_energy(t1));
  const double drop4 = 10.0 * std::log10(mid_energy(augment(t4, tilt)) / mid_energy(t4));
  CHECK(drop1 - drop4 == doctest::Approx(6.0).epsilon(0.5 / 6.0));

  AugmentSpec bad;
  bad.lowpass_hz = 2000.0;
  CHECK_THROWS_AS(augment(speech, bad), ConfigError);
  bad.lowpass_hz = 21000.0;
  CHECK_THROWS_AS(augment(speech, bad), ConfigError);
  CHECK(augment(speech, AugmentSpec{}) == speech);
}

TEST_CASE("synthetic talkers: determinism, traits, pitch cross-check") {
  CHECK_THROWS_AS(synth_speaker(1, 0.5), InputError);
  const auto a = synth_speaker(11, 3.0, 4);
  const auto b = synth_speaker(11, 3.0, 4);
  CHECK(a.samples == b.samples);
  CHECK(a.samples.size() == 3 * kSampleRate);
  CHECK(synth_speaker(11, 3.0, 5).samples != a.samples);
  const double rms = std::sqrt(sum_sq(a.samples) / double(a.samples.size()));
  CHECK(rms == doctest::Approx(0.08).epsilon(1e-3));

  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto t = speaker_traits(seed);
    REQUIRE(t.base_f0 >= 90.0);
    REQUIRE(t.base_f0 <= 280.0);
  }

  std::size_t ok = 0, total = 0;
  for (std::uint64_t seed : {21u, 22u, 23u, 24u}) {
    const auto u = synth_speaker(seed, 3.0, 1);
    for (std::size_t end = kPitchHistory; end + 10 < u.samples.size(); end += 960) {
      bool voiced = true;
      for (std::size_t k = end - kPitchHistory; k < end; ++k) voiced &= u.voiced[k] != 0;
      if (!voiced) continue;
      const auto p = estimate_pitch(std::span<const float>(u.samples).subspan(end - kPitchHistory, kPitchHistory));
      const double truth = kSampleRate / double(u.f0[end - kPitchWindow / 2]);
      ++total;
      if (p.period && std::abs(*p.period - truth) <= 0.05 * truth) ++ok;
    }
  }
  REQUIRE(total > 20);
  CHECK(double(ok) / double(total) >= 0.9);
}

TEST_CASE("synthetic talkers: between-speaker spectra differ more than within") {
  for (std::uint64_t s : {31u, 32u, 33u}) {
    const auto a = synth_speaker(s, 4.0, 1).samples;
    const auto b = synth_speaker(s, 4.0, 2).samples;
    const auto c = synth_speaker(s + 100, 4.0, 1).samples;
    const auto la = long_term_spectrum(a);
    CHECK(log_spectral_distance(la, long_term_spectrum(c)) > log_spectral_distance(la, long_term_spectrum(b)));
  }
}

TEST_CASE("oracle masks improve SI-SNR at 0 dB SNR") {
  const auto preset = dataset_preset("toy-oracle");
  std::vector<double> gain;
  for (std::size_t k = 0; k < 10; ++k) {
    const auto ex = synth_example(preset, 3, k);
    const auto y = oracle_mask_enhance(ex.clean_target, ex.mixture);
    gain.push_back(si_snr(y, ex.clean_target) - si_snr(ex.mixture, ex.clean_target));
  }
  CHECK(median(gain) >= 5.0);
}
