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

#include "ppn/data_synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ppn/audio.hpp"
#include "ppn/comb.hpp"
#include "ppn/error.hpp"
#include "ppn/rng.hpp"
#include "ppn/transform.hpp"

namespace ppn {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kFs = kSampleRate;

// Two-pole resonator with unit gain at DC.
class Resonator {
 public:
  void set(double hz, double bandwidth) {
    const double r = std::exp(-kPi * bandwidth / kFs);
    a1_ = -2.0 * r * std::cos(2.0 * kPi * hz / kFs);
    a2_ = r * r;
    b0_ = 1.0 + a1_ + a2_;
  }
  double operator()(double x) {
    const double y = b0_ * x - a1_ * y1_ - a2_ * y2_;
    y2_ = y1_;
    y1_ = y;
    return y;
  }

 private:
  double a1_ = 0, a2_ = 0, b0_ = 1, y1_ = 0, y2_ = 0;
};

// Rosenberg glottal flow over one period, phase in [0, 1).
double glottal_flow(double phase, double open_quotient) {
  const double tp = 0.6 * open_quotient;
  const double tn = 0.4 * open_quotient;
  if (phase < tp) return 0.5 * (1.0 - std::cos(kPi * phase / tp));
  if (phase < tp + tn) return std::cos(0.5 * kPi * (phase - tp) / tn);
  return 0.0;
}

enum class Segment { kVoiced, kUnvoiced, kPause };

struct Plan {
  Segment kind;
  std::size_t begin, end;
  double level;
  double formant_shift[2];
};

double ramp(std::size_t i, std::size_t begin, std::size_t end) {
  constexpr double kRamp = 0.015 * kFs;
  const double a = std::min(double(i - begin), double(end - 1 - i));
  if (a >= kRamp) return 1.0;
  return 0.5 * (1.0 - std::cos(kPi * a / kRamp));
}

}  // namespace

SpeakerTraits speaker_traits(std::uint64_t seed) {
  Rng r(mix_seed(seed, 0x51));
  SpeakerTraits t;
  t.base_f0 = r.uniform(90.0, 280.0);
  t.vibrato_rate = r.uniform(4.5, 6.5);
  t.vibrato_depth = r.uniform(0.005, 0.02);
  const double tract = r.uniform(0.85, 1.2);
  const double base[3] = {550.0, 1600.0, 2600.0};
  const double bw[3][2] = {{60.0, 110.0}, {80.0, 150.0}, {120.0, 220.0}};
  for (int i = 0; i < 3; ++i) {
    t.formants[i] = base[i] * tract * r.uniform(0.88, 1.12);
    t.bandwidths[i] = r.uniform(bw[i][0], bw[i][1]);
  }
  t.open_quotient = r.uniform(0.45, 0.75);
  t.aspiration = r.uniform(0.01, 0.05);
  t.fricative_hz = r.uniform(3500.0, 7000.0);
  return t;
}

SynthUtterance synth_speaker(std::uint64_t speaker_seed, double duration_s,
                             std::uint64_t utterance_seed) {
  if (!(duration_s >= 1.0)) throw InputError("synth_speaker needs at least 1 s of audio");
  const SpeakerTraits tr = speaker_traits(speaker_seed);
  Rng rng(mix_seed(mix_seed(speaker_seed, 0x52), utterance_seed));
  const std::size_t n = std::size_t(std::llround(duration_s * kFs));

  std::vector<Plan> plan;
  for (std::size_t pos = 0; pos < n;) {
    const double u = rng.uniform();
    Plan p{};
    double len = 0;
    if (u < 0.6) {
      p.kind = Segment::kVoiced;
      len = rng.uniform(0.15, 0.40);
    } else if (u < 0.8) {
      p.kind = Segment::kUnvoiced;
      len = rng.uniform(0.04, 0.12);
    } else {
      p.kind = Segment::kPause;
      len = rng.uniform(0.06, 0.25);
    }
    p.level = rng.uniform(0.6, 1.0);
    p.formant_shift[0] = rng.uniform(-0.15, 0.15);
    p.formant_shift[1] = rng.uniform(-0.12, 0.12);
    p.begin = pos;
    p.end = std::min(n, pos + std::size_t(len * kFs));
    pos = p.end;
    plan.push_back(p);
  }

  SynthUtterance out;
  out.samples.assign(n, 0.0f);
  out.f0.assign(n, 0.0f);
  out.voiced.assign(n, 0);

  Resonator formant[3], fricative;
  fricative.set(tr.fricative_hz, 2500.0);
  const double phrase_rate = rng.uniform(0.3, 0.6);
  const double phrase_phase = rng.uniform(0.0, 2.0 * kPi);
  const double vib_phase = rng.uniform(0.0, 2.0 * kPi);
  double phase = 0.0, prev_flow = 0.0;

  for (const Plan& p : plan) {
    for (int i = 0; i < 3; ++i) {
      const double shift = i < 2 ? p.formant_shift[i] : 0.0;
      formant[i].set(tr.formants[i] * (1.0 + shift), tr.bandwidths[i]);
    }
    for (std::size_t i = p.begin; i < p.end; ++i) {
      const double t = double(i) / kFs;
      const double env = ramp(i, p.begin, p.end) * p.level;
      double excitation = 0.0;
      if (p.kind == Segment::kVoiced) {
        const double f0 = tr.base_f0 * (1.0 + 0.08 * std::sin(2 * kPi * phrase_rate * t + phrase_phase)) *
                          (1.0 + tr.vibrato_depth * std::sin(2 * kPi * tr.vibrato_rate * t + vib_phase));
        phase += f0 / kFs;
        if (phase >= 1.0) phase -= 1.0;
        const double flow = glottal_flow(phase, tr.open_quotient);
        // Radiation at the lips differentiates the flow.
        excitation = 40.0 * (flow - prev_flow) + tr.aspiration * flow * rng.normal();
        prev_flow = flow;
        out.f0[i] = float(f0);
        out.voiced[i] = 1;
      } else {
        prev_flow = 0.0;
        phase = 0.0;
      }
      double v = excitation;
      for (auto& f : formant) v = f(v);
      if (p.kind == Segment::kUnvoiced) {
        v += 0.15 * fricative(rng.normal());
      } else if (p.kind == Segment::kVoiced) {
        // Breath noise keeps some high-band energy in voiced speech.
        v += 0.3 * tr.aspiration * fricative(rng.normal());
      }
      out.samples[i] = float(env * v);
    }
  }

  double sq = 0;
  for (float v : out.samples) sq += double(v) * v;
  const double rms = std::sqrt(sq / double(n));
  if (rms > 0) {
    const float g = float(0.08 / rms);
    for (auto& v : out.samples) v *= g;
  }
  return out;
}

std::vector<float> spectral_shape(std::span<const float> audio,
                                  const std::function<double(double)>& gain_at_hz) {
  std::array<float, kBins> gain{};
  for (std::size_t k = 0; k < kBins; ++k) gain[k] = float(gain_at_hz(double(k) * kFs / double(kWindow)));

  Transform tf;
  Synthesizer syn;
  std::vector<float> hist(kWindow, 0.0f), hop(kHop);
  Spectrum spec;
  std::vector<float> out;
  out.reserve(audio.size() + kHop);
  // Frame t covers [480 (t - 1), 480 (t + 1)) and completes [480 (t - 1), 480 t).
  const std::size_t frames = (audio.size() + kHop - 1) / kHop + 1;
  for (std::size_t t = 0; t < frames; ++t) {
    std::copy(hist.begin() + kHop, hist.end(), hist.begin());
    for (std::size_t i = 0; i < kHop; ++i) {
      const std::size_t idx = t * kHop + i;
      hist[kHop + i] = idx < audio.size() ? audio[idx] : 0.0f;
    }
    tf.analyze(hist, spec);
    for (std::size_t k = 0; k < kBins; ++k) spec[k] *= gain[k];
    syn.synthesize(spec, hop);
    if (t > 0) out.insert(out.end(), hop.begin(), hop.end());
  }
  out.resize(audio.size());
  return out;
}

std::vector<float> synth_noise(std::uint64_t seed, std::size_t samples) {
  Rng rng(mix_seed(seed, 0x4e));
  const double slope = rng.uniform(-6.0, 0.0);  // dB per octave above the corner
  const double corner = rng.uniform(200.0, 1500.0);
  const double cutoff = rng.uniform(6000.0, 20000.0);
  std::vector<float> white(samples);
  for (auto& v : white) v = float(rng.normal());
  auto shaped = spectral_shape(white, [&](double hz) {
    const double f = std::max(hz, corner);
    const double tilt = std::pow(10.0, slope * std::log2(f / corner) / 20.0);
    return tilt / std::sqrt(1.0 + std::pow(hz / cutoff, 8.0));
  });
  const double drift_rate = rng.uniform(0.1, 0.5);
  const double drift_phase = rng.uniform(0.0, 2 * kPi);
  for (std::size_t i = 0; i < samples; ++i) {
    shaped[i] *= float(0.85 + 0.15 * std::sin(2 * kPi * drift_rate * double(i) / kFs + drift_phase));
  }
  return shaped;
}

std::vector<float> speech_shaped_noise(std::uint64_t seed, std::size_t samples) {
  Rng rng(mix_seed(seed, 0x53));
  std::vector<float> white(samples);
  for (auto& v : white) v = float(rng.normal());
  auto shaped = spectral_shape(white, [](double hz) {
    // Flat to 500 Hz, then -6 dB per octave, fading out above 8 kHz.
    return 1.0 / std::sqrt(1.0 + (hz / 500.0) * (hz / 500.0)) /
           std::sqrt(1.0 + std::pow(hz / 8000.0, 4.0));
  });
  double sq = 0;
  for (float v : shaped) sq += double(v) * v;
  const float g = sq > 0 ? float(0.1 / std::sqrt(sq / double(samples))) : 0.0f;
  for (auto& v : shaped) v *= g;
  return shaped;
}

double augment_gain(const AugmentSpec& spec, double hz) {
  double g = 1.0;
  if (spec.lowpass_hz) g /= std::sqrt(1.0 + std::pow(hz / *spec.lowpass_hz, 8.0));
  if (spec.tilt_db_per_octave) {
    const double f = std::max(hz, 50.0);
    g *= std::pow(10.0, *spec.tilt_db_per_octave * std::log2(f / 1000.0) / 20.0);
  }
  return g;
}

std::vector<float> augment(std::span<const float> audio, const AugmentSpec& spec) {
  if (spec.lowpass_hz && (*spec.lowpass_hz < 3000.0 || *spec.lowpass_hz > 20000.0)) {
    throw ConfigError("augmentation cutoff must lie in [3000, 20000] Hz");
  }
  if (spec.tilt_db_per_octave && !std::isfinite(*spec.tilt_db_per_octave)) {
    throw ConfigError("augmentation tilt must be finite");
  }
  if (!spec.enabled()) return {audio.begin(), audio.end()};
  return spectral_shape(audio, [&](double hz) { return augment_gain(spec, hz); });
}

MixResult mix_at_ratio(std::span<const float> signal, std::span<const float> other,
                       double ratio_db) {
  if (signal.size() != other.size()) throw InputError("mix_at_ratio: length mismatch");
  if (!std::isfinite(ratio_db)) throw InputError("mix_at_ratio: ratio must be finite");
  const double es = energy(signal), eo = energy(other);
  if (es <= 0.0) throw InputError("mix_at_ratio: signal is silent");
  if (eo <= 0.0) throw InputError("mix_at_ratio: other signal is silent");
  MixResult r;
  r.scale = std::sqrt(es / (eo * std::pow(10.0, ratio_db / 10.0)));
  r.mixture.resize(signal.size());
  for (std::size_t i = 0; i < signal.size(); ++i) r.mixture[i] = signal[i] + float(r.scale) * other[i];
  return r;
}

double energy_ratio_db(std::span<const float> a, std::span<const float> b) {
  return 10.0 * std::log10(energy(a) / energy(b));
}

MixtureExample make_mixture(const MixtureSpec& spec, std::span<const float> target,
                            std::span<const float> interferer, std::span<const float> noise) {
  const std::size_t n = target.size();
  if (noise.size() != n) throw InputError("make_mixture: noise length differs from target");
  const bool with_interferer = std::isfinite(spec.sir_db);
  if (with_interferer && interferer.size() != n) {
    throw InputError("make_mixture: interferer length differs from target");
  }
  MixtureExample ex;
  ex.spec = spec;
  ex.clean_target.assign(target.begin(), target.end());
  ex.interferer.assign(n, 0.0f);
  if (with_interferer) {
    const double s = mix_at_ratio(target, interferer, spec.sir_db).scale;
    for (std::size_t i = 0; i < n; ++i) ex.interferer[i] = float(s) * interferer[i];
    ex.achieved_sir_db = energy_ratio_db(ex.clean_target, ex.interferer);
  }
  const double s = mix_at_ratio(target, noise, spec.snr_db).scale;
  ex.noise.resize(n);
  for (std::size_t i = 0; i < n; ++i) ex.noise[i] = float(s) * noise[i];
  ex.achieved_snr_db = energy_ratio_db(ex.clean_target, ex.noise);

  if (spec.augment.enabled()) {
    ex.clean_target = augment(ex.clean_target, spec.augment);
    if (with_interferer) ex.interferer = augment(ex.interferer, spec.augment);
    ex.noise = augment(ex.noise, spec.augment);
  }
  ex.mixture.resize(n);
  for (std::size_t i = 0; i < n; ++i) ex.mixture[i] = ex.clean_target[i] + ex.interferer[i] + ex.noise[i];
  ex.targets = compute_targets(ex.clean_target, ex.mixture, &ex.features);
  return ex;
}

DatasetPreset dataset_preset(const std::string& name) {
  DatasetPreset p;
  p.name = name;
  if (name == "train" || name == "toy-train") {
    p.snr_lo = -5;
    p.snr_hi = 35;
    p.sir_lo = -5;
    p.sir_hi = 10;
    p.augment = name == "train";
    p.duration_s = name == "train" ? 6.0 : 3.0;
    return p;
  }
  if (name == "eval" || name == "toy-eval") {
    p.snr_lo = p.sir_lo = 3;
    p.snr_hi = p.sir_hi = 15;
    p.duration_s = name == "eval" ? 20.0 : 4.0;
    return p;
  }
  if (name == "toy-oracle") {
    p.snr_lo = p.snr_hi = 0;
    p.sir_lo = p.sir_hi = 5;
    p.duration_s = 4.0;
    return p;
  }
  throw ConfigError("unknown dataset preset '" + name +
                    "' (expected train, eval, toy-train, toy-eval or toy-oracle)");
}

std::uint64_t speaker_seed(const DatasetPreset& preset, std::size_t speaker) {
  return mix_seed(preset.speaker_pool_seed, speaker);
}

std::vector<float> enrollment_audio(const DatasetPreset& preset, std::size_t speaker) {
  // Utterance seeds for mixtures are drawn from a separate stream.
  return synth_speaker(speaker_seed(preset, speaker), preset.enrollment_s, 0xE0E0).samples;
}

MixtureExample synth_example(const DatasetPreset& preset, std::uint64_t seed, std::size_t index) {
  if (preset.speakers < 2) throw ConfigError("dataset preset needs at least two speakers");
  const std::uint64_t ex_seed = mix_seed(mix_seed(seed, 0xDA7A), index);
  Rng rng(ex_seed);
  const std::size_t target = std::size_t(rng.below(preset.speakers));
  std::size_t interf = std::size_t(rng.below(preset.speakers - 1));
  if (interf >= target) ++interf;

  MixtureSpec spec;
  spec.seed = ex_seed;
  spec.snr_db = rng.uniform(preset.snr_lo, preset.snr_hi);
  spec.sir_db = rng.uniform(preset.sir_lo, preset.sir_hi);
  if (preset.augment) {
    spec.augment.lowpass_hz = rng.uniform(preset.lowpass_lo, preset.lowpass_hi);
    spec.augment.tilt_db_per_octave = rng.uniform(preset.tilt_lo, preset.tilt_hi);
  }
  const std::uint64_t utt = rng.next() | 1;  // never the enrollment seed
  const auto a = synth_speaker(speaker_seed(preset, target), preset.duration_s, utt);
  const auto b = synth_speaker(speaker_seed(preset, interf), preset.duration_s, utt + 2);
  const auto noise = synth_noise(mix_seed(ex_seed, 3), a.samples.size());

  MixtureExample ex = make_mixture(spec, a.samples, b.samples, noise);
  ex.target_speaker = target;
  ex.interferer_speaker = interf;
  ex.enrollment = enrollment_audio(preset, target);
  return ex;
}

}  // namespace ppn
