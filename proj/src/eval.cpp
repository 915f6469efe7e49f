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

#include "ppn/eval.hpp"

#include <algorithm>
#include <chrono>

#include <json.hpp>

#include "ppn/data_synth.hpp"
#include "ppn/error.hpp"
#include "ppn/metrics.hpp"

namespace ppn {

namespace {

constexpr std::size_t kProbeMinSamples = kSampleRate / 2;

void check_probe_length(std::span<const float> x, const char* what) {
  if (x.size() < kProbeMinSamples) {
    throw InputError(std::string("cosine_probe: ") + what + " shorter than 0.5 s");
  }
}

}  // namespace

ProbeResult cosine_probe(std::span<const float> output, std::span<const float> target_ref,
                         std::span<const float> interf_ref, const Embedder& embedder) {
  check_probe_length(output, "output");
  check_probe_length(target_ref, "target reference");
  check_probe_length(interf_ref, "interference reference");
  const auto e_out = embedder.enroll_audio(output);
  const auto e_tgt = embedder.enroll_audio(target_ref);
  const auto e_int = embedder.enroll_audio(interf_ref);
  return {cosine(e_out.values, e_tgt.values), cosine(e_out.values, e_int.values)};
}

std::vector<float> oracle_mask_enhance(std::span<const float> clean, std::span<const float> mixture) {
  if (clean.size() != mixture.size()) throw InputError("oracle_mask_enhance: length mismatch");
  const auto c = analyze_signal(clean);
  const auto m = analyze_signal(mixture);
  Synthesizer synth;
  Spectrum out_spec{};
  const BandVector zero{};
  std::vector<float> out(m.size() * kHop, 0.0f);
  for (std::size_t t = 0; t < m.size(); ++t) {
    const auto g = compute_target_gains(c[t].energies, m[t].energies);
    apply_per_band(m[t].spectrum, m[t].spectrum, g, zero, default_filterbank(), out_spec);
    synth.synthesize(out_spec, std::span<float>(out).subspan(t * kHop, kHop));
  }
  // Overlap-add completes each hop one hop late.
  std::vector<float> aligned(mixture.size(), 0.0f);
  for (std::size_t i = 0; i + kHop < out.size() && i < aligned.size(); ++i) aligned[i] = out[i + kHop];
  return aligned;
}

BenchmarkReport benchmark_stream(const EnhancerModel* model, const SpeakerEmbedding& embedding,
                                 double duration_s, const AllocationCounter& allocations,
                                 EngineOptions options) {
  if (!(duration_s > 0)) throw InputError("benchmark duration must be positive");
  const std::size_t warm_hops = std::size_t(kBenchmarkWarmupS * kSampleRate) / kHop;
  const std::size_t hops = std::size_t(duration_s * kSampleRate) / kHop;
  const std::size_t total = (warm_hops + hops) * kHop;

  auto audio = synth_speaker(0xBE4C, double(total) / kSampleRate + 0.01).samples;
  audio.resize(total);
  const auto noise = speech_shaped_noise(0xBE4D, total);
  for (std::size_t i = 0; i < total; ++i) audio[i] += 0.3f * noise[i];

  StreamingEnhancer engine(model, embedding, options);
  std::vector<float> out(kHop);
  for (std::size_t h = 0; h < warm_hops; ++h) {
    engine.process(std::span<const float>(audio).subspan(h * kHop, kHop), out);
  }
  const std::size_t before = allocations ? allocations() : 0;
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t frames = 0;
  for (std::size_t h = warm_hops; h < warm_hops + hops; ++h) {
    frames += engine.process(std::span<const float>(audio).subspan(h * kHop, kHop), out) / kHop;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  BenchmarkReport r;
  r.frames_processed = frames;
  r.audio_seconds = double(frames * kHop) / kSampleRate;
  r.wall_seconds = wall;
  r.realtime_factor = r.audio_seconds / std::max(wall, 1e-9);
  r.cpu_fraction = 1.0 / r.realtime_factor;
  if (allocations) r.allocations = static_cast<long long>(allocations() - before);
  return r;
}

EvalSummary summarize(std::span<const EvalRecord> records) {
  EvalSummary s;
  s.count = records.size();
  if (records.empty()) return s;
  auto med = [&](double EvalRecord::*field) {
    std::vector<double> v;
    v.reserve(records.size());
    for (const auto& r : records) v.push_back(r.*field);
    return median(std::move(v));
  };
  s.si_snr_in = med(&EvalRecord::si_snr_in);
  s.si_snr_out = med(&EvalRecord::si_snr_out);
  s.cos_target = med(&EvalRecord::cos_target);
  s.cos_interf = med(&EvalRecord::cos_interf);
  s.vad_acc = med(&EvalRecord::vad_acc);
  return s;
}

std::string to_json_line(const EvalRecord& r) {
  nlohmann::ordered_json j;
  j["index"] = r.index;
  j["si_snr_in"] = r.si_snr_in;
  j["si_snr_out"] = r.si_snr_out;
  j["cos_target"] = r.cos_target;
  j["cos_interf"] = r.cos_interf;
  j["vad_acc"] = r.vad_acc;
  return j.dump();
}

std::string to_json_line(const EvalSummary& s) {
  nlohmann::ordered_json j;
  j["summary"] = "median";
  j["count"] = s.count;
  j["si_snr_in"] = s.si_snr_in;
  j["si_snr_out"] = s.si_snr_out;
  j["cos_target"] = s.cos_target;
  j["cos_interf"] = s.cos_interf;
  j["vad_acc"] = s.vad_acc;
  return j.dump();
}

std::string eval_report(std::span<const EvalRecord> records) {
  std::string out;
  for (const auto& r : records) out += to_json_line(r) + "\n";
  out += to_json_line(summarize(records)) + "\n";
  return out;
}

}  // namespace ppn
