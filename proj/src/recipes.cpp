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

#include "ppn/recipes.hpp"

#include <algorithm>
#include <cmath>

#include "ppn/error.hpp"
#include "ppn/metrics.hpp"

namespace ppn {

SpeakerSet synth_speaker_set(const DatasetPreset& preset, std::size_t per_speaker,
                             std::uint64_t utterance_base, double duration_s) {
  SpeakerSet set;
  set.utterances.resize(preset.speakers);
  for (std::size_t s = 0; s < preset.speakers; ++s) {
    for (std::size_t u = 0; u < per_speaker; ++u) {
      const auto utt = synth_speaker(speaker_seed(preset, s), duration_s, utterance_base + u);
      set.utterances[s].push_back(extract_features(utt.samples));
    }
  }
  return set;
}

double utterance_seconds(const EmbedderRecipe& recipe, std::size_t crop_frames) {
  return std::max(recipe.duration_s, double(crop_frames * kHop) / kSampleRate + 0.2);
}

TrainedEmbedder train_embedder_recipe(const DatasetPreset& preset, const EmbedderConfig& cfg,
                                      std::uint64_t seed, const EmbedderRecipe& recipe,
                                      const TrainProgress& progress) {
  const double dur = utterance_seconds(recipe, cfg.crop_frames);
  const auto train = synth_speaker_set(preset, recipe.train_utterances, recipe.train_utterance_base, dur);
  const auto held = synth_speaker_set(preset, recipe.heldout_utterances, recipe.heldout_utterance_base, dur);
  return train_embedder(train, held, cfg, seed, progress);
}

std::vector<SpeakerEmbedding> enroll_pool(const Embedder& embedder, const DatasetPreset& preset) {
  std::vector<SpeakerEmbedding> out;
  out.reserve(preset.speakers);
  for (std::size_t s = 0; s < preset.speakers; ++s) {
    out.push_back(embedder.enroll_audio(enrollment_audio(preset, s)));
  }
  return out;
}

EnhancerDataset synth_enhancer_dataset(const DatasetPreset& preset, std::uint64_t seed,
                                       std::size_t count,
                                       std::vector<SpeakerEmbedding> speaker_embeddings) {
  if (speaker_embeddings.size() != preset.speakers) {
    throw InputError("synth_enhancer_dataset: need one embedding per pool speaker");
  }
  EnhancerDataset ds;
  ds.speaker_embeddings = std::move(speaker_embeddings);
  ds.samples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto ex = synth_example(preset, seed, i);
    ds.samples.push_back({std::move(ex.features), std::move(ex.targets), ex.target_speaker});
  }
  return ds;
}

std::vector<float> vad_track(std::span<const EnhancerOutputs> outputs) {
  std::vector<float> v;
  v.reserve(outputs.size());
  for (const auto& o : outputs) v.push_back(o.vad);
  return v;
}

EvalRecord evaluate_output(std::size_t index, std::span<const float> mixture,
                           std::span<const float> clean_target, std::span<const float> interferer,
                           std::span<const float> output, std::span<const float> vad,
                           std::span<const int> vad_labels, const Embedder& embedder) {
  EvalRecord r;
  r.index = index;
  r.si_snr_in = si_snr(mixture, clean_target);
  r.si_snr_out = si_snr_aligned(output, clean_target);
  const auto probe = cosine_probe(output, clean_target, interferer, embedder);
  r.cos_target = probe.cos_target;
  r.cos_interf = probe.cos_interference;
  if (vad.empty()) {
    r.vad_acc = 1.0;
  } else {
    const std::size_t n = std::min(vad.size(), vad_labels.size());
    r.vad_acc = vad_accuracy(vad.first(n), vad_labels.first(n)).accuracy;
  }
  return r;
}

}  // namespace ppn
