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

// Dataset and training recipes shared by the command-line tool and the
// acceptance runner. Everything here is a deterministic function of its
// arguments.

#include <cstdint>
#include <span>
#include <vector>

#include "ppn/data_synth.hpp"
#include "ppn/embedder.hpp"
#include "ppn/enhancer.hpp"
#include "ppn/eval.hpp"

namespace ppn {

struct EmbedderRecipe {
  std::size_t train_utterances = 20;
  std::size_t heldout_utterances = 5;
  std::uint64_t train_utterance_base = 100;
  std::uint64_t heldout_utterance_base = 900;
  double duration_s = 2.2;  // raised to fit the crop when needed
};

/// Feature sequences for `per_speaker` utterances of every pool speaker.
SpeakerSet synth_speaker_set(const DatasetPreset& preset, std::size_t per_speaker,
                             std::uint64_t utterance_base, double duration_s);

/// Utterance length that fits `crop_frames` with a short margin.
double utterance_seconds(const EmbedderRecipe& recipe, std::size_t crop_frames);

TrainedEmbedder train_embedder_recipe(const DatasetPreset& preset, const EmbedderConfig& cfg,
                                      std::uint64_t seed, const EmbedderRecipe& recipe = {},
                                      const TrainProgress& progress = {});

/// Enrollment embedding of every pool speaker.
std::vector<SpeakerEmbedding> enroll_pool(const Embedder& embedder, const DatasetPreset& preset);

/// `count` synthesized mixtures with their features, targets and speaker.
EnhancerDataset synth_enhancer_dataset(const DatasetPreset& preset, std::uint64_t seed,
                                       std::size_t count,
                                       std::vector<SpeakerEmbedding> speaker_embeddings);

/// VAD probabilities aligned with the target frames.
std::vector<float> vad_track(std::span<const EnhancerOutputs> outputs);

/// Scores one enhanced output against its references. `vad` may be empty,
/// in which case the labels themselves stand in for the prediction.
EvalRecord evaluate_output(std::size_t index, std::span<const float> mixture,
                           std::span<const float> clean_target, std::span<const float> interferer,
                           std::span<const float> output, std::span<const float> vad,
                           std::span<const int> vad_labels, const Embedder& embedder);

}  // namespace ppn
