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
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ppn/features.hpp"
#include "ppn/layers.hpp"

namespace ppn {

/// Shortest sequence the embedder accepts (0.5 s).
inline constexpr std::size_t kMinEmbedFrames = 50;

struct EmbedderConfig {
  std::string preset = "ppn512";
  std::size_t conv_channels = 128;
  std::size_t conv_kernel = 3;
  std::size_t gru_units = 256;
  std::size_t embedding_dim = 128;
  std::size_t crop_frames = 600;  // training crop and enrollment segment

  std::size_t speakers_per_batch = 8;
  std::size_t utterances_per_speaker = 4;
  std::size_t steps = 2000;
  std::size_t eval_every = 100;
  double learning_rate = 1e-3;

  /// "ppn512" and "ppn1024" share the full-size embedder; "toy" is the
  /// desk-scale variant.
  static EmbedderConfig preset_named(const std::string& name);
  static EmbedderConfig from_text(const std::string& text);
  std::string to_text() const;
  void validate() const;
};

/// Unit-norm speaker vector.
struct SpeakerEmbedding {
  std::vector<float> values;
  double norm() const;
};

void save_embedding(const std::filesystem::path& path, const SpeakerEmbedding& e);
/// DataError when the file is not an embedding record or its stored norm
/// disagrees with the values.
SpeakerEmbedding load_embedding(const std::filesystem::path& path);

double cosine(std::span<const float> a, std::span<const float> b);

/// norm -> conv -> conv -> GRU -> GRU -> last-frame projection.
template <typename T>
class EmbedderNet {
 public:
  struct Cache {
    std::array<LayerCache<T>, 5> seq;
    LayerCache<T> head;
    std::size_t frames = 0;
  };

  explicit EmbedderNet(const EmbedderConfig& cfg);

  /// Unnormalized projection of the final frame.
  std::vector<T> forward(const Tensor2D<T>& features, Cache& cache) const;
  /// Accumulates gradients given d loss / d projection.
  void backward(std::span<const T> d_projection, Cache& cache);

  std::vector<LayerParams<T>*> layers();
  std::vector<const LayerParams<T>*> layers() const;
  Affine<T>& input_norm() { return norm_; }
  std::size_t param_count() const;

 private:
  Affine<T> norm_;
  Conv1d<T> conv1_, conv2_;
  Gru<T> gru1_, gru2_;
  Dense<T> proj_;
};

/// Packs feature frames as a [frames x 68] tensor.
template <typename T>
Tensor2D<T> feature_matrix(std::span<const FrameFeatures> frames);

/// Float inference wrapper around a trained network.
class Embedder {
 public:
  explicit Embedder(const EmbedderConfig& cfg);
  Embedder(const EmbedderConfig& cfg, const EmbedderNet<double>& trained);

  static Embedder load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  const EmbedderConfig& config() const { return cfg_; }
  std::size_t dim() const { return cfg_.embedding_dim; }
  EmbedderNet<float>& net() { return net_; }

  /// InputError below kMinEmbedFrames.
  SpeakerEmbedding embed(std::span<const FrameFeatures> frames) const;
  SpeakerEmbedding embed_audio(std::span<const float> audio) const;
  /// Averages the embeddings of non-overlapping crop_frames segments and
  /// renormalizes. A trailing partial segment counts when it has at least
  /// kMinEmbedFrames frames.
  SpeakerEmbedding enroll(std::span<const FrameFeatures> frames) const;
  SpeakerEmbedding enroll_audio(std::span<const float> audio) const;

 private:
  EmbedderConfig cfg_;
  EmbedderNet<float> net_;
};

struct Ge2eResult {
  double loss = 0;
  std::vector<std::vector<double>> d_embeddings;  // same layout as the input
  double d_scale = 0;
  double d_bias = 0;
};

/// Softmax GE2E loss over N speakers x M utterances, speaker-major rows.
/// s = w cos(e_ji, c_k) + b with leave-one-out centroids for k == j; the
/// loss is summed over all N M utterances. w is clamped to at least 1e-6.
Ge2eResult ge2e_loss(const std::vector<std::vector<double>>& embeddings, std::size_t speakers,
                     std::size_t utterances, double scale, double bias);

/// Feature sequences grouped by speaker.
struct SpeakerSet {
  std::vector<std::vector<std::vector<FrameFeatures>>> utterances;  // [speaker][utterance]
  std::size_t speakers() const { return utterances.size(); }
};

struct EmbedderTrainLog {
  std::vector<double> losses;                        // one per step
  std::vector<std::pair<std::size_t, double>> eer;   // (step, held-out EER); step 0 is untrained
  double scale = 0;
  double bias = 0;
};

struct TrainedEmbedder {
  Embedder model;
  EmbedderTrainLog log;
};

/// Per-dimension standardization fitted to every training frame.
void fit_input_norm(Affine<double>& norm, const SpeakerSet& data);

/// Held-out verification EER: one embedding per utterance (its first
/// crop_frames frames), scored over all pairs.
double verification_eer(const Embedder& model, const SpeakerSet& heldout);

using TrainProgress = std::function<void(std::size_t step, double loss)>;

/// GE2E training on random crops. Needs >= 4 speakers with >= 4 utterances
/// each, all at least crop_frames long.
TrainedEmbedder train_embedder(const SpeakerSet& train, const SpeakerSet& heldout,
                               const EmbedderConfig& cfg, std::uint64_t seed,
                               const TrainProgress& progress = {});

}  // namespace ppn
