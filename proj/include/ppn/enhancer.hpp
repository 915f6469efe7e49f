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
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ppn/comb.hpp"
#include "ppn/embedder.hpp"
#include "ppn/features.hpp"
#include "ppn/layers.hpp"
#include "ppn/targets.hpp"

namespace ppn {

/// Weight of the VAD term in the training loss.
inline constexpr double kVadLossWeight = 1.0;
/// Exponent applied to gains before the squared error.
inline constexpr double kGainExponent = 0.5;

struct EnhancerConfig {
  std::string preset = "ppn512";
  std::size_t dense_units = 128;
  std::size_t conv1_channels = 512;
  std::size_t conv1_kernel = 5;
  std::size_t conv2_channels = 512;
  std::size_t conv2_kernel = 3;
  std::size_t gru_layers = 4;
  std::size_t gru_units = 512;
  std::size_t embedding_dim = 128;
  std::size_t lookahead_frames = kLookaheadFrames;

  std::size_t steps = 20000;
  std::size_t batch_size = 8;
  std::size_t crop_frames = 300;
  double learning_rate = 1e-3;

  /// "ppn512", "ppn1024" or "toy".
  static EnhancerConfig preset_named(const std::string& name);
  static EnhancerConfig from_text(const std::string& text);
  std::string to_text() const;
  void validate() const;
};

/// Sequence outputs, one row per frame.
template <typename T>
struct EnhancerTrace {
  Tensor2D<T> gains;      // [frames x 32]
  Tensor2D<T> strengths;  // [frames x 32]
  Tensor2D<T> vad;        // [frames x 1]
};

/// norm -> dense -> conv -> conv -> [., embedding] -> GRU stack -> heads.
///
/// Gains read the last GRU; strengths read the last GRU together with the
/// gains; the VAD reads the first GRU.
template <typename T>
class EnhancerNet {
 public:
  struct Cache {
    LayerCache<T> norm, dense, conv1, conv2;
    std::vector<LayerCache<T>> gru;
    LayerCache<T> gains, strengths, vad;
    Tensor2D<T> last_hidden, first_hidden, gains_out;
    std::size_t frames = 0;
  };

  /// Streaming state for one stream.
  struct Session {
    std::vector<StepState<T>> states;  // norm, dense, conv1, conv2, grus...
    std::vector<T> a, b, cat, hidden_first, hidden, head_in;
    std::vector<T> embedding;
  };

  explicit EnhancerNet(const EnhancerConfig& cfg);

  EnhancerTrace<T> forward(const Tensor2D<T>& features, std::span<const T> embedding,
                           Cache& cache) const;
  /// Gradients with respect to the three head outputs.
  void backward(const Tensor2D<T>& d_gains, const Tensor2D<T>& d_strengths,
                const Tensor2D<T>& d_vad, Cache& cache);

  Session make_session(std::span<const float> embedding) const;
  /// One frame; allocation-free.
  void step(std::span<const T> features, Session& session, EnhancerOutputs& out) const;

  std::vector<LayerParams<T>*> layers();
  std::vector<const LayerParams<T>*> layers() const;
  Affine<T>& input_norm() { return norm_; }
  std::size_t param_count() const;
  const EnhancerConfig& config() const { return cfg_; }

 private:
  EnhancerConfig cfg_;
  Affine<T> norm_;
  Dense<T> dense_;
  Conv1d<T> conv1_, conv2_;
  std::vector<Gru<T>> grus_;
  Dense<T> gains_head_, strengths_head_, vad_head_;
};

/// Float inference model with its configuration.
class EnhancerModel {
 public:
  explicit EnhancerModel(const EnhancerConfig& cfg);
  EnhancerModel(const EnhancerConfig& cfg, const EnhancerNet<double>& trained);

  static EnhancerModel load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  const EnhancerConfig& config() const { return net_.config(); }
  std::size_t param_count() const { return net_.param_count(); }
  EnhancerNet<float>& net() { return net_; }
  const EnhancerNet<float>& net() const { return net_; }

  /// Seeds Glorot weights (used for benchmarks and untrained runs).
  void randomize(std::uint64_t seed);

  /// Whole-sequence outputs. InputError when the embedding dimension differs.
  std::vector<EnhancerOutputs> run(std::span<const FrameFeatures> frames,
                                   const SpeakerEmbedding& embedding) const;

 private:
  EnhancerNet<float> net_;
};

// ---------------------------------------------------------------------------
// Losses

struct GainStrengthLoss {
  double loss = 0;
  BandVector d_gains{};
  BandVector d_strengths{};
};

/// sum_b (g_b^0.5 - gh_b^0.5)^2 + sum_b (r_b - rh_b)^2 and its gradient with
/// respect to the predictions.
GainStrengthLoss gain_strength_loss(const BandVector& pred_gains, const BandVector& pred_strengths,
                                    const BandVector& target_gains,
                                    const BandVector& target_strengths);

struct VadLoss {
  double loss = 0;
  std::vector<double> d_pred;
};

/// Binary cross-entropy averaged over frames, predictions clamped to
/// [1e-7, 1 - 1e-7].
VadLoss vad_loss(std::span<const double> pred, std::span<const int> labels);

// ---------------------------------------------------------------------------
// Training

struct EnhancerSample {
  std::vector<FrameFeatures> features;  // of the mixture
  SupervisionTargets targets;
  std::size_t speaker = 0;              // index into the embedding table
};

struct EnhancerDataset {
  std::vector<EnhancerSample> samples;
  std::vector<SpeakerEmbedding> speaker_embeddings;
};

struct EnhancerTrainLog {
  std::vector<double> losses;  // total per step
  std::vector<double> gain_strength;
  std::vector<double> vad;
};

struct TrainedEnhancer {
  EnhancerModel model;
  EnhancerTrainLog log;
};

using EnhancerProgress = std::function<void(std::size_t step, double loss)>;

/// Minimizes the mean per-frame gain/strength loss plus the weighted VAD
/// loss. Model output at step s is scored against the targets of frame
/// s - lookahead_frames.
TrainedEnhancer train_enhancer(const EnhancerDataset& data, const EnhancerConfig& cfg,
                               std::uint64_t seed, const EnhancerProgress& progress = {});

}  // namespace ppn
