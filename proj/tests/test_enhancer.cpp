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
#include <filesystem>
#include <numeric>

#include "doctest.h"
#include "gradient_suite.hpp"
#include "ppn/data_synth.hpp"
#include "ppn/engine.hpp"
#include "ppn/enhancer.hpp"
#include "ppn/error.hpp"
#include "ppn/metrics.hpp"

using namespace ppn;

namespace {

// Shape sum written out independently of the layer classes.
std::size_t hand_count(const EnhancerConfig& c) {
  const std::size_t f = kFeatureDim, n = c.gru_units;
  std::size_t total = 2 * f;                                              // affine
  total += f * c.dense_units + c.dense_units;                             // dense
  total += c.conv1_kernel * c.dense_units * c.conv1_channels + c.conv1_channels;
  total += c.conv2_kernel * c.conv1_channels * c.conv2_channels + c.conv2_channels;
  total += 3 * n * (c.conv2_channels + c.embedding_dim) + 3 * n * n + 3 * n;
  total += (c.gru_layers - 1) * (3 * n * n * 2 + 3 * n);
  total += n * kBands + kBands;                                           // gains
  total += (n + kBands) * kBands + kBands;                                // strengths
  total += n + 1;                                                         // vad
  return total;
}

Tensor2D<double> random_features(std::size_t frames, Rng& rng) {
  Tensor2D<double> x(frames, kFeatureDim);
  for (auto& v : x.data) v = rng.uniform(-2.0, 2.0);
  return x;
}

SpeakerEmbedding unit_embedding(std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(dim);
  double sq = 0;
  for (auto& x : v) {
    x = float(rng.normal());
    sq += double(x) * x;
  }
  for (auto& x : v) x = float(x / std::sqrt(sq));
  return {v};
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("ppn_test_enh_" + name);
}

EnhancerSample synthetic_sample(std::size_t frames, std::size_t speaker, Rng& rng, bool ones) {
  EnhancerSample s;
  s.speaker = speaker;
  for (std::size_t t = 0; t < frames; ++t) {
    FrameFeatures f;
    for (auto& v : f.band_mag) v = float(rng.uniform(-6.0, 0.0));
    for (auto& v : f.pitch_coherence) v = float(rng.uniform());
    BandVector g{}, r{};
    for (std::size_t b = 0; b < kBands; ++b) {
      // Learnable relation: gains follow the band magnitude.
      g[b] = ones ? 1.0f : float((f.band_mag[b] + 6.0) / 6.0);
      r[b] = f.pitch_coherence[b];
    }
    s.features.push_back(f);
    s.targets.gains.push_back(g);
    s.targets.strengths.push_back(r);
    s.targets.vad.push_back(f.band_mag[0] > -3.0f ? 1 : 0);
  }
  return s;
}

}  // namespace

TEST_CASE("preset parameter counts") {
  const EnhancerNet<float> p512(EnhancerConfig::preset_named("ppn512"));
  const EnhancerNet<float> p1024(EnhancerConfig::preset_named("ppn1024"));
  CHECK(p512.param_count() == hand_count(p512.config()));
  CHECK(p1024.param_count() == hand_count(p1024.config()));
  CHECK(p512.param_count() >= 6'800'000);
  CHECK(p512.param_count() <= 10'200'000);
  CHECK(p1024.param_count() >= 21'200'000);
  CHECK(p1024.param_count() <= 31'800'000);

  auto toy = EnhancerConfig::preset_named("toy");
  toy.gru_units = 32;
  CHECK(EnhancerNet<double>(toy).param_count() == hand_count(toy));
  toy.gru_layers = 3;
  CHECK(EnhancerNet<double>(toy).param_count() == hand_count(toy));
}

TEST_CASE("enhancer config text round trip and validation") {
  auto c = EnhancerConfig::preset_named("toy");
  c.steps = 123;
  c.learning_rate = 3.5e-4;
  const auto back = EnhancerConfig::from_text(c.to_text());
  CHECK(back.to_text() == c.to_text());
  CHECK(back.steps == 123);
  CHECK(back.learning_rate == 3.5e-4);
  CHECK_THROWS_AS(EnhancerConfig::from_text("preset = toy\nwidth = 3\n"), ConfigError);
  CHECK_THROWS_AS(EnhancerConfig::preset_named("ppn2048"), ConfigError);
  CHECK_THROWS_AS(EnhancerConfig::from_text("preset = toy\ngru_layers = 0\n"), ConfigError);
  CHECK_THROWS_AS(EnhancerConfig::from_text("preset = toy\ncrop_frames = 3\n"), ConfigError);
}

TEST_CASE("outputs stay in [0, 1]; zero weights give 0.5") {
  const auto cfg = gradsuite::tiny_enhancer();
  EnhancerNet<double> net(cfg);
  Rng rng(3);
  for (auto* l : net.layers()) gradsuite::randomize(*l, rng, 2.0);
  const std::vector<double> emb = {0.6, 0.0, -0.8};
  EnhancerNet<double>::Cache cache;
  const auto y = net.forward(random_features(40, rng), emb, cache);
  for (const auto* t : {&y.gains, &y.strengths, &y.vad})
    for (double v : t->data) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }

  EnhancerNet<double> zero(cfg);
  const auto z = zero.forward(random_features(5, rng), emb, cache);
  for (const auto* t : {&z.gains, &z.strengths, &z.vad})
    for (double v : t->data) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("output at frame t depends only on features up to t") {
  EnhancerNet<double> net(gradsuite::tiny_enhancer());
  Rng rng(4);
  for (auto* l : net.layers()) gradsuite::randomize(*l, rng);
  const std::vector<double> emb = {1.0, 0.0, 0.0};
  auto x = random_features(20, rng);
  EnhancerNet<double>::Cache cache;
  const auto a = net.forward(x, emb, cache);
  for (std::size_t d = 0; d < kFeatureDim; ++d) x(12, d) += 5.0;
  const auto b = net.forward(x, emb, cache);
  for (std::size_t t = 0; t < 20; ++t) {
    double gap = 0;
    for (std::size_t k = 0; k < kBands; ++k) gap += std::abs(a.gains(t, k) - b.gains(t, k));
    if (t < 12) {
      CHECK(gap == 0.0);
    } else if (t == 12) {
      CHECK(gap > 0.0);
    }
  }
}

TEST_CASE("streaming step matches the sequence forward pass") {
  EnhancerModel model(EnhancerConfig::preset_named("toy"));
  model.randomize(8);
  const auto emb = unit_embedding(32, 1);
  Rng rng(5);
  std::vector<FrameFeatures> frames(30);
  for (auto& f : frames) {
    for (auto& v : f.band_mag) v = float(rng.uniform(-9.0, 0.0));
    for (auto& v : f.pitch_coherence) v = float(rng.uniform());
    for (auto& v : f.general) v = float(rng.uniform(-1.0, 1.0));
  }
  const auto streamed = model.run(frames, emb);
  EnhancerNet<float>::Cache cache;
  const auto seq = model.net().forward(feature_matrix<float>(frames), emb.values, cache);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    for (std::size_t k = 0; k < kBands; ++k) {
      CHECK(streamed[t].gains[k] == doctest::Approx(seq.gains(t, k)).epsilon(1e-5));
      CHECK(streamed[t].strengths[k] == doctest::Approx(seq.strengths(t, k)).epsilon(1e-5));
    }
    CHECK(streamed[t].vad == doctest::Approx(seq.vad(t, 0)).epsilon(1e-5));
  }
}

TEST_CASE("embedding dimension mismatch and conditioning") {
  EnhancerModel model(EnhancerConfig::preset_named("toy"));
  model.randomize(9);
  std::vector<FrameFeatures> frames(10);
  CHECK_THROWS_AS(model.run(frames, unit_embedding(16, 1)), InputError);
  CHECK_THROWS_AS(StreamingEnhancer(&model, unit_embedding(128, 1)), InputError);

  Rng rng(6);
  for (auto& f : frames)
    for (auto& v : f.band_mag) v = float(rng.uniform(-6.0, 0.0));
  const auto a = model.run(frames, unit_embedding(32, 1));
  const auto b = model.run(frames, unit_embedding(32, 2));
  double gap = 0;
  for (std::size_t t = 0; t < frames.size(); ++t)
    for (std::size_t k = 0; k < kBands; ++k) gap += std::abs(a[t].gains[k] - b[t].gains[k]);
  CHECK(gap > 0.0);
}

TEST_CASE("target gains and losses: closed forms") {
  BandVector clean{}, noisy{};
  for (std::size_t b = 0; b < kBands; ++b) clean[b] = noisy[b] = float(b + 1);
  for (float g : compute_target_gains(clean, noisy)) CHECK(g == 1.0f);
  for (float g : compute_target_gains(BandVector{}, noisy)) CHECK(g == 0.0f);
  for (std::size_t b = 0; b < kBands; ++b) noisy[b] = 4.0f * clean[b];
  for (float g : compute_target_gains(clean, noisy)) CHECK(g == doctest::Approx(0.5));

  BandVector g{}, r{};
  for (std::size_t b = 0; b < kBands; ++b) {
    g[b] = float(b) / 40.0f;
    r[b] = 0.3f;
  }
  CHECK(gain_strength_loss(g, r, g, r).loss == 0.0);
  BandVector one = g;
  BandVector pred = g;
  one[5] = 1.0f;
  pred[5] = 0.0f;
  CHECK(gain_strength_loss(pred, r, one, r).loss == doctest::Approx(1.0));
  CHECK(gain_strength_loss(r, g, g, r).loss > 0.0);

  const std::vector<double> half(100, 0.5);
  std::vector<int> labels(100);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = int(i % 3 == 0);
  CHECK(vad_loss(half, labels).loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  std::vector<double> exact(labels.begin(), labels.end());
  CHECK(vad_loss(exact, labels).loss <= 1e-6);
  CHECK_THROWS_AS(vad_loss(half, std::vector<int>(3, 0)), InputError);
}

TEST_CASE("every layer and loss passes the finite-difference check") {
  for (const auto& c : gradsuite::run(2026)) {
    INFO(c.name);
    CHECK(c.max_rel_error < 1e-4);
  }
}

TEST_CASE("enhancer weight files round trip") {
  EnhancerModel model(EnhancerConfig::preset_named("toy"));
  model.randomize(10);
  const auto path = temp_path("model.ppnw");
  model.save(path);
  const auto back = EnhancerModel::load(path);
  CHECK(back.config().to_text() == model.config().to_text());
  const auto a = model.net().layers();
  const auto b = back.net().layers();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t t = 0; t < a[i]->tensors.size(); ++t) CHECK(a[i]->tensors[t].value == b[i]->tensors[t].value);

  save_embedding(path, unit_embedding(32, 3));
  CHECK_THROWS_AS(EnhancerModel::load(path), DataError);
  std::filesystem::remove(path);
}

TEST_CASE("training: errors, degenerate fit, loss reduction, determinism") {
  auto cfg = EnhancerConfig::preset_named("toy");
  cfg.embedding_dim = 3;
  cfg.crop_frames = 40;
  cfg.batch_size = 4;
  CHECK_THROWS_AS(train_enhancer(EnhancerDataset{}, cfg, 1), InputError);

  Rng rng(11);
  EnhancerDataset ones;
  ones.speaker_embeddings = {SpeakerEmbedding{{1.0f, 0.0f, 0.0f}}};
  for (int i = 0; i < 4; ++i) ones.samples.push_back(synthetic_sample(60, 0, rng, true));
  cfg.steps = 300;
  const auto fit = train_enhancer(ones, cfg, 2);
  double mean_gain = 0;
  std::size_t n = 0;
  for (const auto& s : ones.samples)
    for (const auto& y : fit.model.run(s.features, ones.speaker_embeddings[0]))
      for (float g : y.gains) {
        mean_gain += g;
        ++n;
      }
  CHECK(mean_gain / double(n) > 0.95);

  EnhancerDataset data;
  data.speaker_embeddings = {SpeakerEmbedding{{1.0f, 0.0f, 0.0f}}, SpeakerEmbedding{{0.0f, 1.0f, 0.0f}}};
  for (int i = 0; i < 6; ++i) data.samples.push_back(synthetic_sample(80, std::size_t(i % 2), rng, false));
  cfg.steps = 500;
  const auto run = train_enhancer(data, cfg, 3);
  const auto& l = run.log.losses;
  REQUIRE(l.size() == 500);
  const double first = std::accumulate(l.begin(), l.begin() + 10, 0.0) / 10;
  const double last = std::accumulate(l.end() - 10, l.end(), 0.0) / 10;
  CHECK(last < 0.5 * first);

  cfg.steps = 5;
  const auto a = train_enhancer(data, cfg, 9);
  const auto b = train_enhancer(data, cfg, 9);
  CHECK(a.log.losses == b.log.losses);
  const auto la = a.model.net().layers();
  const auto lb = b.model.net().layers();
  for (std::size_t i = 0; i < la.size(); ++i)
    for (std::size_t t = 0; t < la[i]->tensors.size(); ++t) CHECK(la[i]->tensors[t].value == lb[i]->tensors[t].value);
}

TEST_CASE("streaming engine: identity path, latency, chunking") {
  const auto noise = speech_shaped_noise(21, 3 * kSampleRate);
  const auto emb = unit_embedding(32, 4);
  EngineOptions identity;
  identity.identity = true;

  StreamingEnhancer raw(nullptr, emb, identity);
  CHECK(raw.latency_samples() == 1920);
  std::vector<float> out(raw.max_output(noise.size()));
  const std::size_t n = raw.process(noise, out);
  REQUIRE(n == noise.size() / kHop * kHop);
  double err = 0;
  for (std::size_t i = 0; i + 1920 < n; ++i) err = std::max(err, double(std::abs(out[i + 1920] - noise[i])));
  CHECK(err < 1e-4);

  const auto aligned = enhance_signal(nullptr, emb, noise, identity);
  CHECK(aligned.size() == noise.size());
  CHECK(si_snr(aligned, noise) >= 40.0);

  CHECK_THROWS_AS(StreamingEnhancer(nullptr, emb), ConfigError);
  std::vector<float> bad(100, 0.0f);
  bad[7] = std::nanf("");
  std::vector<float> sink(480);
  CHECK_THROWS_AS(raw.process(bad, sink), InputError);

  EnhancerModel model(EnhancerConfig::preset_named("toy"));
  model.randomize(12);
  const auto whole = enhance_signal(&model, emb, noise);
  for (std::size_t chunk : {std::size_t(1), std::size_t(17), std::size_t(480), std::size_t(1000)}) {
    StreamingEnhancer e(&model, emb);
    std::vector<float> got, buf;
    for (std::size_t pos = 0; pos < noise.size(); pos += chunk) {
      const auto piece = std::span<const float>(noise).subspan(pos, std::min(chunk, noise.size() - pos));
      buf.resize(e.max_output(piece.size()));
      const std::size_t w = e.process(piece, buf);
      got.insert(got.end(), buf.begin(), buf.begin() + long(w));
    }
    INFO("chunk " << chunk);
    REQUIRE(got.size() >= whole.size() - 1920);
    bool same = true;
    for (std::size_t i = 0; i + 1920 < got.size(); ++i) same &= got[i + 1920] == whole[i];
    CHECK(same);
  }
}

TEST_CASE("engine outputs equal the model run shifted by the look-ahead") {
  EnhancerModel model(EnhancerConfig::preset_named("toy"));
  model.randomize(13);
  const auto emb = unit_embedding(32, 5);
  const auto audio = synth_speaker(77, 2.0).samples;
  std::vector<EnhancerOutputs> seen;
  enhance_signal(&model, emb, audio, {}, &seen);
  const auto ref = model.run(extract_features(audio), emb);
  REQUIRE(seen.size() + kLookaheadFrames >= ref.size());
  for (std::size_t d = 0; d + kLookaheadFrames < ref.size(); ++d) {
    for (std::size_t k = 0; k < kBands; ++k) CHECK(seen[d].gains[k] == ref[d + kLookaheadFrames].gains[k]);
  }
}
