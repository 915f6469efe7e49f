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

#include "ppn/enhancer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "ppn/adam.hpp"
#include "ppn/config_text.hpp"
#include "ppn/error.hpp"
#include "ppn/weights_io.hpp"

namespace ppn {

namespace {

constexpr double kBceClamp = 1e-7;
constexpr double kSqrtFloor = 1e-12;

std::size_t as_size(const KeyValues& kv, const char* key) {
  const long long v = kv.integer(key);
  if (v < 0) throw ConfigError(std::string("config key '") + key + "' must be non-negative");
  return std::size_t(v);
}

template <typename T>
void copy_row(std::span<const T> src, std::span<T> dst, std::size_t offset = 0) {
  std::copy(src.begin(), src.end(), dst.begin() + long(offset));
}

}  // namespace

EnhancerConfig EnhancerConfig::preset_named(const std::string& name) {
  EnhancerConfig c;
  c.preset = name;
  if (name == "ppn512") return c;
  if (name == "ppn1024") {
    c.gru_units = 1024;
    return c;
  }
  if (name == "toy") {
    c.dense_units = 64;
    c.conv1_channels = 64;
    c.conv2_channels = 64;
    c.gru_layers = 2;
    c.gru_units = 64;
    c.embedding_dim = 32;
    c.steps = 2000;
    c.batch_size = 4;
    c.crop_frames = 200;
    c.learning_rate = 2e-3;
    return c;
  }
  throw ConfigError("unknown preset '" + name + "' (expected ppn512, ppn1024 or toy)");
}

std::string EnhancerConfig::to_text() const {
  KeyValues kv;
  kv.set("preset", preset);
  kv.set("dense_units", std::to_string(dense_units));
  kv.set("conv1_channels", std::to_string(conv1_channels));
  kv.set("conv1_kernel", std::to_string(conv1_kernel));
  kv.set("conv2_channels", std::to_string(conv2_channels));
  kv.set("conv2_kernel", std::to_string(conv2_kernel));
  kv.set("gru_layers", std::to_string(gru_layers));
  kv.set("gru_units", std::to_string(gru_units));
  kv.set("embedding_dim", std::to_string(embedding_dim));
  kv.set("lookahead_frames", std::to_string(lookahead_frames));
  kv.set("steps", std::to_string(steps));
  kv.set("batch_size", std::to_string(batch_size));
  kv.set("crop_frames", std::to_string(crop_frames));
  char lr[32];
  std::snprintf(lr, sizeof lr, "%.17g", learning_rate);
  kv.set("learning_rate", lr);
  return kv.to_text();
}

EnhancerConfig EnhancerConfig::from_text(const std::string& text) {
  const auto kv = KeyValues::parse(text);
  kv.reject_unknown({"preset", "dense_units", "conv1_channels", "conv1_kernel", "conv2_channels",
                     "conv2_kernel", "gru_layers", "gru_units", "embedding_dim",
                     "lookahead_frames", "steps", "batch_size", "crop_frames", "learning_rate"});
  EnhancerConfig c = preset_named(kv.has("preset") ? kv.str("preset") : "ppn512");
  if (kv.has("dense_units")) c.dense_units = as_size(kv, "dense_units");
  if (kv.has("conv1_channels")) c.conv1_channels = as_size(kv, "conv1_channels");
  if (kv.has("conv1_kernel")) c.conv1_kernel = as_size(kv, "conv1_kernel");
  if (kv.has("conv2_channels")) c.conv2_channels = as_size(kv, "conv2_channels");
  if (kv.has("conv2_kernel")) c.conv2_kernel = as_size(kv, "conv2_kernel");
  if (kv.has("gru_layers")) c.gru_layers = as_size(kv, "gru_layers");
  if (kv.has("gru_units")) c.gru_units = as_size(kv, "gru_units");
  if (kv.has("embedding_dim")) c.embedding_dim = as_size(kv, "embedding_dim");
  if (kv.has("lookahead_frames")) c.lookahead_frames = as_size(kv, "lookahead_frames");
  if (kv.has("steps")) c.steps = as_size(kv, "steps");
  if (kv.has("batch_size")) c.batch_size = as_size(kv, "batch_size");
  if (kv.has("crop_frames")) c.crop_frames = as_size(kv, "crop_frames");
  if (kv.has("learning_rate")) c.learning_rate = kv.number("learning_rate");
  c.validate();
  return c;
}

void EnhancerConfig::validate() const {
  if (dense_units == 0 || conv1_channels == 0 || conv2_channels == 0 || gru_units == 0 ||
      embedding_dim == 0 || conv1_kernel == 0 || conv2_kernel == 0) {
    throw ConfigError("enhancer widths must be positive");
  }
  if (gru_layers == 0) throw ConfigError("enhancer needs at least one GRU layer");
  if (lookahead_frames > 10) throw ConfigError("lookahead_frames must be at most 10");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (crop_frames <= lookahead_frames) throw ConfigError("crop_frames must exceed the look-ahead");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
}

// ---------------------------------------------------------------------------

template <typename T>
EnhancerNet<T>::EnhancerNet(const EnhancerConfig& c)
    : cfg_(c),
      norm_(kFeatureDim),
      dense_(kFeatureDim, c.dense_units, Activation::kTanh),
      conv1_(c.dense_units, c.conv1_channels, c.conv1_kernel, Activation::kTanh),
      conv2_(c.conv1_channels, c.conv2_channels, c.conv2_kernel, Activation::kTanh),
      gains_head_(c.gru_units, kBands, Activation::kSigmoid),
      strengths_head_(c.gru_units + kBands, kBands, Activation::kSigmoid),
      vad_head_(c.gru_units, 1, Activation::kSigmoid) {
  c.validate();
  grus_.reserve(c.gru_layers);
  grus_.emplace_back(c.conv2_channels + c.embedding_dim, c.gru_units);
  for (std::size_t i = 1; i < c.gru_layers; ++i) grus_.emplace_back(c.gru_units, c.gru_units);
}

template <typename T>
EnhancerTrace<T> EnhancerNet<T>::forward(const Tensor2D<T>& x, std::span<const T> embedding,
                                         Cache& cache) const {
  if (x.cols != kFeatureDim) throw InputError("enhancer expects 68-dim features");
  if (embedding.size() != cfg_.embedding_dim) {
    throw InputError("embedding dimension " + std::to_string(embedding.size()) +
                     " does not match the model's " + std::to_string(cfg_.embedding_dim));
  }
  const std::size_t frames = x.rows;
  cache.frames = frames;
  auto h = norm_.forward(x, cache.norm);
  h = dense_.forward(h, cache.dense);
  h = conv1_.forward(h, cache.conv1);
  h = conv2_.forward(h, cache.conv2);

  Tensor2D<T> cat(frames, cfg_.conv2_channels + cfg_.embedding_dim);
  for (std::size_t t = 0; t < frames; ++t) {
    copy_row<T>(h.row(t), cat.row(t));
    copy_row<T>(embedding, cat.row(t), cfg_.conv2_channels);
  }
  cache.gru.resize(grus_.size());
  h = grus_[0].forward(cat, cache.gru[0]);
  cache.first_hidden = h;
  for (std::size_t i = 1; i < grus_.size(); ++i) h = grus_[i].forward(h, cache.gru[i]);
  cache.last_hidden = h;

  EnhancerTrace<T> out;
  out.gains = gains_head_.forward(h, cache.gains);
  Tensor2D<T> joint(frames, cfg_.gru_units + kBands);
  for (std::size_t t = 0; t < frames; ++t) {
    copy_row<T>(h.row(t), joint.row(t));
    copy_row<T>(out.gains.row(t), joint.row(t), cfg_.gru_units);
  }
  out.strengths = strengths_head_.forward(joint, cache.strengths);
  out.vad = vad_head_.forward(cache.first_hidden, cache.vad);
  return out;
}

template <typename T>
void EnhancerNet<T>::backward(const Tensor2D<T>& d_gains, const Tensor2D<T>& d_strengths,
                              const Tensor2D<T>& d_vad, Cache& cache) {
  if (cache.frames == 0) throw StateError("enhancer backward without a forward pass");
  const std::size_t frames = cache.frames;
  const auto d_joint = strengths_head_.backward(d_strengths, cache.strengths);
  Tensor2D<T> dg = d_gains;
  Tensor2D<T> dh(frames, cfg_.gru_units);
  for (std::size_t t = 0; t < frames; ++t) {
    const auto row = d_joint.row(t);
    for (std::size_t j = 0; j < cfg_.gru_units; ++j) dh(t, j) = row[j];
    for (std::size_t b = 0; b < kBands; ++b) dg(t, b) += row[cfg_.gru_units + b];
  }
  const auto dh_gains = gains_head_.backward(dg, cache.gains);
  for (std::size_t i = 0; i < dh.size(); ++i) dh.data[i] += dh_gains.data[i];

  const auto dh_vad = vad_head_.backward(d_vad, cache.vad);
  for (std::size_t i = grus_.size(); i-- > 1;) dh = grus_[i].backward(dh, cache.gru[i]);
  for (std::size_t i = 0; i < dh.size(); ++i) dh.data[i] += dh_vad.data[i];
  const auto d_cat = grus_[0].backward(dh, cache.gru[0]);

  Tensor2D<T> d_conv(frames, cfg_.conv2_channels);
  for (std::size_t t = 0; t < frames; ++t) {
    const auto row = d_cat.row(t);
    std::copy_n(row.begin(), cfg_.conv2_channels, d_conv.row(t).begin());
  }
  auto d = conv2_.backward(d_conv, cache.conv2);
  d = conv1_.backward(d, cache.conv1);
  dense_.backward(d, cache.dense);
}

template <typename T>
typename EnhancerNet<T>::Session EnhancerNet<T>::make_session(std::span<const float> embedding) const {
  if (embedding.size() != cfg_.embedding_dim) {
    throw InputError("embedding dimension " + std::to_string(embedding.size()) +
                     " does not match the model's " + std::to_string(cfg_.embedding_dim));
  }
  Session s;
  s.states.push_back(norm_.make_state());
  s.states.push_back(dense_.make_state());
  s.states.push_back(conv1_.make_state());
  s.states.push_back(conv2_.make_state());
  for (const auto& g : grus_) s.states.push_back(g.make_state());
  s.states.push_back(gains_head_.make_state());
  s.states.push_back(strengths_head_.make_state());
  s.states.push_back(vad_head_.make_state());
  const std::size_t wide = std::max({std::size_t(kFeatureDim), cfg_.dense_units,
                                     cfg_.conv1_channels, cfg_.conv2_channels, cfg_.gru_units});
  s.a.assign(wide, T(0));
  s.b.assign(wide, T(0));
  s.cat.assign(cfg_.conv2_channels + cfg_.embedding_dim, T(0));
  s.hidden_first.assign(cfg_.gru_units, T(0));
  s.hidden.assign(cfg_.gru_units, T(0));
  s.head_in.assign(cfg_.gru_units + kBands, T(0));
  s.embedding.assign(embedding.begin(), embedding.end());
  std::copy(embedding.begin(), embedding.end(), s.cat.begin() + long(cfg_.conv2_channels));
  return s;
}

template <typename T>
void EnhancerNet<T>::step(std::span<const T> x, Session& s, EnhancerOutputs& out) const {
  std::span<T> a(s.a), b(s.b);
  norm_.step(x, a, s.states[0]);
  dense_.step(a, b, s.states[1]);
  conv1_.step(b, a, s.states[2]);
  conv2_.step(a, std::span<T>(s.cat).first(cfg_.conv2_channels), s.states[3]);
  grus_[0].step(s.cat, s.hidden_first, s.states[4]);
  std::span<const T> h = s.hidden_first;
  for (std::size_t i = 1; i < grus_.size(); ++i) {
    std::span<T> dst = (i % 2 == 1) ? std::span<T>(s.hidden) : std::span<T>(s.a).first(cfg_.gru_units);
    grus_[i].step(h, dst, s.states[4 + i]);
    h = dst;
  }
  const std::size_t head = 4 + grus_.size();
  std::copy(h.begin(), h.end(), s.head_in.begin());
  std::span<T> g = std::span<T>(s.head_in).subspan(cfg_.gru_units, kBands);
  gains_head_.step(h, g, s.states[head]);
  std::span<T> r = std::span<T>(s.b).first(kBands);
  strengths_head_.step(s.head_in, r, s.states[head + 1]);
  T v = 0;
  vad_head_.step(s.hidden_first, std::span<T>(&v, 1), s.states[head + 2]);
  for (std::size_t k = 0; k < kBands; ++k) {
    out.gains[k] = float(g[k]);
    out.strengths[k] = float(r[k]);
  }
  out.vad = float(v);
  out.clamp();
}

template <typename T>
std::vector<LayerParams<T>*> EnhancerNet<T>::layers() {
  std::vector<LayerParams<T>*> v{&norm_.params(), &dense_.params(), &conv1_.params(),
                                 &conv2_.params()};
  for (auto& g : grus_) v.push_back(&g.params());
  v.push_back(&gains_head_.params());
  v.push_back(&strengths_head_.params());
  v.push_back(&vad_head_.params());
  return v;
}

template <typename T>
std::vector<const LayerParams<T>*> EnhancerNet<T>::layers() const {
  std::vector<const LayerParams<T>*> v{&norm_.params(), &dense_.params(), &conv1_.params(),
                                       &conv2_.params()};
  for (const auto& g : grus_) v.push_back(&g.params());
  v.push_back(&gains_head_.params());
  v.push_back(&strengths_head_.params());
  v.push_back(&vad_head_.params());
  return v;
}

template <typename T>
std::size_t EnhancerNet<T>::param_count() const {
  std::size_t n = 0;
  for (const auto* l : layers()) n += l->param_count();
  return n;
}

template class EnhancerNet<float>;
template class EnhancerNet<double>;

// ---------------------------------------------------------------------------

EnhancerModel::EnhancerModel(const EnhancerConfig& cfg) : net_(cfg) {}

EnhancerModel::EnhancerModel(const EnhancerConfig& cfg, const EnhancerNet<double>& trained)
    : net_(cfg) {
  auto dst = net_.layers();
  const auto src = trained.layers();
  for (std::size_t i = 0; i < dst.size(); ++i) copy_values(*dst[i], *src[i]);
}

EnhancerModel EnhancerModel::load(const std::filesystem::path& path) {
  const auto f = load_weights(path);
  if (f.kind != ModelKind::kEnhancer) throw DataError(path.string() + ": not an enhancer weight file");
  EnhancerModel m(EnhancerConfig::from_text(f.config));
  unpack_layers(f, m.net_.layers());
  return m;
}

void EnhancerModel::save(const std::filesystem::path& path) const {
  save_weights(path, pack_layers(ModelKind::kEnhancer, config().to_text(), net_.layers()));
}

void EnhancerModel::randomize(std::uint64_t seed) {
  Rng rng(seed);
  for (auto* l : net_.layers()) init_glorot(*l, rng);
}

std::vector<EnhancerOutputs> EnhancerModel::run(std::span<const FrameFeatures> frames,
                                                const SpeakerEmbedding& embedding) const {
  auto session = net_.make_session(embedding.values);
  std::vector<EnhancerOutputs> out(frames.size());
  std::array<float, kFeatureDim> x{};
  for (std::size_t t = 0; t < frames.size(); ++t) {
    frames[t].write_to(x);
    net_.step(x, session, out[t]);
  }
  return out;
}

// ---------------------------------------------------------------------------

GainStrengthLoss gain_strength_loss(const BandVector& pred_gains, const BandVector& pred_strengths,
                                    const BandVector& target_gains,
                                    const BandVector& target_strengths) {
  GainStrengthLoss r;
  for (std::size_t b = 0; b < kBands; ++b) {
    const double gh = std::max(double(pred_gains[b]), 0.0);
    const double diff = std::pow(double(target_gains[b]), kGainExponent) - std::pow(gh, kGainExponent);
    r.loss += diff * diff;
    r.d_gains[b] = float(-2.0 * diff * kGainExponent *
                         std::pow(std::max(gh, kSqrtFloor), kGainExponent - 1.0));
    const double dr = double(target_strengths[b]) - double(pred_strengths[b]);
    r.loss += dr * dr;
    r.d_strengths[b] = float(-2.0 * dr);
  }
  return r;
}

VadLoss vad_loss(std::span<const double> pred, std::span<const int> labels) {
  if (pred.size() != labels.size()) throw InputError("vad_loss: size mismatch");
  VadLoss r;
  r.d_pred.assign(pred.size(), 0.0);
  if (pred.empty()) return r;
  const double n = double(pred.size());
  for (std::size_t t = 0; t < pred.size(); ++t) {
    const double p = std::clamp(pred[t], kBceClamp, 1.0 - kBceClamp);
    const double y = labels[t] ? 1.0 : 0.0;
    r.loss -= (y * std::log(p) + (1.0 - y) * std::log(1.0 - p)) / n;
    if (pred[t] > kBceClamp && pred[t] < 1.0 - kBceClamp) {
      r.d_pred[t] = (-y / p + (1.0 - y) / (1.0 - p)) / n;
    }
  }
  return r;
}

// ---------------------------------------------------------------------------

namespace {

void fit_enhancer_norm(Affine<double>& norm, const EnhancerDataset& data) {
  std::vector<double> sum(kFeatureDim, 0.0), sq(kFeatureDim, 0.0);
  double count = 0;
  for (const auto& s : data.samples)
    for (const auto& f : s.features) {
      const auto v = f.flat();
      for (std::size_t d = 0; d < kFeatureDim; ++d) {
        sum[d] += v[d];
        sq[d] += double(v[d]) * v[d];
      }
      count += 1;
    }
  auto& p = norm.params();
  for (std::size_t d = 0; d < kFeatureDim; ++d) {
    const double mean = sum[d] / count;
    const double var = std::max(0.0, sq[d] / count - mean * mean);
    const double inv = 1.0 / std::max(std::sqrt(var), 1e-3);
    p.tensors[0].value[d] = inv;
    p.tensors[1].value[d] = -mean * inv;
  }
}

}  // namespace

TrainedEnhancer train_enhancer(const EnhancerDataset& data, const EnhancerConfig& cfg,
                               std::uint64_t seed, const EnhancerProgress& progress) {
  cfg.validate();
  if (data.samples.empty()) throw InputError("enhancer training needs at least one example");
  const std::size_t la = cfg.lookahead_frames;
  for (const auto& s : data.samples) {
    if (s.features.size() != s.targets.frames() || s.targets.vad.size() != s.targets.frames()) {
      throw InputError("enhancer sample: features and targets differ in length");
    }
    if (s.features.size() < cfg.crop_frames) {
      throw InputError("enhancer sample shorter than crop_frames (" +
                       std::to_string(s.features.size()) + " < " + std::to_string(cfg.crop_frames) + ")");
    }
    if (s.speaker >= data.speaker_embeddings.size()) throw InputError("enhancer sample: unknown speaker");
  }
  for (const auto& e : data.speaker_embeddings) {
    if (e.values.size() != cfg.embedding_dim) {
      throw InputError("embedding dimension " + std::to_string(e.values.size()) +
                       " does not match the model's " + std::to_string(cfg.embedding_dim));
    }
  }

  EnhancerNet<double> net(cfg);
  Rng init_rng(mix_seed(seed, 1));
  for (auto* l : net.layers()) init_glorot(*l, init_rng);
  fit_enhancer_norm(net.input_norm(), data);

  AdamConfig ac;
  ac.learning_rate = cfg.learning_rate;
  Adam opt(net.layers(), ac);
  Rng rng(mix_seed(seed, 2));

  const std::size_t crop = cfg.crop_frames;
  const double supervised = double(cfg.batch_size * (crop - la));
  EnhancerTrainLog log;
  EnhancerNet<double>::Cache cache;
  Tensor2D<double> dg(crop, kBands), dr(crop, kBands), dv(crop, 1);
  std::vector<double> vad_pred(crop - la);
  std::vector<int> vad_lab(crop - la);

  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    opt.zero_grad();
    double gs_total = 0, vad_total = 0;
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      const auto& s = data.samples[rng.below(data.samples.size())];
      const std::size_t offset = rng.below(s.features.size() - crop + 1);
      const auto x = feature_matrix<double>(std::span<const FrameFeatures>(s.features).subspan(offset, crop));
      const auto& ev = data.speaker_embeddings[s.speaker].values;
      const std::vector<double> emb(ev.begin(), ev.end());
      const auto y = net.forward(x, emb, cache);

      dg.zero();
      dr.zero();
      dv.zero();
      for (std::size_t t = la; t < crop; ++t) {
        const std::size_t f = offset + t - la;
        BandVector pg{}, pr{};
        for (std::size_t k = 0; k < kBands; ++k) {
          pg[k] = float(y.gains(t, k));
          pr[k] = float(y.strengths(t, k));
        }
        const auto l = gain_strength_loss(pg, pr, s.targets.gains[f], s.targets.strengths[f]);
        gs_total += l.loss;
        // Recomputed in double so the gradient does not inherit float rounding.
        for (std::size_t k = 0; k < kBands; ++k) {
          const double gh = std::max(y.gains(t, k), kSqrtFloor);
          const double diff = std::sqrt(double(s.targets.gains[f][k])) - std::sqrt(gh);
          dg(t, k) = -diff / std::sqrt(gh) / supervised;
          dr(t, k) = -2.0 * (double(s.targets.strengths[f][k]) - y.strengths(t, k)) / supervised;
        }
        vad_pred[t - la] = y.vad(t, 0);
        vad_lab[t - la] = s.targets.vad[f];
      }
      const auto vl = vad_loss(vad_pred, vad_lab);
      vad_total += vl.loss;
      const double vscale = kVadLossWeight / double(cfg.batch_size);
      for (std::size_t t = la; t < crop; ++t) dv(t, 0) = vl.d_pred[t - la] * vscale;
      net.backward(dg, dr, dv, cache);
    }
    opt.step();
    const double gs = gs_total / supervised;
    const double vad = vad_total / double(cfg.batch_size);
    const double total = gs + kVadLossWeight * vad;
    if (!std::isfinite(total)) throw NumericError("enhancer loss is not finite at step " + std::to_string(step));
    log.losses.push_back(total);
    log.gain_strength.push_back(gs);
    log.vad.push_back(vad);
    if (progress) progress(step, total);
  }
  return {EnhancerModel(cfg, net), std::move(log)};
}

}  // namespace ppn
