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

#include "ppn/embedder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ppn/adam.hpp"
#include "ppn/config_text.hpp"
#include "ppn/error.hpp"
#include "ppn/metrics.hpp"
#include "ppn/weights_io.hpp"

namespace ppn {

namespace {

constexpr double kMinScale = 1e-6;

std::size_t as_size(const KeyValues& kv, const char* key) {
  const long long v = kv.integer(key);
  if (v < 0) throw ConfigError(std::string("config key '") + key + "' must be non-negative");
  return std::size_t(v);
}

template <typename T>
std::vector<T> normalized(std::span<const T> v, double* norm_out = nullptr) {
  double sq = 0;
  for (T x : v) sq += double(x) * double(x);
  const double n = std::sqrt(sq);
  if (!(n > 0.0) || !std::isfinite(n)) throw NumericError("embedding has zero or non-finite norm");
  std::vector<T> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = T(double(v[i]) / n);
  if (norm_out) *norm_out = n;
  return out;
}

}  // namespace

EmbedderConfig EmbedderConfig::preset_named(const std::string& name) {
  EmbedderConfig c;
  c.preset = name;
  if (name == "ppn512" || name == "ppn1024") return c;
  if (name == "toy") {
    c.conv_channels = 64;
    c.gru_units = 64;
    c.embedding_dim = 32;
    c.crop_frames = 200;
    c.speakers_per_batch = 8;
    c.utterances_per_speaker = 4;
    c.steps = 200;
    c.eval_every = 50;
    return c;
  }
  throw ConfigError("unknown preset '" + name + "' (expected ppn512, ppn1024 or toy)");
}

std::string EmbedderConfig::to_text() const {
  KeyValues kv;
  kv.set("preset", preset);
  kv.set("conv_channels", std::to_string(conv_channels));
  kv.set("conv_kernel", std::to_string(conv_kernel));
  kv.set("gru_units", std::to_string(gru_units));
  kv.set("embedding_dim", std::to_string(embedding_dim));
  kv.set("crop_frames", std::to_string(crop_frames));
  kv.set("speakers_per_batch", std::to_string(speakers_per_batch));
  kv.set("utterances_per_speaker", std::to_string(utterances_per_speaker));
  kv.set("steps", std::to_string(steps));
  kv.set("eval_every", std::to_string(eval_every));
  char lr[32];
  std::snprintf(lr, sizeof lr, "%.17g", learning_rate);
  kv.set("learning_rate", lr);
  return kv.to_text();
}

EmbedderConfig EmbedderConfig::from_text(const std::string& text) {
  const auto kv = KeyValues::parse(text);
  kv.reject_unknown({"preset", "conv_channels", "conv_kernel", "gru_units", "embedding_dim",
                     "crop_frames", "speakers_per_batch", "utterances_per_speaker", "steps",
                     "eval_every", "learning_rate"});
  EmbedderConfig c = preset_named(kv.has("preset") ? kv.str("preset") : "ppn512");
  if (kv.has("conv_channels")) c.conv_channels = as_size(kv, "conv_channels");
  if (kv.has("conv_kernel")) c.conv_kernel = as_size(kv, "conv_kernel");
  if (kv.has("gru_units")) c.gru_units = as_size(kv, "gru_units");
  if (kv.has("embedding_dim")) c.embedding_dim = as_size(kv, "embedding_dim");
  if (kv.has("crop_frames")) c.crop_frames = as_size(kv, "crop_frames");
  if (kv.has("speakers_per_batch")) c.speakers_per_batch = as_size(kv, "speakers_per_batch");
  if (kv.has("utterances_per_speaker")) c.utterances_per_speaker = as_size(kv, "utterances_per_speaker");
  if (kv.has("steps")) c.steps = as_size(kv, "steps");
  if (kv.has("eval_every")) c.eval_every = as_size(kv, "eval_every");
  if (kv.has("learning_rate")) c.learning_rate = kv.number("learning_rate");
  c.validate();
  return c;
}

void EmbedderConfig::validate() const {
  if (conv_channels == 0 || gru_units == 0 || embedding_dim == 0 || conv_kernel == 0) {
    throw ConfigError("embedder widths must be positive");
  }
  if (crop_frames < kMinEmbedFrames) {
    throw ConfigError("embedder crop_frames must be at least " + std::to_string(kMinEmbedFrames));
  }
  if (speakers_per_batch < 2 || utterances_per_speaker < 2) {
    throw ConfigError("GE2E batches need at least 2 speakers and 2 utterances each");
  }
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
}

double SpeakerEmbedding::norm() const {
  double sq = 0;
  for (float v : values) sq += double(v) * v;
  return std::sqrt(sq);
}

void save_embedding(const std::filesystem::path& path, const SpeakerEmbedding& e) {
  LayerRecord r;
  r.kind = kVectorRecord;
  r.in = r.out = std::uint32_t(e.values.size());
  r.tensors.push_back(e.values);
  r.tensors.push_back({float(e.norm())});
  WeightFile f;
  f.kind = ModelKind::kEmbedding;
  f.config = "dim = " + std::to_string(e.values.size()) + "\n";
  f.layers.push_back(std::move(r));
  save_weights(path, f);
}

SpeakerEmbedding load_embedding(const std::filesystem::path& path) {
  const auto f = load_weights(path);
  if (f.kind != ModelKind::kEmbedding || f.layers.size() != 1 ||
      f.layers[0].kind != kVectorRecord || f.layers[0].tensors.size() != 2 ||
      f.layers[0].tensors[1].size() != 1) {
    throw DataError(path.string() + ": not a speaker embedding file");
  }
  SpeakerEmbedding e{f.layers[0].tensors[0]};
  const double stored = f.layers[0].tensors[1][0];
  if (e.values.empty() || std::abs(e.norm() - stored) > 1e-5 || std::abs(stored - 1.0) > 1e-4) {
    throw DataError(path.string() + ": embedding norm check failed");
  }
  return e;
}

double cosine(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw InputError("cosine: dimension mismatch");
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += double(a[i]) * b[i];
    aa += double(a[i]) * a[i];
    bb += double(b[i]) * b[i];
  }
  if (aa <= 0 || bb <= 0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

// ---------------------------------------------------------------------------

template <typename T>
EmbedderNet<T>::EmbedderNet(const EmbedderConfig& c)
    : norm_(kFeatureDim),
      conv1_(kFeatureDim, c.conv_channels, c.conv_kernel, Activation::kTanh),
      conv2_(c.conv_channels, c.conv_channels, c.conv_kernel, Activation::kTanh),
      gru1_(c.conv_channels, c.gru_units),
      gru2_(c.gru_units, c.gru_units),
      proj_(c.gru_units, c.embedding_dim, Activation::kLinear) {}

template <typename T>
std::vector<T> EmbedderNet<T>::forward(const Tensor2D<T>& x, Cache& cache) const {
  if (x.cols != kFeatureDim) throw InputError("embedder expects 68-dim features");
  if (x.rows < kMinEmbedFrames) {
    throw InputError("embedder needs at least " + std::to_string(kMinEmbedFrames) +
                     " frames, got " + std::to_string(x.rows));
  }
  cache.frames = x.rows;
  auto h = norm_.forward(x, cache.seq[0]);
  h = conv1_.forward(h, cache.seq[1]);
  h = conv2_.forward(h, cache.seq[2]);
  h = gru1_.forward(h, cache.seq[3]);
  h = gru2_.forward(h, cache.seq[4]);
  Tensor2D<T> last(1, h.cols);
  const auto row = h.row(h.rows - 1);
  std::copy(row.begin(), row.end(), last.data.begin());
  const auto y = proj_.forward(last, cache.head);
  return y.data;
}

template <typename T>
void EmbedderNet<T>::backward(std::span<const T> d_projection, Cache& cache) {
  Tensor2D<T> dy(1, d_projection.size());
  std::copy(d_projection.begin(), d_projection.end(), dy.data.begin());
  const auto d_last = proj_.backward(dy, cache.head);
  Tensor2D<T> d(cache.frames, d_last.cols);
  std::copy(d_last.data.begin(), d_last.data.end(), d.row(cache.frames - 1).begin());
  d = gru2_.backward(d, cache.seq[4]);
  d = gru1_.backward(d, cache.seq[3]);
  d = conv2_.backward(d, cache.seq[2]);
  conv1_.backward(d, cache.seq[1]);
  // The input normalization is fixed; nothing upstream needs its gradient.
}

template <typename T>
std::vector<LayerParams<T>*> EmbedderNet<T>::layers() {
  return {&norm_.params(), &conv1_.params(), &conv2_.params(),
          &gru1_.params(), &gru2_.params(), &proj_.params()};
}

template <typename T>
std::vector<const LayerParams<T>*> EmbedderNet<T>::layers() const {
  return {&norm_.params(), &conv1_.params(), &conv2_.params(),
          &gru1_.params(), &gru2_.params(), &proj_.params()};
}

template <typename T>
std::size_t EmbedderNet<T>::param_count() const {
  std::size_t n = 0;
  for (const auto* l : layers()) n += l->param_count();
  return n;
}

template class EmbedderNet<float>;
template class EmbedderNet<double>;

template <typename T>
Tensor2D<T> feature_matrix(std::span<const FrameFeatures> frames) {
  Tensor2D<T> x(frames.size(), kFeatureDim);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const auto f = frames[t].flat();
    std::copy(f.begin(), f.end(), x.row(t).begin());
  }
  return x;
}

template Tensor2D<float> feature_matrix<float>(std::span<const FrameFeatures>);
template Tensor2D<double> feature_matrix<double>(std::span<const FrameFeatures>);

// ---------------------------------------------------------------------------

Embedder::Embedder(const EmbedderConfig& cfg) : cfg_(cfg), net_(cfg) { cfg_.validate(); }

Embedder::Embedder(const EmbedderConfig& cfg, const EmbedderNet<double>& trained)
    : Embedder(cfg) {
  auto dst = net_.layers();
  const auto src = trained.layers();
  for (std::size_t i = 0; i < dst.size(); ++i) copy_values(*dst[i], *src[i]);
}

Embedder Embedder::load(const std::filesystem::path& path) {
  const auto f = load_weights(path);
  if (f.kind != ModelKind::kEmbedder) throw DataError(path.string() + ": not an embedder weight file");
  Embedder e(EmbedderConfig::from_text(f.config));
  unpack_layers(f, e.net_.layers());
  return e;
}

void Embedder::save(const std::filesystem::path& path) const {
  save_weights(path, pack_layers(ModelKind::kEmbedder, cfg_.to_text(), net_.layers()));
}

SpeakerEmbedding Embedder::embed(std::span<const FrameFeatures> frames) const {
  EmbedderNet<float>::Cache cache;
  const auto raw = net_.forward(feature_matrix<float>(frames), cache);
  return {normalized<float>(raw)};
}

SpeakerEmbedding Embedder::embed_audio(std::span<const float> audio) const {
  const auto feats = extract_features(audio);
  return embed(feats);
}

SpeakerEmbedding Embedder::enroll(std::span<const FrameFeatures> frames) const {
  if (frames.size() < kMinEmbedFrames) {
    throw InputError("enrollment too short: " + std::to_string(frames.size()) + " frames, need " +
                     std::to_string(kMinEmbedFrames));
  }
  std::vector<double> sum(dim(), 0.0);
  for (std::size_t start = 0; start < frames.size(); start += cfg_.crop_frames) {
    const std::size_t n = std::min(cfg_.crop_frames, frames.size() - start);
    if (n < kMinEmbedFrames) break;
    const auto e = embed(frames.subspan(start, n));
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += e.values[i];
  }
  const auto avg = normalized<double>(sum);
  return {std::vector<float>(avg.begin(), avg.end())};
}

SpeakerEmbedding Embedder::enroll_audio(std::span<const float> audio) const {
  const auto feats = extract_features(audio);
  return enroll(feats);
}

// ---------------------------------------------------------------------------

Ge2eResult ge2e_loss(const std::vector<std::vector<double>>& e, std::size_t n_spk,
                     std::size_t n_utt, double scale, double bias) {
  if (n_spk < 2) throw InputError("GE2E needs at least 2 speakers");
  if (n_utt < 2) throw InputError("GE2E needs at least 2 utterances per speaker");
  if (e.size() != n_spk * n_utt) throw InputError("GE2E: embedding count does not match N x M");
  const std::size_t dim = e[0].size();
  for (const auto& v : e)
    if (v.size() != dim) throw InputError("GE2E: embeddings differ in dimension");

  const double w = std::max(scale, kMinScale);
  const double m = double(n_utt);

  auto dot = [dim](const double* a, const double* b) {
    double s = 0;
    for (std::size_t i = 0; i < dim; ++i) s += a[i] * b[i];
    return s;
  };

  std::vector<double> sums(n_spk * dim, 0.0);
  for (std::size_t j = 0; j < n_spk; ++j)
    for (std::size_t i = 0; i < n_utt; ++i)
      for (std::size_t d = 0; d < dim; ++d) sums[j * dim + d] += e[j * n_utt + i][d];
  std::vector<double> centroids(sums);
  for (auto& v : centroids) v /= m;
  std::vector<double> c_norm(n_spk);
  for (std::size_t k = 0; k < n_spk; ++k) c_norm[k] = std::sqrt(dot(&centroids[k * dim], &centroids[k * dim]));

  Ge2eResult r;
  r.d_embeddings.assign(e.size(), std::vector<double>(dim, 0.0));
  std::vector<double> d_centroid(n_spk * dim, 0.0);  // full-centroid gradients
  std::vector<double> d_sum_loo(n_spk * dim, 0.0);    // leave-one-out: spread over the speaker

  std::vector<double> loo(dim), cosv(n_spk), s(n_spk);
  for (std::size_t j = 0; j < n_spk; ++j) {
    for (std::size_t i = 0; i < n_utt; ++i) {
      const auto& a = e[j * n_utt + i];
      const double a_norm = std::sqrt(dot(a.data(), a.data()));
      for (std::size_t d = 0; d < dim; ++d) loo[d] = (sums[j * dim + d] - a[d]) / (m - 1.0);
      const double loo_norm = std::sqrt(dot(loo.data(), loo.data()));

      for (std::size_t k = 0; k < n_spk; ++k) {
        const double* c = k == j ? loo.data() : &centroids[k * dim];
        const double cn = k == j ? loo_norm : c_norm[k];
        const double denom = a_norm * cn;
        cosv[k] = denom > 0 ? dot(a.data(), c) / denom : 0.0;
        s[k] = w * cosv[k] + bias;
      }
      const double top = *std::max_element(s.begin(), s.end());
      double z = 0;
      for (double v : s) z += std::exp(v - top);
      r.loss += top + std::log(z) - s[j];

      for (std::size_t k = 0; k < n_spk; ++k) {
        const double ds = std::exp(s[k] - top) / z - (k == j ? 1.0 : 0.0);
        if (scale > kMinScale) r.d_scale += ds * cosv[k];
        r.d_bias += ds;
        const double* c = k == j ? loo.data() : &centroids[k * dim];
        const double cn = k == j ? loo_norm : c_norm[k];
        if (a_norm <= 0 || cn <= 0) continue;
        const double g = ds * w;
        // d cos / d a = c / (|a||c|) - cos a / |a|^2, symmetric for c.
        auto& da = r.d_embeddings[j * n_utt + i];
        double* dc = k == j ? &d_sum_loo[j * dim] : &d_centroid[k * dim];
        const double inv = 1.0 / (a_norm * cn);
        const double ca = cosv[k] / (a_norm * a_norm);
        const double cc = cosv[k] / (cn * cn);
        const double spread = k == j ? 1.0 / (m - 1.0) : 1.0 / m;
        for (std::size_t d = 0; d < dim; ++d) {
          da[d] += g * (c[d] * inv - ca * a[d]);
          const double gc = g * (a[d] * inv - cc * c[d]) * spread;
          dc[d] += gc;
          // The query itself is excluded from its own leave-one-out centroid.
          if (k == j) da[d] -= gc;
        }
      }
    }
  }
  for (std::size_t j = 0; j < n_spk; ++j)
    for (std::size_t i = 0; i < n_utt; ++i)
      for (std::size_t d = 0; d < dim; ++d)
        r.d_embeddings[j * n_utt + i][d] += d_centroid[j * dim + d] + d_sum_loo[j * dim + d];
  return r;
}

// ---------------------------------------------------------------------------

void fit_input_norm(Affine<double>& norm, const SpeakerSet& data) {
  std::vector<double> sum(kFeatureDim, 0.0), sq(kFeatureDim, 0.0);
  double count = 0;
  for (const auto& spk : data.utterances)
    for (const auto& utt : spk)
      for (const auto& f : utt) {
        const auto v = f.flat();
        for (std::size_t d = 0; d < kFeatureDim; ++d) {
          sum[d] += v[d];
          sq[d] += double(v[d]) * v[d];
        }
        count += 1;
      }
  if (count == 0) throw InputError("cannot fit input normalization on an empty set");
  auto& p = norm.params();
  for (std::size_t d = 0; d < kFeatureDim; ++d) {
    const double mean = sum[d] / count;
    const double var = std::max(0.0, sq[d] / count - mean * mean);
    const double inv = 1.0 / std::max(std::sqrt(var), 1e-3);
    p.tensors[0].value[d] = inv;
    p.tensors[1].value[d] = -mean * inv;
  }
}

double verification_eer(const Embedder& model, const SpeakerSet& heldout) {
  std::vector<SpeakerEmbedding> emb;
  std::vector<std::size_t> who;
  for (std::size_t s = 0; s < heldout.speakers(); ++s)
    for (const auto& utt : heldout.utterances[s]) {
      const std::size_t n = std::min(utt.size(), model.config().crop_frames);
      emb.push_back(model.embed(std::span<const FrameFeatures>(utt).first(n)));
      who.push_back(s);
    }
  std::vector<double> scores;
  std::vector<int> labels;
  for (std::size_t a = 0; a < emb.size(); ++a)
    for (std::size_t b = a + 1; b < emb.size(); ++b) {
      scores.push_back(cosine(emb[a].values, emb[b].values));
      labels.push_back(who[a] == who[b] ? 1 : 0);
    }
  return eer(scores, labels);
}

TrainedEmbedder train_embedder(const SpeakerSet& train, const SpeakerSet& heldout,
                               const EmbedderConfig& cfg, std::uint64_t seed,
                               const TrainProgress& progress) {
  cfg.validate();
  if (train.speakers() < 4) throw InputError("embedder training needs at least 4 speakers");
  for (const auto& spk : train.utterances) {
    if (spk.size() < 4) throw InputError("embedder training needs at least 4 utterances per speaker");
    for (const auto& utt : spk)
      if (utt.size() < cfg.crop_frames) {
        throw InputError("training utterance shorter than crop_frames (" +
                         std::to_string(utt.size()) + " < " + std::to_string(cfg.crop_frames) + ")");
      }
  }
  const std::size_t n_spk = std::min(cfg.speakers_per_batch, train.speakers());
  const std::size_t n_utt = cfg.utterances_per_speaker;

  EmbedderNet<double> net(cfg);
  Rng init_rng(mix_seed(seed, 1));
  for (auto* l : net.layers()) init_glorot(*l, init_rng);
  fit_input_norm(net.input_norm(), train);

  AdamConfig ac;
  ac.learning_rate = cfg.learning_rate;
  Adam opt(net.layers(), ac);
  double w = 10.0, b = -5.0, dw = 0.0, db = 0.0;
  opt.add_scalar(&w, &dw);
  opt.add_scalar(&b, &db);

  EmbedderTrainLog log;
  const bool have_heldout = heldout.speakers() >= 2;
  if (have_heldout) log.eer.emplace_back(0, verification_eer(Embedder(cfg, net), heldout));

  Rng rng(mix_seed(seed, 2));
  std::vector<std::size_t> spk_order(train.speakers());
  std::vector<EmbedderNet<double>::Cache> caches(n_spk * n_utt);
  std::vector<std::vector<double>> raw(n_spk * n_utt), emb(n_spk * n_utt);
  std::vector<double> norms(n_spk * n_utt);

  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    std::iota(spk_order.begin(), spk_order.end(), std::size_t(0));
    for (std::size_t i = 0; i < n_spk; ++i) {
      std::swap(spk_order[i], spk_order[i + rng.below(spk_order.size() - i)]);
    }
    for (std::size_t j = 0; j < n_spk; ++j) {
      const auto& utts = train.utterances[spk_order[j]];
      std::vector<std::size_t> pick(utts.size());
      std::iota(pick.begin(), pick.end(), std::size_t(0));
      for (std::size_t i = 0; i < n_utt; ++i) {
        const std::size_t u = i < pick.size() ? i : i % pick.size();
        if (i < pick.size()) std::swap(pick[i], pick[i + rng.below(pick.size() - i)]);
        const auto& seq = utts[pick[u]];
        const std::size_t offset = rng.below(seq.size() - cfg.crop_frames + 1);
        const auto x = feature_matrix<double>(std::span<const FrameFeatures>(seq).subspan(offset, cfg.crop_frames));
        const std::size_t idx = j * n_utt + i;
        raw[idx] = net.forward(x, caches[idx]);
        emb[idx] = normalized<double>(raw[idx], &norms[idx]);
      }
    }
    const auto res = ge2e_loss(emb, n_spk, n_utt, w, b);
    if (!std::isfinite(res.loss)) throw NumericError("GE2E loss is not finite at step " + std::to_string(step));

    opt.zero_grad();
    for (std::size_t idx = 0; idx < emb.size(); ++idx) {
      const auto& e = emb[idx];
      const auto& g = res.d_embeddings[idx];
      double eg = 0;
      for (std::size_t d = 0; d < e.size(); ++d) eg += e[d] * g[d];
      std::vector<double> d_raw(e.size());
      for (std::size_t d = 0; d < e.size(); ++d) d_raw[d] = (g[d] - e[d] * eg) / norms[idx];
      net.backward(d_raw, caches[idx]);
    }
    dw = res.d_scale;
    db = res.d_bias;
    opt.step();
    w = std::max(w, kMinScale);

    log.losses.push_back(res.loss);
    if (progress) progress(step, res.loss);
    if (have_heldout && cfg.eval_every > 0 && (step % cfg.eval_every == 0 || step == cfg.steps)) {
      log.eer.emplace_back(step, verification_eer(Embedder(cfg, net), heldout));
    }
  }
  log.scale = w;
  log.bias = b;
  return {Embedder(cfg, net), std::move(log)};
}

}  // namespace ppn
