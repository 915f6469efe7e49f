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
#include <sstream>
#include <vector>

#include <json.hpp>

#include "doctest.h"
#include "ppn/data_synth.hpp"
#include "ppn/error.hpp"
#include "ppn/eval.hpp"
#include "ppn/metrics.hpp"

using namespace ppn;

namespace {

std::vector<float> noise(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  std::vector<float> x(n);
  for (auto& v : x) v = float(rng.normal());
  return x;
}

// Fraction of thresholds sweep: returns the EER by brute force over every
// threshold between sorted scores (ties impossible in the inputs used).
double brute_force_eer(const std::vector<double>& s, const std::vector<int>& y) {
  double best = 1.0;
  std::vector<double> th(s);
  th.push_back(-1e9);
  th.push_back(1e9);
  for (double t : th) {
    double fa = 0, fr = 0, pos = 0, neg = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (y[i]) {
        ++pos;
        if (s[i] < t) ++fr;
      } else {
        ++neg;
        if (s[i] >= t) ++fa;
      }
    }
    if (fa / neg == fr / pos) best = std::min(best, fa / neg);
  }
  return best;
}

}  // namespace

TEST_CASE("si_snr: cap, scale invariance, orthogonal noise, errors") {
  const auto x = noise(1, 20000);
  CHECK(si_snr(x, x) == kSiSnrCap);
  std::vector<float> twice(x);
  for (auto& v : twice) v *= 2.0f;
  CHECK(si_snr(twice, x) == kSiSnrCap);

  // Gram-Schmidt: noise orthogonal to x with equal energy.
  auto n = noise(2, x.size());
  double xx = 0, xn = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx += double(x[i]) * x[i];
    xn += double(x[i]) * n[i];
  }
  double nn = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    n[i] = float(n[i] - xn / xx * x[i]);
    nn += double(n[i]) * n[i];
  }
  std::vector<float> est(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) est[i] = x[i] + float(n[i] * std::sqrt(xx / nn));
  CHECK(si_snr(est, x) == doctest::Approx(0.0).epsilon(0.1).scale(1.0));

  CHECK_THROWS_AS(si_snr(x, std::vector<float>(x.size(), 0.0f)), InputError);
  CHECK_THROWS_AS(si_snr(x, std::vector<float>(5, 1.0f)), InputError);
}

TEST_CASE("alignment recovers a known delay") {
  const auto x = noise(3, 30000);
  for (long d : {0L, 480L, 1920L, -700L}) {
    std::vector<float> est(x.size(), 0.0f);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const long j = long(i) + d;
      if (j >= 0 && j < long(x.size())) est[std::size_t(j)] = x[i];
    }
    CHECK(best_lag(est, x) == d);
    CHECK(si_snr_aligned(est, x) >= 40.0);
  }
}

TEST_CASE("eer: separated, coin flip, one inversion, monotone invariance") {
  CHECK(eer(std::vector<double>{0.9, 0.8, 0.2, 0.1}, std::vector<int>{1, 1, 0, 0}) == 0.0);

  Rng rng(4);
  std::vector<double> s(10000);
  std::vector<int> y(10000);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = rng.uniform();
    y[i] = rng.uniform() < 0.5 ? 1 : 0;
  }
  CHECK(std::abs(eer(s, y) - 0.5) < 0.02);

  const std::vector<double> inv = {0.9, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1};
  const std::vector<int> lab = {1, 1, 1, 0, 1, 0, 0, 0};
  CHECK(eer(inv, lab) == doctest::Approx(0.25));
  CHECK(brute_force_eer(inv, lab) == doctest::Approx(0.25));

  std::vector<double> squashed(s);
  for (auto& v : squashed) v = std::exp(3.0 * v) - 7.0;
  CHECK(eer(squashed, y) == eer(s, y));

  CHECK_THROWS_AS(eer(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), InputError);
}

TEST_CASE("vad metrics: exact, forced tie, random") {
  const std::vector<int> labels = {1, 0, 1, 1, 0, 0, 1, 0, 1, 1};
  std::vector<float> exact(labels.begin(), labels.end());
  const auto m = vad_accuracy(exact, labels);
  CHECK(m.accuracy == 1.0);
  CHECK(m.precision == 1.0);
  CHECK(m.recall == 1.0);

  const std::vector<float> half(labels.size(), 0.5f);
  CHECK(vad_accuracy(half, labels).accuracy == doctest::Approx(0.6));

  Rng rng(5);
  std::vector<float> p(10000);
  std::vector<int> y(10000);
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = float(rng.uniform());
    y[i] = rng.uniform() < 0.5 ? 1 : 0;
  }
  CHECK(std::abs(vad_accuracy(p, y).accuracy - 0.5) < 0.02);
  CHECK_THROWS_AS(vad_accuracy(half, std::vector<int>{1}), InputError);
}

TEST_CASE("cosine probe: self-similarity and length check") {
  Embedder emb(EmbedderConfig::preset_named("toy"));
  Rng rng(6);
  for (auto* l : emb.net().layers())
    if (l->kind != LayerKind::kAffine)
      for (auto& t : l->tensors)
        for (auto& v : t.value) v = float(rng.uniform(-0.2, 0.2));
  const auto a = synth_speaker(1, 2.0).samples;
  const auto b = synth_speaker(2, 2.0).samples;
  const auto pa = cosine_probe(a, a, b, emb);
  CHECK(pa.cos_target == doctest::Approx(1.0).epsilon(1e-6));
  const auto pb = cosine_probe(b, a, b, emb);
  CHECK(pb.cos_interference == doctest::Approx(1.0).epsilon(1e-6));
  CHECK_THROWS_AS(cosine_probe(std::span<const float>(a).first(20000), a, b, emb), InputError);
}

TEST_CASE("benchmark accounting") {
  EnhancerModel model(EnhancerConfig::preset_named("toy"));
  model.randomize(1);
  SpeakerEmbedding e{std::vector<float>(32, 0.0f)};
  e.values[0] = 1.0f;
  const auto one = benchmark_stream(&model, e, 1.0);
  const auto two = benchmark_stream(&model, e, 2.0);
  CHECK(one.frames_processed == 100);
  CHECK(two.frames_processed == 2 * one.frames_processed);
  CHECK(one.realtime_factor > 0.0);
  CHECK(one.cpu_fraction == doctest::Approx(1.0 / one.realtime_factor));
  CHECK(one.allocations == -1);
  std::size_t calls = 0;
  const auto counted = benchmark_stream(&model, e, 0.5, [&] { return ++calls; });
  CHECK(counted.allocations == 1);  // the counter itself advances once per call
}

TEST_CASE("report lines parse back and carry medians") {
  std::vector<EvalRecord> recs;
  for (std::size_t i = 0; i < 5; ++i) recs.push_back({i, double(i), double(i) + 3, 0.1 * double(i), -0.1, 0.9});
  const auto text = eval_report(recs);
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  nlohmann::json last;
  while (std::getline(in, line)) {
    last = nlohmann::json::parse(line);
    ++n;
  }
  CHECK(n == 6);
  CHECK(last["summary"] == "median");
  CHECK(last["count"] == 5);
  CHECK(last["si_snr_out"].get<double>() == 5.0);
  CHECK(last["cos_target"].get<double>() == doctest::Approx(0.2));
  CHECK(eval_report(recs) == text);
}
