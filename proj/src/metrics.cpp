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

#include "ppn/metrics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <string>

#include "ppn/error.hpp"
#include "ppn/transform.hpp"

namespace ppn {

double si_snr(std::span<const float> estimate, std::span<const float> reference) {
  if (estimate.size() != reference.size()) {
    throw InputError("si_snr: length mismatch (" + std::to_string(estimate.size()) + " vs " +
                     std::to_string(reference.size()) + ")");
  }
  double rr = 0, er = 0, ee = 0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    rr += double(reference[i]) * reference[i];
    er += double(estimate[i]) * reference[i];
    ee += double(estimate[i]) * estimate[i];
  }
  if (rr <= 0.0) throw InputError("si_snr: reference is silent");
  const double alpha = er / rr;
  const double target = alpha * alpha * rr;
  // |e - alpha r|^2 = ee - 2 alpha er + alpha^2 rr
  const double residual = std::max(0.0, ee - 2.0 * alpha * er + alpha * alpha * rr);
  if (residual <= target * 1e-6) return kSiSnrCap;
  if (target <= 0.0) return -kSiSnrCap;
  return std::clamp(10.0 * std::log10(target / residual), -kSiSnrCap, kSiSnrCap);
}

long best_lag(std::span<const float> estimate, std::span<const float> reference,
              std::size_t max_lag) {
  const std::size_t n = std::max(estimate.size(), reference.size());
  if (n == 0) return 0;
  std::size_t size = 1;
  while (size < n + max_lag + 1) size <<= 1;
  const std::size_t half = size / 2 + 1;

  std::vector<float> a(size, 0.0f), b(size, 0.0f), c(size);
  std::vector<std::complex<float>> fa(half), fb(half);
  fftwf_plan pa, pb, pc;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    pa = fftwf_plan_dft_r2c_1d(int(size), a.data(), reinterpret_cast<fftwf_complex*>(fa.data()), FFTW_ESTIMATE);
    pb = fftwf_plan_dft_r2c_1d(int(size), b.data(), reinterpret_cast<fftwf_complex*>(fb.data()), FFTW_ESTIMATE);
    pc = fftwf_plan_dft_c2r_1d(int(size), reinterpret_cast<fftwf_complex*>(fa.data()), c.data(), FFTW_ESTIMATE);
  }
  std::copy(estimate.begin(), estimate.end(), a.begin());
  std::copy(reference.begin(), reference.end(), b.begin());
  fftwf_execute(pa);
  fftwf_execute(pb);
  for (std::size_t k = 0; k < half; ++k) fa[k] *= std::conj(fb[k]);
  fftwf_execute(pc);  // c[d mod size] = sum_n est[n + d] ref[n]
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftwf_destroy_plan(pa);
    fftwf_destroy_plan(pb);
    fftwf_destroy_plan(pc);
  }
  long best = 0;
  float best_val = c[0];
  for (long d = -long(max_lag); d <= long(max_lag); ++d) {
    const float v = c[std::size_t((d + long(size)) % long(size))];
    if (v > best_val || (v == best_val && std::labs(d) < std::labs(best))) {
      best_val = v;
      best = d;
    }
  }
  return best;
}

double si_snr_aligned(std::span<const float> estimate, std::span<const float> reference,
                      std::size_t max_lag) {
  if (estimate.size() != reference.size()) throw InputError("si_snr_aligned: length mismatch");
  const long d = best_lag(estimate, reference, max_lag);
  const std::size_t n = reference.size();
  const std::size_t shift = std::size_t(std::labs(d));
  if (shift >= n) throw InputError("si_snr_aligned: signal shorter than the alignment");
  // est[i + d] pairs with ref[i].
  if (d >= 0) return si_snr(estimate.subspan(shift), reference.first(n - shift));
  return si_snr(estimate.first(n - shift), reference.subspan(shift));
}

double eer(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw InputError("eer: scores and labels differ in length");
  std::size_t pos = 0;
  for (int l : labels) pos += l != 0;
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw InputError("eer: needs both same and different trials");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t(0));
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  // Lower the threshold one distinct score at a time.
  double far_prev = 0.0, frr_prev = 1.0;
  std::size_t accepted_pos = 0, accepted_neg = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] != 0 ? accepted_pos : accepted_neg) += 1;
      ++j;
    }
    i = j;
    const double far = double(accepted_neg) / double(neg);
    const double frr = 1.0 - double(accepted_pos) / double(pos);
    if (far >= frr) {
      const double d_prev = frr_prev - far_prev;
      const double d_now = frr - far;
      const double t = d_prev / (d_prev - d_now);
      return far_prev + t * (far - far_prev);
    }
    far_prev = far;
    frr_prev = frr;
  }
  return far_prev;  // unreachable: FAR reaches 1 while FRR reaches 0
}

VadMetrics vad_accuracy(std::span<const float> pred, std::span<const int> labels,
                        float threshold) {
  if (pred.size() != labels.size()) {
    throw InputError("vad_accuracy: " + std::to_string(pred.size()) + " predictions for " +
                     std::to_string(labels.size()) + " labels");
  }
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool active = pred[i] >= threshold;
    if (labels[i] != 0) {
      (active ? tp : fn) += 1;
    } else {
      (active ? fp : tn) += 1;
    }
  }
  VadMetrics m;
  if (!pred.empty()) m.accuracy = double(tp + tn) / double(pred.size());
  if (tp + fp > 0) m.precision = double(tp) / double(tp + fp);
  if (tp + fn > 0) m.recall = double(tp) / double(tp + fn);
  return m;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + long(mid), values.end());
  const double hi = values[mid];
  if (values.size() % 2 == 1) return hi;
  const double lo = *std::max_element(values.begin(), values.begin() + long(mid));
  return 0.5 * (lo + hi);
}

}  // namespace ppn
