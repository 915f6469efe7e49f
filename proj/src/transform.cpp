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

#include "ppn/transform.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <numbers>
#include <string>

#include "ppn/error.hpp"

namespace ppn {

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

namespace {

const float kScale = float(1.0 / std::sqrt(double(kWindow)));

}  // namespace

const std::array<float, kWindow>& analysis_window() {
  static const std::array<float, kWindow> window = [] {
    std::array<float, kWindow> w{};
    for (std::size_t n = 0; n < kWindow; ++n) {
      const double s = std::sin(std::numbers::pi * (double(n) + 0.5) / double(kWindow));
      w[n] = float(std::sin(0.5 * std::numbers::pi * s * s));
    }
    return w;
  }();
  return window;
}

struct Transform::Plans {
  float* time = nullptr;
  fftwf_complex* freq = nullptr;
  fftwf_plan forward = nullptr;
  fftwf_plan inverse = nullptr;

  Plans() {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    time = fftwf_alloc_real(kWindow);
    freq = fftwf_alloc_complex(kBins);
    // FFTW_ESTIMATE keeps the chosen algorithm, and therefore the rounding,
    // identical from run to run.
    forward = fftwf_plan_dft_r2c_1d(int(kWindow), time, freq, FFTW_ESTIMATE);
    inverse = fftwf_plan_dft_c2r_1d(int(kWindow), freq, time, FFTW_ESTIMATE);
  }
  ~Plans() {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftwf_destroy_plan(forward);
    fftwf_destroy_plan(inverse);
    fftwf_free(time);
    fftwf_free(freq);
  }
};

Transform::Transform() : plans_(new Plans) {}
Transform::~Transform() { delete plans_; }
Transform::Transform(Transform&& o) noexcept : plans_(o.plans_) { o.plans_ = nullptr; }
Transform& Transform::operator=(Transform&& o) noexcept {
  if (this != &o) {
    delete plans_;
    plans_ = o.plans_;
    o.plans_ = nullptr;
  }
  return *this;
}

void Transform::analyze(std::span<const float> frame, Spectrum& out) {
  if (frame.size() != kWindow) {
    throw InputError("analyze expects " + std::to_string(kWindow) + " samples, got " +
                     std::to_string(frame.size()));
  }
  const auto& w = analysis_window();
  for (std::size_t n = 0; n < kWindow; ++n) plans_->time[n] = frame[n] * w[n];
  fftwf_execute(plans_->forward);
  for (std::size_t k = 0; k < kBins; ++k) {
    out[k] = {plans_->freq[k][0] * kScale, plans_->freq[k][1] * kScale};
  }
}

void Transform::synthesize(const Spectrum& in, std::span<float> frame) {
  if (frame.size() != kWindow) throw InputError("synthesize expects a 960-sample frame");
  for (std::size_t k = 0; k < kBins; ++k) {
    plans_->freq[k][0] = in[k].real();
    plans_->freq[k][1] = in[k].imag();
  }
  // A real signal has purely real DC and Nyquist bins.
  plans_->freq[0][1] = 0.0f;
  plans_->freq[kBins - 1][1] = 0.0f;
  fftwf_execute(plans_->inverse);
  const auto& w = analysis_window();
  for (std::size_t n = 0; n < kWindow; ++n) frame[n] = plans_->time[n] * kScale * w[n];
}

Spectrum analyze_frame(std::span<const float> frame) {
  thread_local Transform t;
  Spectrum out;
  t.analyze(frame, out);
  return out;
}

}  // namespace ppn
