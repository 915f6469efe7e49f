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
#include <complex>
#include <mutex>
#include <span>

#include "ppn/frame_spec.hpp"

namespace ppn {

using Spectrum = std::array<std::complex<float>, kBins>;

/// Vorbis power-complementary window, w[n]^2 + w[n + hop]^2 == 1.
const std::array<float, kWindow>& analysis_window();

/// 960-point real transform with the analysis/synthesis window pair.
///
/// Both directions are scaled by 1/sqrt(960) so the pair is unitary and the
/// windowed overlap-add of consecutive frames reconstructs the input. One
/// instance per thread: the object owns its scratch buffers.
class Transform {
 public:
  Transform();
  ~Transform();
  Transform(const Transform&) = delete;
  Transform& operator=(const Transform&) = delete;
  Transform(Transform&&) noexcept;
  Transform& operator=(Transform&&) noexcept;

  /// Windows the frame and returns its 481 positive-frequency bins.
  void analyze(std::span<const float> frame, Spectrum& out);
  /// Inverse transform followed by the synthesis window; writes 960 samples.
  void synthesize(const Spectrum& in, std::span<float> frame);

 private:
  struct Plans;
  Plans* plans_;
};

/// Guards FFTW plan creation and destruction, which are not reentrant.
std::mutex& fftw_planner_mutex();

/// Convenience wrapper around a thread-local Transform.
Spectrum analyze_frame(std::span<const float> frame);

}  // namespace ppn
