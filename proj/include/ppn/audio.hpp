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

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "ppn/frame_spec.hpp"

namespace ppn {

/// Mono audio at a fixed sample rate. Samples are nominally in [-1, 1].
struct AudioBuffer {
  std::vector<float> samples;
  int sample_rate = kSampleRate;

  AudioBuffer() = default;
  explicit AudioBuffer(std::vector<float> s, int rate = kSampleRate)
      : samples(std::move(s)), sample_rate(rate) {}

  std::size_t size() const { return samples.size(); }
  double duration_s() const { return double(samples.size()) / sample_rate; }
  std::span<const float> view() const { return samples; }
};

/// Throws InputError unless the buffer is 48 kHz with finite samples.
void require_pipeline_audio(const AudioBuffer& audio);

enum class WavEncoding { kPcm16, kFloat32 };

/// Reads a RIFF WAVE file. Accepts 16-bit PCM and 32-bit IEEE float, mono,
/// 48 kHz only. Anything else raises DataError with the reason.
AudioBuffer read_wav(const std::filesystem::path& path);

/// Writes to a temporary sibling and renames, so a failed write never leaves
/// a partial file behind.
void write_wav(const std::filesystem::path& path, const AudioBuffer& audio,
               WavEncoding encoding = WavEncoding::kFloat32);

double energy(std::span<const float> x);

}  // namespace ppn
