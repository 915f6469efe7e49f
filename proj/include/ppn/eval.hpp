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
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ppn/embedder.hpp"
#include "ppn/engine.hpp"
#include "ppn/enhancer.hpp"

namespace ppn {

struct ProbeResult {
  double cos_target = 0;
  double cos_interference = 0;
};

/// Embeds the output and both references with the same embedder and returns
/// the two cosines. Every signal must hold at least 0.5 s.
ProbeResult cosine_probe(std::span<const float> output, std::span<const float> target_ref,
                         std::span<const float> interf_ref, const Embedder& embedder);

/// Applies the ideal band gains of `clean` against `mixture` with plain
/// per-band masking (strengths 0). The result is aligned with the input.
std::vector<float> oracle_mask_enhance(std::span<const float> clean, std::span<const float> mixture);

// ---------------------------------------------------------------------------

/// Returns the number of heap allocations made so far by the process.
using AllocationCounter = std::function<std::size_t()>;

struct BenchmarkReport {
  double realtime_factor = 0;  // audio seconds per wall second
  double cpu_fraction = 0;     // 1 / realtime_factor
  std::size_t frames_processed = 0;
  double audio_seconds = 0;
  double wall_seconds = 0;
  long long allocations = -1;  // after warm-up; -1 without a counter
};

inline constexpr double kBenchmarkWarmupS = 1.0;

/// Streams `duration_s` of synthetic speech in noise through the full
/// pipeline in 10 ms chunks after a 1 s warm-up that is not timed.
BenchmarkReport benchmark_stream(const EnhancerModel* model, const SpeakerEmbedding& embedding,
                                 double duration_s, const AllocationCounter& allocations = {},
                                 EngineOptions options = {});

// ---------------------------------------------------------------------------

struct EvalRecord {
  std::size_t index = 0;
  double si_snr_in = 0;
  double si_snr_out = 0;
  double cos_target = 0;
  double cos_interf = 0;
  double vad_acc = 0;
};

struct EvalSummary {
  std::size_t count = 0;
  double si_snr_in = 0;  // medians
  double si_snr_out = 0;
  double cos_target = 0;
  double cos_interf = 0;
  double vad_acc = 0;
};

EvalSummary summarize(std::span<const EvalRecord> records);

/// One JSON object per line.
std::string to_json_line(const EvalRecord& r);
std::string to_json_line(const EvalSummary& s);
std::string eval_report(std::span<const EvalRecord> records);

}  // namespace ppn
