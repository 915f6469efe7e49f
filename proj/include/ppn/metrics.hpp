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
#include <span>
#include <vector>

namespace ppn {

inline constexpr double kSiSnrCap = 60.0;
inline constexpr std::size_t kAlignSearch = 2400;

/// Scale-invariant SNR in dB: project the estimate onto the reference and
/// compare the projection's energy to the residual's. Capped at 60 dB.
/// InputError on length mismatch or a silent reference.
double si_snr(std::span<const float> estimate, std::span<const float> reference);

/// Lag d in [-max_lag, max_lag] maximizing sum_n est[n + d] ref[n].
long best_lag(std::span<const float> estimate, std::span<const float> reference,
              std::size_t max_lag = kAlignSearch);

/// SI-SNR over the overlap after shifting the estimate by best_lag.
double si_snr_aligned(std::span<const float> estimate, std::span<const float> reference,
                      std::size_t max_lag = kAlignSearch);

/// Equal error rate of similarity scores (higher means "same"), with linear
/// interpolation between adjacent operating points. InputError unless both
/// classes are present.
double eer(std::span<const double> scores, std::span<const int> labels);

struct VadMetrics {
  double accuracy = 0;
  double precision = 0;  // 0 when nothing is predicted active
  double recall = 0;     // 0 when no label is active
};

/// Predictions at or above the threshold count as active.
VadMetrics vad_accuracy(std::span<const float> pred, std::span<const int> labels,
                        float threshold = 0.5f);

double median(std::vector<double> values);

}  // namespace ppn
