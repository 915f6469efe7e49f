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

// Dense linear-algebra and correlation kernels.
//
// Every kernel exists twice: an OpenMP version that splits the outer loop
// across threads, and a single-threaded reference in kernels::serial. Both
// share the same inner loops, so for a given build they produce bit-identical
// results; the tests check exactly that. Matrices are row-major.

#include <cstddef>
#include <span>

namespace ppn::kernels {

// Outer-loop work (in multiply-adds) below which the parallel kernels stay on
// the calling thread.
inline constexpr std::size_t kParallelThreshold = std::size_t(1) << 16;

namespace detail {

// Not inlined so that every caller runs the same vectorized reduction.
template <typename T>
[[gnu::noinline]] T dot(const T* __restrict a, const T* __restrict b, std::size_t n) {
  T acc = T(0);
#pragma omp simd reduction(+ : acc)
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <typename T>
inline void axpy(T alpha, const T* __restrict x, T* __restrict y, std::size_t n) {
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

// Row i of C = A * B^T; C[i][j] = (accumulate ? C[i][j] : 0) + dot(A_i, B_j).
template <typename T>
inline void gemm_bt_row(const T* a, const T* b, T* c, std::size_t n, std::size_t k,
                        bool accumulate) {
  for (std::size_t j = 0; j < n; ++j) {
    const T v = dot(a, b + j * k, k);
    c[j] = accumulate ? c[j] + v : v;
  }
}

// Row i of C += A * B.
template <typename T>
inline void gemm_ab_row(const T* a, const T* b, T* c, std::size_t n, std::size_t k) {
  for (std::size_t p = 0; p < k; ++p) axpy(a[p], b + p * n, c, n);
}

// Row i of C += A^T * B, where A is [k x m].
template <typename T>
inline void gemm_atb_row(const T* a, const T* b, T* c, std::size_t i, std::size_t m,
                         std::size_t n, std::size_t k) {
  for (std::size_t p = 0; p < k; ++p) axpy(a[p * m + i], b + p * n, c, n);
}

[[gnu::noinline]] inline double lag_xcorr(const float* x, std::size_t start, std::size_t len,
                        std::size_t lag) {
  double acc = 0.0;
#pragma omp simd reduction(+ : acc)
  for (std::size_t n = 0; n < len; ++n) {
    acc += double(x[start + n]) * double(x[start + n - lag]);
  }
  return acc;
}

}  // namespace detail

namespace serial {

/// C[m x n] = A[m x k] * B[n x k]^T  (or +=).
template <typename T>
void gemm_bt(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k,
             bool accumulate = false) {
  for (std::size_t i = 0; i < m; ++i) {
    detail::gemm_bt_row(a + i * k, b, c + i * n, n, k, accumulate);
  }
}

/// C[m x n] += A[m x k] * B[k x n].
template <typename T>
void gemm_ab(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) detail::gemm_ab_row(a + i * k, b, c + i * n, n, k);
}

/// C[m x n] += A[k x m]^T * B[k x n].
template <typename T>
void gemm_atb(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) detail::gemm_atb_row(a, b, c + i * n, i, m, n, k);
}

/// y[n] = W[n x k] * x (+ y when accumulate).
template <typename T>
void matvec(const T* w, const T* x, T* y, std::size_t n, std::size_t k,
            bool accumulate = false) {
  detail::gemm_bt_row(x, w, y, n, k, accumulate);
}

/// out[l - min_lag] = sum_{n} x[start+n] * x[start+n-l] for l in [min_lag, max_lag].
inline void lag_xcorr(std::span<const float> x, std::size_t start, std::size_t len,
                      std::size_t min_lag, std::size_t max_lag, std::span<double> out) {
  for (std::size_t l = min_lag; l <= max_lag; ++l) {
    out[l - min_lag] = detail::lag_xcorr(x.data(), start, len, l);
  }
}

}  // namespace serial

template <typename T>
void gemm_bt(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k,
             bool accumulate = false) {
  const long rows = long(m);
#pragma omp parallel for schedule(static) if (m * n * k > kParallelThreshold && m > 1)
  for (long i = 0; i < rows; ++i) {
    detail::gemm_bt_row(a + std::size_t(i) * k, b, c + std::size_t(i) * n, n, k, accumulate);
  }
}

template <typename T>
void gemm_ab(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k) {
  const long rows = long(m);
#pragma omp parallel for schedule(static) if (m * n * k > kParallelThreshold && m > 1)
  for (long i = 0; i < rows; ++i) {
    detail::gemm_ab_row(a + std::size_t(i) * k, b, c + std::size_t(i) * n, n, k);
  }
}

template <typename T>
void gemm_atb(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k) {
  const long rows = long(m);
#pragma omp parallel for schedule(static) if (m * n * k > kParallelThreshold && m > 1)
  for (long i = 0; i < rows; ++i) {
    detail::gemm_atb_row(a, b, c + std::size_t(i) * n, std::size_t(i), m, n, k);
  }
}

/// Splits output rows across threads; each row is one dot product.
template <typename T>
void matvec(const T* w, const T* x, T* y, std::size_t n, std::size_t k,
            bool accumulate = false) {
  const long rows = long(n);
#pragma omp parallel for schedule(static) if (n * k > kParallelThreshold)
  for (long j = 0; j < rows; ++j) {
    const T v = detail::dot(x, w + std::size_t(j) * k, k);
    y[j] = accumulate ? y[j] + v : v;
  }
}

inline void lag_xcorr(std::span<const float> x, std::size_t start, std::size_t len,
                      std::size_t min_lag, std::size_t max_lag, std::span<double> out) {
  const long lags = long(max_lag - min_lag + 1);
#pragma omp parallel for schedule(static) if (std::size_t(lags) * len > kParallelThreshold)
  for (long i = 0; i < lags; ++i) {
    out[std::size_t(i)] = detail::lag_xcorr(x.data(), start, len, min_lag + std::size_t(i));
  }
}

}  // namespace ppn::kernels
