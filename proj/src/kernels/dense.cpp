// Licensed under the Apache License, Version 2.0 (the "License"); you
// may not use this file except in compliance with the License.  You
// may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
// implied.  See the License for the specific language governing
// permissions and limitations under the License.

#include "gcldr/kernels/dense.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gcldr::kernels {

namespace {

thread_local bool force_serial = false;

constexpr std::size_t kParallelWork = 1u << 15;

inline void softmax_row(std::size_t cols, const double* in, double* out) {
    double mx = in[0];
    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, in[j]);
    double total = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
        out[j] = std::exp(in[j] - mx);
        total += out[j];
    }
    for (std::size_t j = 0; j < cols; ++j) out[j] /= total;
}

bool go_parallel(std::size_t work) {
#ifdef _OPENMP
    return !force_serial && work >= kParallelWork && !omp_in_parallel() && omp_get_max_threads() > 1;
#else
    (void)work;
    return false;
#endif
}

}  // namespace

namespace serial {

void gemm(GemmNN d, std::span<const double> a, std::span<const double> b, std::span<double> c,
          bool accumulate) {
    if (!accumulate) std::fill(c.begin(), c.end(), 0.0);
    for (std::size_t i = 0; i < d.m; ++i) {
        double* crow = c.data() + i * d.q;
        for (std::size_t k = 0; k < d.p; ++k) {
            const double aik = a[i * d.p + k];
            const double* brow = b.data() + k * d.q;
            for (std::size_t j = 0; j < d.q; ++j) crow[j] += aik * brow[j];
        }
    }
}

void gemm(GemmTN d, std::span<const double> a, std::span<const double> b, std::span<double> c) {
    for (std::size_t i = 0; i < d.m; ++i) {
        const double* brow = b.data() + i * d.q;
        for (std::size_t k = 0; k < d.p; ++k) {
            const double aik = a[i * d.p + k];
            double* crow = c.data() + k * d.q;
            for (std::size_t j = 0; j < d.q; ++j) crow[j] += aik * brow[j];
        }
    }
}

void gemm(GemmNT d, std::span<const double> a, std::span<const double> b, std::span<double> c) {
    for (std::size_t i = 0; i < d.m; ++i) {
        const double* arow = a.data() + i * d.q;
        for (std::size_t k = 0; k < d.p; ++k) {
            const double* brow = b.data() + k * d.q;
            double acc = 0.0;
            for (std::size_t j = 0; j < d.q; ++j) acc += arow[j] * brow[j];
            c[i * d.p + k] += acc;
        }
    }
}

void softmax_rows(std::size_t rows, std::size_t cols, std::span<const double> in, std::span<double> out) {
    for (std::size_t i = 0; i < rows; ++i) softmax_row(cols, in.data() + i * cols, out.data() + i * cols);
}

}  // namespace serial

namespace omp {

void gemm(GemmNN d, std::span<const double> a, std::span<const double> b, std::span<double> c,
          bool accumulate) {
    const auto m = static_cast<std::ptrdiff_t>(d.m);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < m; ++i) {
        double* crow = c.data() + i * d.q;
        if (!accumulate) std::fill(crow, crow + d.q, 0.0);
        for (std::size_t k = 0; k < d.p; ++k) {
            const double aik = a[i * d.p + k];
            const double* brow = b.data() + k * d.q;
            for (std::size_t j = 0; j < d.q; ++j) crow[j] += aik * brow[j];
        }
    }
}

void gemm(GemmTN d, std::span<const double> a, std::span<const double> b, std::span<double> c) {
    // Output row k owns column k of a; the batch index stays the inner reduction.
    const auto p = static_cast<std::ptrdiff_t>(d.p);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < p; ++k) {
        double* crow = c.data() + k * d.q;
        for (std::size_t i = 0; i < d.m; ++i) {
            const double aik = a[i * d.p + k];
            const double* brow = b.data() + i * d.q;
            for (std::size_t j = 0; j < d.q; ++j) crow[j] += aik * brow[j];
        }
    }
}

void gemm(GemmNT d, std::span<const double> a, std::span<const double> b, std::span<double> c) {
    const auto m = static_cast<std::ptrdiff_t>(d.m);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < m; ++i) {
        const double* arow = a.data() + i * d.q;
        for (std::size_t k = 0; k < d.p; ++k) {
            const double* brow = b.data() + k * d.q;
            double acc = 0.0;
            for (std::size_t j = 0; j < d.q; ++j) acc += arow[j] * brow[j];
            c[i * d.p + k] += acc;
        }
    }
}

void softmax_rows(std::size_t rows, std::size_t cols, std::span<const double> in, std::span<double> out) {
    const auto n = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) softmax_row(cols, in.data() + i * cols, out.data() + i * cols);
}

}  // namespace omp

void gemm(GemmNN d, std::span<const double> a, std::span<const double> b, std::span<double> c,
          bool accumulate) {
    if (go_parallel(d.m * d.p * d.q))
        omp::gemm(d, a, b, c, accumulate);
    else
        serial::gemm(d, a, b, c, accumulate);
}

void gemm(GemmTN d, std::span<const double> a, std::span<const double> b, std::span<double> c) {
    if (go_parallel(d.m * d.p * d.q))
        omp::gemm(d, a, b, c);
    else
        serial::gemm(d, a, b, c);
}

void gemm(GemmNT d, std::span<const double> a, std::span<const double> b, std::span<double> c) {
    if (go_parallel(d.m * d.p * d.q))
        omp::gemm(d, a, b, c);
    else
        serial::gemm(d, a, b, c);
}

void softmax_rows(std::size_t rows, std::size_t cols, std::span<const double> in, std::span<double> out) {
    if (go_parallel(rows * cols * 8))
        omp::softmax_rows(rows, cols, in, out);
    else
        serial::softmax_rows(rows, cols, in, out);
}

bool openmp_enabled() noexcept {
#ifdef _OPENMP
    return true;
#else
    return false;
#endif
}

ScopedSerialKernels::ScopedSerialKernels() : previous_(force_serial) { force_serial = true; }

ScopedSerialKernels::~ScopedSerialKernels() { force_serial = previous_; }

}  // namespace gcldr::kernels
