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

#pragma once

#include <cstddef>
#include <span>

// Row-major dense kernels behind the autodiff engine. Each routine exists as a
// serial reference and an OpenMP version that splits output rows across
// threads. Both accumulate every output element over the reduction index in
// ascending order, so their results agree bitwise.
namespace gcldr::kernels {

// c[m x q] = a[m x p] * b[p x q]   (c += ... when accumulate is set)
struct GemmNN {
    std::size_t m, p, q;
};
// c[p x q] += a[m x p]^T * b[m x q]
struct GemmTN {
    std::size_t m, p, q;
};
// c[m x p] += a[m x q] * b[p x q]^T
struct GemmNT {
    std::size_t m, p, q;
};

namespace serial {
void gemm(GemmNN dims, std::span<const double> a, std::span<const double> b, std::span<double> c,
          bool accumulate);
void gemm(GemmTN dims, std::span<const double> a, std::span<const double> b, std::span<double> c);
void gemm(GemmNT dims, std::span<const double> a, std::span<const double> b, std::span<double> c);
void softmax_rows(std::size_t rows, std::size_t cols, std::span<const double> in, std::span<double> out);
}  // namespace serial

namespace omp {
void gemm(GemmNN dims, std::span<const double> a, std::span<const double> b, std::span<double> c,
          bool accumulate);
void gemm(GemmTN dims, std::span<const double> a, std::span<const double> b, std::span<double> c);
void gemm(GemmNT dims, std::span<const double> a, std::span<const double> b, std::span<double> c);
void softmax_rows(std::size_t rows, std::size_t cols, std::span<const double> in, std::span<double> out);
}  // namespace omp

/// Dispatching entry points used by the engine. They take the OpenMP path when
/// the library was built with OpenMP, the work is large enough to amortize a
/// thread team, and the calling thread has not pinned itself to serial mode.
void gemm(GemmNN dims, std::span<const double> a, std::span<const double> b, std::span<double> c,
          bool accumulate = false);
void gemm(GemmTN dims, std::span<const double> a, std::span<const double> b, std::span<double> c);
void gemm(GemmNT dims, std::span<const double> a, std::span<const double> b, std::span<double> c);
void softmax_rows(std::size_t rows, std::size_t cols, std::span<const double> in, std::span<double> out);

bool openmp_enabled() noexcept;

// Experiment workers already run one model per thread; nesting thread teams
// inside them only oversubscribes the machine.
class ScopedSerialKernels {
public:
    ScopedSerialKernels();
    ~ScopedSerialKernels();
    ScopedSerialKernels(const ScopedSerialKernels&) = delete;
    ScopedSerialKernels& operator=(const ScopedSerialKernels&) = delete;

private:
    bool previous_;
};

}  // namespace gcldr::kernels
