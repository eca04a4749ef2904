#pragma once

// Dense matrix kernels behind the autodiff ops.
//
// `serial` is the reference implementation and is what the unit tests treat
// as ground truth. `parallel` splits work over output rows with OpenMP; each
// output element is accumulated in the same order as the serial kernel, so
// the two agree bit for bit. The unqualified entry points pick one based on
// problem size.

#include <cstddef>
#include <span>

namespace hsal::kernels {

// All matrices are row-major. `accumulate` adds into `c` instead of
// overwriting it.
//   gemm:    c[m x n] (+)= a[m x k]   * b[k x n]
//   gemm_nt: c[m x n] (+)= a[m x k]   * b[n x k]^T
//   gemm_tn: c[m x n] (+)= a[k x m]^T * b[k x n]

namespace serial {
void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t k, std::size_t n, bool accumulate);
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate);
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate);
}  // namespace serial

namespace parallel {
void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t k, std::size_t n, bool accumulate);
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate);
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate);
}  // namespace parallel

/// Below this many multiply-adds the serial kernel is used.
inline constexpr std::size_t kParallelFlopThreshold = std::size_t{1} << 18;

void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t k, std::size_t n, bool accumulate);
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate);
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate);

/// Thread count used by the parallel kernels and batch loops (0 = OpenMP default).
void set_num_threads(int n);
int num_threads();

}  // namespace hsal::kernels
