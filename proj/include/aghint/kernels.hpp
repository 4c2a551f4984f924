#pragma once

// Data-parallel inner loops. Every kernel exists twice: `serial` is the
// reference, `omp` distributes independent output rows over OpenMP workers.
// Both accumulate each output element in the same order, so their results
// are bit-identical; tests check this directly.

#include <cstddef>
#include <cstdint>
#include <span>

namespace aghint::kernels {

// C[m x n] += A[m x k] * B[k x n]
// C[k x n] += A[m x k]^T * G[m x n]
// C[m x k] += G[m x n] * B[k x n]^T
// out[e] = softmax of logits within [offsets[s], offsets[s+1])
// out[s, :] += sum_{e in segment s} weights[e] * x[src[e], :]

#define AGHINT_KERNEL_DECLS(T)                                                                        \
  void matmul_acc(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t m,          \
                  std::size_t k, std::size_t n);                                                      \
  void matmul_at_b_acc(std::span<const T> a, std::span<const T> g, std::span<T> c, std::size_t m,     \
                       std::size_t k, std::size_t n);                                                 \
  void matmul_a_bt_acc(std::span<const T> g, std::span<const T> b, std::span<T> c, std::size_t m,     \
                       std::size_t k, std::size_t n);                                                 \
  void segment_softmax(std::span<const T> logits, std::span<const std::size_t> offsets, std::span<T> out); \
  void segment_weighted_sum_acc(std::span<const T> x, std::size_t cols, std::span<const std::int32_t> src, \
                                std::span<const T> weights, std::span<const std::size_t> offsets,      \
                                std::span<T> out);

namespace serial {
AGHINT_KERNEL_DECLS(float)
AGHINT_KERNEL_DECLS(double)

// Full symmetric disparity matrix (row-major n x n, zero diagonal).
// Discrete rows are bitsets of `words` 64-bit words; continuous rows are
// dense with precomputed norms.
void jaccard_matrix(std::span<const std::uint64_t> bits, std::size_t words, std::size_t n, std::span<float> out);
void cosine_matrix(std::span<const double> rows, std::span<const double> norms, std::size_t dim, std::size_t n,
                   std::span<float> out);
}  // namespace serial

namespace omp {
AGHINT_KERNEL_DECLS(float)
AGHINT_KERNEL_DECLS(double)
void jaccard_matrix(std::span<const std::uint64_t> bits, std::size_t words, std::size_t n, std::span<float> out);
void cosine_matrix(std::span<const double> rows, std::span<const double> norms, std::size_t dim, std::size_t n,
                   std::span<float> out);
}  // namespace omp

#undef AGHINT_KERNEL_DECLS

// Pairwise element kernels shared by both matrix variants.
double jaccard_disparity(const std::uint64_t* a, const std::uint64_t* b, std::size_t words);
double cosine_disparity(const double* a, const double* b, std::size_t dim, double norm_a, double norm_b);

// The variant used by the library: omp when built with OpenMP, else serial.
#ifdef AGHINT_HAVE_OPENMP
namespace active = omp;
#else
namespace active = serial;
#endif

}  // namespace aghint::kernels
