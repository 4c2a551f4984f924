#include <algorithm>
#include <cmath>

#include "aghint/kernels.hpp"

namespace aghint::kernels::omp {

namespace {

using Index = std::ptrdiff_t;

template <class T>
void matmul_acc_impl(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t m, std::size_t k,
                     std::size_t n) {
#pragma omp parallel for schedule(static) if (m * k * n > 32768)
  for (Index i = 0; i < static_cast<Index>(m); ++i) {
    T* crow = c.data() + i * n;
    const T* arow = a.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      if (av == T(0)) continue;
      const T* brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// Row p of C is owned by one worker; rows of A are visited in ascending order
// so the accumulation order matches the serial kernel.
template <class T>
void matmul_at_b_acc_impl(std::span<const T> a, std::span<const T> g, std::span<T> c, std::size_t m, std::size_t k,
                          std::size_t n) {
#pragma omp parallel for schedule(static) if (m * k * n > 32768)
  for (Index p = 0; p < static_cast<Index>(k); ++p) {
    T* crow = c.data() + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const T av = a[i * k + p];
      if (av == T(0)) continue;
      const T* grow = g.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * grow[j];
    }
  }
}

template <class T>
void matmul_a_bt_acc_impl(std::span<const T> g, std::span<const T> b, std::span<T> c, std::size_t m, std::size_t k,
                          std::size_t n) {
#pragma omp parallel for schedule(static) if (m * k * n > 32768)
  for (Index i = 0; i < static_cast<Index>(m); ++i) {
    const T* grow = g.data() + i * n;
    T* crow = c.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T* brow = b.data() + p * n;
      T acc = 0;
      for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
      crow[p] += acc;
    }
  }
}

template <class T>
void segment_softmax_impl(std::span<const T> logits, std::span<const std::size_t> offsets, std::span<T> out) {
  const auto segments = static_cast<Index>(offsets.size()) - 1;
#pragma omp parallel for schedule(static) if (logits.size() > 8192)
  for (Index s = 0; s < segments; ++s) {
    const std::size_t lo = offsets[s];
    const std::size_t hi = offsets[s + 1];
    if (lo == hi) continue;
    T mx = logits[lo];
    for (std::size_t e = lo + 1; e < hi; ++e) mx = std::max(mx, logits[e]);
    T sum = 0;
    for (std::size_t e = lo; e < hi; ++e) {
      out[e] = std::exp(logits[e] - mx);
      sum += out[e];
    }
    for (std::size_t e = lo; e < hi; ++e) out[e] /= sum;
  }
}

template <class T>
void segment_weighted_sum_impl(std::span<const T> x, std::size_t cols, std::span<const std::int32_t> src,
                               std::span<const T> weights, std::span<const std::size_t> offsets, std::span<T> out) {
  const auto segments = static_cast<Index>(offsets.size()) - 1;
#pragma omp parallel for schedule(static) if (src.size() * cols > 32768)
  for (Index s = 0; s < segments; ++s) {
    T* orow = out.data() + s * cols;
    for (std::size_t e = offsets[s]; e < offsets[s + 1]; ++e) {
      const T w = weights[e];
      const T* xrow = x.data() + static_cast<std::size_t>(src[e]) * cols;
      for (std::size_t j = 0; j < cols; ++j) orow[j] += w * xrow[j];
    }
  }
}

}  // namespace

#define AGHINT_KERNEL_DEFS(T)                                                                            \
  void matmul_acc(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t m, std::size_t k, \
                  std::size_t n) {                                                                       \
    matmul_acc_impl<T>(a, b, c, m, k, n);                                                                \
  }                                                                                                      \
  void matmul_at_b_acc(std::span<const T> a, std::span<const T> g, std::span<T> c, std::size_t m,        \
                       std::size_t k, std::size_t n) {                                                   \
    matmul_at_b_acc_impl<T>(a, g, c, m, k, n);                                                           \
  }                                                                                                      \
  void matmul_a_bt_acc(std::span<const T> g, std::span<const T> b, std::span<T> c, std::size_t m,        \
                       std::size_t k, std::size_t n) {                                                   \
    matmul_a_bt_acc_impl<T>(g, b, c, m, k, n);                                                           \
  }                                                                                                      \
  void segment_softmax(std::span<const T> logits, std::span<const std::size_t> offsets, std::span<T> out) { \
    segment_softmax_impl<T>(logits, offsets, out);                                                       \
  }                                                                                                      \
  void segment_weighted_sum_acc(std::span<const T> x, std::size_t cols, std::span<const std::int32_t> src, \
                                std::span<const T> weights, std::span<const std::size_t> offsets,        \
                                std::span<T> out) {                                                      \
    segment_weighted_sum_impl<T>(x, cols, src, weights, offsets, out);                                   \
  }

AGHINT_KERNEL_DEFS(float)
AGHINT_KERNEL_DEFS(double)
#undef AGHINT_KERNEL_DEFS

void jaccard_matrix(std::span<const std::uint64_t> bits, std::size_t words, std::size_t n, std::span<float> out) {
#pragma omp parallel for schedule(dynamic, 16)
  for (Index i = 0; i < static_cast<Index>(n); ++i) {
    out[i * n + i] = 0.0f;
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto v = static_cast<float>(jaccard_disparity(&bits[i * words], &bits[j * words], words));
      out[i * n + j] = v;
      out[j * n + i] = v;
    }
  }
}

void cosine_matrix(std::span<const double> rows, std::span<const double> norms, std::size_t dim, std::size_t n,
                   std::span<float> out) {
#pragma omp parallel for schedule(dynamic, 16)
  for (Index i = 0; i < static_cast<Index>(n); ++i) {
    out[i * n + i] = 0.0f;
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto v = static_cast<float>(cosine_disparity(&rows[i * dim], &rows[j * dim], dim, norms[i], norms[j]));
      out[i * n + j] = v;
      out[j * n + i] = v;
    }
  }
}

}  // namespace aghint::kernels::omp
