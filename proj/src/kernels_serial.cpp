#include <algorithm>
#include <bit>
#include <cmath>

#include "aghint/kernels.hpp"

namespace aghint::kernels {

double jaccard_disparity(const std::uint64_t* a, const std::uint64_t* b, std::size_t words) {
  std::uint64_t inter = 0;
  std::uint64_t uni = 0;
  for (std::size_t w = 0; w < words; ++w) {
    inter += static_cast<std::uint64_t>(std::popcount(a[w] & b[w]));
    uni += static_cast<std::uint64_t>(std::popcount(a[w] | b[w]));
  }
  if (uni == 0) return 0.0;
  return 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
}

double cosine_disparity(const double* a, const double* b, std::size_t dim, double norm_a, double norm_b) {
  double dot = 0.0;
  for (std::size_t d = 0; d < dim; ++d) dot += a[d] * b[d];
  const double v = 1.0 - dot / (norm_a * norm_b);
  return std::clamp(v, 0.0, 1.0);
}

namespace serial {

namespace {

template <class T>
void matmul_acc_impl(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t m, std::size_t k,
                     std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
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

template <class T>
void matmul_at_b_acc_impl(std::span<const T> a, std::span<const T> g, std::span<T> c, std::size_t m, std::size_t k,
                          std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a.data() + i * k;
    const T* grow = g.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      if (av == T(0)) continue;
      T* crow = c.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * grow[j];
    }
  }
}

template <class T>
void matmul_a_bt_acc_impl(std::span<const T> g, std::span<const T> b, std::span<T> c, std::size_t m, std::size_t k,
                          std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
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
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
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
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
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
  for (std::size_t i = 0; i < n; ++i) {
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
  for (std::size_t i = 0; i < n; ++i) {
    out[i * n + i] = 0.0f;
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto v = static_cast<float>(cosine_disparity(&rows[i * dim], &rows[j * dim], dim, norms[i], norms[j]));
      out[i * n + j] = v;
      out[j * n + i] = v;
    }
  }
}

}  // namespace serial
}  // namespace aghint::kernels
