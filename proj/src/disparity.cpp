#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "aghint/disparity.hpp"
#include "aghint/kernels.hpp"

namespace aghint::disparity {

double disparity_discrete(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DataError(fmt::format("disparity: dimension mismatch {} vs {}", a.size(), b.size()));
  }
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double x = a[d];
    const double y = b[d];
    if ((x != 0.0 && x != 1.0) || (y != 0.0 && y != 1.0)) {
      throw DataError(fmt::format("disparity: non-binary entry at {}", d));
    }
    inter += (x == 1.0 && y == 1.0);
    uni += (x == 1.0 || y == 1.0);
  }
  if (uni == 0) return 0.0;
  return 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
}

double disparity_continuous(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DataError(fmt::format("disparity: dimension mismatch {} vs {}", a.size(), b.size()));
  }
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    na += a[d] * a[d];
    nb += b[d] * b[d];
  }
  if (na == 0.0 || nb == 0.0) throw DataError("disparity: cosine of a zero vector is undefined");
  return kernels::cosine_disparity(a.data(), b.data(), a.size(), std::sqrt(na), std::sqrt(nb));
}

DisparityMatrix DisparityMatrix::compute(const hin::HeteroGraph& graph, const MatrixOptions& options) {
  DisparityMatrix m;
  const auto& attr = graph.attributes(graph.target_type());
  const auto& info = graph.type_info(graph.target_type());
  m.n_ = attr.rows;
  m.kind_ = info.kind;
  m.dense_ = m.n_ <= options.dense_limit;
  if (m.kind_ == hin::AttributeKind::discrete) {
    m.words_ = (attr.cols + 63) / 64;
    m.bits_.assign(m.n_ * m.words_, 0);
    for (std::size_t i = 0; i < m.n_; ++i) {
      const auto row = attr.row(i);
      for (std::size_t d = 0; d < attr.cols; ++d) {
        if (row[d] == 1.0) {
          m.bits_[i * m.words_ + d / 64] |= std::uint64_t{1} << (d % 64);
        } else if (row[d] != 0.0) {
          throw DataError(fmt::format("disparity: target {} has a non-binary attribute", i));
        }
      }
    }
  } else {
    m.dim_ = attr.cols;
    m.rows_ = attr.values;
    m.norms_.resize(m.n_);
    for (std::size_t i = 0; i < m.n_; ++i) {
      double s = 0.0;
      for (double x : attr.row(i)) s += x * x;
      if (s == 0.0) throw DataError(fmt::format("disparity: target {} has an all-zero attribute vector", i));
      m.norms_[i] = std::sqrt(s);
    }
  }
  if (m.dense_) {
    m.values_.assign(m.n_ * m.n_, 0.0f);
    if (m.kind_ == hin::AttributeKind::discrete) {
      if (options.parallel) {
        kernels::active::jaccard_matrix(m.bits_, m.words_, m.n_, m.values_);
      } else {
        kernels::serial::jaccard_matrix(m.bits_, m.words_, m.n_, m.values_);
      }
    } else {
      if (options.parallel) {
        kernels::active::cosine_matrix(m.rows_, m.norms_, m.dim_, m.n_, m.values_);
      } else {
        kernels::serial::cosine_matrix(m.rows_, m.norms_, m.dim_, m.n_, m.values_);
      }
    }
  }
  return m;
}

double DisparityMatrix::exact(std::size_t i, std::size_t j) const {
  if (i == j) return 0.0;
  if (kind_ == hin::AttributeKind::discrete) {
    return kernels::jaccard_disparity(&bits_[i * words_], &bits_[j * words_], words_);
  }
  return kernels::cosine_disparity(&rows_[i * dim_], &rows_[j * dim_], dim_, norms_[i], norms_[j]);
}

float DisparityMatrix::at(std::size_t i, std::size_t j) const {
  if (dense_) return values_[i * n_ + j];
  // Same orientation as the dense fill, which evaluates (min, max).
  return static_cast<float>(exact(std::min(i, j), std::max(i, j)));
}

void DisparityMatrix::row(std::size_t i, std::span<float> out) const {
  if (dense_) {
    std::copy_n(values_.begin() + static_cast<std::ptrdiff_t>(i * n_), n_, out.begin());
    return;
  }
  for (std::size_t j = 0; j < n_; ++j) out[j] = at(i, j);
}

std::size_t NeighborhoodDisparity::defined_count() const {
  return static_cast<std::size_t>(std::count(defined.begin(), defined.end(), std::uint8_t{1}));
}

NeighborhoodDisparity normalize(std::vector<double> raw, std::vector<std::uint8_t> defined, int k) {
  NeighborhoodDisparity nd;
  nd.k = k;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!defined[i]) continue;
    lo = std::min(lo, raw[i]);
    hi = std::max(hi, raw[i]);
  }
  if (!(lo <= hi)) throw DataError("neighborhood disparity: no target has a same-type neighbour within range");
  const double range = hi - lo;
  nd.values.assign(raw.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!defined[i]) continue;
    nd.values[i] = range > 0.0 ? (raw[i] - lo) / range : 0.0;
  }
  nd.raw = std::move(raw);
  nd.defined = std::move(defined);
  return nd;
}

NeighborhoodDisparity neighborhood_disparity(const hin::HeteroGraph& graph, int k) {
  if (k < 1) throw UsageError(fmt::format("neighborhood disparity: k must be >= 1, got {}", k));
  MatrixOptions opts;
  opts.dense_limit = 0;  // element values only; no need to materialise the matrix
  const DisparityMatrix m = DisparityMatrix::compute(graph, opts);
  const auto targets = graph.targets();
  const auto n = static_cast<std::ptrdiff_t>(targets.size());
  std::vector<double> raw(targets.size(), std::numeric_limits<double>::quiet_NaN());
  std::vector<std::uint8_t> defined(targets.size(), 0);
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto nbrs = hin::k_hop_same_type(graph, targets[i], k);
    if (nbrs.empty()) continue;
    double sum = 0.0;
    for (auto u : nbrs) sum += m.exact(static_cast<std::size_t>(i), static_cast<std::size_t>(graph.local_id(u)));
    raw[i] = sum / static_cast<double>(nbrs.size());
    defined[i] = 1;
  }
  return normalize(std::move(raw), std::move(defined), k);
}

int bucket_index(double value, int buckets) {
  int b = static_cast<int>(std::floor(value * buckets));
  return std::clamp(b, 0, buckets - 1);
}

std::vector<std::size_t> BucketAssignment::counts() const {
  std::vector<std::size_t> c(static_cast<std::size_t>(std::max(bucket_count(), 0)), 0);
  for (int b : bucket_of) {
    if (b >= 0) ++c[b];
  }
  return c;
}

BucketAssignment bucketize(const NeighborhoodDisparity& nd, int buckets) {
  if (buckets < 2) throw UsageError(fmt::format("bucketize: need at least 2 buckets, got {}", buckets));
  BucketAssignment out;
  out.boundaries.resize(buckets + 1);
  for (int b = 0; b <= buckets; ++b) out.boundaries[b] = static_cast<double>(b) / buckets;
  out.bucket_of.assign(nd.values.size(), -1);
  for (std::size_t i = 0; i < nd.values.size(); ++i) {
    if (nd.defined[i]) out.bucket_of[i] = bucket_index(nd.values[i], buckets);
  }
  return out;
}

}  // namespace aghint::disparity
