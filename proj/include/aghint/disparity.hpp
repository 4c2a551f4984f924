#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "aghint/hin.hpp"

namespace aghint::disparity {

// 1 - |a ∩ b| / |a ∪ b| over the supports of two binary vectors. Two empty
// supports are identical (0); one empty support against a nonempty one is 1.
double disparity_discrete(std::span<const double> a, std::span<const double> b);

// 1 - cos(a, b), clamped to [0, 1]. Zero vectors are rejected.
double disparity_continuous(std::span<const double> a, std::span<const double> b);

struct MatrixOptions {
  std::size_t dense_limit = 20000;  // above this many targets rows are computed on demand
  bool parallel = true;
};

// Pairwise disparity between target nodes, indexed by target within-type id.
// Symmetric, zero diagonal, entries in [0, 1], stored as 32-bit reals.
class DisparityMatrix {
 public:
  static DisparityMatrix compute(const hin::HeteroGraph& graph, const MatrixOptions& options = {});

  std::size_t size() const { return n_; }
  hin::AttributeKind kind() const { return kind_; }
  bool is_dense() const { return dense_; }

  float at(std::size_t i, std::size_t j) const;
  void row(std::size_t i, std::span<float> out) const;
  // Full-precision value from the element kernel (what `at` rounds).
  double exact(std::size_t i, std::size_t j) const;
  // Empty when the matrix is on-demand.
  std::span<const float> values() const { return values_; }

 private:
  std::size_t n_ = 0;
  hin::AttributeKind kind_ = hin::AttributeKind::discrete;
  bool dense_ = true;
  std::vector<float> values_;
  std::size_t words_ = 0;
  std::vector<std::uint64_t> bits_;
  std::size_t dim_ = 0;
  std::vector<double> rows_;
  std::vector<double> norms_;
};

struct NeighborhoodDisparity {
  int k = 0;
  std::vector<double> raw;            // mean disparity to k-hop same-type neighbours
  std::vector<double> values;         // min-max normalised; NaN where undefined
  std::vector<std::uint8_t> defined;  // node had at least one same-type k-hop neighbour

  std::size_t defined_count() const;
};

NeighborhoodDisparity neighborhood_disparity(const hin::HeteroGraph& graph, int k);
// Normalisation step on its own, exposed for the profile tooling and tests.
NeighborhoodDisparity normalize(std::vector<double> raw, std::vector<std::uint8_t> defined, int k);

struct BucketAssignment {
  std::vector<int> bucket_of;     // per target; -1 when undefined
  std::vector<double> boundaries; // B + 1 ascending values from 0 to 1

  int bucket_count() const { return static_cast<int>(boundaries.size()) - 1; }
  std::vector<std::size_t> counts() const;
};

// Equal-width buckets over [0, 1]; the last bucket is right-closed.
BucketAssignment bucketize(const NeighborhoodDisparity& nd, int buckets);
int bucket_index(double value, int buckets);

}  // namespace aghint::disparity
