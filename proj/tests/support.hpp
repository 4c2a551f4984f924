#pragma once

// Shared by the unit tests and the acceptance runner: random instances and
// reference implementations that do not reuse library code paths.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "aghint/hin.hpp"
#include "aghint/model.hpp"
#include "aghint/ndiff.hpp"
#include "aghint/pathsample.hpp"

namespace aghint::testkit {

struct RandomGraphSpec {
  int targets = 12;
  int aux = 8;           // split over two aux types
  double p_edge = 0.15;  // per candidate pair
  int target_dim = 10;
  int classes = 3;
  bool target_links = true;  // allow target-target edges
  bool continuous_targets = false;
};

// Simple graph (no parallel edges, no self-loops); targets first.
hin::HeteroGraph random_graph(std::uint64_t seed, const RandomGraphSpec& spec = {});

// ---- BFS oracle ----------------------------------------------------------------

// Adjacency lists rebuilt from the raw edge list, not the graph's CSR.
std::vector<std::vector<hin::NodeId>> oracle_adjacency(const hin::HeteroGraph& g);
// Distances by plain queue BFS; -1 when unreachable.
std::vector<int> oracle_distances(const std::vector<std::vector<hin::NodeId>>& adj, hin::NodeId src);
// True when `path` is a walk along graph edges from u to v of length dist(u, v).
bool oracle_is_shortest_path(const std::vector<std::vector<hin::NodeId>>& adj, const std::vector<hin::NodeId>& path,
                             hin::NodeId u, hin::NodeId v);
// Nodes x with d(u,x) + d(x,v) == d(u,v).
std::vector<std::uint8_t> oracle_on_some_shortest_path(const std::vector<std::vector<hin::NodeId>>& adj,
                                                       hin::NodeId u, hin::NodeId v);

// ---- dense attention oracles ------------------------------------------------------

using Mat = std::vector<std::vector<double>>;

Mat random_mat(std::size_t r, std::size_t c, std::uint64_t seed, double scale = 1.0);
Mat to_mat(const nd::Tensor<double>& t);
double max_abs_diff(const Mat& a, const Mat& b);

// One AGM layer with a materialised |V| x |V| attention matrix, one head per
// (W, a) pair, heads averaged, elu output. a has 2d entries: [a_dst; a_src].
// `slot_weight(j, i)` is the weight of the edge j -> i.
Mat dense_agm(const hin::HeteroGraph& g, const Mat& h, const std::vector<Mat>& W, const std::vector<std::vector<double>>& a,
              const std::vector<double>& slot_weights, double slope, double elu_alpha);

// One transformer layer on explicit sequences of rows of `x` (one per
// sequence entry); returns one row per position, or only the first position
// of each sequence when `first_only`.
Mat dense_agt(const Mat& x, const std::vector<std::vector<int>>& sequences, const Mat& Wq, const Mat& Wk, const Mat& Wv,
              const Mat& Wo, const std::vector<double>& gain, const std::vector<double>& bias, int heads, double eps,
              bool first_only);

// ---- gradient checks ----------------------------------------------------------------

struct PrimitiveCheck {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t entries = 0;
};

// grad_check of every tape primitive on random shapes drawn from `seed`.
std::vector<PrimitiveCheck> primitive_grad_checks(std::uint64_t seed);

// Full forward + loss on a synthetic graph of ~30 nodes, f64, dropout off.
nd::GradCheckResult full_model_grad_check(std::uint64_t seed, model::Variant variant = model::Variant::full);

// Max |library - dense oracle| for one AGM layer (random slot weights) and one
// AGT layer on a random 20-node graph, 64-bit.
double agm_oracle_gap(std::uint64_t seed, int heads);
double agt_oracle_gap(std::uint64_t seed, int heads, bool first_layer, bool final_layer);

// Full forward with decay rate 1 against the unit-weight path, compared bitwise.
bool decay_identity_holds(std::uint64_t seed);

// ---- fixtures ----------------------------------------------------------------

// DBLP-layout directory with the benchmark's node/edge/type counts: authors
// (334 binary attributes, 4 classes), papers, terms, venues; author-paper,
// paper-term and paper-venue edges plus their declared reverse types.
void write_dblp_fixture(const std::filesystem::path& dir, std::uint64_t seed);

std::filesystem::path temp_dir(const std::string& tag);

}  // namespace aghint::testkit
