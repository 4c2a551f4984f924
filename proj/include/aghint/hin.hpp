#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aghint/common.hpp"

namespace aghint::hin {

using NodeId = std::int32_t;
using SlotId = std::int32_t;  // directed edge slot; slots 2e and 2e+1 belong to undirected edge e

enum class AttributeKind : std::uint8_t { discrete, continuous };

struct NodeType {
  std::string name;
  AttributeKind kind = AttributeKind::continuous;
  int dim = 0;
  bool has_features = true;  // false: filled with a one-hot type indicator
  bool operator==(const NodeType&) const = default;
};

struct EdgeType {
  std::string name;
  int src_type = -1;  // -1: any
  int dst_type = -1;
  int reverse = -1;   // type of the reverse slot; -1: same type
  bool operator==(const EdgeType&) const = default;
};

struct UndirectedEdge {
  NodeId src = 0;
  NodeId dst = 0;
  int type = 0;
  bool operator==(const UndirectedEdge&) const = default;
};

// Row-major dense matrix of attribute values for one node type.
struct AttributeMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
  std::span<double> row(std::size_t r) { return {values.data() + r * cols, cols}; }
  bool operator==(const AttributeMatrix&) const = default;
};

// Labels are indexed by target within-type id.
struct Labels {
  bool multi_label = false;
  int num_classes = 0;
  std::vector<std::int32_t> class_of;   // multi-class: class index, -1 when unlabeled
  std::vector<std::uint8_t> indicator;  // multi-label: targets x classes
  std::vector<std::uint8_t> labeled;

  bool is_labeled(std::size_t t) const { return labeled[t] != 0; }
  bool has(std::size_t t, int c) const {
    return multi_label ? indicator[t * num_classes + c] != 0 : class_of[t] == c;
  }
  bool operator==(const Labels&) const = default;
};

enum class SplitTag : std::int8_t { none = -1, train = 0, val = 1, test = 2 };

// Everything a dataset directory holds, before the adjacency is built.
struct GraphParts {
  std::vector<NodeType> node_types;
  std::vector<EdgeType> edge_types;
  int target_type = 0;
  std::vector<int> node_type_of;        // per global id
  std::vector<NodeId> local_id_of;      // per global id, within-type id
  std::vector<UndirectedEdge> edges;    // input order
  std::vector<AttributeMatrix> attributes;  // per node type; missing ones are filled by build()
  Labels labels;
  std::vector<SplitTag> split;          // per target within-type id; empty when absent
  bool operator==(const GraphParts&) const = default;
};

struct Neighbor {
  NodeId node;
  SlotId slot;  // directed slot from the row node to `node`
};

// Immutable heterogeneous graph. Input edges are undirected; each is stored as
// two directed slots. Adjacency rows are sorted by (neighbor id, slot).
class HeteroGraph {
 public:
  HeteroGraph() = default;

  // Validates and builds the adjacency. Throws DataError.
  static HeteroGraph build(GraphParts parts);

  std::size_t node_count() const { return parts_.node_type_of.size(); }
  std::size_t edge_count() const { return 2 * parts_.edges.size(); }
  std::size_t undirected_edge_count() const { return parts_.edges.size(); }
  std::size_t node_type_count() const { return parts_.node_types.size(); }
  std::size_t edge_type_count() const { return parts_.edge_types.size(); }

  int node_type(NodeId v) const { return parts_.node_type_of[v]; }
  NodeId local_id(NodeId v) const { return parts_.local_id_of[v]; }
  std::span<const NodeId> nodes_of_type(int t) const { return by_type_[t]; }
  const NodeType& type_info(int t) const { return parts_.node_types[t]; }
  const EdgeType& edge_type_info(int t) const { return parts_.edge_types[t]; }

  int target_type() const { return parts_.target_type; }
  std::span<const NodeId> targets() const { return by_type_[parts_.target_type]; }
  std::size_t target_count() const { return by_type_[parts_.target_type].size(); }
  bool is_target(NodeId v) const { return parts_.node_type_of[v] == parts_.target_type; }

  std::span<const Neighbor> neighbors(NodeId v) const {
    return {adjacency_.data() + row_ptr_[v], adjacency_.data() + row_ptr_[v + 1]};
  }
  std::size_t degree(NodeId v) const { return row_ptr_[v + 1] - row_ptr_[v]; }

  NodeId slot_src(SlotId s) const {
    const auto& e = parts_.edges[s >> 1];
    return (s & 1) ? e.dst : e.src;
  }
  NodeId slot_dst(SlotId s) const {
    const auto& e = parts_.edges[s >> 1];
    return (s & 1) ? e.src : e.dst;
  }
  int slot_type(SlotId s) const;
  static SlotId reverse_slot(SlotId s) { return s ^ 1; }
  static std::int32_t undirected_of(SlotId s) { return s >> 1; }

  const AttributeMatrix& attributes(int t) const { return parts_.attributes[t]; }
  std::span<const double> attribute_row(NodeId v) const {
    return parts_.attributes[parts_.node_type_of[v]].row(parts_.local_id_of[v]);
  }

  const Labels& labels() const { return parts_.labels; }
  std::span<const SplitTag> split() const { return parts_.split; }
  const GraphParts& parts() const { return parts_; }

  // SHA-256 over the canonical content.
  const std::string& hash() const { return hash_; }

  bool operator==(const HeteroGraph& other) const { return parts_ == other.parts_; }

 private:
  GraphParts parts_;
  std::vector<std::vector<NodeId>> by_type_;
  std::vector<std::size_t> row_ptr_;
  std::vector<Neighbor> adjacency_;
  std::string hash_;
};

// ---- on-disk format -------------------------------------------------------

enum class FormatIssue {
  missing_file,
  malformed,
  dangling_endpoint,
  dimension_mismatch,
  unknown_type,
  duplicate_id,
  invalid_value,
  missing_label,
};

const char* to_string(FormatIssue issue);

// Diagnostic naming the offending file and 1-based line (0 when not line-bound).
class FormatError : public DataError {
 public:
  FormatError(FormatIssue issue, std::filesystem::path file, std::size_t line, const std::string& detail);
  FormatIssue issue() const noexcept { return issue_; }
  const std::filesystem::path& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  FormatIssue issue_;
  std::filesystem::path file_;
  std::size_t line_;
};

HeteroGraph load_graph(const std::filesystem::path& dir);
void save_graph(const HeteroGraph& graph, const std::filesystem::path& dir);

// ---- synthetic generation ---------------------------------------------------

struct SynthSpec {
  std::uint64_t seed = 7;
  int num_target = 1200;
  int num_aux_types = 2;
  int classes = 3;
  int target_dim = 32;
  std::vector<int> aux_dims{8, 0};     // 0: attributes missing (one-hot fill)
  std::vector<int> aux_nodes{150, 150};
  double rho = 0.8;                    // intra-class attribute correlation
  double prototype_density = 0.25;     // fraction of active bits in a class prototype
  std::vector<double> densities{3.0, 3.0};  // expected links per target, per relation
  double bridge_fraction = 0.5;        // mean per-target probability that a link lands in another community
};

// Throws UsageError on an invalid spec.
void validate(const SynthSpec& spec);
HeteroGraph synth_hin(const SynthSpec& spec);

// ---- neighbourhood queries --------------------------------------------------

// Unweighted BFS distances from `source`, -1 beyond `max_depth` or unreachable.
std::vector<int> bfs_distances(const HeteroGraph& graph, NodeId source, int max_depth);

// Same-type nodes u != v within k hops, ascending id.
std::vector<NodeId> k_hop_same_type(const HeteroGraph& graph, NodeId v, int k);

}  // namespace aghint::hin
