#pragma once

#include <cstdint>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "aghint/disparity.hpp"
#include "aghint/hin.hpp"

namespace aghint::pathsample {

using hin::NodeId;
using hin::SlotId;

// Per-target lists stored contiguously.
struct Ragged {
  std::vector<std::size_t> offsets{0};
  std::vector<NodeId> values;

  std::size_t size() const { return offsets.size() - 1; }
  std::span<const NodeId> operator[](std::size_t i) const {
    return {values.data() + offsets[i], values.data() + offsets[i + 1]};
  }
  void push_row(std::span<const NodeId> row) {
    values.insert(values.end(), row.begin(), row.end());
    offsets.push_back(values.size());
  }
  bool operator==(const Ragged&) const = default;
};

// Reusable BFS state. Neighbours are explored in ascending node id, and a
// node's parent is the first node that reached it, so every (source, node)
// pair has exactly one shortest path.
class BfsTree {
 public:
  explicit BfsTree(std::size_t node_count);

  // Stops expanding past `max_depth`, or once `max_nodes` nodes are reached.
  void run(const hin::HeteroGraph& graph, NodeId source, int max_depth, std::size_t max_nodes = SIZE_MAX);
  int distance(NodeId v) const { return dist_[v]; }
  // Nodes reached, in discovery order (source first).
  std::span<const NodeId> order() const { return order_; }
  // Path source..v (inclusive), empty if v was not reached.
  std::vector<NodeId> path_to(NodeId v) const;
  // Slots along the path source..v.
  std::vector<SlotId> slots_to(NodeId v) const;

 private:
  NodeId source_ = -1;
  std::vector<int> dist_;
  std::vector<NodeId> parent_;
  std::vector<SlotId> parent_slot_;
  std::vector<NodeId> order_;
};

std::optional<std::vector<NodeId>> shortest_path(const hin::HeteroGraph& graph, NodeId u, NodeId v, int cap);

struct TopBottom {
  Ragged top;     // per target, descending disparity (ties by ascending id)
  Ragged bottom;  // per target, ascending disparity (ties by ascending id)
};

TopBottom select_top_bottom(const disparity::DisparityMatrix& d, const hin::HeteroGraph& graph, int k_top,
                            int k_btm, int r_top, int r_btm);

inline constexpr double kDefaultWeightFloor = 1e-3;

struct WeightResult {
  std::vector<double> weights;     // per directed slot
  std::size_t skipped_pairs = 0;   // (target, top) pairs with no path within cap
};

WeightResult build_message_weights(const hin::HeteroGraph& graph, const Ragged& top_k, double alpha, int cap,
                                   double w_min = kDefaultWeightFloor);

struct SequenceResult {
  Ragged sequences;
  std::size_t skipped_pairs = 0;
};

SequenceResult build_attr_sequences(const hin::HeteroGraph& graph, const Ragged& bottom_k, int n, int cap);

// Attribute-blind sequences: the target followed by nodes in BFS order.
Ragged build_context_sequences(const hin::HeteroGraph& graph, int n);

enum class SequenceMode : std::uint8_t { attribute, context };

struct GuidanceParams {
  int k_top = 5;
  int k_btm = 5;
  int n = 16;
  double alpha = 0.8;
  int r_top = 4;
  int r_btm = 6;
  double w_min = kDefaultWeightFloor;
  SequenceMode mode = SequenceMode::attribute;

  void validate() const;
  nlohmann::json to_json() const;
  static GuidanceParams from_json(const nlohmann::json& j);
  std::string hash() const;
  bool operator==(const GuidanceParams&) const = default;
};

struct GuidanceSets {
  GuidanceParams params;
  std::string graph_hash;
  Ragged top_k;
  Ragged bottom_k;
  Ragged attr_sequences;
  std::vector<double> message_weights;
  std::size_t skipped_top = 0;
  std::size_t skipped_bottom = 0;

  std::string key() const;  // hash of (graph hash, params)
  bool operator==(const GuidanceSets&) const = default;
};

struct GuidanceOptions {
  bool parallel = true;
  std::size_t dense_limit = 20000;
};

// One BFS per target feeds all four structures. In context mode the
// weights are all ones and the sequences are BFS-ordered.
GuidanceSets compute_guidance(const hin::HeteroGraph& graph, const GuidanceParams& params,
                              const GuidanceOptions& options = {});

void save_guidance(const GuidanceSets& sets, const std::filesystem::path& path);
GuidanceSets load_guidance(const std::filesystem::path& path);
nlohmann::json guidance_to_json(const GuidanceSets& sets);

}  // namespace aghint::pathsample
