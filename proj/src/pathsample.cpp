#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include "json.hpp"

#include "aghint/pathsample.hpp"

namespace aghint::pathsample {

BfsTree::BfsTree(std::size_t node_count)
    : dist_(node_count, -1), parent_(node_count, -1), parent_slot_(node_count, -1) {}

void BfsTree::run(const hin::HeteroGraph& graph, NodeId source, int max_depth, std::size_t max_nodes) {
  for (NodeId v : order_) {
    dist_[v] = -1;
    parent_[v] = -1;
    parent_slot_[v] = -1;
  }
  order_.clear();
  source_ = source;
  dist_[source] = 0;
  order_.push_back(source);
  if (order_.size() >= max_nodes) return;
  for (std::size_t head = 0; head < order_.size(); ++head) {
    const NodeId u = order_[head];
    if (dist_[u] >= max_depth) break;  // discovery order is nondecreasing in depth
    for (const auto& nb : graph.neighbors(u)) {
      if (dist_[nb.node] >= 0) continue;
      dist_[nb.node] = dist_[u] + 1;
      parent_[nb.node] = u;
      parent_slot_[nb.node] = nb.slot;
      order_.push_back(nb.node);
      if (order_.size() >= max_nodes) return;
    }
  }
}

std::vector<NodeId> BfsTree::path_to(NodeId v) const {
  std::vector<NodeId> path;
  if (dist_[v] < 0) return path;
  for (NodeId x = v; x != -1; x = parent_[x]) path.push_back(x);
  std::reverse(path.begin(), path.end());
  return path;
}

std::vector<SlotId> BfsTree::slots_to(NodeId v) const {
  std::vector<SlotId> slots;
  if (dist_[v] < 0) return slots;
  for (NodeId x = v; x != source_; x = parent_[x]) slots.push_back(parent_slot_[x]);
  std::reverse(slots.begin(), slots.end());
  return slots;
}

namespace {

void check_node(const hin::HeteroGraph& graph, NodeId v) {
  if (v < 0 || static_cast<std::size_t>(v) >= graph.node_count()) {
    throw DataError(fmt::format("invalid node id {}", v));
  }
}

// Candidates of the same type within `radius` hops, best first.
void rank_candidates(const BfsTree& bfs, const hin::HeteroGraph& graph, std::size_t i, std::span<const float> row,
                     int radius, int k, bool largest, std::vector<NodeId>& out) {
  out.clear();
  if (k <= 0) return;
  const NodeId self = graph.targets()[i];
  for (NodeId v : bfs.order()) {
    if (v == self || !graph.is_target(v)) continue;
    const int d = bfs.distance(v);
    if (d > radius) continue;
    out.push_back(v);
  }
  auto better = [&](NodeId a, NodeId b) {
    const float da = row[graph.local_id(a)];
    const float db = row[graph.local_id(b)];
    if (da != db) return largest ? da > db : da < db;
    return a < b;
  };
  const auto keep = std::min<std::size_t>(static_cast<std::size_t>(k), out.size());
  std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(keep), out.end(), better);
  out.resize(keep);
}

void append_path_nodes(const std::vector<NodeId>& path, std::vector<NodeId>& seq, std::vector<std::uint8_t>& in_seq) {
  for (NodeId v : path) {
    if (in_seq[v]) continue;
    in_seq[v] = 1;
    seq.push_back(v);
  }
}

}  // namespace

std::optional<std::vector<NodeId>> shortest_path(const hin::HeteroGraph& graph, NodeId u, NodeId v, int cap) {
  check_node(graph, u);
  check_node(graph, v);
  if (u == v) throw UsageError("shortest_path: endpoints must differ");
  if (cap < 1) throw UsageError("shortest_path: cap must be >= 1");
  BfsTree bfs(graph.node_count());
  bfs.run(graph, u, cap);
  if (bfs.distance(v) < 0) return std::nullopt;
  return bfs.path_to(v);
}

TopBottom select_top_bottom(const disparity::DisparityMatrix& d, const hin::HeteroGraph& graph, int k_top,
                            int k_btm, int r_top, int r_btm) {
  if (k_top < 0 || k_btm < 0) throw UsageError("select_top_bottom: k must be >= 0");
  TopBottom out;
  const auto targets = graph.targets();
  BfsTree bfs(graph.node_count());
  std::vector<float> row(d.size());
  std::vector<NodeId> top;
  std::vector<NodeId> bottom;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    bfs.run(graph, targets[i], std::max({r_top, r_btm, 0}));
    d.row(i, row);
    rank_candidates(bfs, graph, i, row, r_top, k_top, true, top);
    rank_candidates(bfs, graph, i, row, r_btm, k_btm, false, bottom);
    out.top.push_row(top);
    out.bottom.push_row(bottom);
  }
  return out;
}

WeightResult build_message_weights(const hin::HeteroGraph& graph, const Ragged& top_k, double alpha, int cap,
                                   double w_min) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw UsageError(fmt::format("decay rate {} outside (0, 1]", alpha));
  WeightResult out;
  out.weights.assign(graph.edge_count(), 1.0);
  const auto targets = graph.targets();
  BfsTree bfs(graph.node_count());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (top_k[i].empty()) continue;
    bfs.run(graph, targets[i], cap);
    for (NodeId j : top_k[i]) {
      if (bfs.distance(j) < 0) {
        ++out.skipped_pairs;
        continue;
      }
      for (SlotId s : bfs.slots_to(j)) {
        const double w = std::max(out.weights[s] * alpha, w_min);
        out.weights[s] = w;
        out.weights[hin::HeteroGraph::reverse_slot(s)] = w;
      }
    }
  }
  return out;
}

SequenceResult build_attr_sequences(const hin::HeteroGraph& graph, const Ragged& bottom_k, int n, int cap) {
  if (n < 1) throw UsageError("build_attr_sequences: n must be >= 1");
  SequenceResult out;
  const auto targets = graph.targets();
  BfsTree bfs(graph.node_count());
  std::vector<std::uint8_t> in_seq(graph.node_count(), 0);
  std::vector<NodeId> seq;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    seq.assign(1, targets[i]);
    in_seq[targets[i]] = 1;
    if (!bottom_k[i].empty()) bfs.run(graph, targets[i], cap);
    for (NodeId j : bottom_k[i]) {
      if (bfs.distance(j) < 0) {
        ++out.skipped_pairs;
        continue;
      }
      append_path_nodes(bfs.path_to(j), seq, in_seq);
    }
    for (NodeId v : seq) in_seq[v] = 0;
    if (seq.size() > static_cast<std::size_t>(n)) seq.resize(n);
    out.sequences.push_row(seq);
  }
  return out;
}

Ragged build_context_sequences(const hin::HeteroGraph& graph, int n) {
  if (n < 1) throw UsageError("build_context_sequences: n must be >= 1");
  Ragged out;
  BfsTree bfs(graph.node_count());
  for (NodeId t : graph.targets()) {
    bfs.run(graph, t, static_cast<int>(graph.node_count()), static_cast<std::size_t>(n));
    const auto order = bfs.order();
    out.push_row(order.first(std::min<std::size_t>(order.size(), static_cast<std::size_t>(n))));
  }
  return out;
}

void GuidanceParams::validate() const {
  if (k_top < 0 || k_btm < 0) throw UsageError("guidance: k_top and k_btm must be >= 0");
  if (n < 1) throw UsageError("guidance: sequence length n must be >= 1");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw UsageError(fmt::format("guidance: alpha {} outside (0, 1]", alpha));
  if (r_top < 1 || r_btm < 1) throw UsageError("guidance: hop caps must be >= 1");
  if (!(w_min > 0.0 && w_min <= 1.0)) throw UsageError("guidance: w_min must be in (0, 1]");
}

nlohmann::json GuidanceParams::to_json() const {
  return {{"k_top", k_top}, {"k_btm", k_btm}, {"n", n},         {"alpha", alpha},
          {"r_top", r_top}, {"r_btm", r_btm}, {"w_min", w_min}, {"mode", mode == SequenceMode::attribute ? "attribute" : "context"}};
}

GuidanceParams GuidanceParams::from_json(const nlohmann::json& j) {
  GuidanceParams p;
  p.k_top = j.at("k_top").get<int>();
  p.k_btm = j.at("k_btm").get<int>();
  p.n = j.at("n").get<int>();
  p.alpha = j.at("alpha").get<double>();
  p.r_top = j.at("r_top").get<int>();
  p.r_btm = j.at("r_btm").get<int>();
  p.w_min = j.at("w_min").get<double>();
  const auto mode = j.at("mode").get<std::string>();
  if (mode != "attribute" && mode != "context") throw DataError(fmt::format("guidance: unknown mode '{}'", mode));
  p.mode = mode == "attribute" ? SequenceMode::attribute : SequenceMode::context;
  return p;
}

std::string GuidanceParams::hash() const { return sha256_hex(to_json().dump()); }

std::string GuidanceSets::key() const { return sha256_hex(graph_hash + ":" + params.hash()); }

namespace {

struct TargetGuidance {
  std::vector<NodeId> top;
  std::vector<NodeId> bottom;
  std::vector<NodeId> sequence;
  std::vector<SlotId> decayed;  // one entry per (pair, slot on its path)
  std::size_t skipped_top = 0;
  std::size_t skipped_bottom = 0;
};

struct Workspace {
  BfsTree bfs;
  std::vector<float> row;
  std::vector<std::uint8_t> in_seq;
  Workspace(std::size_t nodes, std::size_t targets) : bfs(nodes), row(targets), in_seq(nodes, 0) {}
};

void guide_target(const hin::HeteroGraph& graph, const disparity::DisparityMatrix& d, const GuidanceParams& p,
                  std::size_t i, Workspace& ws, TargetGuidance& out) {
  const NodeId self = graph.targets()[i];
  ws.bfs.run(graph, self, std::max(p.r_top, p.r_btm));
  d.row(i, ws.row);
  rank_candidates(ws.bfs, graph, i, ws.row, p.r_top, p.k_top, true, out.top);
  rank_candidates(ws.bfs, graph, i, ws.row, p.r_btm, p.k_btm, false, out.bottom);
  // Candidates lie within their radius, so every path exists within the cap.
  for (NodeId j : out.top) {
    const auto slots = ws.bfs.slots_to(j);
    out.decayed.insert(out.decayed.end(), slots.begin(), slots.end());
  }
  out.sequence.assign(1, self);
  ws.in_seq[self] = 1;
  for (NodeId j : out.bottom) append_path_nodes(ws.bfs.path_to(j), out.sequence, ws.in_seq);
  for (NodeId v : out.sequence) ws.in_seq[v] = 0;
  if (out.sequence.size() > static_cast<std::size_t>(p.n)) out.sequence.resize(p.n);
}

}  // namespace

GuidanceSets compute_guidance(const hin::HeteroGraph& graph, const GuidanceParams& params,
                              const GuidanceOptions& options) {
  params.validate();
  GuidanceSets out;
  out.params = params;
  out.graph_hash = graph.hash();
  const std::size_t n_targets = graph.target_count();

  if (params.mode == SequenceMode::context) {
    out.message_weights.assign(graph.edge_count(), 1.0);
    out.attr_sequences = build_context_sequences(graph, params.n);
    for (std::size_t i = 0; i < n_targets; ++i) {
      out.top_k.push_row({});
      out.bottom_k.push_row({});
    }
    return out;
  }

  disparity::MatrixOptions mopts;
  mopts.dense_limit = options.dense_limit;
  mopts.parallel = options.parallel;
  const auto d = disparity::DisparityMatrix::compute(graph, mopts);

  std::vector<TargetGuidance> per_target(n_targets);
  const auto count = static_cast<std::ptrdiff_t>(n_targets);
#pragma omp parallel if (options.parallel)
  {
    Workspace ws(graph.node_count(), n_targets);
#pragma omp for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < count; ++i) guide_target(graph, d, params, static_cast<std::size_t>(i), ws, per_target[i]);
  }

  // Canonical merge in target order.
  std::vector<std::uint32_t> traversals(graph.undirected_edge_count(), 0);
  for (auto& t : per_target) {
    out.top_k.push_row(t.top);
    out.bottom_k.push_row(t.bottom);
    out.attr_sequences.push_row(t.sequence);
    for (SlotId s : t.decayed) ++traversals[hin::HeteroGraph::undirected_of(s)];
    out.skipped_top += t.skipped_top;
    out.skipped_bottom += t.skipped_bottom;
  }
  out.message_weights.assign(graph.edge_count(), 1.0);
  for (std::size_t e = 0; e < traversals.size(); ++e) {
    double w = 1.0;
    for (std::uint32_t c = 0; c < traversals[e]; ++c) w = std::max(w * params.alpha, params.w_min);
    out.message_weights[2 * e] = w;
    out.message_weights[2 * e + 1] = w;
  }
  return out;
}

}  // namespace aghint::pathsample
