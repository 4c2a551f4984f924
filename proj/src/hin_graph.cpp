#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include <fmt/format.h>

#include "aghint/hin.hpp"

namespace aghint::hin {

namespace {

void fill_missing_attributes(GraphParts& parts, const std::vector<std::size_t>& counts) {
  parts.attributes.resize(parts.node_types.size());
  for (std::size_t t = 0; t < parts.node_types.size(); ++t) {
    const auto& info = parts.node_types[t];
    if (info.has_features) continue;
    if (info.dim < 1 || static_cast<std::size_t>(info.dim) <= t) {
      throw DataError(fmt::format(
          "node type '{}' has no features and declared dim {} cannot hold a one-hot type indicator",
          info.name, info.dim));
    }
    AttributeMatrix m;
    m.rows = counts[t];
    m.cols = static_cast<std::size_t>(info.dim);
    m.values.assign(m.rows * m.cols, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) m.values[r * m.cols + t] = 1.0;
    parts.attributes[t] = std::move(m);
  }
}

std::string content_hash(const GraphParts& p) {
  Sha256 h;
  h.update("aghint-graph-v1");
  h.update_value(p.node_types.size());
  for (const auto& t : p.node_types) {
    h.update(t.name).update_value(t.kind).update_value(t.dim).update_value(t.has_features);
  }
  h.update_value(p.edge_types.size());
  for (const auto& t : p.edge_types) {
    h.update(t.name).update_value(t.src_type).update_value(t.dst_type).update_value(t.reverse);
  }
  h.update_value(p.target_type);
  h.update_span(std::span<const int>(p.node_type_of));
  h.update_span(std::span<const NodeId>(p.local_id_of));
  for (const auto& e : p.edges) h.update_value(e.src).update_value(e.dst).update_value(e.type);
  for (const auto& a : p.attributes) {
    h.update_value(a.rows).update_value(a.cols);
    h.update_span(std::span<const double>(a.values));
  }
  h.update_value(p.labels.multi_label).update_value(p.labels.num_classes);
  h.update_span(std::span<const std::int32_t>(p.labels.class_of));
  h.update_span(std::span<const std::uint8_t>(p.labels.indicator));
  h.update_span(std::span<const std::uint8_t>(p.labels.labeled));
  h.update_span(std::span<const SplitTag>(p.split));
  return h.hex();
}

}  // namespace

HeteroGraph HeteroGraph::build(GraphParts parts) {
  const std::size_t n_types = parts.node_types.size();
  const std::size_t n_edge_types = parts.edge_types.size();
  if (n_types == 0) throw DataError("graph declares no node types");
  if (n_types + n_edge_types <= 2) {
    throw DataError(fmt::format("not a heterogeneous network: {} node types + {} edge types <= 2",
                                n_types, n_edge_types));
  }
  if (parts.target_type < 0 || static_cast<std::size_t>(parts.target_type) >= n_types) {
    throw DataError(fmt::format("target type {} out of range", parts.target_type));
  }
  const std::size_t n = parts.node_type_of.size();
  if (parts.local_id_of.size() != n) throw DataError("node type and local id tables differ in length");
  if (n > static_cast<std::size_t>(std::numeric_limits<NodeId>::max())) {
    throw DataError("node count exceeds the 32-bit id range");
  }

  HeteroGraph g;
  g.by_type_.assign(n_types, {});
  std::vector<std::size_t> counts(n_types, 0);
  for (std::size_t v = 0; v < n; ++v) {
    const int t = parts.node_type_of[v];
    if (t < 0 || static_cast<std::size_t>(t) >= n_types) {
      throw DataError(fmt::format("node {} has unknown type {}", v, t));
    }
    ++counts[t];
  }
  for (std::size_t t = 0; t < n_types; ++t) g.by_type_[t].assign(counts[t], -1);
  for (std::size_t v = 0; v < n; ++v) {
    const int t = parts.node_type_of[v];
    const NodeId local = parts.local_id_of[v];
    if (local < 0 || static_cast<std::size_t>(local) >= counts[t] || g.by_type_[t][local] != -1) {
      throw DataError(fmt::format("node {} has invalid or duplicate within-type id {}", v, local));
    }
    g.by_type_[t][local] = static_cast<NodeId>(v);
  }

  for (std::size_t e = 0; e < parts.edges.size(); ++e) {
    const auto& edge = parts.edges[e];
    if (edge.src < 0 || edge.dst < 0 || static_cast<std::size_t>(edge.src) >= n ||
        static_cast<std::size_t>(edge.dst) >= n) {
      throw DataError(fmt::format("edge {} has dangling endpoint ({}, {})", e, edge.src, edge.dst));
    }
    if (edge.type < 0 || static_cast<std::size_t>(edge.type) >= n_edge_types) {
      throw DataError(fmt::format("edge {} has unknown edge type {}", e, edge.type));
    }
    const auto& et = parts.edge_types[edge.type];
    if ((et.src_type >= 0 && parts.node_type_of[edge.src] != et.src_type) ||
        (et.dst_type >= 0 && parts.node_type_of[edge.dst] != et.dst_type)) {
      throw DataError(fmt::format("edge {} endpoints do not match edge type '{}'", e, et.name));
    }
  }
  for (const auto& et : parts.edge_types) {
    if (et.reverse >= static_cast<int>(n_edge_types)) {
      throw DataError(fmt::format("edge type '{}' has unknown reverse type {}", et.name, et.reverse));
    }
  }

  fill_missing_attributes(parts, counts);
  for (std::size_t t = 0; t < n_types; ++t) {
    const auto& info = parts.node_types[t];
    const auto& a = parts.attributes[t];
    if (a.rows != counts[t] || a.cols != static_cast<std::size_t>(info.dim) ||
        a.values.size() != a.rows * a.cols) {
      throw DataError(fmt::format("attributes of type '{}' are {}x{}, expected {}x{}", info.name, a.rows,
                                  a.cols, counts[t], info.dim));
    }
    for (double x : a.values) {
      if (!std::isfinite(x)) throw DataError(fmt::format("non-finite attribute in type '{}'", info.name));
      if (info.kind == AttributeKind::discrete && x != 0.0 && x != 1.0) {
        throw DataError(fmt::format("discrete attribute of type '{}' is not binary: {}", info.name, x));
      }
    }
  }

  const std::size_t n_targets = counts[parts.target_type];
  auto& labels = parts.labels;
  if (labels.num_classes < 1) throw DataError("label set declares no classes");
  if (labels.labeled.size() != n_targets) throw DataError("label table does not cover every target");
  if (labels.multi_label) {
    if (labels.indicator.size() != n_targets * labels.num_classes) {
      throw DataError("multi-label indicator has the wrong size");
    }
  } else {
    if (labels.class_of.size() != n_targets) throw DataError("class table does not cover every target");
    for (std::size_t t = 0; t < n_targets; ++t) {
      const bool ok = labels.labeled[t] ? (labels.class_of[t] >= 0 && labels.class_of[t] < labels.num_classes)
                                        : labels.class_of[t] == -1;
      if (!ok) throw DataError(fmt::format("target {} has invalid class {}", t, labels.class_of[t]));
    }
  }
  if (!parts.split.empty()) {
    if (parts.split.size() != n_targets) throw DataError("split table does not cover every target");
    for (std::size_t t = 0; t < n_targets; ++t) {
      if ((parts.split[t] != SplitTag::none) != labels.is_labeled(t)) {
        throw DataError(fmt::format("split must list exactly the labeled targets (target {})", t));
      }
    }
  }

  // Adjacency: both directed slots of every undirected edge.
  g.row_ptr_.assign(n + 1, 0);
  for (const auto& e : parts.edges) {
    ++g.row_ptr_[e.src + 1];
    ++g.row_ptr_[e.dst + 1];
  }
  for (std::size_t v = 0; v < n; ++v) g.row_ptr_[v + 1] += g.row_ptr_[v];
  g.adjacency_.resize(g.row_ptr_[n]);
  std::vector<std::size_t> fill(g.row_ptr_.begin(), g.row_ptr_.end() - 1);
  for (std::size_t e = 0; e < parts.edges.size(); ++e) {
    const auto& edge = parts.edges[e];
    const auto s = static_cast<SlotId>(2 * e);
    g.adjacency_[fill[edge.src]++] = {edge.dst, s};
    g.adjacency_[fill[edge.dst]++] = {edge.src, s + 1};
  }
  for (std::size_t v = 0; v < n; ++v) {
    std::sort(g.adjacency_.begin() + g.row_ptr_[v], g.adjacency_.begin() + g.row_ptr_[v + 1],
              [](const Neighbor& a, const Neighbor& b) {
                return a.node != b.node ? a.node < b.node : a.slot < b.slot;
              });
  }

  g.parts_ = std::move(parts);
  g.hash_ = content_hash(g.parts_);
  return g;
}

int HeteroGraph::slot_type(SlotId s) const {
  const int t = parts_.edges[s >> 1].type;
  if ((s & 1) == 0) return t;
  const int rev = parts_.edge_types[t].reverse;
  return rev >= 0 ? rev : t;
}

std::vector<int> bfs_distances(const HeteroGraph& graph, NodeId source, int max_depth) {
  if (source < 0 || static_cast<std::size_t>(source) >= graph.node_count()) {
    throw DataError(fmt::format("invalid node id {}", source));
  }
  std::vector<int> dist(graph.node_count(), -1);
  std::deque<NodeId> queue{source};
  dist[source] = 0;
  while (!queue.empty()) {
    const NodeId u = queue.front();
    queue.pop_front();
    if (dist[u] >= max_depth) continue;
    for (const auto& nb : graph.neighbors(u)) {
      if (dist[nb.node] < 0) {
        dist[nb.node] = dist[u] + 1;
        queue.push_back(nb.node);
      }
    }
  }
  return dist;
}

std::vector<NodeId> k_hop_same_type(const HeteroGraph& graph, NodeId v, int k) {
  if (k < 1) throw UsageError(fmt::format("hop radius must be >= 1, got {}", k));
  const auto dist = bfs_distances(graph, v, k);
  const int t = graph.node_type(v);
  std::vector<NodeId> out;
  for (NodeId u : graph.nodes_of_type(t)) {
    if (u != v && dist[u] > 0) out.push_back(u);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace aghint::hin
