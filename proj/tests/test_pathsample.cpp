#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <random>
#include <set>

#include "aghint/pathsample.hpp"
#include "support.hpp"

using namespace aghint;
using namespace aghint::pathsample;
using hin::HeteroGraph;
namespace fs = std::filesystem;

namespace {

// Targets only, joined by the given edges; attribute row i is `attrs[i]`.
HeteroGraph target_graph(int n, const std::vector<std::pair<int, int>>& edges,
                         std::vector<std::vector<double>> attrs = {}) {
  const int dim = attrs.empty() ? 1 : static_cast<int>(attrs[0].size());
  hin::GraphParts p;
  p.node_types = {{"t", hin::AttributeKind::discrete, dim, true}};
  p.edge_types = {{"t-t", 0, 0, -1}, {"t-t-unused", 0, 0, -1}};  // a second relation keeps it heterogeneous
  hin::AttributeMatrix m{static_cast<std::size_t>(n), static_cast<std::size_t>(dim), {}};
  for (int i = 0; i < n; ++i) {
    p.node_type_of.push_back(0);
    p.local_id_of.push_back(i);
    p.labels.class_of.push_back(0);
    p.labels.labeled.push_back(1);
    if (attrs.empty()) m.values.push_back(1.0);
    else m.values.insert(m.values.end(), attrs[i].begin(), attrs[i].end());
  }
  p.attributes = {m};
  p.labels.num_classes = 1;
  for (auto [a, b] : edges) p.edges.push_back({a, b, 0});
  return HeteroGraph::build(p);
}

Ragged rows(const std::vector<std::vector<NodeId>>& r) {
  Ragged out;
  for (const auto& row : r) out.push_row(row);
  return out;
}

Ragged empty_rows(std::size_t n) { return rows(std::vector<std::vector<NodeId>>(n)); }

testkit::RandomGraphSpec sparse_spec() {
  testkit::RandomGraphSpec s;
  s.targets = 25;
  s.aux = 20;
  s.p_edge = 0.07;
  return s;
}

}  // namespace

TEST(ShortestPath, AdjacentAndDisconnected) {
  const auto g = target_graph(4, {{0, 1}, {1, 2}});
  EXPECT_EQ(*shortest_path(g, 0, 1, 3), (std::vector<NodeId>{0, 1}));
  EXPECT_EQ(*shortest_path(g, 0, 2, 3), (std::vector<NodeId>{0, 1, 2}));
  EXPECT_FALSE(shortest_path(g, 0, 3, 10).has_value());
  EXPECT_FALSE(shortest_path(g, 0, 2, 1).has_value());
  EXPECT_THROW(shortest_path(g, 1, 1, 3), UsageError);
  EXPECT_THROW(shortest_path(g, 0, 1, 0), UsageError);
  EXPECT_THROW(shortest_path(g, 0, 9, 3), DataError);
}

TEST(ShortestPath, MatchesBfsOracle) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto g = testkit::random_graph(seed, sparse_spec());
    ASSERT_LE(g.node_count(), 50u);
    const auto adj = testkit::oracle_adjacency(g);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(g.node_count()) - 1);
    for (int q = 0; q < 30; ++q) {
      const NodeId u = pick(rng), v = pick(rng);
      if (u == v) continue;
      const auto dist = testkit::oracle_distances(adj, u);
      const auto p = shortest_path(g, u, v, 6);
      if (dist[v] < 0 || dist[v] > 6) {
        ASSERT_FALSE(p.has_value()) << seed << ":" << u << "->" << v;
      } else {
        ASSERT_TRUE(p.has_value());
        ASSERT_TRUE(testkit::oracle_is_shortest_path(adj, *p, u, v)) << seed << ":" << u << "->" << v;
      }
    }
  }
}

TEST(TopBottom, ZeroKGivesEmptyLists) {
  const auto g = testkit::random_graph(3);
  const auto d = disparity::DisparityMatrix::compute(g);
  const auto tb = select_top_bottom(d, g, 0, 0, 4, 4);
  EXPECT_EQ(tb.top.size(), g.target_count());
  EXPECT_TRUE(tb.top.values.empty());
  EXPECT_TRUE(tb.bottom.values.empty());
  EXPECT_THROW(select_top_bottom(d, g, -1, 0, 4, 4), UsageError);
}

TEST(TopBottom, IdenticalAttributesTieByNodeId) {
  // Star around 0; all disparities are 0.
  const auto g = target_graph(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}});
  const auto d = disparity::DisparityMatrix::compute(g);
  const auto tb = select_top_bottom(d, g, 2, 3, 2, 2);
  EXPECT_EQ(std::vector<NodeId>(tb.top[0].begin(), tb.top[0].end()), (std::vector<NodeId>{1, 2}));
  EXPECT_EQ(std::vector<NodeId>(tb.bottom[0].begin(), tb.bottom[0].end()), (std::vector<NodeId>{1, 2, 3}));
  EXPECT_EQ(std::vector<NodeId>(tb.top[4].begin(), tb.top[4].end()), (std::vector<NodeId>{0, 1}));
}

TEST(TopBottom, MatchesSortOracle) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto g = testkit::random_graph(seed, sparse_spec());
    const auto adj = testkit::oracle_adjacency(g);
    const auto d = disparity::DisparityMatrix::compute(g);
    const int k = 1 + static_cast<int>(seed % 4), r = 2 + static_cast<int>(seed % 3);
    const auto tb = select_top_bottom(d, g, k, k, r, r);
    for (std::size_t i = 0; i < g.target_count(); ++i) {
      const NodeId self = g.targets()[i];
      const auto dist = testkit::oracle_distances(adj, self);
      std::vector<std::pair<float, NodeId>> cand;
      for (NodeId v : g.targets()) {
        if (v != self && dist[v] >= 1 && dist[v] <= r) cand.push_back({d.at(i, g.local_id(v)), v});
      }
      auto desc = cand;
      std::sort(desc.begin(), desc.end(), [](auto a, auto b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
      std::sort(cand.begin(), cand.end());
      std::vector<NodeId> top, bottom;
      for (std::size_t q = 0; q < std::min<std::size_t>(k, cand.size()); ++q) {
        top.push_back(desc[q].second);
        bottom.push_back(cand[q].second);
      }
      ASSERT_EQ(std::vector<NodeId>(tb.top[i].begin(), tb.top[i].end()), top) << seed << ":" << i;
      ASSERT_EQ(std::vector<NodeId>(tb.bottom[i].begin(), tb.bottom[i].end()), bottom) << seed << ":" << i;
    }
  }
}

TEST(MessageWeights, EmptyTopGivesOnes) {
  const auto g = target_graph(3, {{0, 1}, {1, 2}});
  const auto w = build_message_weights(g, empty_rows(3), 0.5, 4);
  EXPECT_EQ(w.weights, std::vector<double>(4, 1.0));
  EXPECT_THROW(build_message_weights(g, empty_rows(3), 0.0, 4), UsageError);
  EXPECT_THROW(build_message_weights(g, empty_rows(3), 1.5, 4), UsageError);
}

TEST(MessageWeights, PathDecayAndSharedEdge) {
  const auto g = target_graph(4, {{0, 1}, {1, 2}, {2, 3}});
  auto w = build_message_weights(g, rows({{2}, {}, {}, {}}), 0.9, 4).weights;
  EXPECT_DOUBLE_EQ(w[0], 0.9);
  EXPECT_DOUBLE_EQ(w[1], 0.9);
  EXPECT_DOUBLE_EQ(w[2], 0.9);
  EXPECT_DOUBLE_EQ(w[3], 0.9);
  EXPECT_DOUBLE_EQ(w[4], 1.0);
  // Edge 1-2 is on both paths.
  w = build_message_weights(g, rows({{2}, {}, {}, {1}}), 0.9, 4).weights;
  EXPECT_DOUBLE_EQ(w[0], 0.9);
  EXPECT_DOUBLE_EQ(w[2], 0.9 * 0.9);
  EXPECT_DOUBLE_EQ(w[3], 0.9 * 0.9);
  EXPECT_DOUBLE_EQ(w[4], 0.9);
  // Out of reach within the cap.
  const auto r = build_message_weights(g, rows({{3}, {}, {}, {}}), 0.9, 2);
  EXPECT_EQ(r.skipped_pairs, 1u);
  EXPECT_EQ(r.weights, std::vector<double>(6, 1.0));
}

TEST(MessageWeights, AlphaOneIsAllOnesAndFloorHolds) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto g = testkit::random_graph(seed, sparse_spec());
    const auto d = disparity::DisparityMatrix::compute(g);
    const auto tb = select_top_bottom(d, g, 5, 0, 4, 4);
    EXPECT_EQ(build_message_weights(g, tb.top, 1.0, 4).weights, std::vector<double>(g.edge_count(), 1.0));
    const auto w = build_message_weights(g, tb.top, 0.1, 4, 0.05).weights;
    for (std::size_t s = 0; s < w.size(); s += 2) {
      ASSERT_GE(w[s], 0.05);
      ASSERT_LE(w[s], 1.0);
      ASSERT_EQ(w[s], w[s + 1]);
    }
  }
}

TEST(MessageWeights, MonotoneInTopK) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto g = testkit::random_graph(seed, sparse_spec());
    const auto d = disparity::DisparityMatrix::compute(g);
    std::vector<double> prev(g.edge_count(), 1.0);
    for (int k = 0; k <= 6; ++k) {
      const auto tb = select_top_bottom(d, g, k, 0, 4, 4);
      const auto w = build_message_weights(g, tb.top, 0.8, 4).weights;
      for (std::size_t s = 0; s < w.size(); ++s) ASSERT_LE(w[s], prev[s]) << seed << " k " << k;
      prev = w;
    }
  }
}

TEST(AttrSequences, EmptyBottomIsSelf) {
  const auto g = target_graph(3, {{0, 1}, {1, 2}});
  const auto s = build_attr_sequences(g, empty_rows(3), 4, 4).sequences;
  EXPECT_EQ(s, rows({{0}, {1}, {2}}));
  EXPECT_THROW(build_attr_sequences(g, empty_rows(3), 0, 4), UsageError);
}

TEST(AttrSequences, PathThroughAuxNode) {
  hin::GraphParts p;
  p.node_types = {{"t", hin::AttributeKind::discrete, 1, true}, {"a", hin::AttributeKind::continuous, 1, true}};
  p.edge_types = {{"t-a", 0, 1, -1}};
  p.node_type_of = {0, 1, 0};
  p.local_id_of = {0, 0, 1};
  p.edges = {{0, 1, 0}, {2, 1, 0}};
  p.attributes = {{2, 1, {1, 0}}, {1, 1, {0.3}}};
  p.labels.num_classes = 1;
  p.labels.class_of = {0, 0};
  p.labels.labeled = {1, 1};
  const auto g = HeteroGraph::build(p);
  const auto s = build_attr_sequences(g, rows({{2}, {}}), 5, 4).sequences;
  EXPECT_EQ(std::vector<NodeId>(s[0].begin(), s[0].end()), (std::vector<NodeId>{0, 1, 2}));
  EXPECT_EQ(std::vector<NodeId>(s[1].begin(), s[1].end()), (std::vector<NodeId>{2}));
  const auto one = build_attr_sequences(g, rows({{2}, {}}), 1, 4).sequences;
  EXPECT_EQ(std::vector<NodeId>(one[0].begin(), one[0].end()), (std::vector<NodeId>{0}));
}

TEST(AttrSequences, NodesLieOnShortestPathsWithoutDuplicates) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto g = testkit::random_graph(seed, sparse_spec());
    const auto adj = testkit::oracle_adjacency(g);
    const auto d = disparity::DisparityMatrix::compute(g);
    const auto tb = select_top_bottom(d, g, 0, 4, 4, 4);
    const auto seqs = build_attr_sequences(g, tb.bottom, 12, 4).sequences;
    for (std::size_t i = 0; i < g.target_count(); ++i) {
      const auto seq = seqs[i];
      ASSERT_FALSE(seq.empty());
      ASSERT_LE(seq.size(), 12u);
      ASSERT_EQ(seq[0], g.targets()[i]);
      ASSERT_EQ(std::set<NodeId>(seq.begin(), seq.end()).size(), seq.size());
      std::vector<std::uint8_t> allowed(g.node_count(), 0);
      for (NodeId j : tb.bottom[i]) {
        const auto on = testkit::oracle_on_some_shortest_path(adj, g.targets()[i], j);
        for (std::size_t x = 0; x < on.size(); ++x) allowed[x] |= on[x];
      }
      for (std::size_t q = 1; q < seq.size(); ++q) ASSERT_TRUE(allowed[seq[q]]) << seed << ":" << i;
    }
  }
}

TEST(ContextSequences, BfsOrderPrefix) {
  const auto g = target_graph(5, {{0, 3}, {0, 1}, {3, 4}, {1, 2}});
  const auto s = build_context_sequences(g, 4);
  EXPECT_EQ(std::vector<NodeId>(s[0].begin(), s[0].end()), (std::vector<NodeId>{0, 1, 3, 2}));
  EXPECT_EQ(std::vector<NodeId>(s[4].begin(), s[4].end()), (std::vector<NodeId>{4, 3, 0, 1}));
}

TEST(Guidance, MatchesStepwiseBuilders) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto g = testkit::random_graph(seed, sparse_spec());
    GuidanceParams p;
    p.k_top = 3;
    p.k_btm = 2;
    p.n = 6;
    p.alpha = 0.7;
    p.r_top = 3;
    p.r_btm = 4;
    const auto sets = compute_guidance(g, p);
    const auto d = disparity::DisparityMatrix::compute(g);
    const auto tb = select_top_bottom(d, g, p.k_top, p.k_btm, p.r_top, p.r_btm);
    ASSERT_EQ(sets.top_k, tb.top);
    ASSERT_EQ(sets.bottom_k, tb.bottom);
    ASSERT_EQ(sets.message_weights, build_message_weights(g, tb.top, p.alpha, p.r_top, p.w_min).weights);
    ASSERT_EQ(sets.attr_sequences, build_attr_sequences(g, tb.bottom, p.n, p.r_btm).sequences);
    GuidanceOptions serial;
    serial.parallel = false;
    ASSERT_EQ(compute_guidance(g, p, serial), sets);
  }
}

TEST(Guidance, ContextModeIgnoresAttributes) {
  const auto g = testkit::random_graph(5, sparse_spec());
  GuidanceParams p;
  p.mode = SequenceMode::context;
  p.n = 5;
  const auto sets = compute_guidance(g, p);
  EXPECT_EQ(sets.message_weights, std::vector<double>(g.edge_count(), 1.0));
  EXPECT_EQ(sets.attr_sequences, build_context_sequences(g, 5));
}

TEST(Guidance, ParamValidation) {
  GuidanceParams p;
  p.alpha = 0.0;
  EXPECT_THROW(p.validate(), UsageError);
  p = {};
  p.n = 0;
  EXPECT_THROW(p.validate(), UsageError);
  p = {};
  p.r_top = 0;
  EXPECT_THROW(p.validate(), UsageError);
  p = {};
  EXPECT_NO_THROW(p.validate());
  EXPECT_EQ(GuidanceParams::from_json(p.to_json()), p);
  auto q = p;
  q.k_top = 6;
  EXPECT_NE(q.hash(), p.hash());
}

TEST(Guidance, SaveLoadRoundTripAndKeyCheck) {
  const auto g = testkit::random_graph(11, sparse_spec());
  const auto sets = compute_guidance(g, GuidanceParams{});
  const auto dir = testkit::temp_dir("guidance");
  const auto path = dir / "g.bin";
  save_guidance(sets, path);
  const auto back = load_guidance(path);
  EXPECT_EQ(back, sets);
  EXPECT_EQ(back.key(), sets.key());

  // Flip one character of the stored graph hash: the key no longer matches.
  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  const auto at = bytes.find(sets.graph_hash);
  ASSERT_NE(at, std::string::npos);
  bytes[at] = bytes[at] == '0' ? '1' : '0';
  std::ofstream(path, std::ios::binary | std::ios::trunc) << bytes;
  EXPECT_THROW(load_guidance(path), DataError);
  EXPECT_THROW(load_guidance(dir / "missing.bin"), DataError);

  const auto j = guidance_to_json(sets);
  EXPECT_EQ(j["key"], sets.key());
  EXPECT_EQ(j["top_k"].size(), g.target_count());
  EXPECT_EQ(j["message_weights"].size(), g.edge_count());
  fs::remove_all(dir);
}

TEST(Guidance, KeyDependsOnGraphAndParams) {
  const auto a = compute_guidance(testkit::random_graph(1, sparse_spec()), GuidanceParams{});
  const auto b = compute_guidance(testkit::random_graph(2, sparse_spec()), GuidanceParams{});
  EXPECT_NE(a.key(), b.key());
  GuidanceParams p;
  p.alpha = 0.5;
  EXPECT_NE(compute_guidance(testkit::random_graph(1, sparse_spec()), p).key(), a.key());
}
