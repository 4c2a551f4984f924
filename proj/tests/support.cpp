#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <random>
#include <set>

#include <fmt/format.h>

#include "json.hpp"

namespace aghint::testkit {

namespace fs = std::filesystem;

hin::HeteroGraph random_graph(std::uint64_t seed, const RandomGraphSpec& spec) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  hin::GraphParts p;
  p.node_types = {{"t", spec.continuous_targets ? hin::AttributeKind::continuous : hin::AttributeKind::discrete,
                   spec.target_dim, true},
                  {"a", hin::AttributeKind::continuous, 3, true},
                  {"b", hin::AttributeKind::continuous, 3, false}};
  p.edge_types = {{"t-a", 0, 1, -1}, {"t-b", 0, 2, -1}, {"t-t", 0, 0, -1}, {"a-b", 1, 2, -1}};
  p.target_type = 0;
  const int na = spec.aux / 2;
  const int nb = spec.aux - na;
  for (int i = 0; i < spec.targets; ++i) {
    p.node_type_of.push_back(0);
    p.local_id_of.push_back(i);
  }
  for (int i = 0; i < na; ++i) {
    p.node_type_of.push_back(1);
    p.local_id_of.push_back(i);
  }
  for (int i = 0; i < nb; ++i) {
    p.node_type_of.push_back(2);
    p.local_id_of.push_back(i);
  }
  const int n = spec.targets + spec.aux;
  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v) {
      const int tu = p.node_type_of[u], tv = p.node_type_of[v];
      int type = -1;
      if (tu == 0 && tv == 0) type = spec.target_links ? 2 : -1;
      else if (tu == 0 && tv == 1) type = 0;
      else if (tu == 0 && tv == 2) type = 1;
      else if (tu == 1 && tv == 2) type = 3;
      if (type < 0 || unit(rng) >= spec.p_edge) continue;
      // Random orientation of the stored pair exercises both slot directions.
      if (type == 2 && unit(rng) < 0.5) p.edges.push_back({v, u, type});
      else p.edges.push_back({u, v, type});
    }
  }
  std::shuffle(p.edges.begin(), p.edges.end(), rng);
  hin::AttributeMatrix t{static_cast<std::size_t>(spec.targets), static_cast<std::size_t>(spec.target_dim), {}};
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t i = 0; i < t.rows * t.cols; ++i) {
    t.values.push_back(spec.continuous_targets ? gauss(rng) + 0.1 : (unit(rng) < 0.4 ? 1.0 : 0.0));
  }
  hin::AttributeMatrix a{static_cast<std::size_t>(na), 3, {}};
  for (std::size_t i = 0; i < a.rows * 3; ++i) a.values.push_back(gauss(rng));
  p.attributes = {t, a, {}};
  p.labels.num_classes = spec.classes;
  for (int i = 0; i < spec.targets; ++i) {
    p.labels.class_of.push_back(static_cast<int>(rng() % static_cast<std::uint64_t>(spec.classes)));
    p.labels.labeled.push_back(1);
  }
  return hin::HeteroGraph::build(std::move(p));
}

std::vector<std::vector<hin::NodeId>> oracle_adjacency(const hin::HeteroGraph& g) {
  std::vector<std::set<hin::NodeId>> sets(g.node_count());
  for (const auto& e : g.parts().edges) {
    sets[e.src].insert(e.dst);
    sets[e.dst].insert(e.src);
  }
  std::vector<std::vector<hin::NodeId>> adj;
  for (const auto& s : sets) adj.emplace_back(s.begin(), s.end());
  return adj;
}

std::vector<int> oracle_distances(const std::vector<std::vector<hin::NodeId>>& adj, hin::NodeId src) {
  std::vector<int> dist(adj.size(), -1);
  std::deque<hin::NodeId> queue{src};
  dist[src] = 0;
  while (!queue.empty()) {
    const auto u = queue.front();
    queue.pop_front();
    for (auto v : adj[u]) {
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
    }
  }
  return dist;
}

bool oracle_is_shortest_path(const std::vector<std::vector<hin::NodeId>>& adj, const std::vector<hin::NodeId>& path,
                             hin::NodeId u, hin::NodeId v) {
  if (path.empty() || path.front() != u || path.back() != v) return false;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const auto& row = adj[path[i]];
    if (!std::binary_search(row.begin(), row.end(), path[i + 1])) return false;
  }
  return static_cast<int>(path.size()) - 1 == oracle_distances(adj, u)[v];
}

std::vector<std::uint8_t> oracle_on_some_shortest_path(const std::vector<std::vector<hin::NodeId>>& adj,
                                                       hin::NodeId u, hin::NodeId v) {
  const auto du = oracle_distances(adj, u);
  const auto dv = oracle_distances(adj, v);
  std::vector<std::uint8_t> on(adj.size(), 0);
  if (du[v] < 0) return on;
  for (std::size_t x = 0; x < adj.size(); ++x) {
    on[x] = du[x] >= 0 && dv[x] >= 0 && du[x] + dv[x] == du[v];
  }
  return on;
}

// ---- dense oracles -----------------------------------------------------------------

Mat random_mat(std::size_t r, std::size_t c, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  Mat m(r, std::vector<double>(c));
  for (auto& row : m) {
    for (auto& x : row) x = u(rng);
  }
  return m;
}

Mat to_mat(const nd::Tensor<double>& t) {
  Mat m(t.rows, std::vector<double>(t.cols));
  for (std::size_t i = 0; i < t.rows; ++i) {
    for (std::size_t j = 0; j < t.cols; ++j) m[i][j] = t(i, j);
  }
  return m;
}

double max_abs_diff(const Mat& a, const Mat& b) {
  if (a.size() != b.size()) return INFINITY;
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size()) return INFINITY;
    for (std::size_t j = 0; j < a[i].size(); ++j) worst = std::max(worst, std::abs(a[i][j] - b[i][j]));
  }
  return worst;
}

namespace {

Mat matmul(const Mat& a, const Mat& b) {
  const std::size_t m = a.size(), k = b.size(), n = b.empty() ? 0 : b[0].size();
  Mat c(m, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < k; ++t) s += a[i][t] * b[t][j];
      c[i][j] = s;
    }
  }
  return c;
}

double lrelu(double x, double slope) { return x > 0 ? x : slope * x; }

}  // namespace

Mat dense_agm(const hin::HeteroGraph& g, const Mat& h, const std::vector<Mat>& W, const std::vector<std::vector<double>>& a,
              const std::vector<double>& slot_weights, double slope, double elu_alpha) {
  const std::size_t n = g.node_count();
  // weight[j][i] for edge j -> i; NaN marks "no edge"
  Mat weight(n, std::vector<double>(n, NAN));
  const auto& edges = g.parts().edges;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    weight[edges[e].src][edges[e].dst] = slot_weights.empty() ? 1.0 : slot_weights[2 * e];
    weight[edges[e].dst][edges[e].src] = slot_weights.empty() ? 1.0 : slot_weights[2 * e + 1];
  }
  for (std::size_t i = 0; i < n; ++i) {
    bool any = false;
    for (std::size_t j = 0; j < n; ++j) any = any || !std::isnan(weight[j][i]);
    if (!any) weight[i][i] = 1.0;
  }
  const std::size_t d = W[0][0].size();
  Mat out(n, std::vector<double>(d, 0.0));
  for (std::size_t head = 0; head < W.size(); ++head) {
    const Mat z = matmul(h, W[head]);
    Mat attn(n, std::vector<double>(n, 0.0));  // attn[i][j]
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> logit(n, -INFINITY);
      double mx = -INFINITY;
      for (std::size_t j = 0; j < n; ++j) {
        if (std::isnan(weight[j][i])) continue;
        // a^T sigma([z_i || z_j]) on the literal concatenation
        std::vector<double> cat(z[i]);
        cat.insert(cat.end(), z[j].begin(), z[j].end());
        double s = 0.0;
        for (std::size_t k = 0; k < cat.size(); ++k) s += a[head][k] * lrelu(cat[k], slope);
        logit[j] = s * weight[j][i];
        mx = std::max(mx, logit[j]);
      }
      double total = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (std::isfinite(logit[j])) total += std::exp(logit[j] - mx);
      }
      for (std::size_t j = 0; j < n; ++j) {
        if (std::isfinite(logit[j])) attn[i][j] = std::exp(logit[j] - mx) / total;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t c = 0; c < d; ++c) out[i][c] += attn[i][j] * z[j][c] / static_cast<double>(W.size());
      }
    }
  }
  for (auto& row : out) {
    for (auto& x : row) x = x > 0 ? x : elu_alpha * (std::exp(x) - 1.0);
  }
  return out;
}

Mat dense_agt(const Mat& x, const std::vector<std::vector<int>>& sequences, const Mat& Wq, const Mat& Wk, const Mat& Wv,
              const Mat& Wo, const std::vector<double>& gain, const std::vector<double>& bias, int heads, double eps,
              bool first_only) {
  const std::size_t d = Wq[0].size();
  const std::size_t dh = d / static_cast<std::size_t>(heads);
  Mat out;
  for (const auto& seq : sequences) {
    Mat X;
    for (int r : seq) X.push_back(x[static_cast<std::size_t>(r)]);
    const Mat Q = matmul(X, Wq), K = matmul(X, Wk), V = matmul(X, Wv);
    const std::size_t L = seq.size();
    const std::size_t queries = first_only ? 1 : L;
    Mat cat(queries, std::vector<double>(d, 0.0));
    for (std::size_t q = 0; q < queries; ++q) {
      for (int hd = 0; hd < heads; ++hd) {
        const std::size_t off = static_cast<std::size_t>(hd) * dh;
        std::vector<double> score(L);
        for (std::size_t k = 0; k < L; ++k) {
          double s = 0.0;
          for (std::size_t c = 0; c < dh; ++c) s += Q[q][off + c] * K[k][off + c];
          score[k] = s / std::sqrt(static_cast<double>(dh));
        }
        const double mx = *std::max_element(score.begin(), score.end());
        double total = 0.0;
        for (auto& s : score) total += (s = std::exp(s - mx));
        for (std::size_t k = 0; k < L; ++k) {
          for (std::size_t c = 0; c < dh; ++c) cat[q][off + c] += score[k] / total * V[k][off + c];
        }
      }
    }
    const Mat O = matmul(cat, Wo);
    for (std::size_t q = 0; q < queries; ++q) {
      std::vector<double> r(d);
      double mean = 0.0;
      for (std::size_t c = 0; c < d; ++c) mean += (r[c] = O[q][c] + X[q][c]);
      mean /= static_cast<double>(d);
      double var = 0.0;
      for (double v : r) var += (v - mean) * (v - mean);
      var /= static_cast<double>(d);
      for (std::size_t c = 0; c < d; ++c) r[c] = (r[c] - mean) / std::sqrt(var + eps) * gain[c] + bias[c];
      out.push_back(r);
    }
  }
  return out;
}

// ---- gradient checks ---------------------------------------------------------------------

namespace {

using nd::Tape;
using nd::Tensor;
using nd::Var;

Tensor<double> rand_tensor(std::mt19937_64& rng, std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<double> t(r, c);
  for (auto& x : t.data) x = u(rng);
  return t;
}

// Scalar probe: sum(R .* y) for a fixed random R of y's shape.
Var probe(Tape<double>& tape, Var y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto& v = tape.value(y);
  return tape.sum(tape.mul(y, tape.constant(rand_tensor(rng, v.rows, v.cols))));
}

}  // namespace

std::vector<PrimitiveCheck> primitive_grad_checks(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto dim = [&](std::size_t lo, std::size_t hi) { return lo + rng() % (hi - lo + 1); };
  const std::uint64_t ps = rng();
  std::vector<PrimitiveCheck> out;
  auto run = [&](const std::string& name, std::vector<Tensor<double>> params, const nd::LossFn& f) {
    std::vector<Tensor<double>*> ptrs;
    for (auto& p : params) ptrs.push_back(&p);
    const auto r = nd::grad_check(f, ptrs);
    out.push_back({name, r.max_rel_error, r.entries});
  };
  const std::size_t m = dim(2, 6), k = dim(2, 6), n = dim(2, 6);

  run("matmul", {rand_tensor(rng, m, k), rand_tensor(rng, k, n)},
      [&](Tape<double>& t, const std::vector<Var>& v) { return probe(t, t.matmul(v[0], v[1]), ps); });
  run("add", {rand_tensor(rng, m, n), rand_tensor(rng, m, n)},
      [&](Tape<double>& t, const std::vector<Var>& v) { return probe(t, t.add(v[0], v[1]), ps); });
  run("add_row", {rand_tensor(rng, m, n), rand_tensor(rng, 1, n)},
      [&](Tape<double>& t, const std::vector<Var>& v) { return probe(t, t.add_row(v[0], v[1]), ps); });
  run("mul", {rand_tensor(rng, m, n), rand_tensor(rng, m, n)},
      [&](Tape<double>& t, const std::vector<Var>& v) { return probe(t, t.mul(v[0], v[1]), ps); });
  run("mul_col", {rand_tensor(rng, m, n), rand_tensor(rng, m, 1)},
      [&](Tape<double>& t, const std::vector<Var>& v) { return probe(t, t.mul_col(v[0], v[1]), ps); });
  run("scale", {rand_tensor(rng, m, n)},
      [&](Tape<double>& t, const std::vector<Var>& v) { return probe(t, t.scale(v[0], -1.7), ps); });
  run("concat_cols", {rand_tensor(rng, m, k), rand_tensor(rng, m, n)},
      [&](Tape<double>& t, const std::vector<Var>& v) { return probe(t, t.concat_cols({v[0], v[1], v[0]}), ps); });
  run("concat_rows", {rand_tensor(rng, k, n), rand_tensor(rng, m, n)},
      [&](Tape<double>& t, const std::vector<Var>& v) { return probe(t, t.concat_rows({v[1], v[0]}), ps); });
  run("slice_cols", {rand_tensor(rng, m, n + 2)},
      [&](Tape<double>& t, const std::vector<Var>& v) { return probe(t, t.slice_cols(v[0], 1, n), ps); });
  run("leaky_relu", {rand_tensor(rng, m, n)},
      [&](Tape<double>& t, const std::vector<Var>& v) { return probe(t, t.leaky_relu(v[0], 0.2), ps); });
  run("elu", {rand_tensor(rng, m, n)},
      [&](Tape<double>& t, const std::vector<Var>& v) { return probe(t, t.elu(v[0], 1.3), ps); });
  run("sigmoid", {rand_tensor(rng, m, n, -3, 3)},
      [&](Tape<double>& t, const std::vector<Var>& v) { return probe(t, t.sigmoid(v[0]), ps); });
  run("exp", {rand_tensor(rng, m, n)},
      [&](Tape<double>& t, const std::vector<Var>& v) { return probe(t, t.exp(v[0]), ps); });
  run("log", {rand_tensor(rng, m, n, 0.5, 2.0)},
      [&](Tape<double>& t, const std::vector<Var>& v) { return probe(t, t.log(v[0]), ps); });
  run("layer_norm", {rand_tensor(rng, m, n + 1), rand_tensor(rng, 1, n + 1), rand_tensor(rng, 1, n + 1)},
      [&](Tape<double>& t, const std::vector<Var>& v) { return probe(t, t.layer_norm(v[0], v[1], v[2], 1e-5), ps); });
  run("dropout", {rand_tensor(rng, m, n)},
      [&](Tape<double>& t, const std::vector<Var>& v) { return probe(t, t.dropout(v[0], 0.4, 99, true), ps); });

  std::vector<std::int32_t> idx;
  for (std::size_t i = 0; i < m + 3; ++i) idx.push_back(static_cast<std::int32_t>(rng() % m));
  const auto gidx = nd::make_index(idx);
  run("gather_rows", {rand_tensor(rng, m, n)},
      [&](Tape<double>& t, const std::vector<Var>& v) { return probe(t, t.gather_rows(v[0], gidx), ps); });

  // Segments of random length over random source rows, one of them empty.
  const std::size_t segs = dim(3, 5);
  std::vector<std::size_t> off{0};
  std::vector<std::int32_t> src;
  for (std::size_t s = 0; s < segs; ++s) {
    const std::size_t len = s == 1 ? 0 : dim(1, 4);
    for (std::size_t e = 0; e < len; ++e) src.push_back(static_cast<std::int32_t>(rng() % m));
    off.push_back(src.size());
  }
  const auto soff = nd::make_offsets(off);
  const auto ssrc = nd::make_index(src);
  run("scatter_weighted_sum", {rand_tensor(rng, m, n), rand_tensor(rng, src.size(), 1)},
      [&](Tape<double>& t, const std::vector<Var>& v) { return probe(t, t.scatter_weighted_sum(v[0], ssrc, v[1], soff), ps); });
  run("segment_softmax", {rand_tensor(rng, src.size(), 1, -2, 2)},
      [&](Tape<double>& t, const std::vector<Var>& v) { return probe(t, t.segment_softmax(v[0], soff), ps); });
  run("softmax_rows", {rand_tensor(rng, m, n, -2, 2)},
      [&](Tape<double>& t, const std::vector<Var>& v) { return probe(t, t.softmax_rows(v[0]), ps); });

  std::vector<std::int32_t> ia, ib;
  for (std::size_t e = 0; e < m + 4; ++e) {
    ia.push_back(static_cast<std::int32_t>(rng() % m));
    ib.push_back(static_cast<std::int32_t>(rng() % k));
  }
  const auto iai = nd::make_index(ia), ibi = nd::make_index(ib);
  run("indexed_row_dot", {rand_tensor(rng, m, n), rand_tensor(rng, k, n)},
      [&](Tape<double>& t, const std::vector<Var>& v) { return probe(t, t.indexed_row_dot(v[0], iai, v[1], ibi), ps); });
  run("sum", {rand_tensor(rng, m, n)}, [&](Tape<double>& t, const std::vector<Var>& v) {
    return t.sum(t.mul(v[0], v[0]));
  });
  run("mean", {rand_tensor(rng, m, n)}, [&](Tape<double>& t, const std::vector<Var>& v) {
    return t.mean(t.mul(v[0], v[0]));
  });
  std::vector<std::int32_t> cls;
  for (std::size_t i = 0; i < m; ++i) cls.push_back(static_cast<std::int32_t>(rng() % n));
  const auto clsi = nd::make_index(cls);
  run("cross_entropy_with_logits", {rand_tensor(rng, m, n, -2, 2)},
      [&](Tape<double>& t, const std::vector<Var>& v) { return t.cross_entropy_with_logits(v[0], clsi); });
  Tensor<double> y(m, n);
  for (auto& x : y.data) x = static_cast<double>(rng() % 2);
  run("bce_with_logits", {rand_tensor(rng, m, n, -2, 2)},
      [&](Tape<double>& t, const std::vector<Var>& v) { return t.bce_with_logits(v[0], y); });
  return out;
}

nd::GradCheckResult full_model_grad_check(std::uint64_t seed, model::Variant variant) {
  hin::SynthSpec spec;
  spec.seed = seed;
  spec.num_target = 20;
  spec.classes = 3;
  spec.target_dim = 8;
  spec.aux_dims = {4, 0};
  spec.aux_nodes = {5, 5};
  spec.densities = {2.0, 1.5};
  const auto graph = hin::synth_hin(spec);

  model::ModelConfig cfg;
  cfg.d0 = 6;
  cfg.d_hidden = 6;
  cfg.l_m = 2;
  cfg.l_t = 2;
  cfg.heads_m = 2;
  cfg.heads_t = 2;
  cfg.k_top = 3;
  cfg.k_btm = 3;
  cfg.n = 6;
  cfg.alpha = 0.7;
  cfg.dropout = 0.0;
  cfg.variant = variant;
  const auto guidance = pathsample::compute_guidance(graph, cfg.guidance_params());
  const auto inputs = model::build_inputs<double>(graph, cfg, guidance);
  auto params = model::init_params<double>(cfg, graph, seed);
  // Zero biases on all-zero attribute rows would put pre-activations exactly
  // on the leaky-relu kink, where finite differences are meaningless.
  std::mt19937_64 jitter(seed ^ 0x5eedULL);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (auto& v : params.values) {
    for (auto& x : v.data) x += u(jitter);
  }
  std::vector<std::int32_t> rows;
  for (std::size_t t = 0; t < graph.target_count(); ++t) rows.push_back(static_cast<std::int32_t>(t));

  std::vector<nd::Tensor<double>*> ptrs;
  for (auto& v : params.values) ptrs.push_back(&v);
  return nd::grad_check(
      [&](nd::Tape<double>& tape, const std::vector<nd::Var>& handles) {
        model::Bound<double> b(tape, params);
        b.vars = handles;
        model::DropoutState drop;
        const auto logits = model::model_forward(b, inputs, graph, cfg, drop);
        return model::classification_loss(tape, logits, rows, graph.labels());
      },
      ptrs);
}

// ---- oracle comparisons -------------------------------------------------------------

namespace {

nd::Tensor<double> to_tensor(const Mat& m) {
  nd::Tensor<double> t(m.size(), m.empty() ? 0 : m[0].size());
  for (std::size_t r = 0; r < t.rows; ++r) {
    for (std::size_t c = 0; c < t.cols; ++c) t(r, c) = m[r][c];
  }
  return t;
}

std::vector<double> flat(const nd::Tensor<double>& t) { return t.data; }

}  // namespace

double agm_oracle_gap(std::uint64_t seed, int heads) {
  const auto g = random_graph(seed, {});
  model::ModelConfig cfg;
  cfg.d0 = 5;
  cfg.d_hidden = 4;
  cfg.l_m = 1;
  cfg.heads_m = heads;
  cfg.slope = 0.2;
  cfg.elu_alpha = 1.0;
  const auto params = model::init_params<double>(cfg, g, seed);
  std::mt19937_64 rng(seed * 31 + 7);
  std::uniform_real_distribution<double> wdist(0.3, 1.7);
  std::vector<double> slot_w(g.edge_count());
  for (auto& w : slot_w) w = wdist(rng);
  const Mat h = random_mat(g.node_count(), 5, seed + 1000);
  const auto msg = model::build_message_index(g, slot_w);

  nd::Tape<double> tape;
  model::Bound<double> b(tape, params);
  const auto h_t = to_tensor(h);
  nd::Tensor<double> w_t(msg.weights.size(), 1, msg.weights);
  model::DropoutState drop;
  const auto out = model::agm_layer(b, tape.input(h_t), msg, tape.input(w_t), 0, cfg, drop);

  std::vector<Mat> W;
  std::vector<std::vector<double>> a;
  for (int hd = 0; hd < heads; ++hd) {
    W.push_back(to_mat(params.at(fmt::format("agm.0.W.{}", hd))));
    auto ad = flat(params.at(fmt::format("agm.0.a_dst.{}", hd)));
    const auto as = flat(params.at(fmt::format("agm.0.a_src.{}", hd)));
    ad.insert(ad.end(), as.begin(), as.end());
    a.push_back(ad);
  }
  return max_abs_diff(to_mat(tape.value(out)), dense_agm(g, h, W, a, slot_w, cfg.slope, cfg.elu_alpha));
}

double agt_oracle_gap(std::uint64_t seed, int heads, bool first_layer, bool final_layer) {
  const auto g = random_graph(seed, {});
  model::ModelConfig cfg;
  cfg.d0 = 4;
  cfg.d_hidden = 4;
  cfg.l_t = 1;
  cfg.heads_t = heads;
  auto params = model::init_params<double>(cfg, g, seed);
  std::mt19937_64 rng(seed * 17 + 3);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (auto* name : {"agt.0.ln_gain", "agt.0.ln_bias"}) {
    for (auto& x : params.at(name).data) x += u(rng);
  }
  // Random sequences of distinct nodes, each starting with its target.
  pathsample::Ragged seqs;
  std::vector<std::vector<int>> node_seqs;
  std::uniform_int_distribution<int> len(1, 6);
  std::uniform_int_distribution<hin::NodeId> pick(0, static_cast<hin::NodeId>(g.node_count()) - 1);
  for (hin::NodeId t : g.targets()) {
    std::vector<hin::NodeId> s{t};
    const int L = len(rng);
    while (static_cast<int>(s.size()) < L) {
      const auto v = pick(rng);
      if (std::find(s.begin(), s.end(), v) == s.end()) s.push_back(v);
    }
    seqs.push_row(s);
    node_seqs.emplace_back(s.begin(), s.end());
  }
  const auto seq = model::build_sequence_index(g, seqs);
  Mat x;
  std::vector<std::vector<int>> oracle_seqs;
  if (first_layer) {
    x = random_mat(g.node_count(), 4, seed + 2000);
    oracle_seqs = node_seqs;
  } else {
    // Per-position states: sequence s occupies positions [off[s], off[s+1]).
    x = random_mat(seqs.values.size(), 4, seed + 3000);
    for (std::size_t s = 0; s < seqs.size(); ++s) {
      std::vector<int> pos;
      for (auto p = seqs.offsets[s]; p < seqs.offsets[s + 1]; ++p) pos.push_back(static_cast<int>(p));
      oracle_seqs.push_back(pos);
    }
  }

  nd::Tape<double> tape;
  model::Bound<double> b(tape, params);
  const auto x_t = to_tensor(x);
  model::DropoutState drop;
  const auto out = model::agt_layer(b, tape.input(x_t), seq, 0, first_layer, final_layer, cfg, drop);
  const Mat expect = dense_agt(x, oracle_seqs, to_mat(params.at("agt.0.Wq")), to_mat(params.at("agt.0.Wk")),
                               to_mat(params.at("agt.0.Wv")), to_mat(params.at("agt.0.Wo")),
                               flat(params.at("agt.0.ln_gain")), flat(params.at("agt.0.ln_bias")), heads, cfg.ln_eps,
                               final_layer);
  return max_abs_diff(to_mat(tape.value(out)), expect);
}

bool decay_identity_holds(std::uint64_t seed) {
  hin::SynthSpec spec;
  spec.seed = seed;
  spec.num_target = 60;
  spec.aux_nodes = {20, 15};
  const auto g = hin::synth_hin(spec);
  model::ModelConfig cfg;
  cfg.d0 = 8;
  cfg.d_hidden = 8;
  cfg.l_t = 2;
  cfg.heads_m = 2;
  cfg.heads_t = 2;
  cfg.alpha = 1.0;
  cfg.dropout = 0.0;
  const auto guidance = pathsample::compute_guidance(g, cfg.guidance_params());
  const auto decayed = model::build_inputs<double>(g, cfg, guidance);
  const auto unit = model::build_inputs<double>(g, cfg, std::span<const double>{}, guidance.attr_sequences);
  const auto params = model::init_params<double>(cfg, g, seed);
  auto run = [&](const model::ModelInputs<double>& in) {
    nd::Tape<double> tape;
    model::Bound<double> b(tape, params);
    model::DropoutState drop;
    return tape.value(model::model_forward(b, in, g, cfg, drop));
  };
  return run(decayed) == run(unit);
}

// ---- fixtures -----------------------------------------------------------------------

void write_dblp_fixture(const fs::path& dir, std::uint64_t seed) {
  constexpr int kAuthors = 4057, kPapers = 14328, kTerms = 7723, kVenues = 20;
  constexpr int kAuthorPaper = 19645, kPaperTerm = 85810;  // paper-venue: one per paper
  constexpr int kAuthorDim = 334, kPaperDim = 64, kTermDim = 50;
  fs::create_directories(dir);
  std::mt19937_64 rng(seed);

  nlohmann::json meta = {
      {"node_types",
       {{{"name", "author"}, {"attr_kind", "discrete"}, {"attr_dim", kAuthorDim}},
        {{"name", "paper"}, {"attr_kind", "discrete"}, {"attr_dim", kPaperDim}},
        {{"name", "term"}, {"attr_kind", "continuous"}, {"attr_dim", kTermDim}},
        {{"name", "venue"}, {"attr_kind", "continuous"}, {"attr_dim", 4}, {"features", false}}}},
      {"edge_types",
       {{{"name", "author-paper"}, {"src", 0}, {"dst", 1}, {"reverse", 3}},
        {{"name", "paper-term"}, {"src", 1}, {"dst", 2}, {"reverse", 4}},
        {{"name", "paper-venue"}, {"src", 1}, {"dst", 3}, {"reverse", 5}},
        {{"name", "paper-author"}, {"src", 1}, {"dst", 0}, {"reverse", 0}},
        {{"name", "term-paper"}, {"src", 2}, {"dst", 1}, {"reverse", 1}},
        {{"name", "venue-paper"}, {"src", 3}, {"dst", 1}, {"reverse", 2}}}},
      {"target_type", 0},
      {"num_classes", 4},
      {"multi_label", false}};
  std::ofstream(dir / "meta.json") << meta.dump(2) << '\n';

  const int base_paper = kAuthors, base_term = base_paper + kPapers, base_venue = base_term + kTerms;
  {
    std::ofstream nodes(dir / "nodes.tsv");
    int gid = 0;
    for (auto [type, count] : {std::pair{0, kAuthors}, {1, kPapers}, {2, kTerms}, {3, kVenues}}) {
      for (int i = 0; i < count; ++i) nodes << gid++ << '\t' << type << '\t' << i << '\n';
    }
  }
  {
    std::ofstream edges(dir / "edges.tsv");
    // Every author writes at least one paper; the remaining links are random
    // distinct pairs.
    std::set<std::pair<int, int>> ap;
    for (int a = 0; a < kAuthors; ++a) ap.insert({a, static_cast<int>(rng() % kPapers)});
    while (static_cast<int>(ap.size()) < kAuthorPaper) {
      ap.insert({static_cast<int>(rng() % kAuthors), static_cast<int>(rng() % kPapers)});
    }
    for (auto [a, p] : ap) edges << a << '\t' << base_paper + p << "\t0\n";
    std::set<std::pair<int, int>> pt;
    while (static_cast<int>(pt.size()) < kPaperTerm) {
      pt.insert({static_cast<int>(rng() % kPapers), static_cast<int>(rng() % kTerms)});
    }
    for (auto [p, t] : pt) edges << base_paper + p << '\t' << base_term + t << "\t1\n";
    for (int p = 0; p < kPapers; ++p) edges << base_paper + p << '\t' << base_venue + static_cast<int>(rng() % kVenues) << "\t2\n";
  }
  auto write_binary = [&](const fs::path& file, int rows, int cols, double density) {
    std::ofstream out(file);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) out << (c ? "," : "") << (u(rng) < density ? '1' : '0');
      out << '\n';
    }
  };
  write_binary(dir / "features_author.csv", kAuthors, kAuthorDim, 0.05);
  write_binary(dir / "features_paper.csv", kPapers, kPaperDim, 0.1);
  {
    std::ofstream out(dir / "features_term.csv");
    std::normal_distribution<double> g(0.0, 1.0);
    for (int r = 0; r < kTerms; ++r) {
      for (int c = 0; c < kTermDim; ++c) out << (c ? "," : "") << fmt::format("{:.6f}", g(rng));
      out << '\n';
    }
  }
  {
    std::ofstream labels(dir / "labels.tsv");
    for (int a = 0; a < kAuthors; ++a) labels << a << '\t' << rng() % 4 << '\n';
  }
}

fs::path temp_dir(const std::string& tag) {
  const auto dir = fs::temp_directory_path() /
                   fmt::format("aghint-{}-{}", tag, std::random_device{}());
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace aghint::testkit
