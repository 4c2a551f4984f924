#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <fmt/format.h>

#include "aghint/model.hpp"

namespace aghint::model {

const char* to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::no_agt: return "no_agt";
    case Variant::no_agm: return "no_agm";
    case Variant::no_ag: return "no_ag";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  for (Variant v : {Variant::full, Variant::no_agt, Variant::no_agm, Variant::no_ag}) {
    if (s == to_string(v)) return v;
  }
  throw UsageError(fmt::format("unknown variant '{}' (expected full, no_agt, no_agm or no_ag)", s));
}

// ---- config -------------------------------------------------------------------

void ModelConfig::validate() const {
  if (d0 < 1 || d_hidden < 1) throw UsageError("model: dimensions must be positive");
  if (l_m < 1 || l_t < 1) throw UsageError("model: l_m and l_t must be >= 1");
  if (heads_m < 1 || heads_t < 1) throw UsageError("model: head counts must be >= 1");
  if (d_hidden % heads_t != 0) {
    throw UsageError(fmt::format("model: heads_t {} does not divide d_hidden {}", heads_t, d_hidden));
  }
  if (variant == Variant::no_agm && d0 != d_hidden) {
    throw UsageError("model: variant no_agm feeds H0 to the transformer and needs d0 == d_hidden");
  }
  if (!(dropout >= 0.0 && dropout < 1.0) || !(attn_dropout >= 0.0 && attn_dropout < 1.0)) {
    throw UsageError("model: dropout rates must be in [0, 1)");
  }
  if (!(slope >= 0.0) || !(elu_alpha > 0.0) || !(ln_eps > 0.0)) {
    throw UsageError("model: slope >= 0, elu_alpha > 0 and ln_eps > 0 required");
  }
  guidance_params().validate();
}

nlohmann::json ModelConfig::to_json() const {
  return {{"d0", d0},
          {"d_hidden", d_hidden},
          {"l_m", l_m},
          {"l_t", l_t},
          {"heads_m", heads_m},
          {"heads_t", heads_t},
          {"alpha", alpha},
          {"k_top", k_top},
          {"k_btm", k_btm},
          {"n", n},
          {"r_top", r_top},
          {"r_btm", r_btm},
          {"w_min", w_min},
          {"dropout", dropout},
          {"attn_dropout", attn_dropout},
          {"slope", slope},
          {"elu_alpha", elu_alpha},
          {"ln_eps", ln_eps},
          {"variant", to_string(variant)},
          {"multi_label", multi_label},
          {"ffn_in_agt", ffn_in_agt}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw UsageError("model config must be a JSON object");
  ModelConfig c;
  const auto known = c.to_json();
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw UsageError(fmt::format("unknown model config key '{}'", key));
  }
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("d0", c.d0);
    get("d_hidden", c.d_hidden);
    get("l_m", c.l_m);
    get("l_t", c.l_t);
    get("heads_m", c.heads_m);
    get("heads_t", c.heads_t);
    get("alpha", c.alpha);
    get("k_top", c.k_top);
    get("k_btm", c.k_btm);
    get("n", c.n);
    get("r_top", c.r_top);
    get("r_btm", c.r_btm);
    get("w_min", c.w_min);
    get("dropout", c.dropout);
    get("attn_dropout", c.attn_dropout);
    get("slope", c.slope);
    get("elu_alpha", c.elu_alpha);
    get("ln_eps", c.ln_eps);
    get("multi_label", c.multi_label);
    get("ffn_in_agt", c.ffn_in_agt);
    if (j.contains("variant")) c.variant = parse_variant(j.at("variant").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(fmt::format("model config: {}", e.what()));
  }
  return c;
}

std::string ModelConfig::hash() const { return sha256_hex(to_json().dump()); }

pathsample::GuidanceParams ModelConfig::guidance_params() const {
  pathsample::GuidanceParams p;
  p.k_top = k_top;
  p.k_btm = k_btm;
  p.n = n;
  p.alpha = alpha;
  p.r_top = r_top;
  p.r_btm = r_btm;
  p.w_min = w_min;
  p.mode = variant == Variant::no_ag ? pathsample::SequenceMode::context : pathsample::SequenceMode::attribute;
  return p;
}

// ---- parameters ------------------------------------------------------------------

template <class T>
std::size_t ModelParams<T>::index_of(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw UsageError(fmt::format("no parameter named '{}'", name));
  return static_cast<std::size_t>(it - names.begin());
}

template <class T>
bool ModelParams<T>::contains(const std::string& name) const {
  return std::find(names.begin(), names.end(), name) != names.end();
}

template <class T>
std::size_t ModelParams<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& v : values) n += v.size();
  return n;
}

template <class T>
bool ModelParams<T>::all_finite() const {
  for (const auto& v : values) {
    for (T x : v.data) {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

std::vector<ParamSpec> param_specs(const ModelConfig& cfg, const hin::HeteroGraph& graph) {
  std::vector<ParamSpec> out;
  const auto d0 = static_cast<std::size_t>(cfg.d0);
  const auto d = static_cast<std::size_t>(cfg.d_hidden);
  for (std::size_t t = 0; t < graph.node_type_count(); ++t) {
    const auto& info = graph.type_info(static_cast<int>(t));
    out.push_back({"proj.W." + info.name, static_cast<std::size_t>(info.dim), d0, ParamInit::glorot});
    out.push_back({"proj.b." + info.name, 1, d0, ParamInit::zeros});
  }
  if (cfg.variant != Variant::no_agm) {
    for (int l = 0; l < cfg.l_m; ++l) {
      const std::size_t in = l == 0 ? d0 : d;
      for (int h = 0; h < cfg.heads_m; ++h) {
        out.push_back({fmt::format("agm.{}.W.{}", l, h), in, d, ParamInit::glorot});
        out.push_back({fmt::format("agm.{}.a_dst.{}", l, h), d, 1, ParamInit::glorot});
        out.push_back({fmt::format("agm.{}.a_src.{}", l, h), d, 1, ParamInit::glorot});
      }
    }
  }
  if (cfg.variant != Variant::no_agt) {
    for (int l = 0; l < cfg.l_t; ++l) {
      for (const char* m : {"Wq", "Wk", "Wv", "Wo"}) out.push_back({fmt::format("agt.{}.{}", l, m), d, d, ParamInit::glorot});
      out.push_back({fmt::format("agt.{}.ln_gain", l), 1, d, ParamInit::ones});
      out.push_back({fmt::format("agt.{}.ln_bias", l), 1, d, ParamInit::zeros});
      if (cfg.ffn_in_agt) {
        out.push_back({fmt::format("agt.{}.ffn_W1", l), d, d, ParamInit::glorot});
        out.push_back({fmt::format("agt.{}.ffn_b1", l), 1, d, ParamInit::zeros});
        out.push_back({fmt::format("agt.{}.ffn_W2", l), d, d, ParamInit::glorot});
        out.push_back({fmt::format("agt.{}.ffn_b2", l), 1, d, ParamInit::zeros});
        out.push_back({fmt::format("agt.{}.ln2_gain", l), 1, d, ParamInit::ones});
        out.push_back({fmt::format("agt.{}.ln2_bias", l), 1, d, ParamInit::zeros});
      }
    }
  }
  const auto classes = static_cast<std::size_t>(graph.labels().num_classes);
  out.push_back({"cls.W", d, classes, ParamInit::glorot});
  out.push_back({"cls.b", 1, classes, ParamInit::zeros});
  return out;
}

template <class T>
ModelParams<T> init_params(const ModelConfig& cfg, const hin::HeteroGraph& graph, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(derive_seed(seed, Stream::init));
  ModelParams<T> p;
  for (const auto& spec : param_specs(cfg, graph)) {
    Tensor<T> t(spec.rows, spec.cols);
    if (spec.init == ParamInit::ones) {
      std::fill(t.data.begin(), t.data.end(), T(1));
    } else if (spec.init == ParamInit::glorot) {
      const double bound = std::sqrt(6.0 / static_cast<double>(spec.rows + spec.cols));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (auto& x : t.data) x = static_cast<T>(u(rng));
    }
    p.names.push_back(spec.name);
    p.values.push_back(std::move(t));
  }
  return p;
}

// ---- index construction -----------------------------------------------------------

MessageIndex build_message_index(const hin::HeteroGraph& graph, std::span<const double> slot_weights) {
  if (!slot_weights.empty() && slot_weights.size() != graph.edge_count()) {
    throw DataError(fmt::format("message weights have {} entries, graph has {} directed edges", slot_weights.size(),
                                graph.edge_count()));
  }
  const std::size_t n = graph.node_count();
  std::vector<std::size_t> offsets{0};
  std::vector<std::int32_t> src;
  std::vector<std::int32_t> dst;
  MessageIndex out;
  offsets.reserve(n + 1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = static_cast<hin::NodeId>(i);
    const auto nbs = graph.neighbors(v);
    if (nbs.empty()) {
      src.push_back(v);
      dst.push_back(v);
      out.weights.push_back(1.0);
    }
    for (const auto& nb : nbs) {
      // the incoming slot nb.node -> v is the reverse of v -> nb.node
      const auto in_slot = hin::HeteroGraph::reverse_slot(nb.slot);
      src.push_back(nb.node);
      dst.push_back(v);
      out.weights.push_back(slot_weights.empty() ? 1.0 : slot_weights[in_slot]);
    }
    offsets.push_back(src.size());
  }
  out.offsets = nd::make_offsets(std::move(offsets));
  out.src = nd::make_index(std::move(src));
  out.dst = nd::make_index(std::move(dst));
  return out;
}

SequenceIndex build_sequence_index(const hin::HeteroGraph& graph, const pathsample::Ragged& sequences) {
  const auto targets = graph.targets();
  if (sequences.size() != targets.size()) {
    throw DataError(fmt::format("{} sequences for {} targets", sequences.size(), targets.size()));
  }
  std::vector<std::size_t> seq_offsets{0};
  std::vector<std::int32_t> tokens, positions, first_pos, first_node, pos_first_pos, pos_first_node;
  std::vector<std::int32_t> pair_q, pair_k, pair_q_node, pair_k_node;
  std::vector<std::size_t> pair_offsets{0};
  for (std::size_t s = 0; s < sequences.size(); ++s) {
    const auto seq = sequences[s];
    if (seq.empty()) throw DataError(fmt::format("sequence of target {} is empty", s));
    if (seq[0] != targets[s]) throw DataError(fmt::format("sequence of target {} does not start with it", s));
    const auto base = static_cast<std::int32_t>(tokens.size());
    first_pos.push_back(base);
    first_node.push_back(seq[0]);
    for (std::size_t p = 0; p < seq.size(); ++p) {
      if (seq[p] < 0 || static_cast<std::size_t>(seq[p]) >= graph.node_count()) {
        throw DataError(fmt::format("sequence of target {} holds invalid node {}", s, seq[p]));
      }
      positions.push_back(static_cast<std::int32_t>(tokens.size()));
      tokens.push_back(seq[p]);
      pos_first_pos.push_back(base);
      pos_first_node.push_back(seq[0]);
    }
    for (std::size_t q = 0; q < seq.size(); ++q) {
      for (std::size_t k = 0; k < seq.size(); ++k) {
        pair_q.push_back(base + static_cast<std::int32_t>(q));
        pair_k.push_back(base + static_cast<std::int32_t>(k));
        pair_q_node.push_back(seq[q]);
        pair_k_node.push_back(seq[k]);
      }
      pair_offsets.push_back(pair_q.size());
    }
    seq_offsets.push_back(tokens.size());
  }
  SequenceIndex out;
  out.seq_offsets = nd::make_offsets(std::move(seq_offsets));
  out.tokens = nd::make_index(std::move(tokens));
  out.positions = nd::make_index(std::move(positions));
  out.first_pos = nd::make_index(std::move(first_pos));
  out.first_node = nd::make_index(std::move(first_node));
  out.pos_first_pos = nd::make_index(std::move(pos_first_pos));
  out.pos_first_node = nd::make_index(std::move(pos_first_node));
  out.pair_q = nd::make_index(std::move(pair_q));
  out.pair_k = nd::make_index(std::move(pair_k));
  out.pair_q_node = nd::make_index(std::move(pair_q_node));
  out.pair_k_node = nd::make_index(std::move(pair_k_node));
  out.pair_offsets = nd::make_offsets(std::move(pair_offsets));
  return out;
}

template <class T>
ModelInputs<T> build_inputs(const hin::HeteroGraph& graph, const ModelConfig& cfg, std::span<const double> slot_weights,
                            const pathsample::Ragged& sequences) {
  cfg.validate();
  ModelInputs<T> in;
  std::vector<std::int32_t> type_base(graph.node_type_count(), 0);
  std::int32_t base = 0;
  for (std::size_t t = 0; t < graph.node_type_count(); ++t) {
    const auto& a = graph.attributes(static_cast<int>(t));
    Tensor<T> x(a.rows, a.cols);
    for (std::size_t i = 0; i < a.values.size(); ++i) x.data[i] = static_cast<T>(a.values[i]);
    in.features.push_back(std::move(x));
    type_base[t] = base;
    base += static_cast<std::int32_t>(a.rows);
  }
  std::vector<std::int32_t> stack(graph.node_count());
  for (std::size_t v = 0; v < graph.node_count(); ++v) {
    const auto id = static_cast<hin::NodeId>(v);
    stack[v] = type_base[graph.node_type(id)] + graph.local_id(id);
  }
  in.stack_to_global = nd::make_index(std::move(stack));
  in.messages = build_message_index(graph, slot_weights);
  in.message_weights = Tensor<T>(in.messages.weights.size(), 1);
  for (std::size_t e = 0; e < in.messages.weights.size(); ++e) {
    in.message_weights.data[e] = static_cast<T>(in.messages.weights[e]);
  }
  in.sequences = build_sequence_index(graph, sequences);
  in.target_nodes = nd::make_index(std::vector<std::int32_t>(graph.targets().begin(), graph.targets().end()));
  in.num_classes = graph.labels().num_classes;
  return in;
}

template <class T>
ModelInputs<T> build_inputs(const hin::HeteroGraph& graph, const ModelConfig& cfg,
                            const pathsample::GuidanceSets& guidance) {
  if (guidance.graph_hash != graph.hash()) {
    throw DataError("guidance was computed for a different graph (hash mismatch)");
  }
  if (!(guidance.params == cfg.guidance_params())) {
    throw DataError(fmt::format("guidance parameters {} do not match the model config {}", guidance.params.to_json().dump(),
                                cfg.guidance_params().to_json().dump()));
  }
  return build_inputs<T>(graph, cfg, guidance.message_weights, guidance.attr_sequences);
}

std::uint64_t DropoutState::next_key() { return derive_seed(seed, Stream::dropout, counter++); }

template <class T>
Bound<T>::Bound(Tape<T>& t, const ModelParams<T>& p) : tape(t), params(p) {
  vars.reserve(p.values.size());
  for (const auto& v : p.values) vars.push_back(tape.param(v));
}

// ---- layers ---------------------------------------------------------------------------

template <class T>
Var project_features(Bound<T>& b, const ModelInputs<T>& in, const hin::HeteroGraph& graph) {
  auto& tape = b.tape;
  std::vector<Var> parts;
  for (std::size_t t = 0; t < graph.node_type_count(); ++t) {
    if (in.features[t].rows == 0) continue;
    const auto& name = graph.type_info(static_cast<int>(t)).name;
    const Var x = tape.input(in.features[t]);
    parts.push_back(tape.add_row(tape.matmul(x, b["proj.W." + name]), b["proj.b." + name]));
  }
  const Var stacked = parts.size() == 1 ? parts[0] : tape.concat_rows(parts);
  return tape.gather_rows(stacked, in.stack_to_global);
}

template <class T>
Var agm_layer(Bound<T>& b, Var h, const MessageIndex& msg, Var weights, int layer, const ModelConfig& cfg,
              DropoutState& drop) {
  auto& tape = b.tape;
  Var acc{};
  for (int head = 0; head < cfg.heads_m; ++head) {
    const Var z = tape.matmul(h, b[fmt::format("agm.{}.W.{}", layer, head)]);
    const Var s = tape.leaky_relu(z, static_cast<T>(cfg.slope));
    const Var u = tape.matmul(s, b[fmt::format("agm.{}.a_dst.{}", layer, head)]);
    const Var v = tape.matmul(s, b[fmt::format("agm.{}.a_src.{}", layer, head)]);
    // a^T sigma([Wh_i || Wh_j]) splits into a per-destination and a per-source term.
    Var logits = tape.add(tape.gather_rows(u, msg.dst), tape.gather_rows(v, msg.src));
    logits = tape.mul_col(logits, weights);
    Var attn = tape.segment_softmax(logits, msg.offsets);
    attn = tape.dropout(attn, static_cast<T>(cfg.attn_dropout), drop.next_key(), drop.training);
    const Var m = tape.scatter_weighted_sum(z, msg.src, attn, msg.offsets);
    acc = head == 0 ? m : tape.add(acc, m);
  }
  if (cfg.heads_m > 1) acc = tape.scale(acc, T(1) / static_cast<T>(cfg.heads_m));
  return tape.elu(acc, static_cast<T>(cfg.elu_alpha));
}

template <class T>
Var agt_layer(Bound<T>& b, Var x, const SequenceIndex& seq, int layer, bool first_layer, bool final_layer,
              const ModelConfig& cfg, DropoutState& drop) {
  auto& tape = b.tape;
  // Rows of x that act as queries, and the (query, key) pairs as rows of x.
  const nd::Index& q_rows = final_layer ? (first_layer ? seq.first_node : seq.first_pos)
                                        : (first_layer ? seq.tokens : seq.positions);
  const nd::Index& pq = final_layer ? (first_layer ? seq.pos_first_node : seq.pos_first_pos)
                                    : (first_layer ? seq.pair_q_node : seq.pair_q);
  const nd::Index& pk = final_layer ? (first_layer ? seq.tokens : seq.positions)
                                    : (first_layer ? seq.pair_k_node : seq.pair_k);
  const nd::Offsets& segs = final_layer ? seq.seq_offsets : seq.pair_offsets;

  const auto prefix = fmt::format("agt.{}.", layer);
  const Var q = tape.matmul(x, b[prefix + "Wq"]);
  const Var k = tape.matmul(x, b[prefix + "Wk"]);
  const Var v = tape.matmul(x, b[prefix + "Wv"]);
  const std::size_t dh = static_cast<std::size_t>(cfg.d_hidden / cfg.heads_t);
  const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(dh));
  std::vector<Var> heads;
  for (int h = 0; h < cfg.heads_t; ++h) {
    const auto off = static_cast<std::size_t>(h) * dh;
    const Var qh = cfg.heads_t == 1 ? q : tape.slice_cols(q, off, dh);
    const Var kh = cfg.heads_t == 1 ? k : tape.slice_cols(k, off, dh);
    const Var vh = cfg.heads_t == 1 ? v : tape.slice_cols(v, off, dh);
    const Var scores = tape.scale(tape.indexed_row_dot(qh, pq, kh, pk), inv_sqrt);
    Var attn = tape.segment_softmax(scores, segs);
    attn = tape.dropout(attn, static_cast<T>(cfg.attn_dropout), drop.next_key(), drop.training);
    heads.push_back(tape.scatter_weighted_sum(vh, pk, attn, segs));
  }
  const Var msa = heads.size() == 1 ? heads[0] : tape.concat_cols(heads);
  const Var residual = tape.gather_rows(x, q_rows);
  const Var out = tape.matmul(msa, b[prefix + "Wo"]);
  Var y = tape.layer_norm(tape.add(out, residual), b[prefix + "ln_gain"], b[prefix + "ln_bias"],
                          static_cast<T>(cfg.ln_eps));
  if (cfg.ffn_in_agt) {
    const Var hidden = tape.leaky_relu(tape.add_row(tape.matmul(y, b[prefix + "ffn_W1"]), b[prefix + "ffn_b1"]), T(0));
    const Var ff = tape.add_row(tape.matmul(hidden, b[prefix + "ffn_W2"]), b[prefix + "ffn_b2"]);
    y = tape.layer_norm(tape.add(ff, y), b[prefix + "ln2_gain"], b[prefix + "ln2_bias"], static_cast<T>(cfg.ln_eps));
  }
  return y;
}

template <class T>
Var agt_forward(Bound<T>& b, Var h_prime, const SequenceIndex& seq, const ModelConfig& cfg, DropoutState& drop) {
  Var x = h_prime;
  for (int l = 0; l < cfg.l_t; ++l) x = agt_layer(b, x, seq, l, l == 0, l == cfg.l_t - 1, cfg, drop);
  return x;
}

template <class T>
Var classify(Bound<T>& b, Var h_final) {
  return b.tape.add_row(b.tape.matmul(h_final, b["cls.W"]), b["cls.b"]);
}

template <class T>
Var classification_loss(Tape<T>& tape, Var logits, const std::vector<std::int32_t>& rows, const hin::Labels& labels) {
  if (rows.empty()) throw DataError("loss mask selects no targets");
  for (auto r : rows) {
    if (r < 0 || static_cast<std::size_t>(r) >= labels.labeled.size() || !labels.is_labeled(static_cast<std::size_t>(r))) {
      throw DataError(fmt::format("target {} in the loss mask has no label", r));
    }
  }
  const Var picked = tape.gather_rows(logits, nd::make_index(rows));
  if (!labels.multi_label) {
    std::vector<std::int32_t> y;
    y.reserve(rows.size());
    for (auto r : rows) y.push_back(labels.class_of[static_cast<std::size_t>(r)]);
    return tape.cross_entropy_with_logits(picked, nd::make_index(std::move(y)));
  }
  Tensor<T> y(rows.size(), static_cast<std::size_t>(labels.num_classes));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int c = 0; c < labels.num_classes; ++c) y(i, static_cast<std::size_t>(c)) = labels.has(static_cast<std::size_t>(rows[i]), c) ? T(1) : T(0);
  }
  return tape.bce_with_logits(picked, y);
}

template <class T>
Var model_forward(Bound<T>& b, const ModelInputs<T>& in, const hin::HeteroGraph& graph, const ModelConfig& cfg,
                  DropoutState& drop) {
  auto& tape = b.tape;
  const T rate = static_cast<T>(cfg.dropout);
  Var h = project_features(b, in, graph);
  if (cfg.variant != Variant::no_agm) {
    const Var w = tape.input(in.message_weights);
    for (int l = 0; l < cfg.l_m; ++l) {
      h = tape.dropout(h, rate, drop.next_key(), drop.training);
      h = agm_layer(b, h, in.messages, w, l, cfg, drop);
    }
  }
  Var h_final{};
  if (cfg.variant == Variant::no_agt) {
    h_final = tape.gather_rows(h, in.target_nodes);
  } else {
    h = tape.dropout(h, rate, drop.next_key(), drop.training);
    h_final = agt_forward(b, h, in.sequences, cfg, drop);
  }
  h_final = tape.dropout(h_final, rate, drop.next_key(), drop.training);
  return classify(b, h_final);
}

template <class T>
std::vector<std::uint8_t> predict(const Tensor<T>& logits, bool multi_label) {
  std::vector<std::uint8_t> out(logits.size(), 0);
  for (std::size_t r = 0; r < logits.rows; ++r) {
    const auto row = logits.row(r);
    if (multi_label) {
      for (std::size_t c = 0; c < logits.cols; ++c) out[r * logits.cols + c] = row[c] > T(0) ? 1 : 0;
    } else if (logits.cols > 0) {
      const auto best = std::max_element(row.begin(), row.end()) - row.begin();
      out[r * logits.cols + static_cast<std::size_t>(best)] = 1;
    }
  }
  return out;
}

#define AGHINT_MODEL_INSTANTIATE(T)                                                                                  \
  template struct ModelParams<T>;                                                                                    \
  template ModelParams<T> init_params<T>(const ModelConfig&, const hin::HeteroGraph&, std::uint64_t);                \
  template ModelInputs<T> build_inputs<T>(const hin::HeteroGraph&, const ModelConfig&, const pathsample::GuidanceSets&); \
  template ModelInputs<T> build_inputs<T>(const hin::HeteroGraph&, const ModelConfig&, std::span<const double>,       \
                                          const pathsample::Ragged&);                                                \
  template struct Bound<T>;                                                                                          \
  template Var project_features<T>(Bound<T>&, const ModelInputs<T>&, const hin::HeteroGraph&);                       \
  template Var agm_layer<T>(Bound<T>&, Var, const MessageIndex&, Var, int, const ModelConfig&, DropoutState&);       \
  template Var agt_layer<T>(Bound<T>&, Var, const SequenceIndex&, int, bool, bool, const ModelConfig&, DropoutState&); \
  template Var agt_forward<T>(Bound<T>&, Var, const SequenceIndex&, const ModelConfig&, DropoutState&);              \
  template Var classify<T>(Bound<T>&, Var);                                                                          \
  template Var classification_loss<T>(Tape<T>&, Var, const std::vector<std::int32_t>&, const hin::Labels&);          \
  template Var model_forward<T>(Bound<T>&, const ModelInputs<T>&, const hin::HeteroGraph&, const ModelConfig&,       \
                                DropoutState&);                                                                      \
  template std::vector<std::uint8_t> predict<T>(const Tensor<T>&, bool);

AGHINT_MODEL_INSTANTIATE(float)
AGHINT_MODEL_INSTANTIATE(double)

}  // namespace aghint::model
