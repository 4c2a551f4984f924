#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "aghint/hin.hpp"
#include "aghint/ndiff.hpp"
#include "aghint/pathsample.hpp"

namespace aghint::model {

using nd::Tape;
using nd::Tensor;
using nd::Var;

enum class Variant : std::uint8_t { full, no_agt, no_agm, no_ag };

const char* to_string(Variant v);
Variant parse_variant(const std::string& s);

struct ModelConfig {
  int d0 = 64;
  int d_hidden = 64;
  int l_m = 2;
  int l_t = 1;
  int heads_m = 1;
  int heads_t = 1;
  double alpha = 0.8;
  int k_top = 5;
  int k_btm = 5;
  int n = 16;
  int r_top = 4;
  int r_btm = 6;
  double w_min = pathsample::kDefaultWeightFloor;
  double dropout = 0.2;
  double attn_dropout = 0.0;
  double slope = 0.2;      // leaky-relu inside the AGM score
  double elu_alpha = 1.0;  // output activation of each AGM layer
  double ln_eps = 1e-5;
  Variant variant = Variant::full;
  bool multi_label = false;
  bool ffn_in_agt = false;

  // Throws UsageError.
  void validate() const;
  nlohmann::json to_json() const;
  // Missing keys keep their defaults; unknown keys are rejected.
  static ModelConfig from_json(const nlohmann::json& j);
  std::string hash() const;
  // Guidance the variant consumes. no_ag uses context sequences and unit weights.
  pathsample::GuidanceParams guidance_params() const;
  bool operator==(const ModelConfig&) const = default;
};

// Named parameter tensors in a fixed creation order.
template <class T>
struct ModelParams {
  std::vector<std::string> names;
  std::vector<Tensor<T>> values;

  std::size_t index_of(const std::string& name) const;
  bool contains(const std::string& name) const;
  const Tensor<T>& at(const std::string& name) const { return values[index_of(name)]; }
  Tensor<T>& at(const std::string& name) { return values[index_of(name)]; }
  std::size_t scalar_count() const;
  bool all_finite() const;
  template <class U>
  ModelParams<U> cast() const {
    ModelParams<U> out;
    out.names = names;
    for (const auto& t : values) {
      Tensor<U> u(t.rows, t.cols);
      for (std::size_t i = 0; i < t.size(); ++i) u.data[i] = static_cast<U>(t.data[i]);
      out.values.push_back(std::move(u));
    }
    return out;
  }
};

// Glorot-uniform matrices, zero biases, unit layer-norm gains. Values are drawn
// in 64-bit and rounded, so both precisions start from the same point.
template <class T>
ModelParams<T> init_params(const ModelConfig& cfg, const hin::HeteroGraph& graph, std::uint64_t seed);

enum class ParamInit : std::uint8_t { glorot, zeros, ones };

struct ParamSpec {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  ParamInit init = ParamInit::glorot;
};

// Every parameter the config needs, in creation order.
std::vector<ParamSpec> param_specs(const ModelConfig& cfg, const hin::HeteroGraph& graph);

// Incoming messages grouped by destination. Node i receives from every
// neighbour j over slot j->i; nodes without neighbours get a unit self-loop.
struct MessageIndex {
  nd::Offsets offsets;  // node_count + 1
  nd::Index src;
  nd::Index dst;
  std::vector<double> weights;
};

// `slot_weights` is per directed slot; empty means all ones.
MessageIndex build_message_index(const hin::HeteroGraph& graph, std::span<const double> slot_weights);

// Index arrays for the transformer over per-target sequences. Positions
// number the concatenated sequences; *_node arrays hold the node id at those
// positions, which the first layer uses to read H' directly.
struct SequenceIndex {
  nd::Offsets seq_offsets;  // targets + 1, into positions
  nd::Index tokens;         // node id per position
  nd::Index positions;      // 0..P-1
  nd::Index first_pos;      // first position of each sequence
  nd::Index first_node;
  nd::Index pos_first_pos;  // per position, the first position of its sequence
  nd::Index pos_first_node;
  // Every (query, key) position pair within a sequence, grouped by query.
  nd::Index pair_q;
  nd::Index pair_k;
  nd::Index pair_q_node;
  nd::Index pair_k_node;
  nd::Offsets pair_offsets;  // P + 1
};

SequenceIndex build_sequence_index(const hin::HeteroGraph& graph, const pathsample::Ragged& sequences);

// Everything the forward pass needs that does not change between steps.
template <class T>
struct ModelInputs {
  std::vector<Tensor<T>> features;  // per node type, rows in within-type order
  nd::Index stack_to_global;        // row of the stacked projection for each global id
  MessageIndex messages;
  Tensor<T> message_weights;        // E x 1
  SequenceIndex sequences;
  nd::Index target_nodes;           // global id per target
  int num_classes = 0;
};

// Checks that the guidance was computed for this graph and config.
template <class T>
ModelInputs<T> build_inputs(const hin::HeteroGraph& graph, const ModelConfig& cfg,
                            const pathsample::GuidanceSets& guidance);
// Explicit weights and sequences, no consistency check.
template <class T>
ModelInputs<T> build_inputs(const hin::HeteroGraph& graph, const ModelConfig& cfg, std::span<const double> slot_weights,
                            const pathsample::Ragged& sequences);

// Dropout keys derive from `seed` and a per-call counter.
struct DropoutState {
  bool training = false;
  std::uint64_t seed = 0;
  std::uint64_t counter = 0;
  std::uint64_t next_key();
};

// Parameters registered on a tape.
template <class T>
struct Bound {
  Tape<T>& tape;
  const ModelParams<T>& params;
  std::vector<Var> vars;

  Bound(Tape<T>& t, const ModelParams<T>& p);
  Var operator[](const std::string& name) const { return vars[params.index_of(name)]; }
};

template <class T>
Var project_features(Bound<T>& b, const ModelInputs<T>& in, const hin::HeteroGraph& graph);

template <class T>
Var agm_layer(Bound<T>& b, Var h, const MessageIndex& msg, Var weights, int layer, const ModelConfig& cfg,
              DropoutState& drop);

// One transformer layer. With `final_layer` only the first position of each
// sequence is computed (one row per sequence); otherwise one row per position.
// `first_layer` means `x` is H' (rows = nodes) rather than per-position states.
template <class T>
Var agt_layer(Bound<T>& b, Var x, const SequenceIndex& seq, int layer, bool first_layer, bool final_layer,
              const ModelConfig& cfg, DropoutState& drop);

template <class T>
Var agt_forward(Bound<T>& b, Var h_prime, const SequenceIndex& seq, const ModelConfig& cfg, DropoutState& drop);

template <class T>
Var classify(Bound<T>& b, Var h_final);

// Mean loss over the given target rows (within-type ids). Softmax cross-entropy,
// or per-class binary cross-entropy for multi-label sets.
template <class T>
Var classification_loss(Tape<T>& tape, Var logits, const std::vector<std::int32_t>& rows, const hin::Labels& labels);

// Logits for every target, in target order.
template <class T>
Var model_forward(Bound<T>& b, const ModelInputs<T>& in, const hin::HeteroGraph& graph, const ModelConfig& cfg,
                  DropoutState& drop);

// Row-major rows x classes 0/1 matrix: argmax (multi-class, lowest index on
// ties) or logit > 0, i.e. sigmoid > 0.5 (multi-label).
template <class T>
std::vector<std::uint8_t> predict(const Tensor<T>& logits, bool multi_label);

// ---- checkpoints --------------------------------------------------------------

enum class Precision : std::uint8_t { f32, f64 };

struct Checkpoint {
  ModelConfig config;
  Precision precision = Precision::f32;
  nlohmann::json meta;  // graph hash, guidance key, training summary
  ModelParams<double> params;  // stored values widened to 64-bit
};

// Written to a temporary file and renamed into place.
template <class T>
void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg, const ModelParams<T>& params,
                     const nlohmann::json& meta);
// Rejects files whose stored config hash differs from `expected_config_hash`
// (when nonempty) or from the hash of the embedded config.
Checkpoint load_checkpoint(const std::filesystem::path& path, const std::string& expected_config_hash = {});

}  // namespace aghint::model
