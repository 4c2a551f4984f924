#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "aghint/disparity.hpp"
#include "aghint/hin.hpp"
#include "aghint/model.hpp"
#include "aghint/pathsample.hpp"

namespace aghint::train {

// ---- splits ------------------------------------------------------------------

struct SplitRatios {
  int train = 24;
  int val = 6;
  int test = 70;
  void validate() const;
  bool operator==(const SplitRatios&) const = default;
};

// Within-type target ids, each list ascending.
struct Split {
  std::vector<std::int32_t> train;
  std::vector<std::int32_t> val;
  std::vector<std::int32_t> test;
  bool from_file = false;
  std::string hash() const;
};

// Honors the graph's split table when present, otherwise shuffles the labeled
// targets with a generator seeded from `seed` and cuts round(n * r / 100).
Split split_nodes(const hin::HeteroGraph& graph, const SplitRatios& ratios, std::uint64_t seed);

// ---- metrics -----------------------------------------------------------------

enum class ZeroSupport : std::uint8_t { count_as_zero, skip };

struct F1Scores {
  double micro = 0.0;
  double macro = 0.0;
  double accuracy = 0.0;
};

// `predicted` and `truth` are row-major rows x classes 0/1 matrices. Micro-F1
// pools TP/FP/FN over every cell; macro-F1 averages per-class F1. A class with
// no support and no predictions scores 0, or is left out with `skip`.
// Accuracy is exact-match per row.
F1Scores f1_scores(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth, std::size_t classes,
                   ZeroSupport policy = ZeroSupport::count_as_zero);

// Truth matrix for the given target rows.
std::vector<std::uint8_t> truth_matrix(const hin::Labels& labels, std::span<const std::int32_t> rows);
// Rows of a targets x classes matrix.
std::vector<std::uint8_t> select_rows(std::span<const std::uint8_t> matrix, std::size_t classes,
                                      std::span<const std::int32_t> rows);

// ---- training ------------------------------------------------------------------

struct TrainConfig {
  double lr = 1e-3;
  double weight_decay = 1e-4;
  int max_epochs = 300;
  int patience = 50;
  std::uint64_t seed = 7;  // split, and with `run`, init and dropout
  int run = 0;             // varies init and dropout only
  SplitRatios ratios;
  model::Precision precision = model::Precision::f32;
  ZeroSupport zero_support = ZeroSupport::count_as_zero;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  bool operator==(const TrainConfig&) const = default;
};

struct BucketScore {
  int bucket = 0;
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  std::optional<double> micro_f1;  // absent for empty buckets
};

struct MetricsReport {
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  double train_accuracy = 0.0;
  double best_val_macro_f1 = 0.0;
  int best_epoch = -1;
  int epochs_run = 0;
  std::vector<double> loss_history;
  std::vector<double> val_macro_history;
  std::vector<BucketScore> per_bucket;
  double wall_seconds = 0.0;
  std::size_t train_size = 0;
  std::size_t val_size = 0;
  std::size_t test_size = 0;
  std::vector<std::string> warnings;
  nlohmann::json config;
  std::string graph_hash;
  std::string guidance_key;
  std::string split_hash;

  nlohmann::json to_json() const;
};

template <class T>
struct TrainOutcome {
  model::ModelParams<T> params;
  MetricsReport report;
  Split split;
};

// Adam on the mean training loss; early stopping on validation macro-F1 with
// the best epoch's parameters restored; test metrics computed once at the end.
template <class T>
TrainOutcome<T> train_model(const hin::HeteroGraph& graph, const pathsample::GuidanceSets& guidance,
                            const model::ModelConfig& model_cfg, const TrainConfig& train_cfg);

// Logits for all targets without dropout.
template <class T>
nd::Tensor<T> infer_logits(const hin::HeteroGraph& graph, const model::ModelInputs<T>& inputs,
                       const model::ModelParams<T>& params, const model::ModelConfig& cfg);

// Test micro-F1 per neighbourhood-disparity bucket.
std::vector<BucketScore> bucket_scores(std::span<const std::uint8_t> predicted_all, const hin::Labels& labels,
                                       std::span<const std::int32_t> rows, const disparity::BucketAssignment& buckets);

// Metrics of a stored checkpoint on a split.
MetricsReport evaluate_checkpoint(const hin::HeteroGraph& graph, const pathsample::GuidanceSets& guidance,
                                  const model::Checkpoint& ck, const Split& split,
                                  const disparity::BucketAssignment* buckets = nullptr,
                                  ZeroSupport policy = ZeroSupport::count_as_zero);

// Predictions of a checkpoint for every target, in its stored precision.
std::vector<std::uint8_t> checkpoint_predictions(const hin::HeteroGraph& graph,
                                                 const pathsample::GuidanceSets& guidance,
                                                 const model::Checkpoint& ck);

// ---- case study -------------------------------------------------------------------

struct CaseStudyRow {
  int bucket = 0;
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  std::optional<double> f1_a;
  std::optional<double> f1_b;
  std::optional<double> delta;  // f1_a - f1_b
};

struct CaseStudy {
  std::vector<CaseStudyRow> rows;
  std::string label_a;
  std::string label_b;
  nlohmann::json to_json() const;
  std::string to_csv() const;
};

// Both prediction matrices cover every target; only `test_rows` are scored.
CaseStudy case_study(std::span<const std::uint8_t> predicted_a, std::span<const std::uint8_t> predicted_b,
                     const hin::Labels& labels, std::span<const std::int32_t> test_rows,
                     const disparity::BucketAssignment& buckets);

// Highest and lowest buckets with at least one test node; nullopt when fewer
// than two buckets are populated.
std::optional<std::pair<double, double>> extreme_bucket_deltas(const CaseStudy& cs);

}  // namespace aghint::train
