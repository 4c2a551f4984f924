#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "aghint/train.hpp"

namespace aghint::train {

void SplitRatios::validate() const {
  if (train < 0 || val < 0 || test < 0 || train + val + test != 100) {
    throw UsageError(fmt::format("split ratios {}:{}:{} must be nonnegative and sum to 100", train, val, test));
  }
  if (train == 0) throw UsageError("split ratios leave no training nodes");
}

std::string Split::hash() const {
  Sha256 h;
  for (const auto* part : {&train, &val, &test}) {
    h.update_value(part->size());
    h.update_span(std::span<const std::int32_t>(*part));
  }
  return h.hex();
}

Split split_nodes(const hin::HeteroGraph& graph, const SplitRatios& ratios, std::uint64_t seed) {
  ratios.validate();
  const auto& labels = graph.labels();
  std::vector<std::int32_t> labeled;
  for (std::size_t t = 0; t < graph.target_count(); ++t) {
    if (labels.is_labeled(t)) labeled.push_back(static_cast<std::int32_t>(t));
  }
  if (labeled.size() < 3) throw DataError(fmt::format("only {} labeled targets; at least 3 are needed", labeled.size()));
  Split split;
  if (!graph.split().empty()) {
    split.from_file = true;
    for (auto t : labeled) {
      switch (graph.split()[static_cast<std::size_t>(t)]) {
        case hin::SplitTag::train: split.train.push_back(t); break;
        case hin::SplitTag::val: split.val.push_back(t); break;
        case hin::SplitTag::test: split.test.push_back(t); break;
        case hin::SplitTag::none: break;
      }
    }
    if (split.train.empty()) throw DataError("split table assigns no training nodes");
    return split;
  }
  std::mt19937_64 rng(derive_seed(seed, Stream::split));
  for (std::size_t i = labeled.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng() % i);
    std::swap(labeled[i - 1], labeled[j]);
  }
  const auto n = static_cast<double>(labeled.size());
  auto n_train = static_cast<std::size_t>(std::llround(n * ratios.train / 100.0));
  auto n_val = static_cast<std::size_t>(std::llround(n * ratios.val / 100.0));
  n_train = std::clamp<std::size_t>(n_train, 1, labeled.size());
  n_val = std::min(n_val, labeled.size() - n_train);
  split.train.assign(labeled.begin(), labeled.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.val.assign(labeled.begin() + static_cast<std::ptrdiff_t>(n_train),
                   labeled.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  split.test.assign(labeled.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), labeled.end());
  for (auto* part : {&split.train, &split.val, &split.test}) std::sort(part->begin(), part->end());
  return split;
}

F1Scores f1_scores(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth, std::size_t classes,
                   ZeroSupport policy) {
  if (classes == 0) throw UsageError("f1_scores: no classes");
  if (predicted.size() != truth.size() || predicted.size() % classes != 0) {
    throw UsageError(fmt::format("f1_scores: {} predictions vs {} labels", predicted.size(), truth.size()));
  }
  const std::size_t rows = predicted.size() / classes;
  if (rows == 0) throw UsageError("f1_scores: empty input");
  std::vector<std::size_t> tp(classes, 0), fp(classes, 0), fn(classes, 0);
  std::size_t exact = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    bool match = true;
    for (std::size_t c = 0; c < classes; ++c) {
      const bool p = predicted[r * classes + c] != 0;
      const bool t = truth[r * classes + c] != 0;
      if (p && t) ++tp[c];
      if (p && !t) ++fp[c];
      if (!p && t) ++fn[c];
      match = match && p == t;
    }
    if (match) ++exact;
  }
  const std::size_t TP = std::accumulate(tp.begin(), tp.end(), std::size_t{0});
  const std::size_t FP = std::accumulate(fp.begin(), fp.end(), std::size_t{0});
  const std::size_t FN = std::accumulate(fn.begin(), fn.end(), std::size_t{0});
  F1Scores s;
  const std::size_t denom = 2 * TP + FP + FN;
  s.micro = denom == 0 ? 1.0 : 2.0 * static_cast<double>(TP) / static_cast<double>(denom);
  double sum = 0.0;
  std::size_t counted = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    const std::size_t d = 2 * tp[c] + fp[c] + fn[c];
    if (d == 0 && policy == ZeroSupport::skip) continue;
    sum += d == 0 ? 0.0 : 2.0 * static_cast<double>(tp[c]) / static_cast<double>(d);
    ++counted;
  }
  s.macro = counted == 0 ? 0.0 : sum / static_cast<double>(counted);
  s.accuracy = static_cast<double>(exact) / static_cast<double>(rows);
  return s;
}

std::vector<std::uint8_t> truth_matrix(const hin::Labels& labels, std::span<const std::int32_t> rows) {
  const auto c = static_cast<std::size_t>(labels.num_classes);
  std::vector<std::uint8_t> out(rows.size() * c, 0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto t = static_cast<std::size_t>(rows[i]);
    for (std::size_t k = 0; k < c; ++k) out[i * c + k] = labels.has(t, static_cast<int>(k)) ? 1 : 0;
  }
  return out;
}

std::vector<std::uint8_t> select_rows(std::span<const std::uint8_t> matrix, std::size_t classes,
                                      std::span<const std::int32_t> rows) {
  std::vector<std::uint8_t> out;
  out.reserve(rows.size() * classes);
  for (auto r : rows) {
    const auto base = static_cast<std::size_t>(r) * classes;
    out.insert(out.end(), matrix.begin() + static_cast<std::ptrdiff_t>(base),
               matrix.begin() + static_cast<std::ptrdiff_t>(base + classes));
  }
  return out;
}

std::vector<BucketScore> bucket_scores(std::span<const std::uint8_t> predicted_all, const hin::Labels& labels,
                                       std::span<const std::int32_t> rows, const disparity::BucketAssignment& buckets) {
  const int b = buckets.bucket_count();
  const auto classes = static_cast<std::size_t>(labels.num_classes);
  std::vector<std::vector<std::int32_t>> members(static_cast<std::size_t>(b));
  for (auto r : rows) {
    const int k = buckets.bucket_of.at(static_cast<std::size_t>(r));
    if (k >= 0) members[static_cast<std::size_t>(k)].push_back(r);
  }
  std::vector<BucketScore> out;
  for (int k = 0; k < b; ++k) {
    BucketScore s;
    s.bucket = k;
    s.lo = buckets.boundaries[static_cast<std::size_t>(k)];
    s.hi = buckets.boundaries[static_cast<std::size_t>(k) + 1];
    const auto& m = members[static_cast<std::size_t>(k)];
    s.count = m.size();
    if (!m.empty()) {
      s.micro_f1 = f1_scores(select_rows(predicted_all, classes, m), truth_matrix(labels, m), classes).micro;
    }
    out.push_back(s);
  }
  return out;
}

namespace {

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

}  // namespace

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json buckets = nlohmann::json::array();
  for (const auto& b : per_bucket) {
    buckets.push_back({{"bucket", b.bucket}, {"lo", b.lo}, {"hi", b.hi}, {"count", b.count}, {"micro_f1", optional_json(b.micro_f1)}});
  }
  return {{"micro_f1", micro_f1},
          {"macro_f1", macro_f1},
          {"accuracy", accuracy},
          {"train_accuracy", train_accuracy},
          {"best_val_macro_f1", best_val_macro_f1},
          {"best_epoch", best_epoch},
          {"epochs_run", epochs_run},
          {"loss_history", loss_history},
          {"val_macro_history", val_macro_history},
          {"per_bucket", buckets},
          {"wall_seconds", wall_seconds},
          {"split_sizes", {{"train", train_size}, {"val", val_size}, {"test", test_size}}},
          {"warnings", warnings},
          {"config", config},
          {"graph_hash", graph_hash},
          {"guidance_key", guidance_key},
          {"split_hash", split_hash}};
}

}  // namespace aghint::train
