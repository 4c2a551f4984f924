#include <fmt/format.h>

#include "aghint/train.hpp"

namespace aghint::train {

CaseStudy case_study(std::span<const std::uint8_t> predicted_a, std::span<const std::uint8_t> predicted_b,
                     const hin::Labels& labels, std::span<const std::int32_t> test_rows,
                     const disparity::BucketAssignment& buckets) {
  if (predicted_a.size() != predicted_b.size()) throw UsageError("case_study: prediction matrices differ in size");
  const auto a = bucket_scores(predicted_a, labels, test_rows, buckets);
  const auto b = bucket_scores(predicted_b, labels, test_rows, buckets);
  CaseStudy cs;
  for (std::size_t k = 0; k < a.size(); ++k) {
    CaseStudyRow row;
    row.bucket = a[k].bucket;
    row.lo = a[k].lo;
    row.hi = a[k].hi;
    row.count = a[k].count;
    row.f1_a = a[k].micro_f1;
    row.f1_b = b[k].micro_f1;
    if (row.f1_a && row.f1_b) row.delta = *row.f1_a - *row.f1_b;
    cs.rows.push_back(row);
  }
  return cs;
}

std::optional<std::pair<double, double>> extreme_bucket_deltas(const CaseStudy& cs) {
  const CaseStudyRow* lo = nullptr;
  const CaseStudyRow* hi = nullptr;
  for (const auto& r : cs.rows) {
    if (r.count == 0 || !r.delta) continue;
    if (!lo) lo = &r;
    hi = &r;
  }
  if (!lo || lo == hi) return std::nullopt;
  return std::make_pair(*hi->delta, *lo->delta);
}

nlohmann::json CaseStudy::to_json() const {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows) {
    rows_json.push_back({{"bucket", r.bucket},
                         {"lo", r.lo},
                         {"hi", r.hi},
                         {"count", r.count},
                         {"micro_f1_a", opt(r.f1_a)},
                         {"micro_f1_b", opt(r.f1_b)},
                         {"delta", opt(r.delta)}});
  }
  return {{"model_a", label_a}, {"model_b", label_b}, {"buckets", rows_json}};
}

std::string CaseStudy::to_csv() const {
  auto opt = [](const std::optional<double>& v) { return v ? fmt::format("{:.6f}", *v) : std::string(); };
  std::string out = "bucket,lo,hi,count,micro_f1_a,micro_f1_b,delta\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{:.4f},{:.4f},{},{},{},{}\n", r.bucket, r.lo, r.hi, r.count, opt(r.f1_a), opt(r.f1_b),
                       opt(r.delta));
  }
  return out;
}

}  // namespace aghint::train
