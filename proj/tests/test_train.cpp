#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <numeric>
#include <set>

#include "aghint/train.hpp"
#include "support.hpp"

using namespace aghint;
using namespace aghint::train;

namespace {

hin::HeteroGraph synth(std::uint64_t seed, int targets = 150, double rho = 0.8) {
  hin::SynthSpec spec;
  spec.seed = seed;
  spec.num_target = targets;
  spec.aux_nodes = {40, 20};
  spec.rho = rho;
  return hin::synth_hin(spec);
}

model::ModelConfig small_model() {
  model::ModelConfig cfg;
  cfg.d0 = 16;
  cfg.d_hidden = 16;
  cfg.l_m = 1;
  cfg.l_t = 1;
  cfg.k_top = 3;
  cfg.k_btm = 3;
  cfg.n = 6;
  cfg.dropout = 0.0;
  return cfg;
}

TrainConfig quick_train(int epochs = 20) {
  TrainConfig t;
  t.lr = 0.01;
  t.max_epochs = epochs;
  t.patience = epochs;
  t.precision = model::Precision::f64;
  return t;
}

// one-hot rows from class ids
std::vector<std::uint8_t> onehot(const std::vector<int>& cls, std::size_t classes) {
  std::vector<std::uint8_t> out(cls.size() * classes, 0);
  for (std::size_t i = 0; i < cls.size(); ++i) out[i * classes + static_cast<std::size_t>(cls[i])] = 1;
  return out;
}

}  // namespace

TEST(Split, DefaultSizesDisjointAndDeterministic) {
  const auto g = synth(1, 200);
  const auto s = split_nodes(g, {}, 5);
  EXPECT_EQ(s.train.size(), 48u);
  EXPECT_EQ(s.val.size(), 12u);
  EXPECT_EQ(s.test.size(), 140u);
  std::set<std::int32_t> all(s.train.begin(), s.train.end());
  all.insert(s.val.begin(), s.val.end());
  all.insert(s.test.begin(), s.test.end());
  EXPECT_EQ(all.size(), 200u);
  EXPECT_TRUE(std::is_sorted(s.train.begin(), s.train.end()));
  EXPECT_EQ(split_nodes(g, {}, 5).hash(), s.hash());
  EXPECT_NE(split_nodes(g, {}, 6).hash(), s.hash());
}

TEST(Split, InvalidRatios) {
  const auto g = synth(1, 60);
  EXPECT_THROW(split_nodes(g, {50, 50, 10}, 1), UsageError);
  EXPECT_THROW(split_nodes(g, {0, 30, 70}, 1), UsageError);
}

TEST(Split, AllTrainWarnsAboutEmptyValidation) {
  const auto g = synth(2, 60);
  const auto guidance = pathsample::compute_guidance(g, small_model().guidance_params());
  auto t = quick_train(3);
  t.ratios = {100, 0, 0};
  const auto out = train_model<double>(g, guidance, small_model(), t);
  EXPECT_EQ(out.split.train.size(), 60u);
  const auto& w = out.report.warnings;
  EXPECT_TRUE(std::any_of(w.begin(), w.end(), [](const std::string& s) { return s.find("validation") != std::string::npos; }));
  EXPECT_TRUE(std::any_of(w.begin(), w.end(), [](const std::string& s) { return s.find("test") != std::string::npos; }));
}

TEST(F1, Examples) {
  // truth 0 0 1 1, predicted 0 1 1 1
  const auto truth = onehot({0, 0, 1, 1}, 2);
  const auto pred = onehot({0, 1, 1, 1}, 2);
  const auto s = f1_scores(pred, truth, 2);
  EXPECT_NEAR(s.micro, 0.75, 1e-12);
  // class 0: p 1 r .5 -> 2/3; class 1: p 2/3 r 1 -> 0.8
  EXPECT_NEAR(s.macro, (2.0 / 3.0 + 0.8) / 2, 1e-12);
  EXPECT_NEAR(s.accuracy, 0.75, 1e-12);

  // Half right on two balanced classes.
  const auto half = f1_scores(onehot({0, 1, 0, 1}, 2), onehot({0, 0, 1, 1}, 2), 2);
  EXPECT_NEAR(half.macro, 0.5, 1e-12);

  // Constant prediction over three balanced classes.
  const auto constant = f1_scores(onehot({0, 0, 0}, 3), onehot({0, 1, 2}, 3), 3);
  EXPECT_NEAR(constant.micro, 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(constant.macro, 0.5 / 3.0, 1e-12);
}

TEST(F1, ZeroSupportPolicies) {
  // class 2 never appears and is never predicted
  const auto truth = onehot({0, 1}, 3), pred = onehot({0, 1}, 3);
  EXPECT_NEAR(f1_scores(pred, truth, 3, ZeroSupport::count_as_zero).macro, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(f1_scores(pred, truth, 3, ZeroSupport::skip).macro, 1.0, 1e-12);
}

TEST(F1, AllCorrectAllWrongAndRelabeling) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t classes = 2 + trial % 5, n = 5 + trial;
    std::uniform_int_distribution<int> c(0, static_cast<int>(classes) - 1);
    std::vector<int> t(n), p(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = c(rng), p[i] = c(rng);
    const auto right = f1_scores(onehot(t, classes), onehot(t, classes), classes, ZeroSupport::skip);
    ASSERT_DOUBLE_EQ(right.micro, 1.0);
    ASSERT_DOUBLE_EQ(right.macro, 1.0);
    std::vector<int> wrong(n);
    for (std::size_t i = 0; i < n; ++i) wrong[i] = (t[i] + 1) % static_cast<int>(classes);
    ASSERT_DOUBLE_EQ(f1_scores(onehot(wrong, classes), onehot(t, classes), classes).micro, 0.0);
    // Renaming classes consistently leaves both scores unchanged.
    std::vector<int> perm(classes);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> t2(n), p2(n);
    for (std::size_t i = 0; i < n; ++i) t2[i] = perm[t[i]], p2[i] = perm[p[i]];
    const auto a = f1_scores(onehot(p, classes), onehot(t, classes), classes);
    const auto b = f1_scores(onehot(p2, classes), onehot(t2, classes), classes);
    ASSERT_NEAR(a.micro, b.micro, 1e-12);
    ASSERT_NEAR(a.macro, b.macro, 1e-12);
  }
}

TEST(Train, SeparableSynthReachesPerfectTrainAccuracy) {
  const auto g = synth(3, 150, 1.0);
  auto m = small_model();
  m.variant = model::Variant::no_agm;  // the residual keeps each target's own attributes
  const auto guidance = pathsample::compute_guidance(g, m.guidance_params());
  auto t = quick_train(200);
  t.ratios = {100, 0, 0};  // no validation: the last epoch's parameters are kept
  const auto out = train_model<double>(g, guidance, m, t);
  EXPECT_DOUBLE_EQ(out.report.train_accuracy, 1.0);
}

TEST(Train, ZeroLearningRateKeepsLossConstant) {
  const auto g = synth(4, 80);
  const auto m = small_model();
  const auto guidance = pathsample::compute_guidance(g, m.guidance_params());
  auto t = quick_train(5);
  t.lr = 0.0;
  t.weight_decay = 0.0;
  const auto out = train_model<double>(g, guidance, m, t);
  ASSERT_EQ(out.report.loss_history.size(), 5u);
  for (double l : out.report.loss_history) EXPECT_EQ(l, out.report.loss_history[0]);
  EXPECT_EQ(out.params.values, model::init_params<double>(m, g, derive_seed(t.seed, Stream::init, 0)).values);
}

TEST(Train, DeterministicInDoublePrecision) {
  const auto g = synth(5, 100);
  auto m = small_model();
  m.dropout = 0.3;
  const auto guidance = pathsample::compute_guidance(g, m.guidance_params());
  const auto a = train_model<double>(g, guidance, m, quick_train(10));
  const auto b = train_model<double>(g, guidance, m, quick_train(10));
  EXPECT_EQ(a.report.micro_f1, b.report.micro_f1);
  EXPECT_EQ(a.report.loss_history, b.report.loss_history);
  EXPECT_EQ(a.params.values, b.params.values);
}

TEST(Train, EarlyStoppingRestoresBestEpoch) {
  const auto g = synth(6, 120);
  const auto m = small_model();
  const auto guidance = pathsample::compute_guidance(g, m.guidance_params());
  auto t = quick_train(60);
  t.patience = 5;
  const auto out = train_model<double>(g, guidance, m, t);
  const auto& r = out.report;
  ASSERT_GE(r.best_epoch, 0);
  ASSERT_EQ(r.val_macro_history.size(), static_cast<std::size_t>(r.epochs_run));
  EXPECT_DOUBLE_EQ(r.best_val_macro_f1, *std::max_element(r.val_macro_history.begin(), r.val_macro_history.end()));
  // Stops within `patience` epochs of the best one (or at the cap).
  EXPECT_TRUE(r.epochs_run == t.max_epochs || r.epochs_run - 1 - r.best_epoch == t.patience);
  // The returned parameters are the best epoch's: re-evaluating on validation reproduces its score.
  const auto inputs = model::build_inputs<double>(g, m, guidance);
  const auto logits = infer_logits(g, inputs, out.params, m);
  const auto pred = model::predict(logits, false);
  const auto f1 = f1_scores(select_rows(pred, 3, out.split.val), truth_matrix(g.labels(), out.split.val), 3);
  EXPECT_DOUBLE_EQ(f1.macro, r.best_val_macro_f1);
}

TEST(CaseStudy, IdenticalPredictionsGiveZeroDeltas) {
  const auto g = synth(7, 200);
  const auto nbh = disparity::neighborhood_disparity(g, 2);
  const auto buckets = disparity::bucketize(nbh, 5);
  std::mt19937_64 rng(1);
  std::vector<int> cls(g.target_count());
  for (auto& c : cls) c = static_cast<int>(rng() % 3);
  const auto pred = onehot(cls, 3);
  const auto split = split_nodes(g, {}, 1);
  const auto cs = case_study(pred, pred, g.labels(), split.test, buckets);
  std::size_t counted = 0;
  for (const auto& row : cs.rows) {
    counted += row.count;
    if (row.delta) {
      EXPECT_EQ(*row.delta, 0.0);
    }
  }
  std::size_t defined = 0;
  for (auto t : split.test) defined += buckets.bucket_of[static_cast<std::size_t>(t)] >= 0;
  EXPECT_EQ(counted, defined);
  EXPECT_EQ(cs.rows.size(), 5u);
}

TEST(CaseStudy, BucketScoresPartitionTestNodes) {
  const auto g = synth(8, 200);
  const auto buckets = disparity::bucketize(disparity::neighborhood_disparity(g, 2), 4);
  std::vector<int> cls(g.target_count());
  for (std::size_t i = 0; i < cls.size(); ++i) cls[i] = g.labels().class_of[i];
  const auto split = split_nodes(g, {}, 2);
  const auto scores = bucket_scores(onehot(cls, 3), g.labels(), split.test, buckets);
  for (const auto& b : scores) {
    if (b.count > 0) {
      ASSERT_TRUE(b.micro_f1.has_value());
      EXPECT_DOUBLE_EQ(*b.micro_f1, 1.0);
    } else {
      EXPECT_FALSE(b.micro_f1.has_value());
    }
  }
}
