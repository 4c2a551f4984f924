#include <chrono>
#include <cmath>

#include <fmt/format.h>

#include "aghint/train.hpp"

namespace aghint::train {

namespace {

const char* precision_name(model::Precision p) { return p == model::Precision::f32 ? "f32" : "f64"; }

}  // namespace

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw UsageError("train: learning rate must be finite and >= 0");
  if (!(weight_decay >= 0.0)) throw UsageError("train: weight decay must be >= 0");
  if (max_epochs < 1) throw UsageError("train: max_epochs must be >= 1");
  if (patience < 1) throw UsageError("train: patience must be >= 1");
  if (run < 0) throw UsageError("train: run index must be >= 0");
  ratios.validate();
}

nlohmann::json TrainConfig::to_json() const {
  return {{"lr", lr},
          {"weight_decay", weight_decay},
          {"max_epochs", max_epochs},
          {"patience", patience},
          {"seed", seed},
          {"run", run},
          {"split", {ratios.train, ratios.val, ratios.test}},
          {"precision", precision_name(precision)},
          {"zero_support", zero_support == ZeroSupport::skip ? "skip" : "zero"}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw UsageError("train config must be a JSON object");
  TrainConfig c;
  const auto known = c.to_json();
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw UsageError(fmt::format("unknown train config key '{}'", key));
  }
  try {
    if (j.contains("lr")) c.lr = j.at("lr").get<double>();
    if (j.contains("weight_decay")) c.weight_decay = j.at("weight_decay").get<double>();
    if (j.contains("max_epochs")) c.max_epochs = j.at("max_epochs").get<int>();
    if (j.contains("patience")) c.patience = j.at("patience").get<int>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("run")) c.run = j.at("run").get<int>();
    if (j.contains("split")) {
      const auto r = j.at("split").get<std::vector<int>>();
      if (r.size() != 3) throw UsageError("train.split must list three percentages");
      c.ratios = {r[0], r[1], r[2]};
    }
    if (j.contains("precision")) {
      const auto p = j.at("precision").get<std::string>();
      if (p != "f32" && p != "f64") throw UsageError(fmt::format("precision '{}' is not f32 or f64", p));
      c.precision = p == "f32" ? model::Precision::f32 : model::Precision::f64;
    }
    if (j.contains("zero_support")) {
      const auto z = j.at("zero_support").get<std::string>();
      if (z != "zero" && z != "skip") throw UsageError(fmt::format("zero_support '{}' is not zero or skip", z));
      c.zero_support = z == "skip" ? ZeroSupport::skip : ZeroSupport::count_as_zero;
    }
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(fmt::format("train config: {}", e.what()));
  }
  return c;
}

template <class T>
nd::Tensor<T> infer_logits(const hin::HeteroGraph& graph, const model::ModelInputs<T>& inputs,
                           const model::ModelParams<T>& params, const model::ModelConfig& cfg) {
  nd::Tape<T> tape;
  model::Bound<T> b(tape, params);
  model::DropoutState drop;
  return tape.value(model::model_forward(b, inputs, graph, cfg, drop));
}

template <class T>
TrainOutcome<T> train_model(const hin::HeteroGraph& graph, const pathsample::GuidanceSets& guidance,
                            const model::ModelConfig& model_cfg, const TrainConfig& train_cfg) {
  train_cfg.validate();
  model_cfg.validate();
  if (model_cfg.multi_label != graph.labels().multi_label) {
    throw DataError("model multi_label flag does not match the dataset labels");
  }
  const auto start = std::chrono::steady_clock::now();
  TrainOutcome<T> out;
  auto& report = out.report;
  out.split = split_nodes(graph, train_cfg.ratios, train_cfg.seed);
  const auto& split = out.split;
  const auto& labels = graph.labels();
  const auto classes = static_cast<std::size_t>(labels.num_classes);
  const auto inputs = model::build_inputs<T>(graph, model_cfg, guidance);
  const std::uint64_t run_seed = derive_seed(train_cfg.seed, Stream::init, static_cast<std::uint64_t>(train_cfg.run));
  auto params = model::init_params<T>(model_cfg, graph, run_seed);

  report.config = {{"model", model_cfg.to_json()}, {"train", train_cfg.to_json()}};
  report.graph_hash = graph.hash();
  report.guidance_key = guidance.key();
  report.split_hash = split.hash();
  report.train_size = split.train.size();
  report.val_size = split.val.size();
  report.test_size = split.test.size();
  if (split.val.empty()) report.warnings.push_back("validation split is empty; early stopping disabled");

  const auto val_truth = truth_matrix(labels, split.val);
  std::vector<std::vector<T>> m(params.values.size()), v(params.values.size());
  for (std::size_t i = 0; i < params.values.size(); ++i) {
    m[i].assign(params.values[i].size(), T(0));
    v[i].assign(params.values[i].size(), T(0));
  }
  const double b1 = 0.9, b2 = 0.999, adam_eps = 1e-8;
  const T lr = static_cast<T>(train_cfg.lr);
  const T wd = static_cast<T>(train_cfg.weight_decay);
  model::ModelParams<T> best = params;
  double max_grad = 0.0;
  int since_best = 0;

  for (int epoch = 0; epoch < train_cfg.max_epochs; ++epoch) {
    nd::Tape<T> tape;
    model::Bound<T> b(tape, params);
    model::DropoutState drop{true, derive_seed(run_seed, Stream::dropout, static_cast<std::uint64_t>(epoch))};
    const nd::Var logits = model::model_forward(b, inputs, graph, model_cfg, drop);
    const nd::Var loss = model::classification_loss(tape, logits, split.train, labels);
    const double loss_value = static_cast<double>(tape.value(loss).data[0]);
    if (!std::isfinite(loss_value)) {
      throw NumericError(fmt::format("non-finite loss at epoch {} (learning rate {}, max |grad| {:.6g})", epoch,
                                     train_cfg.lr, max_grad));
    }
    tape.backward(loss);
    const int step = epoch + 1;
    const T c1 = static_cast<T>(1.0 - std::pow(b1, step));
    const T c2 = static_cast<T>(1.0 - std::pow(b2, step));
    max_grad = 0.0;
    for (std::size_t i = 0; i < params.values.size(); ++i) {
      const auto g = tape.grad(b.vars[i]);
      auto& p = params.values[i].data;
      for (std::size_t k = 0; k < p.size(); ++k) {
        const T gk = g.data[k] + wd * p[k];
        max_grad = std::max(max_grad, std::abs(static_cast<double>(gk)));
        m[i][k] = static_cast<T>(b1) * m[i][k] + static_cast<T>(1.0 - b1) * gk;
        v[i][k] = static_cast<T>(b2) * v[i][k] + static_cast<T>(1.0 - b2) * gk * gk;
        const T mhat = m[i][k] / c1;
        const T vhat = v[i][k] / c2;
        p[k] -= lr * mhat / (std::sqrt(vhat) + static_cast<T>(adam_eps));
      }
    }
    if (!params.all_finite()) {
      throw NumericError(fmt::format("parameters became non-finite at epoch {} (learning rate {}, max |grad| {:.6g})",
                                     epoch, train_cfg.lr, max_grad));
    }
    report.loss_history.push_back(loss_value);
    report.epochs_run = epoch + 1;

    if (split.val.empty()) {
      best = params;
      report.best_epoch = epoch;
      continue;
    }
    const auto pred = model::predict(infer_logits(graph, inputs, params, model_cfg), model_cfg.multi_label);
    const double val_macro =
        f1_scores(select_rows(pred, classes, split.val), val_truth, classes, train_cfg.zero_support).macro;
    report.val_macro_history.push_back(val_macro);
    if (report.best_epoch < 0 || val_macro > report.best_val_macro_f1) {
      report.best_val_macro_f1 = val_macro;
      report.best_epoch = epoch;
      best = params;
      since_best = 0;
    } else if (++since_best >= train_cfg.patience) {
      break;
    }
  }

  out.params = std::move(best);
  const auto pred = model::predict(infer_logits(graph, inputs, out.params, model_cfg), model_cfg.multi_label);
  report.train_accuracy =
      f1_scores(select_rows(pred, classes, split.train), truth_matrix(labels, split.train), classes).accuracy;
  if (!split.test.empty()) {
    const auto s = f1_scores(select_rows(pred, classes, split.test), truth_matrix(labels, split.test), classes,
                             train_cfg.zero_support);
    report.micro_f1 = s.micro;
    report.macro_f1 = s.macro;
    report.accuracy = s.accuracy;
  } else {
    report.warnings.push_back("test split is empty; test metrics are 0");
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

std::vector<std::uint8_t> checkpoint_predictions(const hin::HeteroGraph& graph,
                                                 const pathsample::GuidanceSets& guidance,
                                                 const model::Checkpoint& ck) {
  const auto specs = model::param_specs(ck.config, graph);
  if (specs.size() != ck.params.values.size()) {
    throw DataError(fmt::format("checkpoint holds {} tensors, the config needs {}", ck.params.values.size(), specs.size()));
  }
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& t = ck.params.values[i];
    if (ck.params.names[i] != specs[i].name || t.rows != specs[i].rows || t.cols != specs[i].cols) {
      throw DataError(fmt::format("checkpoint tensor '{}' ({}x{}) does not fit this graph (expected '{}' {}x{})",
                                  ck.params.names[i], t.rows, t.cols, specs[i].name, specs[i].rows, specs[i].cols));
    }
  }
  if (ck.precision == model::Precision::f32) {
    const auto params = ck.params.cast<float>();
    const auto inputs = model::build_inputs<float>(graph, ck.config, guidance);
    return model::predict(infer_logits(graph, inputs, params, ck.config), ck.config.multi_label);
  }
  const auto inputs = model::build_inputs<double>(graph, ck.config, guidance);
  return model::predict(infer_logits(graph, inputs, ck.params, ck.config), ck.config.multi_label);
}

MetricsReport evaluate_checkpoint(const hin::HeteroGraph& graph, const pathsample::GuidanceSets& guidance,
                                  const model::Checkpoint& ck, const Split& split,
                                  const disparity::BucketAssignment* buckets, ZeroSupport policy) {
  if (split.test.empty()) throw DataError("evaluation split has no test nodes");
  const auto start = std::chrono::steady_clock::now();
  const auto pred = checkpoint_predictions(graph, guidance, ck);
  const auto classes = static_cast<std::size_t>(graph.labels().num_classes);
  MetricsReport report;
  const auto s = f1_scores(select_rows(pred, classes, split.test), truth_matrix(graph.labels(), split.test), classes, policy);
  report.micro_f1 = s.micro;
  report.macro_f1 = s.macro;
  report.accuracy = s.accuracy;
  if (!split.train.empty()) {
    report.train_accuracy =
        f1_scores(select_rows(pred, classes, split.train), truth_matrix(graph.labels(), split.train), classes).accuracy;
  }
  if (buckets) report.per_bucket = bucket_scores(pred, graph.labels(), split.test, *buckets);
  report.train_size = split.train.size();
  report.val_size = split.val.size();
  report.test_size = split.test.size();
  report.config = {{"model", ck.config.to_json()}};
  report.graph_hash = graph.hash();
  report.guidance_key = guidance.key();
  report.split_hash = split.hash();
  if (ck.meta.contains("best_epoch")) report.best_epoch = ck.meta.at("best_epoch").get<int>();
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

template TrainOutcome<float> train_model<float>(const hin::HeteroGraph&, const pathsample::GuidanceSets&,
                                                const model::ModelConfig&, const TrainConfig&);
template TrainOutcome<double> train_model<double>(const hin::HeteroGraph&, const pathsample::GuidanceSets&,
                                                  const model::ModelConfig&, const TrainConfig&);
template nd::Tensor<float> infer_logits<float>(const hin::HeteroGraph&, const model::ModelInputs<float>&,
                                               const model::ModelParams<float>&, const model::ModelConfig&);
template nd::Tensor<double> infer_logits<double>(const hin::HeteroGraph&, const model::ModelInputs<double>&,
                                                 const model::ModelParams<double>&, const model::ModelConfig&);

}  // namespace aghint::train
