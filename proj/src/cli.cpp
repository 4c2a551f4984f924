#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "aghint/cli.hpp"
#include "aghint/disparity.hpp"

namespace aghint::cli {

namespace fs = std::filesystem;

namespace {

struct Alias {
  const char* flag;
  const char* key;
  const char* help;
};

constexpr Alias kAliases[] = {
    {"--seed", "seed", "Root seed for synthesis, split, init and dropout"},
    {"--threads", "threads", "Worker threads (0: AGHINT_THREADS or runtime default)"},
    {"--precision", "precision", "f32 or f64"},
    {"--data", "paths.data", "Dataset directory"},
    {"--out", "paths.out", "Output directory"},
    {"--guidance", "paths.guidance", "Guidance cache file"},
    {"--checkpoint", "paths.checkpoint", "Checkpoint file (model A in case-study)"},
    {"--checkpoint-b", "paths.checkpoint_b", "Second checkpoint for case-study"},
    {"--predictions", "paths.predictions", "Predictions TSV for profile"},
    {"--variant", "model.variant", "full, no_agt, no_agm or no_ag"},
    {"--alpha", "model.alpha", "Decay rate in (0, 1]"},
    {"--epochs", "train.max_epochs", "Maximum training epochs"},
    {"--run", "train.run", "Run index; varies init and dropout only"},
    {"--buckets", "profile.buckets", "Number of disparity buckets"},
};

struct Context {
  std::string command;
  RunConfig cfg;
  std::ostream& out;
  std::ostream& err;
  nlohmann::json artifacts = nlohmann::json::array();
  nlohmann::json summary = nlohmann::json::object();
  bool json_export = false;
};

template <class... Args>
void log(Context& ctx, fmt::format_string<Args...> f, Args&&... args) {
  ctx.err << "[aghint " << ctx.command << "] " << fmt::format(f, std::forward<Args>(args)...) << '\n';
}

void write_file(Context& ctx, const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const auto tmp = fs::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
    out << text;
    if (!out) throw DataError(fmt::format("write failed for {}", path.string()));
  }
  fs::rename(tmp, path);
  ctx.artifacts.push_back(path.string());
}

// JSON artifacts carry the resolved config and input hashes.
void write_json(Context& ctx, const fs::path& path, nlohmann::json body, const nlohmann::json& inputs) {
  body["config"] = ctx.cfg.to_json();
  body["config_hash"] = ctx.cfg.hash();
  body["inputs"] = inputs;
  write_file(ctx, path, body.dump(2) + "\n");
}

// CSV artifacts start with one comment line naming the same hashes.
std::string csv_header(const Context& ctx, const nlohmann::json& inputs) {
  return fmt::format("# aghint {} config_hash={} inputs={}\n", ctx.command, ctx.cfg.hash(), inputs.dump());
}

fs::path out_dir(const Context& ctx) { return ctx.cfg.paths.out; }

hin::HeteroGraph load_data(Context& ctx) {
  log(ctx, "loading {}", ctx.cfg.paths.data);
  auto g = hin::load_graph(ctx.cfg.paths.data);
  log(ctx, "{} nodes, {} edges, {} node types, {} edge types, {} targets", g.node_count(), g.edge_count(),
      g.node_type_count(), g.edge_type_count(), g.target_count());
  return g;
}

pathsample::GuidanceSets guidance_for(Context& ctx, const hin::HeteroGraph& graph, const model::ModelConfig& mc,
                                      bool force = false) {
  pathsample::GuidanceSets probe;
  probe.params = mc.guidance_params();
  probe.graph_hash = graph.hash();
  const auto key = probe.key();
  const auto path = ctx.cfg.guidance_path(key);
  if (!force && fs::exists(path)) {
    auto g = pathsample::load_guidance(path);
    if (g.key() == key) {
      log(ctx, "guidance cache hit {}", path.string());
      return g;
    }
    if (!ctx.cfg.paths.guidance.empty()) {
      throw DataError(fmt::format("guidance cache {} was computed for another graph or parameter set", path.string()));
    }
  }
  log(ctx, "computing guidance ({} mode, alpha {})",
      probe.params.mode == pathsample::SequenceMode::attribute ? "attribute" : "context", probe.params.alpha);
  const auto t0 = std::chrono::steady_clock::now();
  auto g = pathsample::compute_guidance(graph, probe.params);
  log(ctx, "guidance done in {:.2f}s; skipped pairs top {} bottom {}",
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), g.skipped_top, g.skipped_bottom);
  pathsample::save_guidance(g, path);
  ctx.artifacts.push_back(path.string());
  return g;
}

disparity::BucketAssignment buckets_for(const RunConfig& cfg, const hin::HeteroGraph& graph) {
  return disparity::bucketize(disparity::neighborhood_disparity(graph, cfg.profile.k), cfg.profile.buckets);
}

std::string predictions_tsv(const Context& ctx, const nlohmann::json& inputs, const hin::HeteroGraph& graph,
                            std::span<const std::uint8_t> pred) {
  const auto classes = static_cast<std::size_t>(graph.labels().num_classes);
  std::string text = csv_header(ctx, inputs) + "target\tnode\tpredicted\n";
  for (std::size_t t = 0; t < graph.target_count(); ++t) {
    std::string cls;
    for (std::size_t c = 0; c < classes; ++c) {
      if (!pred[t * classes + c]) continue;
      if (!cls.empty()) cls += ',';
      cls += std::to_string(c);
    }
    text += fmt::format("{}\t{}\t{}\n", t, graph.targets()[t], cls.empty() ? "-" : cls);
  }
  return text;
}

nlohmann::json checkpoint_meta(const hin::HeteroGraph& graph, const pathsample::GuidanceSets& guidance,
                               const train::TrainConfig& tc, const train::MetricsReport& report,
                               const train::Split& split) {
  return {{"graph_hash", graph.hash()},
          {"guidance_key", guidance.key()},
          {"split", {{"seed", tc.seed}, {"ratios", {tc.ratios.train, tc.ratios.val, tc.ratios.test}}, {"hash", split.hash()}}},
          {"train", tc.to_json()},
          {"best_epoch", report.best_epoch},
          {"test_micro_f1", report.micro_f1},
          {"test_macro_f1", report.macro_f1}};
}

train::Split split_from_meta(const hin::HeteroGraph& graph, const model::Checkpoint& ck, const fs::path& path) {
  if (ck.meta.value("graph_hash", std::string()) != graph.hash()) {
    throw DataError(fmt::format("checkpoint {} was trained on a different dataset", path.string()));
  }
  const auto& s = ck.meta.at("split");
  const auto r = s.at("ratios").get<std::vector<int>>();
  auto split = train::split_nodes(graph, {r.at(0), r.at(1), r.at(2)}, s.at("seed").get<std::uint64_t>());
  if (split.hash() != s.at("hash").get<std::string>()) {
    throw DataError(fmt::format("checkpoint {}: split cannot be reproduced on this dataset", path.string()));
  }
  return split;
}

template <class T>
train::MetricsReport train_and_save(Context& ctx, const hin::HeteroGraph& graph, const model::ModelConfig& mc,
                                    const train::TrainConfig& tc, const fs::path& ckpt_path, const fs::path& stem,
                                    const disparity::BucketAssignment& buckets) {
  const auto guidance = guidance_for(ctx, graph, mc);
  log(ctx, "training variant {} ({} precision, run {})", model::to_string(mc.variant),
      sizeof(T) == 4 ? "f32" : "f64", tc.run);
  auto outcome = train::train_model<T>(graph, guidance, mc, tc);
  auto& report = outcome.report;
  const auto inputs = model::build_inputs<T>(graph, mc, guidance);
  const auto pred = model::predict(train::infer_logits(graph, inputs, outcome.params, mc), mc.multi_label);
  report.per_bucket = train::bucket_scores(pred, graph.labels(), outcome.split.test, buckets);
  log(ctx, "epochs {} (best {}), test micro-F1 {:.4f} macro-F1 {:.4f}, {:.1f}s", report.epochs_run, report.best_epoch,
      report.micro_f1, report.macro_f1, report.wall_seconds);
  for (const auto& w : report.warnings) log(ctx, "warning: {}", w);

  model::save_checkpoint(ckpt_path, mc, outcome.params, checkpoint_meta(graph, guidance, tc, report, outcome.split));
  ctx.artifacts.push_back(ckpt_path.string());
  const nlohmann::json in_hashes = {{"graph_hash", graph.hash()}, {"guidance_key", guidance.key()}};
  write_json(ctx, fs::path(stem.string() + "metrics.json"), {{"report", report.to_json()}}, in_hashes);
  std::string curve = csv_header(ctx, in_hashes) + "epoch,loss,val_macro_f1\n";
  for (std::size_t e = 0; e < report.loss_history.size(); ++e) {
    const auto val = e < report.val_macro_history.size() ? fmt::format("{:.6f}", report.val_macro_history[e]) : "";
    curve += fmt::format("{},{:.8f},{}\n", e, report.loss_history[e], val);
  }
  write_file(ctx, fs::path(stem.string() + "loss.csv"), curve);
  write_file(ctx, fs::path(stem.string() + "predictions.tsv"), predictions_tsv(ctx, in_hashes, graph, pred));
  return report;
}

int cmd_synth(Context& ctx) {
  const auto spec = ctx.cfg.resolved_synth();
  const auto graph = hin::synth_hin(spec);
  hin::save_graph(graph, ctx.cfg.paths.data);
  ctx.artifacts.push_back(ctx.cfg.paths.data);
  write_json(ctx, fs::path(ctx.cfg.paths.data) / "provenance.json", {{"graph_hash", graph.hash()}}, nlohmann::json::object());
  log(ctx, "wrote {} nodes, {} edges to {}", graph.node_count(), graph.edge_count(), ctx.cfg.paths.data);
  ctx.summary = {{"nodes", graph.node_count()}, {"edges", graph.edge_count()}, {"graph_hash", graph.hash()}};
  return 0;
}

int cmd_profile(Context& ctx) {
  const auto graph = load_data(ctx);
  const auto nd = disparity::neighborhood_disparity(graph, ctx.cfg.profile.k);
  const auto buckets = disparity::bucketize(nd, ctx.cfg.profile.buckets);
  const nlohmann::json inputs = {{"graph_hash", graph.hash()}};

  std::string csv = csv_header(ctx, inputs) + "target,node,raw,normalized,bucket\n";
  for (std::size_t t = 0; t < graph.target_count(); ++t) {
    if (nd.defined[t]) {
      csv += fmt::format("{},{},{:.8f},{:.8f},{}\n", t, graph.targets()[t], nd.raw[t], nd.values[t], buckets.bucket_of[t]);
    } else {
      csv += fmt::format("{},{},,,-1\n", t, graph.targets()[t]);
    }
  }
  write_file(ctx, out_dir(ctx) / "profile.csv", csv);

  const auto counts = buckets.counts();
  std::vector<double> sums(counts.size(), 0.0);
  for (std::size_t t = 0; t < graph.target_count(); ++t) {
    if (buckets.bucket_of[t] >= 0) sums[static_cast<std::size_t>(buckets.bucket_of[t])] += nd.values[t];
  }
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t b = 0; b < counts.size(); ++b) {
    rows.push_back({{"bucket", b},
                    {"lo", buckets.boundaries[b]},
                    {"hi", buckets.boundaries[b + 1]},
                    {"count", counts[b]},
                    {"mean_disparity", counts[b] ? nlohmann::json(sums[b] / static_cast<double>(counts[b])) : nlohmann::json(nullptr)}});
  }
  nlohmann::json body = {{"k", nd.k}, {"defined", nd.defined_count()}, {"undefined", graph.target_count() - nd.defined_count()}, {"buckets", rows}};

  // With a predictions file: per-bucket micro-F1 over the listed labeled targets.
  if (!ctx.cfg.paths.predictions.empty()) {
    std::ifstream in(ctx.cfg.paths.predictions);
    if (!in) throw DataError(fmt::format("cannot open predictions file {}", ctx.cfg.paths.predictions));
    const auto classes = static_cast<std::size_t>(graph.labels().num_classes);
    std::vector<std::uint8_t> pred(graph.target_count() * classes, 0);
    std::vector<std::int32_t> rows_listed;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty() || line[0] == '#' || line.rfind("target", 0) == 0) continue;
      std::istringstream ls(line);
      long long t = -1, node = -1;
      std::string cls;
      if (!(ls >> t >> node >> cls) || t < 0 || static_cast<std::size_t>(t) >= graph.target_count()) {
        throw DataError(fmt::format("{}:{}: malformed prediction line", ctx.cfg.paths.predictions, line_no));
      }
      if (cls != "-") {
        std::istringstream cs(cls);
        std::string tok;
        while (std::getline(cs, tok, ',')) {
          const int c = std::stoi(tok);
          if (c < 0 || static_cast<std::size_t>(c) >= classes) {
            throw DataError(fmt::format("{}:{}: class {} out of range", ctx.cfg.paths.predictions, line_no, c));
          }
          pred[static_cast<std::size_t>(t) * classes + static_cast<std::size_t>(c)] = 1;
        }
      }
      if (graph.labels().is_labeled(static_cast<std::size_t>(t))) rows_listed.push_back(static_cast<std::int32_t>(t));
    }
    nlohmann::json study = nlohmann::json::array();
    for (const auto& s : train::bucket_scores(pred, graph.labels(), rows_listed, buckets)) {
      study.push_back({{"bucket", s.bucket}, {"count", s.count}, {"micro_f1", s.micro_f1 ? nlohmann::json(*s.micro_f1) : nlohmann::json(nullptr)}});
    }
    body["prediction_study"] = study;
  }
  write_json(ctx, out_dir(ctx) / "profile.json", body, inputs);
  for (std::size_t b = 0; b < counts.size(); ++b) {
    log(ctx, "bucket {} [{:.2f}, {:.2f}]: {} targets", b, buckets.boundaries[b], buckets.boundaries[b + 1], counts[b]);
  }
  ctx.summary = {{"bucket_counts", counts}, {"defined", nd.defined_count()}};
  return 0;
}

int cmd_precompute(Context& ctx) {
  const auto graph = load_data(ctx);
  const auto g = guidance_for(ctx, graph, ctx.cfg.model, true);
  if (ctx.json_export) {
    auto body = pathsample::guidance_to_json(g);
    write_json(ctx, out_dir(ctx) / "guidance.json", body, {{"graph_hash", graph.hash()}});
  }
  ctx.summary = {{"guidance_key", g.key()}, {"skipped_top", g.skipped_top}, {"skipped_bottom", g.skipped_bottom}};
  return 0;
}

int cmd_train(Context& ctx) {
  const auto graph = load_data(ctx);
  const auto buckets = buckets_for(ctx.cfg, graph);
  const auto tc = ctx.cfg.resolved_train();
  const auto stem = out_dir(ctx) / "";
  const auto report = ctx.cfg.precision == model::Precision::f32
                          ? train_and_save<float>(ctx, graph, ctx.cfg.model, tc, ctx.cfg.checkpoint_path(), stem, buckets)
                          : train_and_save<double>(ctx, graph, ctx.cfg.model, tc, ctx.cfg.checkpoint_path(), stem, buckets);
  ctx.summary = {{"micro_f1", report.micro_f1}, {"macro_f1", report.macro_f1}, {"best_epoch", report.best_epoch}};
  return 0;
}

model::Checkpoint open_checkpoint(const fs::path& path) {
  if (!fs::exists(path)) throw DataError(fmt::format("checkpoint {} does not exist", path.string()));
  return model::load_checkpoint(path);
}

int cmd_eval(Context& ctx) {
  const auto graph = load_data(ctx);
  const auto path = ctx.cfg.checkpoint_path();
  const auto ck = open_checkpoint(path);
  const auto split = split_from_meta(graph, ck, path);
  const auto guidance = guidance_for(ctx, graph, ck.config);
  const auto buckets = buckets_for(ctx.cfg, graph);
  auto report = train::evaluate_checkpoint(graph, guidance, ck, split, &buckets, ctx.cfg.resolved_train().zero_support);
  const nlohmann::json inputs = {{"graph_hash", graph.hash()}, {"guidance_key", guidance.key()}, {"checkpoint", path.string()},
                                 {"checkpoint_config_hash", ck.config.hash()}};
  write_json(ctx, out_dir(ctx) / "eval.json", {{"report", report.to_json()}}, inputs);
  const auto pred = train::checkpoint_predictions(graph, guidance, ck);
  write_file(ctx, out_dir(ctx) / "eval_predictions.tsv", predictions_tsv(ctx, inputs, graph, pred));
  log(ctx, "test micro-F1 {:.4f} macro-F1 {:.4f} on {} nodes", report.micro_f1, report.macro_f1, report.test_size);
  ctx.summary = {{"micro_f1", report.micro_f1}, {"macro_f1", report.macro_f1}};
  return 0;
}

int cmd_case_study(Context& ctx) {
  if (ctx.cfg.paths.checkpoint_b.empty()) throw UsageError("case-study needs a second checkpoint (--checkpoint-b)");
  const auto graph = load_data(ctx);
  const auto path_a = ctx.cfg.checkpoint_path();
  const fs::path path_b = ctx.cfg.paths.checkpoint_b;
  const auto ck_a = open_checkpoint(path_a);
  const auto ck_b = open_checkpoint(path_b);
  const auto split = split_from_meta(graph, ck_a, path_a);
  if (split_from_meta(graph, ck_b, path_b).hash() != split.hash()) {
    throw DataError("the two checkpoints were evaluated on different splits");
  }
  const auto pred_a = train::checkpoint_predictions(graph, guidance_for(ctx, graph, ck_a.config), ck_a);
  const auto pred_b = train::checkpoint_predictions(graph, guidance_for(ctx, graph, ck_b.config), ck_b);
  const auto buckets = buckets_for(ctx.cfg, graph);
  auto cs = train::case_study(pred_a, pred_b, graph.labels(), split.test, buckets);
  cs.label_a = fmt::format("{} ({})", model::to_string(ck_a.config.variant), path_a.string());
  cs.label_b = fmt::format("{} ({})", model::to_string(ck_b.config.variant), path_b.string());
  const nlohmann::json inputs = {{"graph_hash", graph.hash()},
                                 {"checkpoint_a", path_a.string()},
                                 {"checkpoint_b", path_b.string()},
                                 {"config_hash_a", ck_a.config.hash()},
                                 {"config_hash_b", ck_b.config.hash()}};
  write_file(ctx, out_dir(ctx) / "case_study.csv", csv_header(ctx, inputs) + cs.to_csv());
  write_json(ctx, out_dir(ctx) / "case_study.json", cs.to_json(), inputs);
  for (const auto& r : cs.rows) {
    log(ctx, "bucket {} n={} a={} b={} delta={}", r.bucket, r.count, r.f1_a ? fmt::format("{:.4f}", *r.f1_a) : "-",
        r.f1_b ? fmt::format("{:.4f}", *r.f1_b) : "-", r.delta ? fmt::format("{:+.4f}", *r.delta) : "-");
  }
  ctx.summary = cs.to_json();
  return 0;
}

int cmd_sweep(Context& ctx) {
  const auto graph = load_data(ctx);
  const auto buckets = buckets_for(ctx.cfg, graph);
  const auto tc = ctx.cfg.resolved_train();
  const auto dir = out_dir(ctx) / "sweep";
  std::string csv = csv_header(ctx, {{"graph_hash", graph.hash()}}) + "cell,alpha,l_m,l_t,d,micro_f1,macro_f1,best_epoch\n";
  int cell = 0;
  for (double alpha : ctx.cfg.sweep.alpha) {
    for (int l_m : ctx.cfg.sweep.l_m) {
      for (int l_t : ctx.cfg.sweep.l_t) {
        for (int d : ctx.cfg.sweep.d) {
          auto mc = ctx.cfg.model;
          mc.alpha = alpha;
          mc.l_m = l_m;
          mc.l_t = l_t;
          mc.d0 = d;
          mc.d_hidden = d;
          mc.validate();
          const auto stem = dir / fmt::format("cell{:03d}_", cell);
          const auto ckpt = fs::path(stem.string() + "model.ckpt");
          log(ctx, "cell {}: alpha {} l_m {} l_t {} d {}", cell, alpha, l_m, l_t, d);
          const auto report = ctx.cfg.precision == model::Precision::f32
                                  ? train_and_save<float>(ctx, graph, mc, tc, ckpt, stem, buckets)
                                  : train_and_save<double>(ctx, graph, mc, tc, ckpt, stem, buckets);
          csv += fmt::format("{},{},{},{},{},{:.6f},{:.6f},{}\n", cell, alpha, l_m, l_t, d, report.micro_f1,
                             report.macro_f1, report.best_epoch);
          ++cell;
        }
      }
    }
  }
  write_file(ctx, out_dir(ctx) / "sweep.csv", csv);
  ctx.summary = {{"cells", cell}};
  return 0;
}

int error_code(ErrorKind k) { return static_cast<int>(k); }

const char* kind_name(int code) {
  switch (code) {
    case 1: return "usage";
    case 2: return "data";
    case 3: return "numeric";
    default: return "ok";
  }
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Attribute-guided heterogeneous graph node classification", "aghint"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every command");
  app.footer(
      "Every config setting can be overridden as --<section>.<key> VALUE, e.g. --model.alpha 0.9.\n"
      "Array settings take JSON or comma lists. AGHINT_THREADS sets the default worker count.\n"
      "Exit codes: 0 ok, 1 usage error, 2 data error, 3 numeric failure.");

  struct Sub {
    const char* name;
    const char* help;
    int (*run)(Context&);
  };
  const Sub subs[] = {
      {"synth", "Generate a synthetic dataset directory", cmd_synth},
      {"profile", "Neighbourhood-disparity profile of the targets (CSV + JSON)", cmd_profile},
      {"precompute", "Compute and cache guidance sets for the model config", cmd_precompute},
      {"train", "Train a model; writes checkpoint, metrics, loss curve and predictions", cmd_train},
      {"eval", "Evaluate a checkpoint on its test split", cmd_eval},
      {"case-study", "Per-bucket micro-F1 of two checkpoints and their difference", cmd_case_study},
      {"sweep", "Train one model per cell of the alpha x l_m x l_t x d grid", cmd_sweep},
  };
  std::string config_file;
  bool json_export = false;
  std::vector<std::string> alias_values(std::size(kAliases));
  std::vector<CLI::App*> handles;
  for (const auto& s : subs) {
    auto* sub = app.add_subcommand(s.name, s.help);
    sub->allow_extras();
    sub->add_option("--config", config_file, "JSON config file");
    for (std::size_t i = 0; i < std::size(kAliases); ++i) {
      sub->add_option(kAliases[i].flag, alias_values[i], kAliases[i].help);
    }
    if (std::string(s.name) == "precompute") sub->add_flag("--json", json_export, "Also export the guidance as JSON");
    handles.push_back(sub);
  }

  std::string command = "?";
  auto finish = [&](int code, const std::string& message, const Context* ctx) {
    nlohmann::json rec = {{"event", "exit"}, {"command", command}, {"code", code}, {"status", kind_name(code)}};
    if (!message.empty()) rec["message"] = message;
    if (ctx) {
      rec["artifacts"] = ctx->artifacts;
      if (code == 0) rec["summary"] = ctx->summary;
    }
    err << rec.dump() << '\n';
    err.flush();
    return code;
  };

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::ostringstream msg;
    app.exit(e, msg, msg);
    auto text = msg.str();
    while (!text.empty() && text.back() == '\n') text.pop_back();
    for (auto& ch : text) {
      if (ch == '\n') ch = ' ';
    }
    return finish(1, text.empty() ? e.what() : text, nullptr);
  }

  std::size_t which = 0;
  for (; which < handles.size(); ++which) {
    if (handles[which]->parsed()) break;
  }
  command = subs[which].name;
  std::unique_ptr<Context> ctx;
  try {
    nlohmann::json tree = RunConfig{}.to_json();
    if (!config_file.empty()) {
      std::ifstream in(config_file);
      if (!in) throw UsageError(fmt::format("cannot open config file {}", config_file));
      nlohmann::json file_json;
      try {
        file_json = nlohmann::json::parse(in);
      } catch (const nlohmann::json::parse_error& e) {
        throw UsageError(fmt::format("{}: {}", config_file, e.what()));
      }
      tree = merge_strict(tree, file_json);
    }
    for (std::size_t i = 0; i < std::size(kAliases); ++i) {
      if (handles[which]->count(kAliases[i].flag) > 0) set_leaf(tree, kAliases[i].key, alias_values[i]);
    }
    const auto extras = handles[which]->remaining();
    for (std::size_t i = 0; i < extras.size(); ++i) {
      const auto& a = extras[i];
      if (a.rfind("--", 0) != 0) throw UsageError(fmt::format("unexpected argument '{}'", a));
      const auto eq = a.find('=');
      if (eq != std::string::npos) {
        set_leaf(tree, a.substr(2, eq - 2), a.substr(eq + 1));
      } else {
        if (i + 1 >= extras.size()) throw UsageError(fmt::format("option {} needs a value", a));
        set_leaf(tree, a.substr(2), extras[++i]);
      }
    }
    ctx = std::make_unique<Context>(Context{command, RunConfig::from_json(tree), out, err});
    ctx->json_export = json_export;
    // Settings are checked before any data is read.
    ctx->cfg.model.validate();
    ctx->cfg.resolved_train().validate();
    hin::validate(ctx->cfg.resolved_synth());
    int threads = ctx->cfg.threads;
    if (threads == 0) {
      if (const char* env = std::getenv("AGHINT_THREADS")) threads = std::atoi(env);
    }
    set_thread_count(std::max(threads, 0));
    const int code = subs[which].run(*ctx);
    return finish(code, "", ctx.get());
  } catch (const Error& e) {
    err << "[aghint " << command << "] error: " << e.what() << '\n';
    return finish(error_code(e.kind()), e.what(), ctx.get());
  } catch (const fs::filesystem_error& e) {
    err << "[aghint " << command << "] error: " << e.what() << '\n';
    return finish(2, e.what(), ctx.get());
  } catch (const nlohmann::json::exception& e) {
    err << "[aghint " << command << "] error: " << e.what() << '\n';
    return finish(2, e.what(), ctx.get());
  } catch (const std::exception& e) {
    err << "[aghint " << command << "] error: " << e.what() << '\n';
    return finish(2, e.what(), ctx.get());
  }
}

int dispatch(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace aghint::cli
