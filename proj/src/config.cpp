#include <fstream>

#include <fmt/format.h>

#include "aghint/cli.hpp"

namespace aghint::cli {

namespace {

nlohmann::json synth_json(const hin::SynthSpec& s) {
  return {{"num_target", s.num_target},
          {"num_aux_types", s.num_aux_types},
          {"classes", s.classes},
          {"target_dim", s.target_dim},
          {"aux_dims", s.aux_dims},
          {"aux_nodes", s.aux_nodes},
          {"rho", s.rho},
          {"prototype_density", s.prototype_density},
          {"densities", s.densities},
          {"bridge_fraction", s.bridge_fraction}};
}

hin::SynthSpec synth_from(const nlohmann::json& j) {
  hin::SynthSpec s;
  s.num_target = j.at("num_target").get<int>();
  s.num_aux_types = j.at("num_aux_types").get<int>();
  s.classes = j.at("classes").get<int>();
  s.target_dim = j.at("target_dim").get<int>();
  s.aux_dims = j.at("aux_dims").get<std::vector<int>>();
  s.aux_nodes = j.at("aux_nodes").get<std::vector<int>>();
  s.rho = j.at("rho").get<double>();
  s.prototype_density = j.at("prototype_density").get<double>();
  s.densities = j.at("densities").get<std::vector<double>>();
  s.bridge_fraction = j.at("bridge_fraction").get<double>();
  return s;
}

// The train section without the keys owned by the root.
nlohmann::json train_section(const train::TrainConfig& t) {
  auto j = t.to_json();
  j.erase("seed");
  j.erase("precision");
  return j;
}

}  // namespace

nlohmann::json RunConfig::to_json() const {
  return {{"seed", seed},
          {"threads", threads},
          {"precision", precision == model::Precision::f32 ? "f32" : "f64"},
          {"paths",
           {{"data", paths.data},
            {"out", paths.out},
            {"guidance", paths.guidance},
            {"checkpoint", paths.checkpoint},
            {"checkpoint_b", paths.checkpoint_b},
            {"predictions", paths.predictions}}},
          {"synth", synth_json(synth)},
          {"profile", {{"k", profile.k}, {"buckets", profile.buckets}}},
          {"model", model.to_json()},
          {"train", train_section(train)},
          {"sweep", {{"alpha", sweep.alpha}, {"l_m", sweep.l_m}, {"l_t", sweep.l_t}, {"d", sweep.d}}}};
}

nlohmann::json merge_strict(nlohmann::json base, const nlohmann::json& patch, const std::string& where) {
  if (!patch.is_object()) throw UsageError(fmt::format("config{}: expected an object", where.empty() ? "" : " at " + where));
  for (const auto& [key, value] : patch.items()) {
    const auto path = where.empty() ? key : where + "." + key;
    if (!base.contains(key)) throw UsageError(fmt::format("unknown config key '{}'", path));
    auto& slot = base[key];
    if (slot.is_object()) {
      slot = merge_strict(slot, value, path);
    } else {
      slot = value;
    }
  }
  return base;
}

void set_leaf(nlohmann::json& tree, const std::string& dotted, const std::string& value) {
  nlohmann::json* node = &tree;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted.find('.', start);
    const auto key = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(key)) throw UsageError(fmt::format("unknown config key '{}'", dotted));
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (node->is_object()) throw UsageError(fmt::format("'{}' is a section, not a setting", dotted));
  if (node->is_string()) {
    *node = value;
    return;
  }
  nlohmann::json parsed;
  try {
    parsed = nlohmann::json::parse(value);
  } catch (const nlohmann::json::exception&) {
    // Comma lists for array settings: "0.5,0.8".
    if (node->is_array()) {
      try {
        parsed = nlohmann::json::parse("[" + value + "]");
      } catch (const nlohmann::json::exception&) {
        throw UsageError(fmt::format("cannot parse '{}' for {}", value, dotted));
      }
    } else {
      throw UsageError(fmt::format("cannot parse '{}' for {}", value, dotted));
    }
  }
  if (node->is_array() && !parsed.is_array()) parsed = nlohmann::json::array({parsed});
  const bool numeric = node->is_number() && parsed.is_number();
  if (!numeric && node->type() != parsed.type()) {
    throw UsageError(fmt::format("'{}' for {} has the wrong type (expected {})", value, dotted, node->type_name()));
  }
  *node = parsed;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  const auto tree = merge_strict(RunConfig{}.to_json(), j);
  RunConfig c;
  try {
    c.seed = tree.at("seed").get<std::uint64_t>();
    c.threads = tree.at("threads").get<int>();
    const auto prec = tree.at("precision").get<std::string>();
    if (prec != "f32" && prec != "f64") throw UsageError(fmt::format("precision '{}' is not f32 or f64", prec));
    c.precision = prec == "f32" ? model::Precision::f32 : model::Precision::f64;
    const auto& p = tree.at("paths");
    c.paths.data = p.at("data").get<std::string>();
    c.paths.out = p.at("out").get<std::string>();
    c.paths.guidance = p.at("guidance").get<std::string>();
    c.paths.checkpoint = p.at("checkpoint").get<std::string>();
    c.paths.checkpoint_b = p.at("checkpoint_b").get<std::string>();
    c.paths.predictions = p.at("predictions").get<std::string>();
    c.synth = synth_from(tree.at("synth"));
    c.profile.k = tree.at("profile").at("k").get<int>();
    c.profile.buckets = tree.at("profile").at("buckets").get<int>();
    c.model = model::ModelConfig::from_json(tree.at("model"));
    c.train = train::TrainConfig::from_json(tree.at("train"));
    const auto& s = tree.at("sweep");
    c.sweep.alpha = s.at("alpha").get<std::vector<double>>();
    c.sweep.l_m = s.at("l_m").get<std::vector<int>>();
    c.sweep.l_t = s.at("l_t").get<std::vector<int>>();
    c.sweep.d = s.at("d").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(fmt::format("config: {}", e.what()));
  }
  if (c.threads < 0) throw UsageError("threads must be >= 0");
  if (c.profile.k < 1 || c.profile.buckets < 1) throw UsageError("profile.k and profile.buckets must be >= 1");
  c.train.seed = c.seed;
  c.train.precision = c.precision;
  c.synth.seed = c.seed;
  return c;
}

std::string RunConfig::hash() const { return sha256_hex(to_json().dump()); }

std::filesystem::path RunConfig::checkpoint_path() const {
  return paths.checkpoint.empty() ? std::filesystem::path(paths.out) / "model.ckpt" : std::filesystem::path(paths.checkpoint);
}

std::filesystem::path RunConfig::guidance_path(const std::string& key) const {
  if (!paths.guidance.empty()) return paths.guidance;
  return std::filesystem::path(paths.out) / "cache" / fmt::format("guidance-{}.bin", key.substr(0, 16));
}

train::TrainConfig RunConfig::resolved_train() const {
  auto t = train;
  t.seed = seed;
  t.precision = precision;
  return t;
}

hin::SynthSpec RunConfig::resolved_synth() const {
  auto s = synth;
  s.seed = seed;
  return s;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError(fmt::format("cannot open config file {}", path.string()));
  try {
    return RunConfig::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

}  // namespace aghint::cli
