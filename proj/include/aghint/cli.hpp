#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "aghint/hin.hpp"
#include "aghint/model.hpp"
#include "aghint/train.hpp"

namespace aghint::cli {

struct Paths {
  std::string data = "data/synth";
  std::string out = "out";
  std::string guidance;      // default: <out>/cache/guidance-<key>.bin
  std::string checkpoint;    // default: <out>/model.ckpt
  std::string checkpoint_b;  // second model for case-study
  std::string predictions;   // optional input for profile
};

struct ProfileConfig {
  int k = 2;
  int buckets = 5;
};

struct SweepConfig {
  std::vector<double> alpha{0.5, 0.8, 0.9, 1.0};
  std::vector<int> l_m{1, 2, 3};
  std::vector<int> l_t{1, 2};
  std::vector<int> d{32, 64};
};

// One tree holding every setting. The root seed and precision are shared by
// all sections; each leaf can be overridden as --<section>.<key> VALUE.
struct RunConfig {
  std::uint64_t seed = 7;
  int threads = 0;  // 0: AGHINT_THREADS or the runtime default
  model::Precision precision = model::Precision::f32;
  Paths paths;
  hin::SynthSpec synth;
  ProfileConfig profile;
  model::ModelConfig model;
  train::TrainConfig train;
  SweepConfig sweep;

  nlohmann::json to_json() const;
  // Unknown keys are rejected at every level.
  static RunConfig from_json(const nlohmann::json& j);
  std::string hash() const;

  std::filesystem::path checkpoint_path() const;
  std::filesystem::path guidance_path(const std::string& key) const;
  // Train settings with the root seed and precision folded in.
  train::TrainConfig resolved_train() const;
  hin::SynthSpec resolved_synth() const;
};

// Merges `patch` into the defaults' tree; keys must already exist there.
nlohmann::json merge_strict(nlohmann::json base, const nlohmann::json& patch, const std::string& where = "");
// Sets a dotted leaf such as "model.alpha", parsing `value` by the leaf's type.
void set_leaf(nlohmann::json& tree, const std::string& dotted, const std::string& value);

RunConfig load_run_config(const std::filesystem::path& path);

// Runs one command. Human-readable progress goes to `err`; the last line on
// `err` is always a single JSON record with the exit code. Returns 0 on
// success, 1 for usage errors, 2 for data errors, 3 for numeric failures.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, const char* const* argv);

}  // namespace aghint::cli
