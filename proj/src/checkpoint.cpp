#include <filesystem>

#include <fmt/format.h>

#include "aghint/model.hpp"
#include "binio.hpp"

namespace aghint::model {

namespace {

constexpr char kMagic[4] = {'A', 'G', 'H', 'C'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

// Layout: magic, version, dtype byte, config hash, config JSON, meta JSON,
// tensor count, then per tensor: name, rows, cols, raw values.
template <class T>
void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg, const ModelParams<T>& params,
                     const nlohmann::json& meta) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(fmt::format("cannot write {}", tmp.string()));
    binio::Writer w(out);
    w.raw(kMagic, 4);
    w.value(kVersion);
    w.value(static_cast<std::uint8_t>(sizeof(T) == 4 ? Precision::f32 : Precision::f64));
    w.string(cfg.hash());
    w.string(cfg.to_json().dump());
    w.string(meta.dump());
    w.value<std::uint64_t>(params.values.size());
    for (std::size_t i = 0; i < params.values.size(); ++i) {
      const auto& t = params.values[i];
      w.string(params.names[i]);
      w.value<std::uint64_t>(t.rows);
      w.value<std::uint64_t>(t.cols);
      w.raw(t.data.data(), t.data.size());
    }
    if (!out) throw DataError(fmt::format("write failed for {}", tmp.string()));
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const std::string& expected_config_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open checkpoint {}", path.string()));
  const auto file = path.string();
  binio::Reader r(in, file);
  char magic[4];
  r.raw(magic, 4);
  if (!std::equal(magic, magic + 4, kMagic)) throw DataError(fmt::format("{}: not a checkpoint", file));
  if (const auto v = r.value<std::uint32_t>(); v != kVersion) {
    throw DataError(fmt::format("{}: unsupported checkpoint version {}", file, v));
  }
  Checkpoint ck;
  const auto dtype = r.value<std::uint8_t>();
  if (dtype > 1) throw DataError(fmt::format("{}: unknown precision tag {}", file, dtype));
  ck.precision = static_cast<Precision>(dtype);
  const auto stored_hash = r.string();
  try {
    ck.config = ModelConfig::from_json(nlohmann::json::parse(r.string()));
    ck.meta = nlohmann::json::parse(r.string());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("{}: corrupt header: {}", file, e.what()));
  } catch (const UsageError& e) {
    throw DataError(fmt::format("{}: corrupt config: {}", file, e.what()));
  }
  if (ck.config.hash() != stored_hash) throw DataError(fmt::format("{}: embedded config does not match its hash", file));
  if (!expected_config_hash.empty() && stored_hash != expected_config_hash) {
    throw DataError(fmt::format("{}: config hash {} does not match the expected {}", file, stored_hash.substr(0, 12),
                                expected_config_hash.substr(0, 12)));
  }
  const auto count = r.value<std::uint64_t>();
  if (count > 1'000'000) throw DataError(fmt::format("{}: corrupt tensor count", file));
  for (std::uint64_t i = 0; i < count; ++i) {
    ck.params.names.push_back(r.string());
    const auto rows = r.value<std::uint64_t>();
    const auto cols = r.value<std::uint64_t>();
    if (rows > (1u << 30) || cols > (1u << 30) || rows * cols > (std::uint64_t{1} << 32)) {
      throw DataError(fmt::format("{}: corrupt tensor shape", file));
    }
    Tensor<double> t(rows, cols);
    if (ck.precision == Precision::f32) {
      std::vector<float> raw(rows * cols);
      r.raw(raw.data(), raw.size());
      std::copy(raw.begin(), raw.end(), t.data.begin());
    } else {
      r.raw(t.data.data(), t.data.size());
    }
    ck.params.values.push_back(std::move(t));
  }
  return ck;
}

template void save_checkpoint<float>(const std::filesystem::path&, const ModelConfig&, const ModelParams<float>&,
                                     const nlohmann::json&);
template void save_checkpoint<double>(const std::filesystem::path&, const ModelConfig&, const ModelParams<double>&,
                                      const nlohmann::json&);

}  // namespace aghint::model
