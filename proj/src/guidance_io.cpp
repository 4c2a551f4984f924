#include <filesystem>

#include "json.hpp"

#include "aghint/pathsample.hpp"
#include "binio.hpp"

namespace aghint::pathsample {

namespace {

constexpr char kMagic[4] = {'A', 'G', 'H', 'G'};
constexpr std::uint32_t kVersion = 1;

void write_ragged(binio::Writer& w, const Ragged& r) {
  std::vector<std::uint64_t> offsets(r.offsets.begin(), r.offsets.end());
  w.array(offsets);
  w.array(r.values);
}

Ragged read_ragged(binio::Reader& r, const std::string& file) {
  Ragged out;
  const auto offsets = r.array<std::uint64_t>();
  out.offsets.assign(offsets.begin(), offsets.end());
  out.values = r.array<NodeId>();
  if (out.offsets.empty() || out.offsets.front() != 0 || out.offsets.back() != out.values.size() ||
      !std::is_sorted(out.offsets.begin(), out.offsets.end())) {
    throw DataError(fmt::format("{}: corrupt ragged table", file));
  }
  return out;
}

}  // namespace

void save_guidance(const GuidanceSets& sets, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(fmt::format("cannot write {}", tmp.string()));
    binio::Writer w(out);
    w.raw(kMagic, 4);
    w.value(kVersion);
    w.string(sets.key());
    w.string(sets.graph_hash);
    w.string(sets.params.to_json().dump());
    write_ragged(w, sets.top_k);
    write_ragged(w, sets.bottom_k);
    write_ragged(w, sets.attr_sequences);
    w.array(sets.message_weights);
    w.value<std::uint64_t>(sets.skipped_top);
    w.value<std::uint64_t>(sets.skipped_bottom);
    if (!out) throw DataError(fmt::format("write failed for {}", tmp.string()));
  }
  std::filesystem::rename(tmp, path);
}

GuidanceSets load_guidance(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open guidance cache {}", path.string()));
  binio::Reader r(in, path.string());
  char magic[4];
  r.raw(magic, 4);
  if (!std::equal(magic, magic + 4, kMagic)) throw DataError(fmt::format("{}: not a guidance cache", path.string()));
  if (const auto v = r.value<std::uint32_t>(); v != kVersion) {
    throw DataError(fmt::format("{}: unsupported guidance cache version {}", path.string(), v));
  }
  GuidanceSets sets;
  const std::string key = r.string();
  sets.graph_hash = r.string();
  try {
    sets.params = GuidanceParams::from_json(nlohmann::json::parse(r.string()));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("{}: corrupt parameter block: {}", path.string(), e.what()));
  }
  sets.top_k = read_ragged(r, path.string());
  sets.bottom_k = read_ragged(r, path.string());
  sets.attr_sequences = read_ragged(r, path.string());
  sets.message_weights = r.array<double>();
  sets.skipped_top = r.value<std::uint64_t>();
  sets.skipped_bottom = r.value<std::uint64_t>();
  if (sets.key() != key) throw DataError(fmt::format("{}: cache key does not match its contents", path.string()));
  return sets;
}

nlohmann::json guidance_to_json(const GuidanceSets& sets) {
  auto rows = [](const Ragged& r) {
    nlohmann::json out = nlohmann::json::array();
    for (std::size_t i = 0; i < r.size(); ++i) {
      const auto row = r[i];
      out.push_back(std::vector<NodeId>(row.begin(), row.end()));
    }
    return out;
  };
  return {{"key", sets.key()},
          {"graph_hash", sets.graph_hash},
          {"params", sets.params.to_json()},
          {"top_k", rows(sets.top_k)},
          {"bottom_k", rows(sets.bottom_k)},
          {"attr_sequences", rows(sets.attr_sequences)},
          {"message_weights", sets.message_weights},
          {"skipped_top", sets.skipped_top},
          {"skipped_bottom", sets.skipped_bottom}};
}

}  // namespace aghint::pathsample
