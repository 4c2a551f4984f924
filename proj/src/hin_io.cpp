#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>
#include "json.hpp"

#include "aghint/hin.hpp"

namespace aghint::hin {

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(FormatIssue issue) {
  switch (issue) {
    case FormatIssue::missing_file: return "missing-file";
    case FormatIssue::malformed: return "malformed";
    case FormatIssue::dangling_endpoint: return "dangling-endpoint";
    case FormatIssue::dimension_mismatch: return "dimension-mismatch";
    case FormatIssue::unknown_type: return "unknown-type";
    case FormatIssue::duplicate_id: return "duplicate-id";
    case FormatIssue::invalid_value: return "invalid-value";
    case FormatIssue::missing_label: return "missing-label";
  }
  return "unknown";
}

FormatError::FormatError(FormatIssue issue, fs::path file, std::size_t line, const std::string& detail)
    : DataError(fmt::format("{}:{}: {}: {}", file.string(), line, to_string(issue), detail)),
      issue_(issue),
      file_(std::move(file)),
      line_(line) {}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatIssue::missing_file, path, 0, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Calls fn(line_no, line) for every non-blank line.
template <class Fn>
void for_each_line(const std::string& text, Fn&& fn) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    ++line_no;
    std::string_view line(text.data() + pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") != std::string_view::npos) fn(line_no, line);
    pos = end + 1;
  }
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<std::string_view> split_char(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t at = s.find(sep, start);
    out.push_back(s.substr(start, at == std::string_view::npos ? std::string_view::npos : at - start));
    if (at == std::string_view::npos) break;
    start = at + 1;
  }
  return out;
}

template <class T>
bool parse_number(std::string_view tok, T& out) {
  while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
  while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return res.ec == std::errc{} && res.ptr == tok.data() + tok.size();
}

std::int64_t parse_int(std::string_view tok, const fs::path& file, std::size_t line) {
  std::int64_t v = 0;
  if (!parse_number(tok, v)) {
    throw FormatError(FormatIssue::malformed, file, line, fmt::format("expected an integer, got '{}'", tok));
  }
  return v;
}

AttributeKind parse_kind(const std::string& s, const fs::path& file) {
  if (s == "discrete") return AttributeKind::discrete;
  if (s == "continuous") return AttributeKind::continuous;
  throw FormatError(FormatIssue::invalid_value, file, 0, fmt::format("unknown attr_kind '{}'", s));
}

struct Meta {
  std::vector<NodeType> node_types;
  std::vector<EdgeType> edge_types;
  int target_type = 0;
  int num_classes = 0;
  bool multi_label = false;
};

Meta read_meta(const fs::path& dir) {
  const fs::path file = dir / "meta.json";
  const std::string text = read_file(file);
  Meta meta;
  try {
    const json j = json::parse(text);
    for (const auto& t : j.at("node_types")) {
      NodeType nt;
      nt.name = t.at("name").get<std::string>();
      nt.kind = parse_kind(t.value("attr_kind", std::string("continuous")), file);
      nt.dim = t.at("attr_dim").get<int>();
      nt.has_features = t.value("features", true);
      if (nt.dim < 1) {
        throw FormatError(FormatIssue::invalid_value, file, 0, fmt::format("type '{}' has attr_dim < 1", nt.name));
      }
      meta.node_types.push_back(std::move(nt));
    }
    for (const auto& t : j.at("edge_types")) {
      EdgeType et;
      et.name = t.at("name").get<std::string>();
      et.src_type = t.value("src", -1);
      et.dst_type = t.value("dst", -1);
      et.reverse = t.value("reverse", -1);
      meta.edge_types.push_back(std::move(et));
    }
    meta.target_type = j.at("target_type").get<int>();
    meta.num_classes = j.at("num_classes").get<int>();
    meta.multi_label = j.value("multi_label", false);
  } catch (const json::exception& e) {
    throw FormatError(FormatIssue::malformed, file, 0, e.what());
  }
  const auto n_types = static_cast<int>(meta.node_types.size());
  const auto n_etypes = static_cast<int>(meta.edge_types.size());
  if (meta.target_type < 0 || meta.target_type >= n_types) {
    throw FormatError(FormatIssue::unknown_type, file, 0, fmt::format("target_type {} is not declared", meta.target_type));
  }
  for (const auto& et : meta.edge_types) {
    if (et.src_type >= n_types || et.dst_type >= n_types || et.reverse >= n_etypes) {
      throw FormatError(FormatIssue::unknown_type, file, 0, fmt::format("edge type '{}' references an undeclared type", et.name));
    }
  }
  if (meta.num_classes < 1) throw FormatError(FormatIssue::invalid_value, file, 0, "num_classes must be >= 1");
  return meta;
}

fs::path feature_file(const fs::path& dir, const NodeType& t) { return dir / fmt::format("features_{}.csv", t.name); }

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  out << text;
  if (!out) throw DataError(fmt::format("write failed for {}", path.string()));
}

}  // namespace

HeteroGraph load_graph(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw FormatError(FormatIssue::missing_file, dir, 0, "dataset directory does not exist");
  }
  const Meta meta = read_meta(dir);
  GraphParts parts;
  parts.node_types = meta.node_types;
  parts.edge_types = meta.edge_types;
  parts.target_type = meta.target_type;
  const auto n_types = static_cast<std::int64_t>(meta.node_types.size());

  // nodes.tsv: global-id type-id within-type-id
  const fs::path nodes_file = dir / "nodes.tsv";
  struct NodeRow {
    std::int64_t gid, type, local;
    std::size_t line;
  };
  std::vector<NodeRow> rows;
  for_each_line(read_file(nodes_file), [&](std::size_t ln, std::string_view line) {
    const auto tok = split_ws(line);
    if (tok.size() != 3) throw FormatError(FormatIssue::malformed, nodes_file, ln, "expected 3 columns");
    NodeRow r{parse_int(tok[0], nodes_file, ln), parse_int(tok[1], nodes_file, ln), parse_int(tok[2], nodes_file, ln), ln};
    if (r.type < 0 || r.type >= n_types) {
      throw FormatError(FormatIssue::unknown_type, nodes_file, ln, fmt::format("node type {} is not declared", r.type));
    }
    rows.push_back(r);
  });
  const std::size_t n = rows.size();
  parts.node_type_of.assign(n, -1);
  parts.local_id_of.assign(n, -1);
  std::vector<std::int64_t> type_counts(meta.node_types.size(), 0);
  for (const auto& r : rows) ++type_counts[r.type];
  std::vector<std::vector<char>> local_seen(meta.node_types.size());
  for (std::size_t t = 0; t < local_seen.size(); ++t) local_seen[t].assign(type_counts[t], 0);
  for (const auto& r : rows) {
    if (r.gid < 0 || static_cast<std::size_t>(r.gid) >= n) {
      throw FormatError(FormatIssue::invalid_value, nodes_file, r.line,
                        fmt::format("global id {} outside [0, {})", r.gid, n));
    }
    if (parts.node_type_of[r.gid] != -1) {
      throw FormatError(FormatIssue::duplicate_id, nodes_file, r.line, fmt::format("global id {} repeated", r.gid));
    }
    if (r.local < 0 || r.local >= type_counts[r.type] || local_seen[r.type][r.local]) {
      throw FormatError(FormatIssue::duplicate_id, nodes_file, r.line,
                        fmt::format("within-type id {} invalid or repeated for type {}", r.local, r.type));
    }
    local_seen[r.type][r.local] = 1;
    parts.node_type_of[r.gid] = static_cast<int>(r.type);
    parts.local_id_of[r.gid] = static_cast<NodeId>(r.local);
  }

  // edges.tsv: src dst edge-type
  const fs::path edges_file = dir / "edges.tsv";
  for_each_line(read_file(edges_file), [&](std::size_t ln, std::string_view line) {
    const auto tok = split_ws(line);
    if (tok.size() != 3) throw FormatError(FormatIssue::malformed, edges_file, ln, "expected 3 columns");
    const auto src = parse_int(tok[0], edges_file, ln);
    const auto dst = parse_int(tok[1], edges_file, ln);
    const auto type = parse_int(tok[2], edges_file, ln);
    if (src < 0 || dst < 0 || static_cast<std::size_t>(src) >= n || static_cast<std::size_t>(dst) >= n) {
      throw FormatError(FormatIssue::dangling_endpoint, edges_file, ln,
                        fmt::format("edge ({}, {}) references a node outside [0, {})", src, dst, n));
    }
    if (type < 0 || type >= static_cast<std::int64_t>(meta.edge_types.size())) {
      throw FormatError(FormatIssue::unknown_type, edges_file, ln, fmt::format("edge type {} is not declared", type));
    }
    const auto& et = meta.edge_types[type];
    if ((et.src_type >= 0 && parts.node_type_of[src] != et.src_type) ||
        (et.dst_type >= 0 && parts.node_type_of[dst] != et.dst_type)) {
      throw FormatError(FormatIssue::unknown_type, edges_file, ln,
                        fmt::format("endpoint types ({}, {}) do not match edge type '{}'",
                                    parts.node_type_of[src], parts.node_type_of[dst], et.name));
    }
    parts.edges.push_back({static_cast<NodeId>(src), static_cast<NodeId>(dst), static_cast<int>(type)});
  });

  // features_<type>.csv
  parts.attributes.resize(meta.node_types.size());
  for (std::size_t t = 0; t < meta.node_types.size(); ++t) {
    const auto& info = meta.node_types[t];
    if (!info.has_features) continue;
    const fs::path file = feature_file(dir, info);
    AttributeMatrix m;
    m.cols = static_cast<std::size_t>(info.dim);
    m.values.reserve(static_cast<std::size_t>(type_counts[t]) * m.cols);
    for_each_line(read_file(file), [&](std::size_t ln, std::string_view line) {
      const auto cells = split_char(line, ',');
      if (cells.size() != m.cols) {
        throw FormatError(FormatIssue::dimension_mismatch, file, ln,
                          fmt::format("row has {} values, type '{}' declares {}", cells.size(), info.name, m.cols));
      }
      for (auto cell : cells) {
        double x = 0;
        if (!parse_number(cell, x) || !std::isfinite(x)) {
          throw FormatError(FormatIssue::invalid_value, file, ln, fmt::format("bad attribute value '{}'", cell));
        }
        if (info.kind == AttributeKind::discrete && x != 0.0 && x != 1.0) {
          throw FormatError(FormatIssue::invalid_value, file, ln, fmt::format("discrete attribute must be 0/1, got '{}'", cell));
        }
        m.values.push_back(x);
      }
      ++m.rows;
    });
    if (m.rows != static_cast<std::size_t>(type_counts[t])) {
      throw FormatError(FormatIssue::dimension_mismatch, file, m.rows,
                        fmt::format("{} rows for {} nodes of type '{}'", m.rows, type_counts[t], info.name));
    }
    parts.attributes[t] = std::move(m);
  }

  // labels.tsv: target within-type id, class | comma-joined classes | '-'
  const fs::path labels_file = dir / "labels.tsv";
  const std::size_t n_targets = static_cast<std::size_t>(type_counts[meta.target_type]);
  auto& labels = parts.labels;
  labels.multi_label = meta.multi_label;
  labels.num_classes = meta.num_classes;
  labels.labeled.assign(n_targets, 0);
  if (labels.multi_label) {
    labels.indicator.assign(n_targets * meta.num_classes, 0);
  } else {
    labels.class_of.assign(n_targets, -1);
  }
  std::vector<char> seen(n_targets, 0);
  for_each_line(read_file(labels_file), [&](std::size_t ln, std::string_view line) {
    const auto tok = split_ws(line);
    if (tok.size() != 2) throw FormatError(FormatIssue::malformed, labels_file, ln, "expected 2 columns");
    const auto t = parse_int(tok[0], labels_file, ln);
    if (t < 0 || static_cast<std::size_t>(t) >= n_targets) {
      throw FormatError(FormatIssue::invalid_value, labels_file, ln, fmt::format("target id {} out of range", t));
    }
    if (seen[t]) throw FormatError(FormatIssue::duplicate_id, labels_file, ln, fmt::format("target {} labeled twice", t));
    seen[t] = 1;
    if (tok[1] == "-") return;
    labels.labeled[t] = 1;
    const auto classes = split_char(tok[1], ',');
    if (!labels.multi_label && classes.size() != 1) {
      throw FormatError(FormatIssue::invalid_value, labels_file, ln, "multi-class dataset needs exactly one class");
    }
    for (auto c : classes) {
      const auto k = parse_int(c, labels_file, ln);
      if (k < 0 || k >= meta.num_classes) {
        throw FormatError(FormatIssue::invalid_value, labels_file, ln, fmt::format("class {} out of range", k));
      }
      if (labels.multi_label) {
        labels.indicator[t * meta.num_classes + k] = 1;
      } else {
        labels.class_of[t] = static_cast<std::int32_t>(k);
      }
    }
  });
  for (std::size_t t = 0; t < n_targets; ++t) {
    if (!seen[t]) {
      throw FormatError(FormatIssue::missing_label, labels_file, 0,
                        fmt::format("target {} has neither a label nor an explicit '-'", t));
    }
  }

  // optional split.tsv: global id, train|val|test
  const fs::path split_file = dir / "split.tsv";
  if (fs::exists(split_file)) {
    parts.split.assign(n_targets, SplitTag::none);
    for_each_line(read_file(split_file), [&](std::size_t ln, std::string_view line) {
      const auto tok = split_ws(line);
      if (tok.size() != 2) throw FormatError(FormatIssue::malformed, split_file, ln, "expected 2 columns");
      const auto v = parse_int(tok[0], split_file, ln);
      if (v < 0 || static_cast<std::size_t>(v) >= n || parts.node_type_of[v] != meta.target_type) {
        throw FormatError(FormatIssue::invalid_value, split_file, ln, fmt::format("{} is not a target node", v));
      }
      SplitTag tag;
      if (tok[1] == "train") {
        tag = SplitTag::train;
      } else if (tok[1] == "val") {
        tag = SplitTag::val;
      } else if (tok[1] == "test") {
        tag = SplitTag::test;
      } else {
        throw FormatError(FormatIssue::invalid_value, split_file, ln, fmt::format("unknown split '{}'", tok[1]));
      }
      const auto local = parts.local_id_of[v];
      if (parts.split[local] != SplitTag::none) {
        throw FormatError(FormatIssue::duplicate_id, split_file, ln, fmt::format("node {} listed twice", v));
      }
      if (!labels.labeled[local]) {
        throw FormatError(FormatIssue::invalid_value, split_file, ln, fmt::format("node {} is unlabeled", v));
      }
      parts.split[local] = tag;
    });
    for (std::size_t t = 0; t < n_targets; ++t) {
      if (labels.labeled[t] && parts.split[t] == SplitTag::none) {
        throw FormatError(FormatIssue::missing_label, split_file, 0,
                          fmt::format("labeled target {} is not assigned to a split", t));
      }
    }
  }

  return HeteroGraph::build(std::move(parts));
}

void save_graph(const HeteroGraph& graph, const fs::path& dir) {
  fs::create_directories(dir);
  const auto& p = graph.parts();

  json meta;
  meta["format_version"] = 1;
  meta["node_types"] = json::array();
  for (const auto& t : p.node_types) {
    meta["node_types"].push_back({{"name", t.name},
                                  {"attr_kind", t.kind == AttributeKind::discrete ? "discrete" : "continuous"},
                                  {"attr_dim", t.dim},
                                  {"features", t.has_features}});
  }
  meta["edge_types"] = json::array();
  for (const auto& t : p.edge_types) {
    meta["edge_types"].push_back({{"name", t.name}, {"src", t.src_type}, {"dst", t.dst_type}, {"reverse", t.reverse}});
  }
  meta["target_type"] = p.target_type;
  meta["num_classes"] = p.labels.num_classes;
  meta["multi_label"] = p.labels.multi_label;
  write_text(dir / "meta.json", meta.dump(2) + "\n");

  std::string text;
  for (std::size_t v = 0; v < p.node_type_of.size(); ++v) {
    text += fmt::format("{}\t{}\t{}\n", v, p.node_type_of[v], p.local_id_of[v]);
  }
  write_text(dir / "nodes.tsv", text);

  text.clear();
  for (const auto& e : p.edges) text += fmt::format("{}\t{}\t{}\n", e.src, e.dst, e.type);
  write_text(dir / "edges.tsv", text);

  for (std::size_t t = 0; t < p.node_types.size(); ++t) {
    if (!p.node_types[t].has_features) continue;
    const auto& a = p.attributes[t];
    text.clear();
    for (std::size_t r = 0; r < a.rows; ++r) {
      const auto row = a.row(r);
      for (std::size_t c = 0; c < a.cols; ++c) {
        if (c) text.push_back(',');
        text += format_double(row[c]);
      }
      text.push_back('\n');
    }
    write_text(feature_file(dir, p.node_types[t]), text);
  }

  text.clear();
  const auto& labels = p.labels;
  for (std::size_t t = 0; t < labels.labeled.size(); ++t) {
    if (!labels.labeled[t]) {
      text += fmt::format("{}\t-\n", t);
    } else if (labels.multi_label) {
      std::string joined;
      for (int c = 0; c < labels.num_classes; ++c) {
        if (labels.indicator[t * labels.num_classes + c]) joined += (joined.empty() ? "" : ",") + std::to_string(c);
      }
      text += fmt::format("{}\t{}\n", t, joined);
    } else {
      text += fmt::format("{}\t{}\n", t, labels.class_of[t]);
    }
  }
  write_text(dir / "labels.tsv", text);

  const fs::path split_file = dir / "split.tsv";
  if (!p.split.empty()) {
    static constexpr const char* kNames[] = {"train", "val", "test"};
    text.clear();
    const auto targets = graph.targets();
    for (std::size_t t = 0; t < p.split.size(); ++t) {
      if (p.split[t] == SplitTag::none) continue;
      text += fmt::format("{}\t{}\n", targets[t], kNames[static_cast<int>(p.split[t])]);
    }
    write_text(split_file, text);
  } else if (fs::exists(split_file)) {
    fs::remove(split_file);
  }
}

}  // namespace aghint::hin
