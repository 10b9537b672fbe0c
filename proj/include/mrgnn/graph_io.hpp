#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "mrgnn/errors.hpp"
#include "mrgnn/format.hpp"
#include "mrgnn/graph.hpp"

namespace mrgnn {

namespace fs = std::filesystem;

/// Split given as three index files (one node id per line).
struct ExplicitSplit {
  fs::path train;
  fs::path val;
  fs::path test;
};

/// Split drawn by stratified sampling.
struct RatioSplit {
  double train_ratio = 0.4;
  double val_ratio = 0.1;
  std::uint64_t seed = 0;
};

using SplitSpec = std::variant<ExplicitSplit, RatioSplit>;

namespace detail {

inline std::ifstream open_for_read(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

inline std::ofstream open_for_write(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

inline std::vector<NodeId> read_index_file(const fs::path& path) {
  auto in = open_for_read(path);
  std::vector<NodeId> out;
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    if (trim(line).empty()) continue;
    auto v = parse_int<NodeId>(line);
    if (!v) throw ParseError(path.string(), no, "expected a node index, got '" + line + "'");
    out.push_back(*v);
  }
  return out;
}

}  // namespace detail

inline Matrix read_features(const fs::path& path) {
  auto in = detail::open_for_read(path);
  std::vector<double> values;
  std::size_t width = 0, rows = 0;
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    if (trim(line).empty()) continue;
    std::size_t count = 0;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      auto v = parse_double(rest.substr(0, comma));
      if (!v) throw ParseError(path.string(), no, "malformed real in feature row");
      values.push_back(*v);
      ++count;
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (rows == 0) width = count;
    if (count != width) {
      throw ParseError(path.string(), no,
                       "row has " + std::to_string(count) + " columns, expected " +
                           std::to_string(width));
    }
    ++rows;
  }
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(width));
  std::copy(values.begin(), values.end(), m.data());
  return m;
}

inline std::vector<int> read_labels(const fs::path& path) {
  auto in = detail::open_for_read(path);
  std::vector<int> out;
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    if (trim(line).empty()) continue;
    auto v = parse_int<int>(line);
    if (!v || *v < 0) throw ParseError(path.string(), no, "expected a class index");
    out.push_back(*v);
  }
  return out;
}

inline std::vector<Edge> read_edge_list(const fs::path& path) {
  auto in = detail::open_for_read(path);
  std::vector<Edge> edges;
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    if (trim(line).empty()) continue;
    std::istringstream fields(line);
    std::string a, b, extra;
    fields >> a >> b;
    if (a.empty() || b.empty() || (fields >> extra)) {
      throw ParseError(path.string(), no, "expected 'u v', got '" + line + "'");
    }
    auto u = parse_int<NodeId>(a);
    auto v = parse_int<NodeId>(b);
    if (!u || !v) throw ParseError(path.string(), no, "node ids must be non-negative integers");
    edges.emplace_back(*u, *v);
  }
  return edges;
}

/// Reads features, labels and one edge-list file per relation (named after
/// the file stem). Edges are symmetrised and deduplicated.
inline MultiRelationalGraph load_graph(const fs::path& feature_path, const fs::path& label_path,
                                       const std::vector<fs::path>& relation_paths,
                                       const SplitSpec& split_spec) {
  MultiRelationalGraph g;
  g.features = read_features(feature_path);
  g.labels = read_labels(label_path);
  if (static_cast<std::size_t>(g.features.rows()) != g.labels.size()) {
    throw ShapeError("'" + feature_path.string() + "' has " + std::to_string(g.features.rows()) +
                     " rows but '" + label_path.string() + "' has " +
                     std::to_string(g.labels.size()) + " labels");
  }
  g.num_classes = g.labels.empty() ? 0 : *std::max_element(g.labels.begin(), g.labels.end()) + 1;
  for (const auto& p : relation_paths) {
    g.relations.push_back(
        RelationAdjacency::from_edges(p.stem().string(), g.num_nodes(), read_edge_list(p)));
  }
  if (const auto* ex = std::get_if<ExplicitSplit>(&split_spec)) {
    g.split.train = detail::read_index_file(ex->train);
    g.split.val = detail::read_index_file(ex->val);
    g.split.test = detail::read_index_file(ex->test);
  } else {
    const auto& r = std::get<RatioSplit>(split_spec);
    g.split = stratified_split(g.labels, g.num_classes, r.train_ratio, r.val_ratio, r.seed);
  }
  g.validate();
  return g;
}

/// File names used by save_graph / load_graph_dir.
struct GraphLayout {
  static constexpr const char* features = "features.csv";
  static constexpr const char* labels = "labels.txt";
  static constexpr const char* train = "train.idx";
  static constexpr const char* val = "val.idx";
  static constexpr const char* test = "test.idx";
  static std::string relation(const std::string& name) { return name + ".edges"; }
};

/// Writes the graph in the text formats read by load_graph. Returns the
/// written paths in a fixed order.
inline std::vector<fs::path> save_graph(const MultiRelationalGraph& g, const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<fs::path> written;

  auto features_path = dir / GraphLayout::features;
  {
    auto out = detail::open_for_write(features_path);
    for (Eigen::Index i = 0; i < g.features.rows(); ++i) {
      for (Eigen::Index j = 0; j < g.features.cols(); ++j) {
        if (j) out << ',';
        out << format_double(g.features(i, j));
      }
      out << '\n';
    }
  }
  written.push_back(features_path);

  auto labels_path = dir / GraphLayout::labels;
  {
    auto out = detail::open_for_write(labels_path);
    for (int y : g.labels) out << y << '\n';
  }
  written.push_back(labels_path);

  for (const auto& rel : g.relations) {
    const auto& name = rel.name();
    const bool safe = !name.empty() && std::all_of(name.begin(), name.end(), [](char c) {
      return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
    });
    if (!safe) throw ValidationError("relation name '" + name + "' is not usable as a file name");
    auto path = dir / GraphLayout::relation(name);
    auto out = detail::open_for_write(path);
    for (const auto& [u, v] : rel.undirected_edges()) out << u << ' ' << v << '\n';
    written.push_back(path);
  }

  auto write_index = [&](const char* file, const std::vector<NodeId>& ids) {
    auto path = dir / file;
    auto out = detail::open_for_write(path);
    for (NodeId v : ids) out << v << '\n';
    written.push_back(path);
  };
  write_index(GraphLayout::train, g.split.train);
  write_index(GraphLayout::val, g.split.val);
  write_index(GraphLayout::test, g.split.test);
  return written;
}

/// Loads a directory written by save_graph.
inline MultiRelationalGraph load_graph_dir(const fs::path& dir,
                                           const std::vector<std::string>& relation_names) {
  std::vector<fs::path> rels;
  for (const auto& name : relation_names) rels.push_back(dir / GraphLayout::relation(name));
  return load_graph(dir / GraphLayout::features, dir / GraphLayout::labels, rels,
                    ExplicitSplit{dir / GraphLayout::train, dir / GraphLayout::val,
                                  dir / GraphLayout::test});
}

}  // namespace mrgnn
