#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mrgnn/config.hpp"
#include "mrgnn/errors.hpp"
#include "mrgnn/format.hpp"
#include "mrgnn/graph.hpp"
#include "mrgnn/graph_io.hpp"
#include "mrgnn/synthetic.hpp"
#include "mrgnn/trace.hpp"
#include "mrgnn/trainer.hpp"

namespace mrgnn {

namespace fs = std::filesystem;

inline constexpr const char* out_dir_env = "MRGNN_OUT_DIR";

/// File names inside a training output directory.
struct RunLayout {
  static constexpr const char* trace = "trace.jsonl";
  static constexpr const char* model = "model.json";
  static constexpr const char* embeddings = "embeddings.csv";
  static constexpr const char* config = "config.ini";
  static constexpr const char* stats = "stats.json";
};

/// --out, then [output] dir, then $MRGNN_OUT_DIR, then "mrgnn-out".
inline fs::path resolve_out_dir(const RunConfig& cfg, const std::optional<fs::path>& cli_out) {
  if (cli_out && !cli_out->empty()) return *cli_out;
  if (!cfg.output.dir.empty()) return cfg.output.dir;
  if (const char* env = std::getenv(out_dir_env); env && *env) return env;
  return "mrgnn-out";
}

/// Generates the synthetic graph or loads the [data] directory.
inline MultiRelationalGraph load_run_graph(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.synthetic) return generate_synthetic(*cfg.synthetic);
  return load_graph_dir(cfg.data->dir, cfg.data->relations);
}

inline std::vector<std::string> relation_names(const MultiRelationalGraph& g) {
  std::vector<std::string> names;
  for (const auto& r : g.relations) names.push_back(r.name());
  return names;
}

inline Json stats_json(const MultiRelationalGraph& g) {
  Json rels = Json::array();
  for (const auto& s : empirical_relation_stats(g)) {
    rels.push_back({{"name", s.name},
                    {"edge_count", s.edge_count},
                    {"avg_feature_similarity", detail::number_or_null(s.avg_feature_similarity)},
                    {"avg_label_similarity", detail::number_or_null(s.avg_label_similarity)}});
  }
  return {{"num_nodes", g.num_nodes()}, {"num_classes", g.num_classes}, {"relations", std::move(rels)}};
}

namespace detail {

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("failed while writing '" + path.string() + "'");
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Json matrix_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const Json& j, const std::string& what) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) throw ValidationError(what + " must be a non-empty matrix");
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j[0].size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != j[0].size()) throw ValidationError(what + " has ragged rows");
    for (std::size_t k = 0; k < j[i].size(); ++k) {
      if (!j[i][k].is_number()) throw ValidationError(what + " holds a non-number");
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = j[i][k].get<double>();
    }
  }
  return m;
}

inline Matrix rows_of(const Matrix& m, std::span<const NodeId> nodes) {
  Matrix out(static_cast<Eigen::Index>(nodes.size()), m.cols());
  for (std::size_t i = 0; i < nodes.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(nodes[i]);
  return out;
}

inline const std::vector<NodeId>& split_nodes(const MultiRelationalGraph& g, const std::string& split) {
  if (split == "train") return g.split.train;
  if (split == "val") return g.split.val;
  if (split == "test") return g.split.test;
  throw ValidationError("unknown split '" + split + "' (expected train, val or test)");
}

}  // namespace detail

/// Writes the graph files plus stats.json into `dir`. Returns every path
/// written.
inline std::vector<fs::path> cmd_generate(const RunConfig& cfg, const fs::path& dir) {
  cfg.validate();
  if (!cfg.synthetic) throw ConfigError("generate needs a [synthetic] section");
  const auto g = generate_synthetic(*cfg.synthetic);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
  auto written = save_graph(g, dir);
  const auto stats_path = dir / RunLayout::stats;
  detail::write_text(stats_path, stats_json(g).dump(2) + "\n");
  written.push_back(stats_path);
  return written;
}

/// What a saved model directory holds besides the embeddings.
struct ModelSummary {
  int num_classes = 0;
  int positive_class = 0;
  std::size_t kmeans_restarts = 10;
  std::uint64_t seed = 0;
  Matrix classifier_weight;
  Vector classifier_bias;
};

inline Json model_summary_json(const FitResult& res, const MultiRelationalGraph& g, const TrainConfig& cfg) {
  const auto names = relation_names(g);
  const auto& c = res.state.model.gnn.classifier;
  Json bias = Json::array();
  for (Eigen::Index i = 0; i < c.bias.size(); ++i) bias.push_back(c.bias(i));
  Json j;
  j["schema_version"] = trace_schema_version;
  j["num_nodes"] = g.num_nodes();
  j["num_classes"] = g.num_classes;
  j["positive_class"] = res.state.positive_class;
  j["epochs_completed"] = res.completed_epochs();
  j["kmeans_restarts"] = cfg.kmeans_restarts;
  j["seed"] = cfg.seed;
  j["embeddings"] = RunLayout::embeddings;
  j["thresholds"] = thresholds_json(res.state.thresholds, names);
  j["classifier"] = {{"weight", detail::matrix_json(c.weight)}, {"bias", std::move(bias)}};
  return j;
}

inline ModelSummary load_model_summary(const fs::path& path) {
  Json j;
  try {
    j = Json::parse(detail::read_text(path));
  } catch (const Json::parse_error& e) {
    throw ValidationError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
  try {
    ModelSummary m;
    m.num_classes = j.at("num_classes").get<int>();
    m.positive_class = j.at("positive_class").get<int>();
    m.kmeans_restarts = j.at("kmeans_restarts").get<std::size_t>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.classifier_weight = detail::matrix_from_json(j.at("classifier").at("weight"), "classifier weight");
    const auto& b = j.at("classifier").at("bias");
    m.classifier_bias.resize(static_cast<Eigen::Index>(b.size()));
    for (std::size_t i = 0; i < b.size(); ++i) m.classifier_bias(static_cast<Eigen::Index>(i)) = b[i].get<double>();
    if (m.classifier_weight.cols() != m.num_classes || m.classifier_bias.size() != m.num_classes) {
      throw ValidationError("classifier shape does not match num_classes");
    }
    return m;
  } catch (const Json::exception& e) {
    throw ValidationError("'" + path.string() + "' is malformed: " + e.what());
  }
}

inline void write_embeddings(const fs::path& path, const Matrix& z) {
  std::string text;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      if (j) text += ',';
      text += format_double(z(i, j));
    }
    text += '\n';
  }
  detail::write_text(path, text);
}

struct TrainOutcome {
  FitResult fit;
  std::vector<std::string> relations;
  fs::path trace_path;
};

/// Trains, writes trace/model/embeddings/config into `dir` and prints the
/// final thresholds and test metrics to `out`.
inline TrainOutcome cmd_train(const RunConfig& cfg, const fs::path& dir, std::ostream& out, std::ostream& err) {
  cfg.validate();
  const auto g = load_run_graph(cfg);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());

  TrainOutcome res;
  res.relations = relation_names(g);
  res.trace_path = dir / RunLayout::trace;
  std::ofstream trace_file(res.trace_path, std::ios::binary);
  if (!trace_file) throw IoError("cannot write '" + res.trace_path.string() + "'");
  TraceWriter trace(trace_file);
  detail::write_text(dir / RunLayout::config, serialize_config(cfg));

  res.fit = fit(g, cfg.train, [&](const EpochRecord& rec) {
    for (const auto& w : rec.warnings) err << "warning: epoch " << rec.epoch << ": " << w << '\n';
    if (cfg.output.trace == TraceVerbosity::full) trace.write(epoch_record_json(rec, res.relations));
  });
  const auto& f = res.fit;
  trace.write(report_record_json(f.completed_epochs(), f.state.thresholds, res.relations, f.state.positive_class,
                                 "test", f.test_report));
  detail::write_text(dir / RunLayout::model, model_summary_json(f, g, cfg.train).dump(2) + "\n");
  write_embeddings(dir / RunLayout::embeddings, f.final.embeddings);

  if (f.aborted()) {
    err << "error: non-finite loss in epoch " << f.epochs.back().epoch << "; results are from epoch "
        << f.completed_epochs() << ", the last good one\n";
  }
  for (std::size_t l = 0; l < f.state.thresholds.layers(); ++l) {
    for (std::size_t r = 0; r < res.relations.size(); ++r) {
      out << "threshold layer " << l + 1 << ' ' << res.relations[r] << ' '
          << format_fixed(f.state.thresholds.at(l, r), 4) << '\n';
    }
  }
  out << "test " << to_json(f.test_report).dump() << '\n';
  return res;
}

/// Recomputes every metric for one split from a saved model directory.
inline EvalReport cmd_eval(const RunConfig& cfg, const fs::path& model_dir, const std::string& split) {
  const auto summary = load_model_summary(model_dir / RunLayout::model);
  const auto emb_path = model_dir / RunLayout::embeddings;
  if (!fs::exists(emb_path)) throw IoError("embedding file '" + emb_path.string() + "' does not exist");
  const Matrix z = read_features(emb_path);
  const auto g = load_run_graph(cfg);
  if (static_cast<std::size_t>(z.rows()) != g.num_nodes()) {
    throw ValidationError("embeddings have " + std::to_string(z.rows()) + " rows but the graph has " +
                          std::to_string(g.num_nodes()) + " nodes");
  }
  if (z.cols() != summary.classifier_weight.rows()) {
    throw ValidationError("embedding width differs from the classifier input width");
  }
  if (summary.num_classes != g.num_classes) throw ValidationError("model and graph disagree on the class count");
  const auto& nodes = detail::split_nodes(g, split);

  Matrix logits = z * summary.classifier_weight;
  logits.rowwise() += summary.classifier_bias.transpose();
  const Matrix probs = softmax_rows(logits);
  return evaluate(detail::rows_of(z, nodes), detail::rows_of(probs, nodes), nodes, g.labels, g.num_classes,
                  summary.positive_class, summary.kmeans_restarts, summary.seed);
}

}  // namespace mrgnn
