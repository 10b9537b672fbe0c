#pragma once

#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mrgnn/errors.hpp"
#include "mrgnn/graph.hpp"
#include "mrgnn/metrics.hpp"
#include "mrgnn/trainer.hpp"

namespace mrgnn {

using Json = nlohmann::ordered_json;

/// Bumped whenever a field is added, removed or renamed.
inline constexpr int trace_schema_version = 1;

namespace detail {

inline Json number_or_null(std::optional<double> v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return *v;
}

inline Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace detail

inline Json to_json(const EvalReport& r) {
  Json j;
  j["num_nodes"] = r.num_nodes;
  j["auc"] = detail::number_or_null(r.auc);
  j["recall"] = r.recall;
  j["precision"] = r.precision;
  j["f1"] = r.f1;
  j["nmi"] = r.nmi;
  j["ari"] = r.ari;
  j["tp"] = r.counts.tp;
  j["fp"] = r.counts.fp;
  j["tn"] = r.counts.tn;
  j["fn"] = r.counts.fn;
  return j;
}

/// One line per epoch.
inline Json epoch_record_json(const EpochRecord& rec, std::span<const std::string> relation_names) {
  Json trees = Json::array();
  for (const auto& t : rec.trees) {
    Json tj;
    tj["layer"] = t.layer;
    tj["relation"] = t.relation < relation_names.size() ? relation_names[t.relation] : std::to_string(t.relation);
    tj["threshold"] = t.threshold;
    tj["depth"] = t.depth;
    tj["state"] = detail::finite_or_null(t.state);
    tj["reward"] = detail::finite_or_null(t.reward);
    tj["terminated"] = t.terminated;
    tj["backtracked"] = t.backtracked;
    tj["converged"] = t.converged;
    tj["skipped"] = t.skipped;
    trees.push_back(std::move(tj));
  }
  Json j;
  j["schema_version"] = trace_schema_version;
  j["type"] = "epoch";
  j["epoch"] = rec.epoch;
  j["trees"] = std::move(trees);
  j["train"] = {{"gnn_loss", detail::finite_or_null(rec.train_gnn_loss)},
                {"sim_loss", detail::finite_or_null(rec.train_sim_loss)},
                {"total_loss", detail::finite_or_null(rec.train_total_loss)}};
  j["val"] = {{"gnn_loss", detail::number_or_null(rec.val_gnn_loss)},
              {"sim_loss", detail::number_or_null(rec.val_sim_loss)},
              {"total_loss", detail::number_or_null(rec.val_total_loss)},
              {"auc", detail::number_or_null(rec.val_auc)}};
  j["aborted"] = rec.aborted;
  j["warnings"] = rec.warnings;
  j["wall_ms"] = rec.wall_ms;
  return j;
}

/// One object per layer mapping relation name to threshold.
inline Json thresholds_json(const ThresholdVector& thresholds, std::span<const std::string> relation_names) {
  Json th = Json::array();
  for (std::size_t l = 0; l < thresholds.layers(); ++l) {
    Json row = Json::object();
    for (std::size_t r = 0; r < thresholds.relations(); ++r) row[relation_names[r]] = thresholds.at(l, r);
    th.push_back(std::move(row));
  }
  return th;
}

/// Final line: thresholds and the evaluation report.
inline Json report_record_json(std::size_t epochs_completed, const ThresholdVector& thresholds,
                               std::span<const std::string> relation_names, int positive_class,
                               const std::string& split, const EvalReport& report) {
  Json j;
  j["schema_version"] = trace_schema_version;
  j["type"] = "report";
  j["epochs_completed"] = epochs_completed;
  j["thresholds"] = thresholds_json(thresholds, relation_names);
  j["positive_class"] = positive_class;
  j["split"] = split;
  j["metrics"] = to_json(report);
  return j;
}

namespace detail {

enum class Kind { number, integer, boolean, string, array, object };

inline bool is_kind(const Json& v, Kind k, bool nullable) {
  if (v.is_null()) return nullable;
  switch (k) {
    case Kind::number: return v.is_number();
    case Kind::integer: return v.is_number_integer();
    case Kind::boolean: return v.is_boolean();
    case Kind::string: return v.is_string();
    case Kind::array: return v.is_array();
    case Kind::object: return v.is_object();
  }
  return false;
}

struct FieldSpec {
  const char* name;
  Kind kind;
  bool nullable = false;
};

inline void check_fields(const Json& j, std::initializer_list<FieldSpec> fields, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + ": expected an object");
  if (j.size() != fields.size()) {
    throw ValidationError(where + ": expected " + std::to_string(fields.size()) + " fields, found " +
                          std::to_string(j.size()));
  }
  for (const auto& f : fields) {
    if (!j.contains(f.name)) throw ValidationError(where + ": missing field '" + f.name + "'");
    if (!is_kind(j.at(f.name), f.kind, f.nullable)) {
      throw ValidationError(where + ": field '" + f.name + "' has the wrong type");
    }
  }
}

}  // namespace detail

/// Throws ValidationError unless `line` is a well-formed trace record.
/// Returns the record type ("epoch" or "report").
inline std::string validate_trace_line(const std::string& line) {
  using detail::Kind;
  Json j;
  try {
    j = Json::parse(line);
  } catch (const Json::parse_error& e) {
    throw ValidationError(std::string("trace line is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
    throw ValidationError("trace line lacks a type");
  }
  if (!j.contains("schema_version") || j["schema_version"] != trace_schema_version) {
    throw ValidationError("trace line has an unsupported schema_version");
  }
  const std::string type = j["type"];
  if (type == "epoch") {
    detail::check_fields(j,
                         {{"schema_version", Kind::integer},
                          {"type", Kind::string},
                          {"epoch", Kind::integer},
                          {"trees", Kind::array},
                          {"train", Kind::object},
                          {"val", Kind::object},
                          {"aborted", Kind::boolean},
                          {"warnings", Kind::array},
                          {"wall_ms", Kind::number}},
                         "epoch record");
    for (const auto& t : j["trees"]) {
      detail::check_fields(t,
                           {{"layer", Kind::integer},
                            {"relation", Kind::string},
                            {"threshold", Kind::number},
                            {"depth", Kind::integer},
                            {"state", Kind::number, true},
                            {"reward", Kind::number, true},
                            {"terminated", Kind::boolean},
                            {"backtracked", Kind::boolean},
                            {"converged", Kind::boolean},
                            {"skipped", Kind::boolean}},
                           "tree entry");
    }
    detail::check_fields(j["train"],
                         {{"gnn_loss", Kind::number, true},
                          {"sim_loss", Kind::number, true},
                          {"total_loss", Kind::number, true}},
                         "train losses");
    detail::check_fields(j["val"],
                         {{"gnn_loss", Kind::number, true},
                          {"sim_loss", Kind::number, true},
                          {"total_loss", Kind::number, true},
                          {"auc", Kind::number, true}},
                         "val losses");
    for (const auto& w : j["warnings"]) {
      if (!w.is_string()) throw ValidationError("warnings must be strings");
    }
  } else if (type == "report") {
    detail::check_fields(j,
                         {{"schema_version", Kind::integer},
                          {"type", Kind::string},
                          {"epochs_completed", Kind::integer},
                          {"thresholds", Kind::array},
                          {"positive_class", Kind::integer},
                          {"split", Kind::string},
                          {"metrics", Kind::object}},
                         "report record");
    for (const auto& row : j["thresholds"]) {
      if (!row.is_object()) throw ValidationError("threshold rows must be objects");
      for (const auto& [k, v] : row.items()) {
        if (!v.is_number()) throw ValidationError("threshold '" + k + "' is not a number");
      }
    }
    detail::check_fields(j["metrics"],
                         {{"num_nodes", Kind::integer},
                          {"auc", Kind::number, true},
                          {"recall", Kind::number},
                          {"precision", Kind::number},
                          {"f1", Kind::number},
                          {"nmi", Kind::number},
                          {"ari", Kind::number},
                          {"tp", Kind::integer},
                          {"fp", Kind::integer},
                          {"tn", Kind::integer},
                          {"fn", Kind::integer}},
                         "metrics");
  } else {
    throw ValidationError("unknown trace record type '" + type + "'");
  }
  return type;
}

/// Writes one compact JSON object per line.
class TraceWriter {
 public:
  explicit TraceWriter(std::ostream& out) : out_(&out) {}
  void write(const Json& record) {
    *out_ << record.dump() << '\n';
    out_->flush();
    if (!*out_) throw IoError("failed to write trace record");
  }

 private:
  std::ostream* out_;
};

}  // namespace mrgnn
