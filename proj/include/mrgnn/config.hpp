#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "mrgnn/errors.hpp"
#include "mrgnn/format.hpp"
#include "mrgnn/synthetic.hpp"
#include "mrgnn/trainer.hpp"

namespace mrgnn {

namespace fs = std::filesystem;

/// A graph previously written by save_graph.
struct DataSource {
  fs::path dir;
  std::vector<std::string> relations;
};

enum class TraceVerbosity { full, summary };

struct OutputOptions {
  // Empty: fall back to MRGNN_OUT_DIR, then "mrgnn-out".
  fs::path dir;
  TraceVerbosity trace = TraceVerbosity::full;
};

/// Everything one CLI invocation needs. Exactly one of `synthetic` and
/// `data` is set once validated.
struct RunConfig {
  std::optional<SyntheticSpec> synthetic;
  std::optional<DataSource> data;
  TrainConfig train;
  OutputOptions output;

  void validate() const {
    if (synthetic.has_value() == data.has_value()) {
      throw ConfigError("exactly one of [synthetic] and [data] must be present");
    }
    if (synthetic) {
      try {
        synthetic->validate();
      } catch (const ValidationError& e) {
        throw ConfigError(std::string("[synthetic]: ") + e.what());
      }
      std::set<std::string> names;
      for (const auto& r : synthetic->relations) {
        if (!names.insert(r.name).second) throw ConfigError("relation '" + r.name + "' declared twice");
      }
      if (synthetic->relations.empty()) throw ConfigError("at least one [relation NAME] section is required");
    }
    if (data) {
      if (data->dir.empty()) throw ConfigError("[data] dir is required");
      if (data->relations.empty()) throw ConfigError("[data] relations must name at least one relation");
    }
    train.validate();
  }
};

// ---------------------------------------------------------------------------
// Enum spellings shared by the config file, CLI and trace.

inline const char* to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::actor_critic: return "actor_critic";
    case PolicyKind::q_learning: return "q_learning";
    case PolicyKind::bmab: return "bmab";
  }
  return "?";
}
inline const char* to_string(ActionSpace a) { return a == ActionSpace::discrete ? "discrete" : "continuous"; }
inline const char* to_string(InterAggregation v) {
  switch (v) {
    case InterAggregation::threshold: return "threshold";
    case InterAggregation::attention: return "attention";
    case InterAggregation::weight: return "weight";
    case InterAggregation::mean: return "mean";
  }
  return "?";
}
inline const char* to_string(TrainingMode m) { return m == TrainingMode::transductive ? "transductive" : "inductive"; }
inline const char* to_string(TraceVerbosity t) { return t == TraceVerbosity::full ? "full" : "summary"; }

namespace detail {

template <class E, std::size_t N>
E parse_enum(std::string_view text, const std::array<E, N>& options, const std::string& key) {
  for (E e : options) {
    if (text == to_string(e)) return e;
  }
  std::string allowed;
  for (E e : options) allowed += std::string(allowed.empty() ? "" : ", ") + to_string(e);
  throw ConfigError(key + ": '" + std::string(text) + "' is not one of " + allowed);
}

inline double parse_number(std::string_view text, const std::string& key) {
  auto v = parse_double(text);
  if (!v || !std::isfinite(*v)) throw ConfigError(key + ": '" + std::string(text) + "' is not a finite number");
  return *v;
}

template <class Int>
Int parse_integer(std::string_view text, const std::string& key) {
  auto v = parse_int<Int>(text);
  if (!v) throw ConfigError(key + ": '" + std::string(text) + "' is not a valid integer");
  return *v;
}

inline bool parse_bool(std::string_view text, const std::string& key) {
  if (text == "true") return true;
  if (text == "false") return false;
  throw ConfigError(key + ": expected true or false, got '" + std::string(text) + "'");
}

inline std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  while (true) {
    const auto comma = text.find(',');
    const auto item = trim(text.substr(0, comma));
    if (!item.empty()) out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return out;
}

inline std::string join(const std::vector<std::string>& items) {
  std::string s;
  for (const auto& it : items) s += (s.empty() ? "" : ", ") + it;
  return s;
}

template <class T>
struct Field {
  const char* key;
  std::function<std::string(const T&)> get;
  std::function<void(T&, std::string_view, const std::string&)> set;
};

template <class T, class M>
Field<T> number_field(const char* key, M T::*member) {
  return {key,
          [member](const T& t) {
            if constexpr (std::is_floating_point_v<M>) {
              return format_double(t.*member);
            } else {
              return std::to_string(t.*member);
            }
          },
          [member](T& t, std::string_view v, const std::string& k) {
            if constexpr (std::is_floating_point_v<M>) {
              t.*member = parse_number(v, k);
            } else {
              t.*member = parse_integer<M>(v, k);
            }
          }};
}

template <class T>
Field<T> bool_field(const char* key, bool T::*member) {
  return {key, [member](const T& t) { return std::string(t.*member ? "true" : "false"); },
          [member](T& t, std::string_view v, const std::string& k) { t.*member = parse_bool(v, k); }};
}

template <class T, class E, std::size_t N>
Field<T> enum_field(const char* key, E T::*member, std::array<E, N> options) {
  return {key, [member](const T& t) { return std::string(to_string(t.*member)); },
          [member, options](T& t, std::string_view v, const std::string& k) { t.*member = parse_enum(v, options, k); }};
}

inline const std::vector<Field<SyntheticSpec>>& synthetic_fields() {
  using S = SyntheticSpec;
  static const std::vector<Field<S>> f = {
      number_field("num_nodes", &S::num_nodes),
      number_field("num_classes", &S::num_classes),
      number_field("feature_dim", &S::feature_dim),
      {"class_balance",
       [](const S& s) {
         std::vector<std::string> parts;
         for (double p : s.class_balance) parts.push_back(format_double(p));
         return join(parts);
       },
       [](S& s, std::string_view v, const std::string& k) {
         s.class_balance.clear();
         for (const auto& item : split_list(v)) s.class_balance.push_back(parse_number(item, k));
       }},
      number_field("class_separation", &S::class_separation),
      number_field("feature_noise", &S::feature_noise),
      number_field("camouflage_rate", &S::camouflage_rate),
      number_field("train_ratio", &S::train_ratio),
      number_field("val_ratio", &S::val_ratio),
      number_field("seed", &S::seed),
  };
  return f;
}

inline const std::vector<Field<SyntheticRelationSpec>>& relation_fields() {
  using S = SyntheticRelationSpec;
  static const std::vector<Field<S>> f = {
      number_field("edges", &S::edge_count),
      number_field("homophily", &S::homophily),
  };
  return f;
}

inline const std::vector<Field<DataSource>>& data_fields() {
  using S = DataSource;
  static const std::vector<Field<S>> f = {
      {"dir", [](const S& s) { return s.dir.string(); },
       [](S& s, std::string_view v, const std::string&) { s.dir = std::string(v); }},
      {"relations", [](const S& s) { return join(s.relations); },
       [](S& s, std::string_view v, const std::string&) { s.relations = split_list(v); }},
  };
  return f;
}

inline const std::vector<Field<TrainConfig>>& train_fields() {
  using T = TrainConfig;
  static const std::vector<Field<T>> f = {
      number_field("epochs", &T::epochs),
      number_field("batch_size", &T::batch_size),
      number_field("learning_rate", &T::learning_rate),
      number_field("lambda_sim", &T::lambda_sim),
      number_field("lambda_reg", &T::lambda_reg),
      number_field("undersample_ratio", &T::undersample_ratio),
      number_field("embedding_size", &T::embedding_size),
      number_field("layers", &T::layers),
      enum_field("variant", &T::variant,
                 std::array{InterAggregation::threshold, InterAggregation::attention, InterAggregation::weight,
                            InterAggregation::mean}),
      enum_field("mode", &T::mode, std::array{TrainingMode::transductive, TrainingMode::inductive}),
      bool_field("filtering", &T::filtering),
      number_field("alpha", &T::alpha),
      number_field("tau", &T::tau),
      number_field("deep_switching_number", &T::deep_switching_number),
      bool_field("backtracking", &T::backtracking),
      bool_field("recursive", &T::recursive),
      enum_field("policy", &T::policy, std::array{PolicyKind::actor_critic, PolicyKind::q_learning, PolicyKind::bmab}),
      enum_field("action_space", &T::action_space, std::array{ActionSpace::discrete, ActionSpace::continuous}),
      {"rl_learning_rate", [](const T& t) { return format_double(t.rl.learning_rate); },
       [](T& t, std::string_view v, const std::string& k) { t.rl.learning_rate = parse_number(v, k); }},
      {"rl_gamma", [](const T& t) { return format_double(t.rl.gamma); },
       [](T& t, std::string_view v, const std::string& k) { t.rl.gamma = parse_number(v, k); }},
      {"rl_epsilon", [](const T& t) { return format_double(t.rl.epsilon); },
       [](T& t, std::string_view v, const std::string& k) { t.rl.epsilon = parse_number(v, k); }},
      {"rl_epsilon_decay", [](const T& t) { return format_double(t.rl.epsilon_decay); },
       [](T& t, std::string_view v, const std::string& k) { t.rl.epsilon_decay = parse_number(v, k); }},
      {"rl_epsilon_min", [](const T& t) { return format_double(t.rl.epsilon_min); },
       [](T& t, std::string_view v, const std::string& k) { t.rl.epsilon_min = parse_number(v, k); }},
      {"rl_state_bins", [](const T& t) { return std::to_string(t.rl.state_bins); },
       [](T& t, std::string_view v, const std::string& k) {
         t.rl.state_bins = parse_integer<decltype(t.rl.state_bins)>(v, k);
       }},
      {"rl_initial_log_std", [](const T& t) { return format_double(t.rl.initial_log_std); },
       [](T& t, std::string_view v, const std::string& k) { t.rl.initial_log_std = parse_number(v, k); }},
      {"rl_param_clip", [](const T& t) { return format_double(t.rl.param_clip); },
       [](T& t, std::string_view v, const std::string& k) { t.rl.param_clip = parse_number(v, k); }},
      {"positive_class", [](const T& t) { return t.positive_class ? std::to_string(*t.positive_class) : std::string("auto"); },
       [](T& t, std::string_view v, const std::string& k) {
         if (v == "auto") {
           t.positive_class.reset();
         } else {
           t.positive_class = parse_integer<int>(v, k);
         }
       }},
      number_field("kmeans_restarts", &T::kmeans_restarts),
      number_field("seed", &T::seed),
  };
  return f;
}

inline const std::vector<Field<RunConfig>>& output_fields() {
  using R = RunConfig;
  static const std::vector<Field<R>> f = {
      {"dir", [](const R& r) { return r.output.dir.string(); },
       [](R& r, std::string_view v, const std::string&) { r.output.dir = std::string(v); }},
      {"trace", [](const R& r) { return std::string(to_string(r.output.trace)); },
       [](R& r, std::string_view v, const std::string& k) {
         r.output.trace = parse_enum(v, std::array{TraceVerbosity::full, TraceVerbosity::summary}, k);
       }},
      {"timing", [](const R& r) { return std::string(r.train.timing ? "true" : "false"); },
       [](R& r, std::string_view v, const std::string& k) { r.train.timing = parse_bool(v, k); }},
  };
  return f;
}

template <class T>
void assign(const std::vector<Field<T>>& fields, T& target, const std::string& section, std::string_view key,
            std::string_view value) {
  for (const auto& f : fields) {
    if (key == f.key) {
      f.set(target, value, "[" + section + "] " + std::string(key));
      return;
    }
  }
  throw ConfigError("[" + section + "]: unknown key '" + std::string(key) + "'");
}

template <class T>
void emit(std::ostream& out, const std::vector<Field<T>>& fields, const T& source) {
  for (const auto& f : fields) {
    const auto v = f.get(source);
    out << f.key << " =" << (v.empty() ? "" : " ") << v << '\n';
  }
}

}  // namespace detail

/// Sets one key. `section` is "synthetic", "relation NAME", "data", "train"
/// or "output"; sections are created on first use.
inline void set_config_value(RunConfig& cfg, std::string_view section, std::string_view key, std::string_view value) {
  const std::string sec(section);
  if (section == "synthetic") {
    if (!cfg.synthetic) cfg.synthetic = SyntheticSpec{};
    detail::assign(detail::synthetic_fields(), *cfg.synthetic, sec, key, value);
  } else if (section.starts_with("relation ")) {
    const auto name = std::string(trim(section.substr(9)));
    if (name.empty()) throw ConfigError("relation section needs a name");
    if (!cfg.synthetic) cfg.synthetic = SyntheticSpec{};
    auto& rels = cfg.synthetic->relations;
    auto it = std::find_if(rels.begin(), rels.end(), [&](const auto& r) { return r.name == name; });
    if (it == rels.end()) {
      rels.push_back(SyntheticRelationSpec{name, 0, 0.5});
      it = rels.end() - 1;
    }
    detail::assign(detail::relation_fields(), *it, sec, key, value);
  } else if (section == "data") {
    if (!cfg.data) cfg.data = DataSource{};
    detail::assign(detail::data_fields(), *cfg.data, sec, key, value);
  } else if (section == "train") {
    detail::assign(detail::train_fields(), cfg.train, sec, key, value);
  } else if (section == "output") {
    detail::assign(detail::output_fields(), cfg, sec, key, value);
  } else {
    throw ConfigError("unknown section [" + sec + "]");
  }
}

/// Keys accepted in the [train] section, in canonical order.
inline std::vector<std::string> train_keys() {
  std::vector<std::string> keys;
  for (const auto& f : detail::train_fields()) keys.emplace_back(f.key);
  return keys;
}

/// Parses `key = value` lines grouped under `[section]` headers. `#` and `;`
/// start comments. Values missing from the text keep their defaults.
inline RunConfig parse_config(std::istream& in, const std::string& source = "config") {
  RunConfig cfg;
  std::string line;
  std::optional<std::string> section;
  std::set<std::string> seen_sections;
  std::set<std::string> seen_keys;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    const auto where = source + ":" + std::to_string(no) + ": ";
    auto text = trim(line);
    if (text.empty() || text.front() == '#' || text.front() == ';') continue;
    try {
      if (text.front() == '[') {
        if (text.back() != ']') throw ConfigError("unterminated section header");
        std::string name(trim(text.substr(1, text.size() - 2)));
        if (!seen_sections.insert(name).second) throw ConfigError("section [" + name + "] appears twice");
        section = name;
        // Create empty sections so that e.g. a bare [data] is still detected.
        if (name == "synthetic" && !cfg.synthetic) cfg.synthetic = SyntheticSpec{};
        if (name == "data" && !cfg.data) cfg.data = DataSource{};
        if (name.starts_with("relation ")) {
          if (!cfg.synthetic) cfg.synthetic = SyntheticSpec{};
          set_config_value(cfg, name, "edges", "0");
        } else if (name != "synthetic" && name != "data" && name != "train" && name != "output") {
          throw ConfigError("unknown section [" + name + "]");
        }
        continue;
      }
      if (!section) throw ConfigError("key outside of any section");
      const auto eq = text.find('=');
      if (eq == std::string_view::npos) throw ConfigError("expected 'key = value'");
      const auto key = std::string(trim(text.substr(0, eq)));
      const auto value = trim(text.substr(eq + 1));
      if (key.empty()) throw ConfigError("empty key");
      if (!seen_keys.insert(*section + "\n" + key).second) {
        throw ConfigError("[" + *section + "] " + key + " is set twice");
      }
      set_config_value(cfg, *section, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  return cfg;
}

inline RunConfig parse_config_string(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path.string() + "'");
  return parse_config(in, path.string());
}

/// Canonical text: fixed section and key order, every key written. Parsing
/// the output and serializing again reproduces it byte for byte.
inline std::string serialize_config(const RunConfig& cfg) {
  std::ostringstream out;
  bool first = true;
  auto header = [&](const std::string& name) {
    out << (first ? "" : "\n") << '[' << name << "]\n";
    first = false;
  };
  if (cfg.synthetic) {
    header("synthetic");
    detail::emit(out, detail::synthetic_fields(), *cfg.synthetic);
    for (const auto& r : cfg.synthetic->relations) {
      header("relation " + r.name);
      detail::emit(out, detail::relation_fields(), r);
    }
  }
  if (cfg.data) {
    header("data");
    detail::emit(out, detail::data_fields(), *cfg.data);
  }
  header("train");
  detail::emit(out, detail::train_fields(), cfg.train);
  header("output");
  detail::emit(out, detail::output_fields(), cfg);
  return out.str();
}

}  // namespace mrgnn
