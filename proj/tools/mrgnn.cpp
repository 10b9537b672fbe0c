// Command-line front end: generate, train, eval.

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mrgnn/mrgnn.hpp"

namespace {

enum Exit { ok = 0, failure = 1, usage = 2, aborted = 3 };

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::vector<std::string> sets;
  std::map<std::string, std::string> knobs;
};

void add_common(CLI::App& cmd, Common& c, bool knobs) {
  cmd.add_option("--config", c.config_path, "Run configuration file")->required()->check(CLI::ExistingFile);
  cmd.add_option("--seed", c.seed, "Seed for graph generation and training");
  cmd.add_option("--out", c.out, "Output directory");
  cmd.add_option("--set", c.sets, "Override any key: 'section.key=value' (section may be 'relation NAME')");
  if (!knobs) return;
  for (const auto& key : mrgnn::train_keys()) {
    if (key == "seed") continue;  // --seed covers it
    cmd.add_option_function<std::string>(
        "--" + key, [&c, key](const std::string& v) { c.knobs[key] = v; }, "Override [train] " + key);
  }
}

// File, then --set, then the per-knob flags, then --seed.
mrgnn::RunConfig build_config(const Common& c) {
  auto cfg = mrgnn::load_config(c.config_path);
  for (const auto& s : c.sets) {
    const auto eq = s.find('=');
    const auto dot = s.substr(0, eq).rfind('.');
    if (eq == std::string::npos || dot == std::string::npos) {
      throw mrgnn::ConfigError("--set expects 'section.key=value', got '" + s + "'");
    }
    mrgnn::set_config_value(cfg, s.substr(0, dot), s.substr(dot + 1, eq - dot - 1), mrgnn::trim(s.substr(eq + 1)));
  }
  for (const auto& [k, v] : c.knobs) mrgnn::set_config_value(cfg, "train", k, v);
  if (c.seed) {
    if (cfg.synthetic) cfg.synthetic->seed = *c.seed;
    cfg.train.seed = *c.seed;
  }
  cfg.validate();
  return cfg;
}

std::optional<mrgnn::fs::path> out_flag(const Common& c) {
  if (!c.out) return std::nullopt;
  return mrgnn::fs::path(*c.out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-relational graph learning with learned neighbour filtering"};
  app.require_subcommand(1);

  Common gen_opts, train_opts, eval_opts;
  auto* gen = app.add_subcommand("generate", "Write a synthetic graph and its statistics");
  add_common(*gen, gen_opts, false);

  auto* train = app.add_subcommand("train", "Train and write trace, model and embeddings");
  add_common(*train, train_opts, true);

  auto* eval = app.add_subcommand("eval", "Recompute metrics from a saved model directory");
  add_common(*eval, eval_opts, false);
  std::string split = "test";
  std::optional<std::string> model_dir;
  eval->add_option("--split", split, "Node split to evaluate")->check(CLI::IsMember({"train", "val", "test"}));
  eval->add_option("--model", model_dir, "Directory written by 'train' (default: the output directory)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (gen->parsed()) {
      const auto cfg = build_config(gen_opts);
      const auto dir = mrgnn::resolve_out_dir(cfg, out_flag(gen_opts));
      for (const auto& p : mrgnn::cmd_generate(cfg, dir)) std::cout << p.string() << '\n';
      return ok;
    }
    if (train->parsed()) {
      const auto cfg = build_config(train_opts);
      const auto dir = mrgnn::resolve_out_dir(cfg, out_flag(train_opts));
      const auto res = mrgnn::cmd_train(cfg, dir, std::cout, std::cerr);
      return res.fit.aborted() ? aborted : ok;
    }
    const auto cfg = build_config(eval_opts);
    const auto dir = model_dir ? mrgnn::fs::path(*model_dir) : mrgnn::resolve_out_dir(cfg, out_flag(eval_opts));
    const auto report = mrgnn::cmd_eval(cfg, dir, split);
    std::cout << split << ' ' << mrgnn::to_json(report).dump() << '\n';
    return ok;
  } catch (const mrgnn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return usage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return failure;
  }
}
