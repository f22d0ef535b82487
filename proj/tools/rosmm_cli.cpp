#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rosmm/commands.hpp"
#include "rosmm/config.hpp"
#include "rosmm/error.hpp"

namespace fs = std::filesystem;
using namespace rosmm;

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::string kind;
  std::string model = "mlp";
  std::string model_path;
  bool oracle = false;
  std::vector<std::string> features;
  std::string data = "data";
  std::vector<std::string> sets;
  std::vector<std::string> queries;
  std::string query_file;
};

RunConfig effective_config(const Options& o, bool kind_flag) {
  RunConfig cfg = o.config_path.empty() ? RunConfig{} : load_config(o.config_path);
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects section.key=value");
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (kind_flag && !o.kind.empty()) set_config_value(cfg, "data.kind", o.kind);
  if (o.seed) {
    cfg.data.seed = *o.seed;
    cfg.train.seed = *o.seed;
    cfg.sweep.seed = *o.seed;
  }
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quasiprobabilistic likelihood-ratio estimation with signed mixtures"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "INI configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Run seed (overrides data, train and sweep seeds)");
    sub->add_option("--set", o.sets, "Override a config value: section.key=value");
  };

  auto* gen = app.add_subcommand("generate", "Write reference/target train, val and test CSVs");
  common(gen);
  gen->add_option("--out", o.out, "Output directory");
  gen->add_option("--kind", o.kind, "Test case")->check(CLI::IsMember({"nonneg", "signed"}));

  auto* tr = app.add_subcommand("train", "Train a baseline MLP or a RoSMM flavour");
  common(tr);
  tr->add_option("--data", o.data, "Directory with the dataset CSVs");
  tr->add_option("--out", o.out, "Output directory");
  tr->add_option("--model", o.model, "Model kind")
      ->check(CLI::IsMember({"mlp", "rosmm", "rosmm_c", "rosmm_r"}));
  tr->add_option("--kind", o.kind, "Data kind")
      ->check(CLI::IsMember({"nonneg", "signed", "external"}));

  auto* ev = app.add_subcommand("evaluate", "Closure reports on the test sets");
  common(ev);
  ev->add_option("--data", o.data, "Directory with the dataset CSVs");
  ev->add_option("--out", o.out, "Output directory");
  auto* model_opt = ev->add_option("--model", o.model_path, "Checkpoint to evaluate");
  auto* oracle_opt = ev->add_flag("--oracle", o.oracle, "Use the analytic ratio");
  model_opt->excludes(oracle_opt);
  ev->add_option("--features", o.features, "Features (x, y, r, column names or indices)")
      ->delimiter(',');
  ev->add_option("--kind", o.kind, "Data kind")
      ->check(CLI::IsMember({"nonneg", "signed", "external"}));

  auto* sw = app.add_subcommand("sweep", "Negative-weight (eta, sigma_w) sweep");
  common(sw);
  sw->add_option("--out", o.out, "Output directory");

  auto* orc = app.add_subcommand("oracle", "Analytic densities, CDFs and ratios");
  common(orc);
  orc->add_option("--kind", o.kind, "Test case")->check(CLI::IsMember({"nonneg", "signed"}));
  orc->add_option("--query,-q", o.queries,
                  "Query: 'density reference|target X Y', 'ratio X Y', 'cdf reference|target R', "
                  "'quantile reference|target Z', 'nonneg reference|target'");
  orc->add_option("--queries", o.query_file, "File with one query per line")
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) {
      cmd_generate(effective_config(o, true), o.out);
    } else if (*tr) {
      cmd_train(effective_config(o, true), o.data, model_kind_from_string(o.model), o.out,
                worker_threads());
    } else if (*ev) {
      std::optional<fs::path> model;
      if (!o.model_path.empty()) model = o.model_path;
      const EvaluateResult r =
          cmd_evaluate(effective_config(o, true), o.data, model, o.oracle, o.features, o.out);
      for (const auto& rep : r.reports)
        std::cout << r.model << " " << rep.feature << " chi2=" << rep.chi2
                  << " tsallis_d2=" << rep.tsallis_d2 << "\n";
    } else if (*sw) {
      const SweepSummary s = cmd_sweep(effective_config(o, false), o.out, worker_threads(), &std::cerr);
      std::cout << "points=" << s.points << " failed=" << s.failed_points
                << " mlp_vlrc_R=" << s.mlp_vlrc_correlation
                << " mlp_slope=" << s.mlp_median_d_slope
                << " rosmm_r_slope=" << s.rosmm_median_d_slope << "\n";
    } else if (*orc) {
      std::vector<std::string> queries = o.queries;
      if (!o.query_file.empty()) {
        std::ifstream in(o.query_file);
        for (std::string line; std::getline(in, line);)
          if (!line.empty() && line[0] != '#') queries.push_back(line);
      }
      cmd_oracle(effective_config(o, true), queries, std::cout);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.category());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
