// Command-line entry point. Exit codes: 0 success, 2 validation error, 1 runtime error.

#include <algorithm>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "shortdesc/cli/pipeline.hpp"

using namespace shortdesc;

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multilingual short description generation experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(cli::kVersion));
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string systems;
  app.add_option("--config", config_path, "Experiment config (JSON)")->required();
  app.add_option("--seed", seed, "Override the config seed");
  app.add_option("--out", out, "Override the output directory");
  app.add_option("--systems", systems, "Comma-separated systems to run (default: all in the config)");

  struct Command {
    const char* name;
    const char* help;
  };
  const std::vector<Command> commands{
      {"stats", "Per-language corpus statistics"},
      {"synth", "Generate the synthetic corpus"},
      {"split", "Train/valid/test split"},
      {"train", "Train model systems"},
      {"generate", "Generate test descriptions"},
      {"score", "Similarity of outputs to references"},
      {"aggregate", "Per-language means and pairwise comparison"},
      {"propensity", "Propensity-weighted scores"},
      {"sample-eval", "Build the human evaluation campaign"},
      {"serve", "Run the rating service"},
      {"report", "Assemble the experiment report"},
  };
  for (const Command& c : commands) app.add_subcommand(c.name, c.help);
  app.fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    cli::ExperimentConfig cfg = cli::ExperimentConfig::load(config_path);
    if (seed) cfg.seed = *seed;
    if (!out.empty()) cfg.out = out;
    cfg.validate();
    const std::vector<std::string> selected = split_list(systems);
    const std::vector<std::string> known = cli::all_system_names();
    for (const std::string& s : selected)
      if (std::find(known.begin(), known.end(), s) == known.end()) throw cli::ConfigError("unknown system \"" + s + "\"");
    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "stats") cli::run_stats(cfg);
    else if (cmd == "synth") cli::run_synth(cfg);
    else if (cmd == "split") cli::run_split(cfg);
    else if (cmd == "train") cli::run_train(cfg, selected);
    else if (cmd == "generate") cli::run_generate(cfg, selected);
    else if (cmd == "score") cli::run_score(cfg, selected);
    else if (cmd == "aggregate") cli::run_aggregate(cfg, selected);
    else if (cmd == "propensity") cli::run_propensity(cfg);
    else if (cmd == "sample-eval") cli::run_sample_eval(cfg);
    else if (cmd == "serve") cli::run_serve(cfg);
    else if (cmd == "report") cli::run_report(cfg);
  } catch (const cli::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const cli::MissingInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
