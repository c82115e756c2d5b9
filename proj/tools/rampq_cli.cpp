// rampq: train, evaluate and compare ramp-metering controllers.
//
//   rampq train --config F [--seed N] [--frames N]
//   rampq eval --config F --controller {none,fixed,alinea,pi_alinea,drl} [--checkpoint P]
//   rampq compare REF OTHER...
//
// Every config key can be overridden on the command line, e.g.
// `--trainer.epsilon 0.05`. Exit status: 0 success, 1 usage or config error,
// 2 runtime fault.

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rampq/config.hpp"
#include "rampq/errors.hpp"
#include "rampq/harness.hpp"

namespace {

using namespace rampq;

constexpr int kUsageError = 1;
constexpr int kRuntimeFault = 2;

struct KeyOverrides {
  std::map<std::string, std::string> values;

  void attach(CLI::App& cmd) {
    for (const auto& key : config_keys()) {
      cmd.add_option_function<std::string>(
             "--" + key, [this, key](const std::string& v) { values[key] = v; }, config_key_help(key))
          ->group("Config overrides");
    }
  }

  std::vector<Override> list() const {
    std::vector<Override> out;
    for (const auto& key : config_keys()) {
      if (auto it = values.find(key); it != values.end()) out.emplace_back(key, it->second);
    }
    return out;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ramp-metering laboratory: simulate, train and evaluate"};
  app.require_subcommand(1);

  std::string config_path;
  KeyOverrides overrides;

  auto* train = app.add_subcommand("train", "train the deep-Q controller");
  train->add_option("--config", config_path, "experiment config file")->required()->check(CLI::ExistingFile);
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> frames;
  train->add_option("--seed", seed, "training seed (trainer.seed)");
  train->add_option("--frames", frames, "training frames (trainer.total_frames)");
  overrides.attach(*train);

  auto* eval = app.add_subcommand("eval", "evaluate a controller over the configured seeds");
  eval->add_option("--config", config_path, "experiment config file")->required()->check(CLI::ExistingFile);
  std::string controller;
  eval->add_option("--controller", controller, "controller to evaluate")
      ->required()
      ->check(CLI::IsMember(controller_names()));
  std::optional<std::string> checkpoint;
  eval->add_option("--checkpoint", checkpoint, "checkpoint for the drl controller")->check(CLI::ExistingFile);
  overrides.attach(*eval);

  auto* compare = app.add_subcommand("compare", "percent change of mean travel time against a reference");
  std::vector<std::string> summaries;
  compare->add_option("summaries", summaries, "REF OTHER...: summary CSVs or eval directories")
      ->required()
      ->expected(2, -1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (*compare) {
      std::vector<SummaryTable> tables;
      for (const auto& s : summaries) tables.push_back(read_summary(s));
      std::cout << format_comparison(compare_summaries(tables));
      return 0;
    }

    std::vector<Override> list = overrides.list();
    if (*train) {
      if (seed) list.emplace_back("trainer.seed", std::to_string(*seed));
      if (frames) list.emplace_back("trainer.total_frames", std::to_string(*frames));
    }
    const ExperimentConfig cfg = load_config(config_path, list);

    if (*train) {
      const TrainOutputs out = cmd_train(cfg);
      std::cout << "trained " << out.frames << " frames\n"
                << "checkpoint: " << out.final_checkpoint << '\n'
                << "log: " << out.log_path << '\n';
      return 0;
    }

    if (controller == "drl" && !checkpoint) {
      std::cerr << "eval: controller 'drl' requires --checkpoint\n";
      return kUsageError;
    }
    const RunSummary s = cmd_eval(cfg, controller, checkpoint);
    std::printf("%s: %zu seeds, mean mainline travel time %.1f s, red ratio %.3f\n", controller.c_str(),
                s.seeds.size(), s.mean_tt(), s.mean_red_ratio());
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "fault: " << e.what() << '\n';
    return kRuntimeFault;
  }
}
