// liflow: dataset generation, training, scene completion and evaluation.
//
// Exit codes: 0 success, 1 usage or invalid configuration, 2 runtime failure.

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "liflow/commands.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct ConfigFlags {
  std::string config_file;
  std::map<std::string, std::string> values;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& flags) {
  cmd->add_option("-c,--config", flags.config_file, "key = value config file")
      ->check(CLI::ExistingFile);
  for (const auto& key : liflow::config_keys()) {
    std::string names = "--" + key.name;
    std::string dashed = key.name;
    for (char& ch : dashed) ch = ch == '_' ? '-' : ch;
    if (dashed != key.name) names += ",--" + dashed;
    cmd->add_option(names, flags.values[key.name], key.help)
        ->group("Configuration")
        ->default_str(key.get(liflow::RunConfig{}));
  }
}

// Defaults, then the config file, then explicit flags.
liflow::RunConfig resolve(CLI::App* cmd, const ConfigFlags& flags) {
  liflow::RunConfig config;
  if (!flags.config_file.empty()) liflow::apply_config_file(config, flags.config_file);
  for (const auto& key : liflow::config_keys()) {
    if (cmd->count("--" + key.name) > 0) key.set(config, flags.values.at(key.name));
  }
  liflow::validate(config);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scene completion from sparse scans with nearest-neighbor flow matching"};
  app.require_subcommand(1);

  ConfigFlags make_flags, train_flags, complete_flags, eval_flags;

  auto* make_data = app.add_subcommand("make-data", "generate synthetic scene/scan pairs");
  add_config_flags(make_data, make_flags);

  auto* train = app.add_subcommand("train", "train the vector field on a dataset");
  add_config_flags(train, train_flags);

  auto* complete = app.add_subcommand("complete", "complete one scan with a trained checkpoint");
  liflow::CompleteOptions complete_opts;
  std::string trajectory_dir;
  complete->add_option("--checkpoint", complete_opts.checkpoint, "checkpoint file")->required();
  complete->add_option("--scan", complete_opts.scan, "input scan (.ply or .xyz)")->required();
  complete->add_option("-o,--output", complete_opts.output, "completed cloud (.ply or .xyz)")
      ->required();
  complete->add_option("--trajectory-dir", trajectory_dir, "write every integration state here");
  add_config_flags(complete, complete_flags);

  auto* eval = app.add_subcommand("eval", "score predicted clouds against references");
  std::vector<std::filesystem::path> predictions, references;
  std::string report_dir;
  eval->add_option("--pred", predictions, "predicted clouds")->required();
  eval->add_option("--gt", references, "reference clouds, paired in order")->required();
  eval->add_option("--report-dir", report_dir, "write one report file per pair");
  add_config_flags(eval, eval_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  liflow::RunConfig config;
  try {
    if (*make_data) config = resolve(make_data, make_flags);
    if (*train) config = resolve(train, train_flags);
    if (*complete) config = resolve(complete, complete_flags);
    if (*eval) config = resolve(eval, eval_flags);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*make_data) {
      liflow::run_make_data(config, std::cout);
    } else if (*train) {
      liflow::run_train(config, std::cout);
    } else if (*complete) {
      if (!trajectory_dir.empty()) complete_opts.trajectory_dir = trajectory_dir;
      liflow::run_complete(config, complete_opts, std::cout);
    } else if (*eval) {
      std::optional<std::filesystem::path> dir;
      if (!report_dir.empty()) dir = report_dir;
      liflow::run_eval(config, predictions, references, dir, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
