#include "hamlearn/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace hamlearn;

namespace {

struct Args {
  std::string config;
  std::string out = ".";
  std::uint64_t seed = 0;
  int jobs = 0;
  bool quiet = false;
  std::vector<std::string> runs;
};

void add_common(CLI::App* cmd, Args& args, bool needs_config) {
  if (needs_config) cmd->add_option("--config", args.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", args.out, "Output directory")->capture_default_str();
  cmd->add_option("--seed", args.seed, "Master seed (overrides the config)");
  cmd->add_option("--jobs", args.jobs, "Worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
  cmd->add_flag("--quiet", args.quiet, "No progress output");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hamiltonian learning from measurement data by maximum likelihood"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  Args args;

  auto* generate = app.add_subcommand("generate", "Build target models and their measurement records");
  auto* learn = app.add_subcommand("learn", "Learn from the records written by generate");
  auto* sweep = app.add_subcommand("sweep", "Generate and learn over the sweep axes");
  auto* eth = app.add_subcommand("eth", "Reconstruct a Hamiltonian from one eigenstate");
  auto* report = app.add_subcommand("report", "Aggregate run directories into figure tables");
  for (auto* cmd : {generate, learn, sweep, eth}) add_common(cmd, args, true);
  add_common(report, args, false);
  report->add_option("runs", args.runs, "Run directories")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  CommandOptions opts;
  opts.out = args.out;
  opts.jobs = args.jobs;
  opts.quiet = args.quiet;
  for (auto* cmd : {generate, learn, sweep, eth, report}) {
    if (cmd->parsed() && cmd->count("--seed") > 0) opts.seed = args.seed;
  }

  try {
    if (report->parsed()) {
      std::vector<std::filesystem::path> dirs(args.runs.begin(), args.runs.end());
      return cmd_report(dirs, opts);
    }
    const auto config = load_run_config(args.config);
    if (generate->parsed()) return cmd_generate(config, opts);
    if (learn->parsed()) return cmd_learn(config, opts);
    if (sweep->parsed()) return cmd_sweep(config, opts);
    return cmd_eth(config, opts);
  } catch (const std::exception& e) {
    std::cerr << "hamlearn: error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}
