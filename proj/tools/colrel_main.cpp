#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "colrel/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Collaborative-relaying federated learning simulator"};
  app.set_version_flag("--version", std::string(colrel::tool_version()));
  app.require_subcommand(1);

  colrel::CommandOptions opts;
  std::string config_path;
  std::string out_dir;
  std::size_t seeds = 0;
  std::vector<std::string> trace_files;
  std::size_t tail_min = 0;
  std::size_t tail_max = 0;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* cfg = sub->add_option("--config", config_path, "run-config JSON file");
    if (needs_config) {
      cfg->required()->check(CLI::ExistingFile);
    }
    sub->add_option("--out", out_dir, "output directory (overrides experiment.output)");
    sub->add_option("--seeds", seeds, "use seeds 0..k-1 instead of experiment.seeds")->check(CLI::PositiveNumber);
    sub->add_option("--jobs", opts.jobs, "concurrent simulations")->check(CLI::PositiveNumber);
  };

  auto* optimize = app.add_subcommand("optimize-weights", "optimize relay weights and write weights.json");
  add_common(optimize, true);
  auto* simulate = app.add_subcommand("simulate", "run every variant over every seed and write traces");
  add_common(simulate, true);
  auto* bound = app.add_subcommand("bound", "print convergence-bound constants and values");
  add_common(bound, true);
  bound->add_option("--rounds", opts.rounds, "rounds at which to evaluate the bound")->delimiter(',');
  auto* sweep = app.add_subcommand("sweep", "repeat simulate over the config's sweep axis");
  add_common(sweep, true);
  auto* summarize = app.add_subcommand("summarize", "aggregate trace files across seeds");
  summarize->add_option("traces", trace_files, "trace files (.jsonl)")->required()->check(CLI::ExistingFile);
  summarize->add_option("--out", out_dir, "output directory for summary.csv");
  auto* tmin = summarize->add_option("--tail-min", tail_min, "first round of the slope window");
  auto* tmax = summarize->add_option("--tail-max", tail_max, "last round of the slope window");
  tmin->needs(tmax);
  tmax->needs(tmin);

  CLI11_PARSE(app, argc, argv);

  if (!out_dir.empty()) {
    opts.out_dir = out_dir;
  }
  if (seeds > 0) {
    opts.seeds = seeds;
  }
  for (const auto& f : trace_files) {
    opts.trace_files.emplace_back(f);
  }
  if (*tmin) {
    opts.window = colrel::TailWindow{tail_min, tail_max};
  }

  try {
    if (*summarize) {
      return colrel::cmd_summarize(opts, std::cout);
    }
    const auto cfg = colrel::parse_config_file(config_path);
    if (*optimize) {
      return colrel::cmd_optimize_weights(cfg, opts, std::cout);
    }
    if (*simulate) {
      return colrel::cmd_simulate(cfg, opts, std::cout);
    }
    if (*bound) {
      return colrel::cmd_bound(cfg, opts, std::cout);
    }
    if (*sweep) {
      return colrel::cmd_sweep(cfg, opts, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << colrel::error_class(e) << ": " << e.what() << "\n";
    return 1;
  }
  return 0;
}
