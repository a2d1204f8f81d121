#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "colrel/analysis.hpp"
#include "colrel/config.hpp"
#include "colrel/protocol.hpp"

namespace colrel {

[[nodiscard]] const char* tool_version();

/// Command-line overrides shared by the subcommands.
struct CommandOptions {
  std::optional<std::filesystem::path> out_dir;  // overrides experiment.output
  std::optional<std::size_t> seeds;              // replaces experiment.seeds with 0..k-1
  std::size_t jobs = 1;
  std::vector<double> rounds;                    // bound: rounds to evaluate
  std::vector<std::filesystem::path> trace_files;  // summarize: inputs
  std::optional<TailWindow> window;              // summarize: slope window
};

/// Relay weights the colrel variant runs with, per protocol.colrel_weights.
struct PreparedWeights {
  RelayWeights weights;
  std::vector<double> s_history;
  std::size_t sweeps = 0;
};
[[nodiscard]] PreparedWeights prepare_weights(const RunConfig& cfg, const ConnectivityGraph& g);

[[nodiscard]] QuadraticEnsemble build_ensemble(const RunConfig& cfg);

/// Runs every (variant, seed) pair. Result is ordered by variant as listed in
/// the config, then seed, then round, regardless of `jobs`.
[[nodiscard]] std::vector<RoundTrace> run_experiment(const RunConfig& cfg, std::size_t jobs);

/// Trace record as one JSON line (no header).
[[nodiscard]] std::string trace_line(const RoundTrace& t);
[[nodiscard]] std::vector<RoundTrace> read_trace_file(const std::filesystem::path& path);

int cmd_optimize_weights(const RunConfig& cfg, const CommandOptions& opts, std::ostream& out);
int cmd_simulate(const RunConfig& cfg, const CommandOptions& opts, std::ostream& out);
int cmd_bound(const RunConfig& cfg, const CommandOptions& opts, std::ostream& out);
int cmd_sweep(const RunConfig& cfg, const CommandOptions& opts, std::ostream& out);
int cmd_summarize(const CommandOptions& opts, std::ostream& out);

/// Short machine-readable class for an exception thrown by the commands,
/// e.g. "config_validation" or "divergence".
[[nodiscard]] std::string error_class(const std::exception& e);

}  // namespace colrel
