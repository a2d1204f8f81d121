#include "colrel/commands.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <thread>

namespace colrel {

using nlohmann::json;
namespace fs = std::filesystem;

const char* tool_version() { return COLREL_VERSION; }

namespace {

RunConfig apply_overrides(RunConfig cfg, const CommandOptions& opts) {
  if (opts.seeds) {
    if (*opts.seeds == 0) {
      throw ConfigError(ConfigErrorKind::Validation, "--seeds", "--seeds: must be at least 1");
    }
    cfg.experiment.seeds.clear();
    for (std::size_t k = 0; k < *opts.seeds; ++k) {
      cfg.experiment.seeds.push_back(k);
    }
  }
  if (opts.out_dir) {
    cfg.experiment.output = opts.out_dir->string();
  }
  return cfg;
}

fs::path output_dir(const RunConfig& cfg) {
  fs::path dir(cfg.experiment.output);
  fs::create_directories(dir);
  return dir;
}

json artifact_header(const RunConfig& cfg) {
  return {{"tool_version", tool_version()}, {"config", to_json(cfg)}};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) {
    throw std::runtime_error("cannot write " + path.string());
  }
  f << text;
}

void write_traces(const fs::path& dir, const RunConfig& cfg, const std::vector<RoundTrace>& traces) {
  const std::string header = json{{"header", artifact_header(cfg)}}.dump() + "\n";
  for (auto kind : cfg.protocol.variants) {
    const auto name = to_string(kind);
    std::string body = header;
    for (const auto& t : traces) {
      if (t.variant == name) {
        body += trace_line(t);
        body += "\n";
      }
    }
    write_text(dir / ("trace_" + name + ".jsonl"), body);
  }
}

void print_final_rounds(const Summary& summary, std::size_t last_round, std::ostream& out) {
  out << std::left << std::setw(26) << "variant" << std::setw(8) << "seeds" << std::setw(16) << "final_mean"
      << "stderr\n";
  for (const auto& row : summary.rows) {
    if (row.r == last_round) {
      out << std::left << std::setw(26) << row.variant << std::setw(8) << row.seeds << std::setw(16)
          << std::setprecision(6) << row.mean << row.stderr_ << "\n";
    }
  }
}

}  // namespace

PreparedWeights prepare_weights(const RunConfig& cfg, const ConnectivityGraph& g) {
  PreparedWeights out;
  switch (cfg.protocol.colrel_weights) {
    case WeightsChoice::Optimized: {
      auto result = optimize_weights(g, cfg.optimizer);
      out.weights = std::move(result.weights);
      out.s_history = std::move(result.s_history);
      out.sweeps = result.sweeps;
      return out;
    }
    case WeightsChoice::Initial:
      if (auto bad = unreachable_clients(g); !bad.empty()) {
        throw InfeasibleClientsError(std::move(bad));
      }
      out.weights = initial_weights(g);
      break;
    case WeightsChoice::Identity:
      out.weights = RelayWeights::identity(g.size());
      break;
  }
  out.s_history.push_back(variance_objective(g, out.weights));
  return out;
}

QuadraticEnsemble build_ensemble(const RunConfig& cfg) {
  EnsembleSpec spec;
  spec.n = cfg.graph.n;
  spec.d = cfg.objective.d;
  spec.mu = cfg.objective.mu;
  spec.L = cfg.objective.L;
  spec.sigma = cfg.objective.sigma;
  spec.heterogeneity = cfg.objective.heterogeneity;
  spec.seed = cfg.objective.seed;
  return make_quadratic_ensemble(spec);
}

std::vector<RoundTrace> run_experiment(const RunConfig& cfg, std::size_t jobs) {
  const auto g = cfg.graph.build();
  const auto ens = build_ensemble(cfg);

  std::vector<AlgorithmVariant> variants;
  for (auto kind : cfg.protocol.variants) {
    if (kind == VariantKind::ColRel) {
      variants.push_back(AlgorithmVariant::colrel(prepare_weights(cfg, g).weights));
    } else {
      variants.push_back(AlgorithmVariant::fedavg(kind));
    }
  }

  const auto& seeds = cfg.experiment.seeds;
  const std::size_t tasks = variants.size() * seeds.size();
  std::vector<std::vector<RoundTrace>> results(tasks);
  std::vector<std::exception_ptr> errors(tasks);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t t = next++; t < tasks; t = next++) {
      SimulationConfig sim;
      sim.local_steps = cfg.protocol.local_steps;
      sim.rounds = cfg.protocol.rounds;
      sim.schedule = cfg.protocol.schedule;
      sim.momentum = cfg.protocol.momentum;
      sim.seed = seeds[t % seeds.size()];
      try {
        results[t] = run_simulation(g, ens, variants[t / seeds.size()], sim);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(jobs, tasks));
  {
    std::vector<std::jthread> pool;
    for (std::size_t k = 1; k < threads; ++k) {
      pool.emplace_back(worker);
    }
    worker();
  }
  for (const auto& e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }

  std::vector<RoundTrace> merged;
  merged.reserve(tasks * cfg.protocol.rounds);
  for (auto& r : results) {
    std::move(r.begin(), r.end(), std::back_inserter(merged));
  }
  return merged;
}

std::string trace_line(const RoundTrace& t) {
  return json{{"variant", t.variant},
              {"seed", t.seed},
              {"r", t.r},
              {"suboptimality", t.suboptimality},
              {"num_connected", t.num_connected},
              {"eta_r", t.eta}}
      .dump();
}

std::vector<RoundTrace> read_trace_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot read trace file " + path.string());
  }
  std::vector<RoundTrace> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) {
      continue;
    }
    const auto where = path.string() + ":" + std::to_string(lineno);
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw SummaryError(where + ": malformed record: " + e.what());
    }
    if (rec.contains("header")) {
      continue;
    }
    try {
      RoundTrace t;
      t.variant = rec.at("variant").get<std::string>();
      t.seed = rec.at("seed").get<std::uint64_t>();
      t.r = rec.at("r").get<std::size_t>();
      t.suboptimality = rec.at("suboptimality").get<double>();
      t.num_connected = rec.at("num_connected").get<std::size_t>();
      t.eta = rec.at("eta_r").get<double>();
      if (rec.size() != 6) {
        throw SummaryError("unexpected extra fields");
      }
      out.push_back(std::move(t));
    } catch (const json::exception& e) {
      throw SummaryError(where + ": trace schema mismatch: " + e.what());
    } catch (const SummaryError& e) {
      throw SummaryError(where + ": trace schema mismatch: " + e.what());
    }
  }
  return out;
}

int cmd_optimize_weights(const RunConfig& base, const CommandOptions& opts, std::ostream& out) {
  const auto cfg = apply_overrides(base, opts);
  const auto g = cfg.graph.build();
  const auto result = optimize_weights(g, cfg.optimizer);
  const auto report = check_unbiasedness(g, result.weights, 10.0 * cfg.optimizer.bisect_tol);

  json rows = json::array();
  const auto n = g.size();
  for (ClientId j = 0; j < n; ++j) {
    json row = json::array();
    for (ClientId i = 0; i < n; ++i) {
      row.push_back(result.weights(j, i));
    }
    rows.push_back(std::move(row));
  }
  json residuals = json::array();
  for (const auto& c : report.columns) {
    residuals.push_back(c.residual);
  }
  json doc = artifact_header(cfg);
  doc["meta"] = {{"n", n},
                 {"sweeps", result.sweeps},
                 {"final_S", result.s_history.back()},
                 {"initial_S", result.s_history.front()},
                 {"feasibility_residuals", residuals},
                 {"feasible", report.all_pass()}};
  doc["weights"] = std::move(rows);
  doc["s_history"] = result.s_history;

  const auto dir = output_dir(cfg);
  write_text(dir / "weights.json", doc.dump(2) + "\n");

  out << "optimized relay weights for n=" << n << " in " << result.sweeps << " sweep(s)\n";
  out << "  S initial = " << std::setprecision(10) << result.s_history.front() << "\n";
  out << "  S final   = " << result.s_history.back() << "\n";
  out << "  max unbiasedness residual = " << std::setprecision(3) << report.max_residual() << "\n";
  out << "  written " << (dir / "weights.json").string() << "\n";
  return report.all_pass() ? 0 : 1;
}

int cmd_simulate(const RunConfig& base, const CommandOptions& opts, std::ostream& out) {
  const auto cfg = apply_overrides(base, opts);
  const auto traces = run_experiment(cfg, opts.jobs);
  const auto dir = output_dir(cfg);
  write_traces(dir, cfg, traces);
  out << "simulated " << cfg.protocol.variants.size() << " variant(s) x " << cfg.experiment.seeds.size()
      << " seed(s) x " << cfg.protocol.rounds << " round(s)\n";
  print_final_rounds(summarize(traces), cfg.protocol.rounds - 1, out);
  out << "traces written to " << dir.string() << "\n";
  return 0;
}

int cmd_bound(const RunConfig& base, const CommandOptions& opts, std::ostream& out) {
  const auto cfg = apply_overrides(base, opts);
  const auto g = cfg.graph.build();
  const auto ens = build_ensemble(cfg);
  const auto weights = prepare_weights(cfg, g);
  const auto c = theorem_constants(ens, g, weights.weights, cfg.protocol.local_steps);
  const double init_gap = ens.x_star().squaredNorm();

  std::vector<double> rounds = opts.rounds;
  if (rounds.empty()) {
    const double start = std::ceil(c.r0);
    for (double m : {1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0}) {
      rounds.push_back(start * m);
    }
  }

  json table = json::array();
  out << "S  = " << std::setprecision(10) << c.S << "\n"
      << "B  = " << c.B << "\nC1 = " << c.C1 << "\nC2 = " << c.C2 << "\nC3 = " << c.C3 << "\nr0 = " << c.r0
      << "\n";
  out << std::left << std::setw(14) << "r" << "bound\n";
  for (double r : rounds) {
    const double value = theorem_bound(c, init_gap, r);
    table.push_back({{"r", r}, {"bound", value}});
    out << std::left << std::setw(14) << r << value << "\n";
  }

  json doc = artifact_header(cfg);
  doc["constants"] = {{"S", c.S},   {"B", c.B},         {"C1", c.C1},       {"C2", c.C2},
                      {"C3", c.C3}, {"r0", c.r0},       {"mu", c.mu},       {"L", c.L},
                      {"sigma", c.sigma}, {"n", c.n},   {"T", c.local_steps}};
  doc["init_gap"] = init_gap;
  doc["bound"] = std::move(table);
  const auto dir = output_dir(cfg);
  write_text(dir / "bound.json", doc.dump(2) + "\n");
  return 0;
}

int cmd_sweep(const RunConfig& base, const CommandOptions& opts, std::ostream& out) {
  const auto cfg = apply_overrides(base, opts);
  if (!cfg.sweep) {
    throw ConfigError(ConfigErrorKind::Validation, "sweep", "sweep: section is required for the sweep command");
  }
  const auto dir = output_dir(cfg);
  std::string lines = json{{"header", artifact_header(cfg)}}.dump() + "\n";
  out << "sweep over " << cfg.sweep->axis << " (" << cfg.sweep->values.size() << " points)\n";
  for (std::size_t k = 0; k < cfg.sweep->values.size(); ++k) {
    auto point = sweep_point(cfg, k);
    const auto point_dir = dir / ("point_" + std::to_string(k));
    point.experiment.output = point_dir.string();
    fs::create_directories(point_dir);
    const auto traces = run_experiment(point, opts.jobs);
    write_traces(point_dir, point, traces);

    const auto summary = summarize(traces);
    const auto last = point.protocol.rounds - 1;
    for (auto kind : point.protocol.variants) {
      const auto& row = summary.at(to_string(kind), last);
      lines += json{{"point", k},
                    {"axis", cfg.sweep->axis},
                    {"value", cfg.sweep->values[k]},
                    {"variant", row.variant},
                    {"r", row.r},
                    {"final_mean", row.mean},
                    {"final_stderr", row.stderr_}}
                   .dump() +
               "\n";
      out << "  [" << k << "] " << cfg.sweep->axis << "=" << cfg.sweep->values[k].dump() << "  " << std::left
          << std::setw(26) << row.variant << std::setprecision(6) << row.mean << " +/- " << row.stderr_ << "\n";
    }
  }
  write_text(dir / "sweep.jsonl", lines);
  return 0;
}

int cmd_summarize(const CommandOptions& opts, std::ostream& out) {
  if (opts.trace_files.empty()) {
    throw SummaryError("no trace files given");
  }
  std::vector<RoundTrace> traces;
  json inputs = json::array();
  for (const auto& path : opts.trace_files) {
    auto part = read_trace_file(path);
    std::move(part.begin(), part.end(), std::back_inserter(traces));
    inputs.push_back(path.string());
  }
  const auto summary = summarize(traces, opts.window);

  std::ostringstream csv;
  csv << std::setprecision(17);
  csv << "variant,r,seeds,mean,stderr,ci_low,ci_high\n";
  for (const auto& row : summary.rows) {
    csv << row.variant << "," << row.r << "," << row.seeds << "," << row.mean << "," << row.stderr_ << ","
        << row.ci_low << "," << row.ci_high << "\n";
  }
  json slopes = json::array();
  for (const auto& s : summary.slopes) {
    slopes.push_back({{"variant", s.variant}, {"slope", s.slope}, {"intercept", s.intercept}, {"points", s.points}});
  }

  const fs::path dir = opts.out_dir.value_or(fs::path("."));
  fs::create_directories(dir);
  write_text(dir / "summary.csv", csv.str());
  json meta = {{"tool_version", tool_version()}, {"inputs", inputs}, {"slopes", slopes}};
  if (opts.window) {
    meta["window"] = {{"r_min", opts.window->r_min}, {"r_max", opts.window->r_max}};
  }
  write_text(dir / "summary.json", meta.dump(2) + "\n");

  out << "summarized " << traces.size() << " record(s) from " << opts.trace_files.size() << " file(s)\n";
  for (const auto& s : summary.slopes) {
    out << "  " << std::left << std::setw(26) << s.variant << "log-log slope " << std::setprecision(4) << s.slope
        << " over " << s.points << " round(s)\n";
  }
  out << "table written to " << (dir / "summary.csv").string() << "\n";
  return 0;
}

std::string error_class(const std::exception& e) {
  if (const auto* c = dynamic_cast<const ConfigError*>(&e)) {
    return c->kind() == ConfigErrorKind::Parse ? "config_parse" : "config_validation";
  }
  if (dynamic_cast<const GraphError*>(&e) != nullptr) {
    return "graph_validation";
  }
  if (dynamic_cast<const InfeasibleClientsError*>(&e) != nullptr) {
    return "infeasible_weights";
  }
  if (dynamic_cast<const BisectionError*>(&e) != nullptr) {
    return "bisection";
  }
  if (dynamic_cast<const DivergenceError*>(&e) != nullptr) {
    return "divergence";
  }
  if (dynamic_cast<const ObjectiveError*>(&e) != nullptr) {
    return "objective";
  }
  if (dynamic_cast<const SummaryError*>(&e) != nullptr) {
    return "trace_schema";
  }
  return "runtime";
}

}  // namespace colrel
