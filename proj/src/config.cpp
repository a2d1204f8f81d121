#include "colrel/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace colrel {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& field, const std::string& constraint) {
  throw ConfigError(ConfigErrorKind::Validation, field, field + ": " + constraint);
}

// Object reader that remembers which keys were consumed so leftovers can be
// rejected by name.
class Section {
 public:
  Section(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) {
      invalid(label(), "must be an object");
    }
  }

  [[nodiscard]] std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  [[nodiscard]] const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = doc_.find(key);
    return it == doc_.end() ? nullptr : &*it;
  }

  [[nodiscard]] const json& require(const std::string& key) {
    const json* v = find(key);
    if (v == nullptr) {
      invalid(field(key), "is required");
    }
    return *v;
  }

  double number(const std::string& key, double fallback) {
    const json* v = find(key);
    if (v == nullptr) {
      return fallback;
    }
    return as_number(*v, field(key));
  }

  std::uint64_t count(const std::string& key, std::uint64_t fallback) {
    const json* v = find(key);
    if (v == nullptr) {
      return fallback;
    }
    return as_count(*v, field(key));
  }

  std::string text(const std::string& key, const std::string& fallback) {
    const json* v = find(key);
    if (v == nullptr) {
      return fallback;
    }
    if (!v->is_string()) {
      invalid(field(key), "must be a string");
    }
    return v->get<std::string>();
  }

  void finish() const {
    for (const auto& [key, value] : doc_.items()) {
      if (!seen_.contains(key)) {
        invalid(field(key), "unknown key");
      }
    }
  }

  static double as_number(const json& v, const std::string& field) {
    if (!v.is_number()) {
      invalid(field, "must be a number");
    }
    return v.get<double>();
  }

  static std::uint64_t as_count(const json& v, const std::string& field) {
    if (v.is_number_unsigned()) {
      return v.get<std::uint64_t>();
    }
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
      return static_cast<std::uint64_t>(v.get<std::int64_t>());
    }
    invalid(field, "must be a nonnegative integer");
  }

 private:
  [[nodiscard]] std::string label() const { return path_.empty() ? "<root>" : path_; }

  const json& doc_;
  std::string path_;
  std::set<std::string> seen_;
};

void parse_topology(const json& v, GraphConfig& graph, const std::string& field) {
  if (v.is_string()) {
    const auto name = v.get<std::string>();
    if (name == "fully_connected") {
      graph.topology = TopologySpec::fully_connected();
    } else if (name == "edgeless") {
      graph.topology = TopologySpec::edgeless();
    } else if (name == "ring") {
      graph.topology = TopologySpec::ring(1);
    } else {
      invalid(field, "unknown topology '" + name + "'");
    }
    return;
  }
  Section s(v, field);
  const auto kind = s.text("kind", "");
  if (kind == "fully_connected") {
    graph.topology = TopologySpec::fully_connected();
  } else if (kind == "edgeless") {
    graph.topology = TopologySpec::edgeless();
  } else if (kind == "ring") {
    graph.topology = TopologySpec::ring(static_cast<std::size_t>(s.count("k", 1)));
  } else if (kind == "explicit") {
    const json& edges = s.require("edges");
    if (!edges.is_array()) {
      invalid(s.field("edges"), "must be an array of [a, b] pairs");
    }
    std::vector<Edge> out;
    for (std::size_t k = 0; k < edges.size(); ++k) {
      const auto ef = s.field("edges") + "[" + std::to_string(k) + "]";
      const json& e = edges[k];
      if (!e.is_array() || e.size() != 2) {
        invalid(ef, "must be a pair [a, b]");
      }
      out.push_back({Section::as_count(e[0], ef), Section::as_count(e[1], ef)});
    }
    graph.explicit_edges = std::move(out);
  } else {
    invalid(s.field("kind"), "must be one of fully_connected, ring, edgeless, explicit");
  }
  s.finish();
}

std::vector<double> parse_probabilities(const json& v, std::size_t n, const std::string& field) {
  std::vector<double> p;
  if (v.is_number()) {
    p.assign(n, v.get<double>());
  } else if (v.is_array()) {
    if (v.size() != n) {
      invalid(field, "has length " + std::to_string(v.size()) + " but graph.n = " + std::to_string(n));
    }
    for (std::size_t k = 0; k < v.size(); ++k) {
      p.push_back(Section::as_number(v[k], field + "[" + std::to_string(k) + "]"));
    }
  } else {
    invalid(field, "must be a number or an array of numbers");
  }
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (!(p[k] >= 0.0 && p[k] <= 1.0)) {
      invalid(v.is_array() ? field + "[" + std::to_string(k) + "]" : field, "must lie in [0, 1]");
    }
  }
  return p;
}

GraphConfig parse_graph(const json& v) {
  Section s(v, "graph");
  GraphConfig g;
  g.n = static_cast<std::size_t>(Section::as_count(s.require("n"), "graph.n"));
  if (g.n < 1) {
    invalid("graph.n", "must be at least 1");
  }
  if (const json* t = s.find("topology")) {
    parse_topology(*t, g, "graph.topology");
  }
  const json* p = s.find("p");
  g.p = p ? parse_probabilities(*p, g.n, "graph.p") : std::vector<double>(g.n, 1.0);
  s.finish();
  try {
    (void)g.build();
  } catch (const GraphError& e) {
    invalid("graph.topology", e.what());
  }
  return g;
}

ObjectiveConfig parse_objective(const json& v) {
  Section s(v, "objective");
  ObjectiveConfig o;
  o.d = static_cast<std::size_t>(s.count("d", o.d));
  o.mu = s.number("mu", o.mu);
  o.L = s.number("L", o.L);
  o.sigma = s.number("sigma", o.sigma);
  o.heterogeneity = s.number("heterogeneity", o.heterogeneity);
  o.seed = s.count("seed", o.seed);
  s.finish();
  if (o.d < 1) {
    invalid("objective.d", "must be at least 1");
  }
  if (!(o.mu > 0.0)) {
    invalid("objective.mu", "must be positive");
  }
  if (!(o.L >= o.mu)) {
    invalid("objective.L", "must be at least objective.mu");
  }
  if (!(o.sigma >= 0.0)) {
    invalid("objective.sigma", "must be nonnegative");
  }
  if (!(o.heterogeneity >= 0.0)) {
    invalid("objective.heterogeneity", "must be nonnegative");
  }
  return o;
}

StepSchedule parse_schedule(const json& v) {
  if (v.is_string()) {
    if (v.get<std::string>() == "theorem") {
      return StepSchedule::theorem();
    }
    invalid("protocol.eta", "string form must be \"theorem\"");
  }
  if (v.is_number()) {
    const double eta = v.get<double>();
    if (!(eta > 0.0)) {
      invalid("protocol.eta", "constant step size must be positive");
    }
    return StepSchedule::constant(eta);
  }
  Section s(v, "protocol.eta");
  const auto kind = s.text("schedule", "theorem");
  StepSchedule out;
  if (kind == "theorem") {
    out = StepSchedule::theorem();
  } else if (kind == "constant") {
    const double eta = Section::as_number(s.require("value"), "protocol.eta.value");
    if (!(eta > 0.0)) {
      invalid("protocol.eta.value", "must be positive");
    }
    out = StepSchedule::constant(eta);
  } else {
    invalid("protocol.eta.schedule", "must be \"theorem\" or \"constant\"");
  }
  s.finish();
  return out;
}

ProtocolConfig parse_protocol(const json& v) {
  Section s(v, "protocol");
  ProtocolConfig pc;
  if (const json* variants = s.find("variants")) {
    if (!variants->is_array() || variants->empty()) {
      invalid("protocol.variants", "must be a nonempty array of variant names");
    }
    pc.variants.clear();
    for (std::size_t k = 0; k < variants->size(); ++k) {
      const auto f = "protocol.variants[" + std::to_string(k) + "]";
      const json& name = (*variants)[k];
      if (!name.is_string()) {
        invalid(f, "must be a string");
      }
      try {
        const auto kind = parse_variant(name.get<std::string>());
        if (std::find(pc.variants.begin(), pc.variants.end(), kind) != pc.variants.end()) {
          invalid(f, "duplicate variant");
        }
        pc.variants.push_back(kind);
      } catch (const std::invalid_argument& e) {
        invalid(f, e.what());
      }
    }
  }
  pc.local_steps = static_cast<std::size_t>(s.count("T", pc.local_steps));
  pc.rounds = static_cast<std::size_t>(s.count("R", pc.rounds));
  if (pc.local_steps < 1) {
    invalid("protocol.T", "must be at least 1");
  }
  if (pc.rounds < 1) {
    invalid("protocol.R", "must be at least 1");
  }
  if (const json* eta = s.find("eta")) {
    pc.schedule = parse_schedule(*eta);
  }
  if (const json* m = s.find("momentum"); m != nullptr && !m->is_null()) {
    const double beta = Section::as_number(*m, "protocol.momentum");
    if (!(beta >= 0.0 && beta < 1.0)) {
      invalid("protocol.momentum", "must lie in [0, 1) or be null");
    }
    pc.momentum = beta;
  }
  const auto weights = s.text("colrel_weights", "optimized");
  if (weights == "optimized") {
    pc.colrel_weights = WeightsChoice::Optimized;
  } else if (weights == "initial") {
    pc.colrel_weights = WeightsChoice::Initial;
  } else if (weights == "identity") {
    pc.colrel_weights = WeightsChoice::Identity;
  } else {
    invalid("protocol.colrel_weights", "must be one of optimized, initial, identity");
  }
  s.finish();
  return pc;
}

OptimizerOptions parse_optimizer(const json& v) {
  Section s(v, "optimizer");
  OptimizerOptions o;
  o.max_sweeps = static_cast<std::size_t>(s.count("max_sweeps", o.max_sweeps));
  o.bisect_tol = s.number("bisect_tol", o.bisect_tol);
  o.stall_tol = s.number("stall_tol", o.stall_tol);
  s.finish();
  if (o.max_sweeps < 1) {
    invalid("optimizer.max_sweeps", "must be at least 1");
  }
  if (!(o.bisect_tol > 0.0)) {
    invalid("optimizer.bisect_tol", "must be positive");
  }
  if (!(o.stall_tol >= 0.0)) {
    invalid("optimizer.stall_tol", "must be nonnegative");
  }
  return o;
}

ExperimentConfig parse_experiment(const json& v) {
  Section s(v, "experiment");
  ExperimentConfig e;
  if (const json* seeds = s.find("seeds")) {
    e.seeds.clear();
    if (seeds->is_array()) {
      std::set<std::uint64_t> unique;
      for (std::size_t k = 0; k < seeds->size(); ++k) {
        const auto f = "experiment.seeds[" + std::to_string(k) + "]";
        const auto seed = Section::as_count((*seeds)[k], f);
        if (!unique.insert(seed).second) {
          invalid(f, "duplicate seed");
        }
        e.seeds.push_back(seed);
      }
    } else {
      const auto count = Section::as_count(*seeds, "experiment.seeds");
      for (std::uint64_t k = 0; k < count; ++k) {
        e.seeds.push_back(k);
      }
    }
    if (e.seeds.empty()) {
      invalid("experiment.seeds", "must name at least one seed");
    }
  }
  e.output = s.text("output", e.output);
  s.finish();
  return e;
}

SweepConfig parse_sweep(const json& v) {
  Section s(v, "sweep");
  SweepConfig sw;
  sw.axis = s.text("axis", "");
  static const std::set<std::string> axes{"p", "heterogeneity", "sigma", "topology"};
  if (!axes.contains(sw.axis)) {
    invalid("sweep.axis", "must be one of p, heterogeneity, sigma, topology");
  }
  const json& values = s.require("values");
  if (!values.is_array() || values.empty()) {
    invalid("sweep.values", "must be a nonempty array");
  }
  sw.values.assign(values.begin(), values.end());
  s.finish();
  return sw;
}

json topology_json(const GraphConfig& g) {
  if (g.explicit_edges) {
    json edges = json::array();
    for (const auto& e : *g.explicit_edges) {
      edges.push_back({e.a, e.b});
    }
    return {{"kind", "explicit"}, {"edges", edges}};
  }
  json t = {{"kind", to_string(g.topology.kind)}};
  if (g.topology.kind == TopologyKind::Ring) {
    t["k"] = g.topology.ring_degree;
  }
  return t;
}

std::string weights_choice_name(WeightsChoice w) {
  switch (w) {
    case WeightsChoice::Optimized:
      return "optimized";
    case WeightsChoice::Initial:
      return "initial";
    case WeightsChoice::Identity:
      return "identity";
  }
  return "optimized";
}

}  // namespace

ConnectivityGraph GraphConfig::build() const {
  if (explicit_edges) {
    return ConnectivityGraph(n, *explicit_edges, p);
  }
  const auto edges = standard_topology(topology, n);
  return ConnectivityGraph(n, edges, p);
}

RunConfig from_json(const json& doc) {
  Section root(doc, "");
  RunConfig cfg;
  cfg.graph = parse_graph(root.require("graph"));
  if (const json* v = root.find("objective")) {
    cfg.objective = parse_objective(*v);
  }
  if (const json* v = root.find("protocol")) {
    cfg.protocol = parse_protocol(*v);
  }
  if (const json* v = root.find("optimizer")) {
    cfg.optimizer = parse_optimizer(*v);
  }
  if (const json* v = root.find("experiment")) {
    cfg.experiment = parse_experiment(*v);
  }
  if (const json* v = root.find("sweep"); v != nullptr && !v->is_null()) {
    cfg.sweep = parse_sweep(*v);
  }
  root.finish();
  if (cfg.sweep) {
    for (std::size_t k = 0; k < cfg.sweep->values.size(); ++k) {
      try {
        (void)sweep_point(cfg, k);
      } catch (const ConfigError& e) {
        invalid("sweep.values[" + std::to_string(k) + "]", e.what());
      }
    }
  }
  return cfg;
}

RunConfig sweep_point(const RunConfig& cfg, std::size_t index) {
  if (!cfg.sweep || index >= cfg.sweep->values.size()) {
    throw std::out_of_range("sweep point index out of range");
  }
  json doc = to_json(cfg);
  doc.erase("sweep");
  const auto& axis = cfg.sweep->axis;
  const auto& value = cfg.sweep->values[index];
  if (axis == "p") {
    doc["graph"]["p"] = value;
  } else if (axis == "topology") {
    doc["graph"]["topology"] = value;
  } else {
    doc["objective"][axis] = value;
  }
  return from_json(doc);
}

RunConfig parse_config_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    // Translate the byte offset into a line/column pair.
    const auto offset = std::min<std::size_t>(e.byte, text.size());
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t k = 0; k + 1 < offset; ++k) {
      if (text[k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(ConfigErrorKind::Parse, "",
                      "line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + e.what());
  }
  return from_json(doc);
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError(ConfigErrorKind::Parse, "", "cannot read config file '" + path + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

json to_json(const RunConfig& cfg) {
  json variants = json::array();
  for (auto v : cfg.protocol.variants) {
    variants.push_back(to_string(v));
  }
  json eta = cfg.protocol.schedule.kind == StepSchedule::Kind::Theorem
                 ? json{{"schedule", "theorem"}}
                 : json{{"schedule", "constant"}, {"value", cfg.protocol.schedule.value}};

  json doc = {
      {"graph", {{"n", cfg.graph.n}, {"topology", topology_json(cfg.graph)}, {"p", cfg.graph.p}}},
      {"objective",
       {{"d", cfg.objective.d},
        {"mu", cfg.objective.mu},
        {"L", cfg.objective.L},
        {"sigma", cfg.objective.sigma},
        {"heterogeneity", cfg.objective.heterogeneity},
        {"seed", cfg.objective.seed}}},
      {"protocol",
       {{"variants", variants},
        {"T", cfg.protocol.local_steps},
        {"R", cfg.protocol.rounds},
        {"eta", eta},
        {"momentum", cfg.protocol.momentum ? json(*cfg.protocol.momentum) : json(nullptr)},
        {"colrel_weights", weights_choice_name(cfg.protocol.colrel_weights)}}},
      {"optimizer",
       {{"max_sweeps", cfg.optimizer.max_sweeps},
        {"bisect_tol", cfg.optimizer.bisect_tol},
        {"stall_tol", cfg.optimizer.stall_tol}}},
      {"experiment", {{"seeds", cfg.experiment.seeds}, {"output", cfg.experiment.output}}},
  };
  if (cfg.sweep) {
    doc["sweep"] = {{"axis", cfg.sweep->axis}, {"values", cfg.sweep->values}};
  }
  return doc;
}

std::string canonical_text(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

}  // namespace colrel
