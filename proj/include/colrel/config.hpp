#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "colrel/protocol.hpp"
#include "colrel/topology.hpp"
#include "colrel/weights.hpp"

namespace colrel {

enum class ConfigErrorKind { Parse, Validation };

/// `field` is a dotted path into the document ("graph.p[3]"), empty for
/// syntax errors.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(ConfigErrorKind kind, std::string field, const std::string& what)
      : std::runtime_error(what), kind_(kind), field_(std::move(field)) {}

  [[nodiscard]] ConfigErrorKind kind() const noexcept { return kind_; }
  [[nodiscard]] const std::string& field() const noexcept { return field_; }

 private:
  ConfigErrorKind kind_;
  std::string field_;
};

struct GraphConfig {
  std::size_t n = 0;
  TopologySpec topology = TopologySpec::fully_connected();
  std::optional<std::vector<Edge>> explicit_edges;
  std::vector<double> p;

  [[nodiscard]] ConnectivityGraph build() const;
};

struct ObjectiveConfig {
  std::size_t d = 20;
  double mu = 0.5;
  double L = 5.0;
  double sigma = 1.0;
  double heterogeneity = 0.0;
  std::uint64_t seed = 0;
};

/// Which relay matrix the colrel variant runs with.
enum class WeightsChoice { Optimized, Initial, Identity };

struct ProtocolConfig {
  std::vector<VariantKind> variants{VariantKind::ColRel};
  std::size_t local_steps = 8;
  std::size_t rounds = 100;
  StepSchedule schedule = StepSchedule::theorem();
  std::optional<double> momentum;
  WeightsChoice colrel_weights = WeightsChoice::Optimized;
};

struct ExperimentConfig {
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::string output = "out";
};

/// One varying axis: every value is substituted into a copy of the base
/// config before running `simulate` on it.
struct SweepConfig {
  std::string axis;  // "p", "heterogeneity", "sigma" or "topology"
  std::vector<nlohmann::json> values;
};

struct RunConfig {
  GraphConfig graph;
  ObjectiveConfig objective;
  ProtocolConfig protocol;
  OptimizerOptions optimizer;
  ExperimentConfig experiment;
  std::optional<SweepConfig> sweep;
};

[[nodiscard]] RunConfig parse_config_text(const std::string& text);
[[nodiscard]] RunConfig parse_config_file(const std::string& path);

/// Validated config -> JSON document with every default filled in.
[[nodiscard]] nlohmann::json to_json(const RunConfig& cfg);
[[nodiscard]] std::string canonical_text(const RunConfig& cfg);

/// Base config with sweep value `index` substituted and the sweep removed.
[[nodiscard]] RunConfig sweep_point(const RunConfig& cfg, std::size_t index);

/// Validates a JSON document (already parsed) into a RunConfig.
[[nodiscard]] RunConfig from_json(const nlohmann::json& doc);

}  // namespace colrel
