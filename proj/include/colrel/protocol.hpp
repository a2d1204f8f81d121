#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "colrel/objectives.hpp"
#include "colrel/topology.hpp"
#include "colrel/weights.hpp"

namespace colrel {

enum class VariantKind {
  ColRel,
  FedAvgNoDropout,
  FedAvgBlindDropout,
  FedAvgNonBlindDropout,
};

[[nodiscard]] std::string to_string(VariantKind kind);
[[nodiscard]] VariantKind parse_variant(const std::string& name);

/// An aggregation rule. ColRel carries its relay weights; the FedAvg
/// baselines carry none.
class AlgorithmVariant {
 public:
  static AlgorithmVariant colrel(RelayWeights weights) { return AlgorithmVariant(VariantKind::ColRel, std::move(weights)); }
  static AlgorithmVariant fedavg(VariantKind kind);

  [[nodiscard]] VariantKind kind() const noexcept { return kind_; }
  [[nodiscard]] const RelayWeights& weights() const;
  [[nodiscard]] std::string name() const { return to_string(kind_); }

 private:
  AlgorithmVariant(VariantKind kind, std::optional<RelayWeights> weights)
      : kind_(kind), weights_(std::move(weights)) {}

  VariantKind kind_;
  std::optional<RelayWeights> weights_;
};

/// Per-round uplink outcomes, tau[i] in {0,1}.
struct ChannelRealization {
  std::vector<std::uint8_t> tau;

  [[nodiscard]] std::size_t connected() const;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t round, ClientId client, std::size_t step);

  [[nodiscard]] std::size_t round() const noexcept { return round_; }
  [[nodiscard]] ClientId client() const noexcept { return client_; }
  [[nodiscard]] std::size_t step() const noexcept { return step_; }

 private:
  std::size_t round_;
  ClientId client_;
  std::size_t step_;
};

/// T local SGD steps from x_global; returns x_i^{(r,T)} - x_global.
/// `round` is only used to label a DivergenceError.
[[nodiscard]] Eigen::VectorXd local_round(const QuadraticEnsemble& ens, ClientId i, const Eigen::VectorXd& x_global,
                                          double eta, std::size_t local_steps, Rng& rng, std::size_t round = 0);

/// sum over j in N_i u {i} of a(i, j) * deltas[j]: what client i transmits.
[[nodiscard]] Eigen::VectorXd relay_combine(const ConnectivityGraph& g, const RelayWeights& a,
                                            std::span<const Eigen::VectorXd> deltas, ClientId i);

[[nodiscard]] ChannelRealization sample_channel(const ConnectivityGraph& g, Rng& rng);

/// Server-side heavy-ball state: m <- beta m + update, x <- x + m.
struct Momentum {
  double beta = 0.0;
  Eigen::VectorXd buffer;
};

/// Applies one server update. `updates` are the relayed vectors for ColRel
/// and the raw local deltas for the FedAvg baselines. Blind variants only see
/// the masked sum of what arrived.
[[nodiscard]] Eigen::VectorXd ps_aggregate(const Eigen::VectorXd& x_global, std::span<const Eigen::VectorXd> updates,
                                           const ChannelRealization& channel, VariantKind kind,
                                           Momentum* momentum = nullptr);

struct StepSchedule {
  enum class Kind { Constant, Theorem };
  Kind kind = Kind::Theorem;
  double value = 0.0;  // constant step size when kind == Constant

  static StepSchedule constant(double eta) { return {Kind::Constant, eta}; }
  static StepSchedule theorem() { return {Kind::Theorem, 0.0}; }

  /// Constant value, or 4 / (mu (r T + 1)).
  [[nodiscard]] double at(std::size_t round, double mu, std::size_t local_steps) const;
};

struct SimulationConfig {
  std::size_t local_steps = 8;
  std::size_t rounds = 100;
  StepSchedule schedule = StepSchedule::theorem();
  std::optional<double> momentum;
  std::uint64_t seed = 0;
  bool record_model = false;
};

/// One aggregated round. `suboptimality` is ||x^{(r+1)} - x*||^2.
struct RoundTrace {
  std::string variant;
  std::uint64_t seed = 0;
  std::size_t r = 0;
  double suboptimality = 0.0;
  std::size_t num_connected = 0;
  double eta = 0.0;
  std::optional<Eigen::VectorXd> x;
};

/// Independent generator for (seed, purpose, client). Streams are shared by
/// all variants so runs with the same seed see the same noise and channel.
enum class StreamPurpose : std::uint64_t { Gradient = 1, Channel = 2 };
[[nodiscard]] Rng make_stream(std::uint64_t seed, StreamPurpose purpose, std::uint64_t client = 0);

/// Runs R rounds from x^{(0)} = 0. Throws DivergenceError on non-finite state.
[[nodiscard]] std::vector<RoundTrace> run_simulation(const ConnectivityGraph& g, const QuadraticEnsemble& ens,
                                                     const AlgorithmVariant& variant, const SimulationConfig& cfg);

}  // namespace colrel
