#include "colrel/protocol.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <utility>

namespace colrel {

std::string to_string(VariantKind kind) {
  switch (kind) {
    case VariantKind::ColRel:
      return "colrel";
    case VariantKind::FedAvgNoDropout:
      return "fedavg_no_dropout";
    case VariantKind::FedAvgBlindDropout:
      return "fedavg_blind_dropout";
    case VariantKind::FedAvgNonBlindDropout:
      return "fedavg_nonblind_dropout";
  }
  return "unknown";
}

VariantKind parse_variant(const std::string& name) {
  for (auto kind : {VariantKind::ColRel, VariantKind::FedAvgNoDropout, VariantKind::FedAvgBlindDropout,
                    VariantKind::FedAvgNonBlindDropout}) {
    if (to_string(kind) == name) {
      return kind;
    }
  }
  throw std::invalid_argument("unknown algorithm variant '" + name + "'");
}

AlgorithmVariant AlgorithmVariant::fedavg(VariantKind kind) {
  if (kind == VariantKind::ColRel) {
    throw std::invalid_argument("colrel variant requires relay weights");
  }
  return AlgorithmVariant(kind, std::nullopt);
}

const RelayWeights& AlgorithmVariant::weights() const {
  if (!weights_) {
    throw std::logic_error(name() + " has no relay weights");
  }
  return *weights_;
}

std::size_t ChannelRealization::connected() const {
  std::size_t count = 0;
  for (auto t : tau) {
    count += t;
  }
  return count;
}

DivergenceError::DivergenceError(std::size_t round, ClientId client, std::size_t step)
    : std::runtime_error("non-finite local iterate at round " + std::to_string(round) + ", client " +
                         std::to_string(client) + ", local step " + std::to_string(step)),
      round_(round),
      client_(client),
      step_(step) {}

Eigen::VectorXd local_round(const QuadraticEnsemble& ens, ClientId i, const Eigen::VectorXd& x_global, double eta,
                            std::size_t local_steps, Rng& rng, std::size_t round) {
  if (local_steps < 1) {
    throw std::invalid_argument("local round needs at least one step");
  }
  if (!(eta > 0.0)) {
    throw std::invalid_argument("step size must be positive");
  }
  Eigen::VectorXd x = x_global;
  for (std::size_t k = 0; k < local_steps; ++k) {
    x -= eta * ens.stochastic_gradient(i, x, rng);
    if (!x.allFinite()) {
      throw DivergenceError(round, i, k);
    }
  }
  return x - x_global;
}

Eigen::VectorXd relay_combine(const ConnectivityGraph& g, const RelayWeights& a,
                              std::span<const Eigen::VectorXd> deltas, ClientId i) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(deltas[i].size());
  for (ClientId j : g.closed_neighborhood(i)) {
    const double w = a(i, j);
    if (w != 0.0) {
      out += w * deltas[j];
    }
  }
  return out;
}

ChannelRealization sample_channel(const ConnectivityGraph& g, Rng& rng) {
  ChannelRealization channel;
  channel.tau.resize(g.size());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (ClientId i = 0; i < g.size(); ++i) {
    // One draw per client keeps streams aligned across p values.
    const double u = unit(rng);
    channel.tau[i] = u < g.probability(i) ? 1 : 0;
  }
  return channel;
}

namespace {

// The only view of the uplink a blind server gets: the superposed sum.
Eigen::VectorXd masked_sum(std::span<const Eigen::VectorXd> updates, const ChannelRealization& channel) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(updates.front().size());
  for (std::size_t i = 0; i < updates.size(); ++i) {
    if (channel.tau[i] != 0) {
      sum += updates[i];
    }
  }
  return sum;
}

}  // namespace

Eigen::VectorXd ps_aggregate(const Eigen::VectorXd& x_global, std::span<const Eigen::VectorXd> updates,
                             const ChannelRealization& channel, VariantKind kind, Momentum* momentum) {
  if (updates.empty() || updates.size() != channel.tau.size()) {
    throw std::invalid_argument("aggregation needs one update and one channel outcome per client");
  }
  const double n = static_cast<double>(updates.size());
  Eigen::VectorXd step;
  switch (kind) {
    case VariantKind::ColRel:
    case VariantKind::FedAvgBlindDropout:
      step = masked_sum(updates, channel) / n;
      break;
    case VariantKind::FedAvgNoDropout: {
      ChannelRealization all;
      all.tau.assign(updates.size(), 1);
      step = masked_sum(updates, all) / n;
      break;
    }
    case VariantKind::FedAvgNonBlindDropout: {
      const auto arrived = channel.connected();
      if (arrived == 0) {
        step = Eigen::VectorXd::Zero(x_global.size());
      } else {
        step = masked_sum(updates, channel) / static_cast<double>(arrived);
      }
      break;
    }
  }
  if (momentum != nullptr) {
    if (momentum->buffer.size() != x_global.size()) {
      momentum->buffer = Eigen::VectorXd::Zero(x_global.size());
    }
    momentum->buffer = momentum->beta * momentum->buffer + step;
    return x_global + momentum->buffer;
  }
  return x_global + step;
}

double StepSchedule::at(std::size_t round, double mu, std::size_t local_steps) const {
  if (kind == Kind::Constant) {
    return value;
  }
  return 4.0 / (mu * (static_cast<double>(round) * static_cast<double>(local_steps) + 1.0));
}

Rng make_stream(std::uint64_t seed, StreamPurpose purpose, std::uint64_t client) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(purpose), static_cast<std::uint32_t>(client),
                    static_cast<std::uint32_t>(client >> 32)};
  return Rng(seq);
}

std::vector<RoundTrace> run_simulation(const ConnectivityGraph& g, const QuadraticEnsemble& ens,
                                       const AlgorithmVariant& variant, const SimulationConfig& cfg) {
  const auto n = g.size();
  if (ens.clients() != n) {
    throw std::invalid_argument("objective ensemble and graph disagree on the number of clients");
  }
  if (variant.kind() == VariantKind::ColRel) {
    const auto report = check_unbiasedness(g, variant.weights(), 1e-6);
    if (!report.all_pass()) {
      throw std::invalid_argument("colrel relay weights are not feasible (max residual " +
                                  std::to_string(report.max_residual()) + ")");
    }
  }

  std::vector<Rng> gradient_streams;
  gradient_streams.reserve(n);
  for (ClientId i = 0; i < n; ++i) {
    gradient_streams.push_back(make_stream(cfg.seed, StreamPurpose::Gradient, i));
  }
  Rng channel_stream = make_stream(cfg.seed, StreamPurpose::Channel);

  std::optional<Momentum> momentum;
  if (cfg.momentum) {
    momentum = Momentum{*cfg.momentum, {}};
  }

  const auto d = static_cast<Eigen::Index>(ens.dim());
  Eigen::VectorXd x = Eigen::VectorXd::Zero(d);
  std::vector<Eigen::VectorXd> deltas(n);
  std::vector<Eigen::VectorXd> relayed(n);
  std::vector<RoundTrace> trace;
  trace.reserve(cfg.rounds);

  for (std::size_t r = 0; r < cfg.rounds; ++r) {
    const double eta = cfg.schedule.at(r, ens.mu(), cfg.local_steps);
    for (ClientId i = 0; i < n; ++i) {
      deltas[i] = local_round(ens, i, x, eta, cfg.local_steps, gradient_streams[i], r);
    }
    const auto channel = sample_channel(g, channel_stream);

    std::span<const Eigen::VectorXd> updates = deltas;
    if (variant.kind() == VariantKind::ColRel) {
      for (ClientId i = 0; i < n; ++i) {
        relayed[i] = relay_combine(g, variant.weights(), deltas, i);
      }
      updates = relayed;
    }
    x = ps_aggregate(x, updates, channel, variant.kind(), momentum ? &*momentum : nullptr);
    if (!x.allFinite()) {
      throw std::runtime_error("non-finite global model after aggregation at round " + std::to_string(r));
    }

    RoundTrace rec;
    rec.variant = variant.name();
    rec.seed = cfg.seed;
    rec.r = r;
    rec.suboptimality = ens.suboptimality(x);
    rec.num_connected = variant.kind() == VariantKind::FedAvgNoDropout ? n : channel.connected();
    rec.eta = eta;
    if (cfg.record_model) {
      rec.x = x;
    }
    trace.push_back(std::move(rec));
  }
  return trace;
}

}  // namespace colrel
