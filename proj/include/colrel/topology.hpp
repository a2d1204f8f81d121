#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace colrel {

using ClientId = std::size_t;

/// Unordered client pair. Stored with a < b after validation.
struct Edge {
  ClientId a = 0;
  ClientId b = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

enum class GraphErrorKind {
  EmptyGraph,
  LengthMismatch,
  EndpointOutOfRange,
  SelfLoop,
  DuplicateEdge,
  ProbabilityOutOfRange,
  ClientOutOfRange,
  InvalidTopology,
};

class GraphError : public std::invalid_argument {
 public:
  GraphError(GraphErrorKind kind, const std::string& what)
      : std::invalid_argument(what), kind_(kind) {}

  [[nodiscard]] GraphErrorKind kind() const noexcept { return kind_; }

 private:
  GraphErrorKind kind_;
};

/// Undirected client graph together with per-client uplink success
/// probabilities. Immutable after construction.
class ConnectivityGraph {
 public:
  ConnectivityGraph(std::size_t n, std::span<const Edge> edges, std::vector<double> p);

  [[nodiscard]] std::size_t size() const noexcept { return n_; }
  [[nodiscard]] const std::vector<Edge>& edges() const noexcept { return edges_; }
  [[nodiscard]] std::span<const double> probabilities() const noexcept { return p_; }
  [[nodiscard]] double probability(ClientId i) const;

  /// Sorted neighbors of i, excluding i.
  [[nodiscard]] std::span<const ClientId> neighbors(ClientId i) const;

  /// N_i together with i, sorted.
  [[nodiscard]] std::vector<ClientId> closed_neighborhood(ClientId i) const;

  /// (N_i u {i}) n (N_l u {l}), sorted.
  [[nodiscard]] std::vector<ClientId> common_neighborhood(ClientId i, ClientId l) const;

  [[nodiscard]] bool adjacent(ClientId i, ClientId j) const;

  /// True when j == i or j is a neighbor of i.
  [[nodiscard]] bool in_closed_neighborhood(ClientId j, ClientId i) const {
    return i == j || adjacent(i, j);
  }

 private:
  void check_id(ClientId i) const;

  std::size_t n_;
  std::vector<Edge> edges_;
  std::vector<double> p_;
  std::vector<std::vector<ClientId>> adjacency_;
  std::vector<unsigned char> dense_;  // n x n, row-major
};

enum class TopologyKind { FullyConnected, Ring, Edgeless };

struct TopologySpec {
  TopologyKind kind = TopologyKind::FullyConnected;
  std::size_t ring_degree = 1;  // k: each client links to k clients on either side

  static TopologySpec fully_connected() { return {TopologyKind::FullyConnected, 0}; }
  static TopologySpec ring(std::size_t k) { return {TopologyKind::Ring, k}; }
  static TopologySpec edgeless() { return {TopologyKind::Edgeless, 0}; }
};

[[nodiscard]] std::vector<Edge> standard_topology(const TopologySpec& spec, std::size_t n);

[[nodiscard]] std::string to_string(TopologyKind kind);

}  // namespace colrel
