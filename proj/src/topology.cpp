#include "colrel/topology.hpp"

#include <algorithm>
#include <iterator>
#include <utility>

namespace colrel {

ConnectivityGraph::ConnectivityGraph(std::size_t n, std::span<const Edge> edges, std::vector<double> p)
    : n_(n), p_(std::move(p)), adjacency_(n), dense_(n * n, 0) {
  if (n_ == 0) {
    throw GraphError(GraphErrorKind::EmptyGraph, "graph must have at least one client");
  }
  if (p_.size() != n_) {
    throw GraphError(GraphErrorKind::LengthMismatch,
                     "probability vector has length " + std::to_string(p_.size()) + ", expected " +
                         std::to_string(n_));
  }
  for (std::size_t i = 0; i < n_; ++i) {
    // Negated form also rejects NaN.
    if (!(p_[i] >= 0.0 && p_[i] <= 1.0)) {
      throw GraphError(GraphErrorKind::ProbabilityOutOfRange,
                       "p[" + std::to_string(i) + "] = " + std::to_string(p_[i]) + " is outside [0,1]");
    }
  }

  edges_.reserve(edges.size());
  for (const auto& e : edges) {
    if (e.a >= n_ || e.b >= n_) {
      throw GraphError(GraphErrorKind::EndpointOutOfRange,
                       "edge {" + std::to_string(e.a) + "," + std::to_string(e.b) +
                           "} has an endpoint outside [0," + std::to_string(n_) + ")");
    }
    if (e.a == e.b) {
      throw GraphError(GraphErrorKind::SelfLoop, "self-loop at client " + std::to_string(e.a));
    }
    const auto lo = std::min(e.a, e.b);
    const auto hi = std::max(e.a, e.b);
    if (dense_[lo * n_ + hi] != 0) {
      throw GraphError(GraphErrorKind::DuplicateEdge,
                       "duplicate edge {" + std::to_string(lo) + "," + std::to_string(hi) + "}");
    }
    dense_[lo * n_ + hi] = 1;
    dense_[hi * n_ + lo] = 1;
    adjacency_[lo].push_back(hi);
    adjacency_[hi].push_back(lo);
    edges_.push_back({lo, hi});
  }
  for (auto& nbrs : adjacency_) {
    std::sort(nbrs.begin(), nbrs.end());
  }
}

void ConnectivityGraph::check_id(ClientId i) const {
  if (i >= n_) {
    throw GraphError(GraphErrorKind::ClientOutOfRange,
                     "client " + std::to_string(i) + " outside [0," + std::to_string(n_) + ")");
  }
}

double ConnectivityGraph::probability(ClientId i) const {
  check_id(i);
  return p_[i];
}

std::span<const ClientId> ConnectivityGraph::neighbors(ClientId i) const {
  check_id(i);
  return adjacency_[i];
}

std::vector<ClientId> ConnectivityGraph::closed_neighborhood(ClientId i) const {
  check_id(i);
  std::vector<ClientId> out;
  out.reserve(adjacency_[i].size() + 1);
  const auto& nbrs = adjacency_[i];
  auto pos = std::lower_bound(nbrs.begin(), nbrs.end(), i);
  out.insert(out.end(), nbrs.begin(), pos);
  out.push_back(i);
  out.insert(out.end(), pos, nbrs.end());
  return out;
}

std::vector<ClientId> ConnectivityGraph::common_neighborhood(ClientId i, ClientId l) const {
  const auto a = closed_neighborhood(i);
  const auto b = closed_neighborhood(l);
  std::vector<ClientId> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

bool ConnectivityGraph::adjacent(ClientId i, ClientId j) const {
  check_id(i);
  check_id(j);
  return dense_[i * n_ + j] != 0;
}

std::vector<Edge> standard_topology(const TopologySpec& spec, std::size_t n) {
  std::vector<Edge> edges;
  switch (spec.kind) {
    case TopologyKind::Edgeless:
      break;
    case TopologyKind::FullyConnected:
      for (ClientId i = 0; i < n; ++i) {
        for (ClientId j = i + 1; j < n; ++j) {
          edges.push_back({i, j});
        }
      }
      break;
    case TopologyKind::Ring: {
      const auto k = spec.ring_degree;
      // 2k < n keeps the k-hop offsets on both sides distinct.
      if (k < 1 || 2 * k >= n) {
        throw GraphError(GraphErrorKind::InvalidTopology,
                         "ring degree k=" + std::to_string(k) + " requires 1 <= k < n/2 with n=" +
                             std::to_string(n));
      }
      for (ClientId i = 0; i < n; ++i) {
        for (std::size_t s = 1; s <= k; ++s) {
          edges.push_back({i, (i + s) % n});
        }
      }
      break;
    }
  }
  return edges;
}

std::string to_string(TopologyKind kind) {
  switch (kind) {
    case TopologyKind::FullyConnected:
      return "fully_connected";
    case TopologyKind::Ring:
      return "ring";
    case TopologyKind::Edgeless:
      return "edgeless";
  }
  return "unknown";
}

}  // namespace colrel
