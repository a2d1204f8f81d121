#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "colrel/topology.hpp"

namespace colrel {

/// Relay weight matrix. Entry (relayer, source) is the weight client `relayer`
/// applies to client `source`'s update. Column `source` therefore collects
/// every path by which that client's update can reach the server, and row
/// `relayer` is what that client transmits.
class RelayWeights {
 public:
  RelayWeights() = default;
  explicit RelayWeights(std::size_t n) : m_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n))) {}
  explicit RelayWeights(Eigen::MatrixXd m);

  static RelayWeights identity(std::size_t n);

  [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(m_.rows()); }

  [[nodiscard]] double operator()(ClientId relayer, ClientId source) const {
    return m_(static_cast<Eigen::Index>(relayer), static_cast<Eigen::Index>(source));
  }
  double& operator()(ClientId relayer, ClientId source) {
    return m_(static_cast<Eigen::Index>(relayer), static_cast<Eigen::Index>(source));
  }

  [[nodiscard]] const Eigen::MatrixXd& matrix() const noexcept { return m_; }

 private:
  Eigen::MatrixXd m_;
};

class WeightsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when some client's closed neighborhood has only p = 0 members, so
/// its update can never reach the server.
class InfeasibleClientsError : public WeightsError {
 public:
  explicit InfeasibleClientsError(std::vector<ClientId> clients);
  [[nodiscard]] const std::vector<ClientId>& clients() const noexcept { return clients_; }

 private:
  std::vector<ClientId> clients_;
};

class BisectionError : public WeightsError {
 public:
  BisectionError(ClientId column, const std::string& what) : WeightsError(what), column_(column) {}
  [[nodiscard]] ClientId column() const noexcept { return column_; }

 private:
  ClientId column_;
};

struct SupportViolation {
  ClientId relayer;
  ClientId source;
  double value;
};

struct ColumnResidual {
  double residual = 0.0;  // |sum_j p_j a_ji - 1|
  bool pass = false;
};

struct UnbiasednessReport {
  std::vector<ColumnResidual> columns;
  std::vector<SupportViolation> support_violations;
  bool shape_ok = true;

  [[nodiscard]] bool structural_ok() const { return shape_ok && support_violations.empty(); }
  [[nodiscard]] bool all_pass() const;
  [[nodiscard]] double max_residual() const;
};

/// Starting point of the optimizer: 1 / ((|N_i|+1) p_j) on the closed
/// neighborhood, zero where p_j = 0.
[[nodiscard]] RelayWeights initial_weights(const ConnectivityGraph& g);

[[nodiscard]] UnbiasednessReport check_unbiasedness(const ConnectivityGraph& g, const RelayWeights& a,
                                                    double tol);

/// Aggregate variance proxy
///   S(p,A) = sum_{i,l} sum_{j in N_il} p_j (1-p_j) a_ji a_jl.
[[nodiscard]] double variance_objective(const ConnectivityGraph& g, const RelayWeights& a);

/// Per-column quadratic program data for column `source`, restricted to the
/// closed-neighborhood members with p_j > 0.
struct ColumnSubproblem {
  ClientId source = 0;
  std::vector<ClientId> members;
  std::vector<double> beta;  // beta_j = sum_{l != source, j in N_{source,l}} a_jl
  std::vector<double> p;
  double pbar = 0.0;  // max p over the whole closed neighborhood
};

[[nodiscard]] ColumnSubproblem make_column_subproblem(const ConnectivityGraph& g, const RelayWeights& a,
                                                      ClientId source);

/// h(lambda) = sum_j p_j (lambda / (2(1-p_j)) - beta_j)^+ ; nondecreasing in lambda.
[[nodiscard]] double lambda_residual_target(const ColumnSubproblem& sub, double lambda);

/// Called with the current bracket [lo, hi] before each halving step.
using BisectionObserver = std::function<void(double lo, double hi)>;

/// Bisection for the multiplier: returns lambda with |h(lambda) - 1| <= tol.
/// Requires every member probability in (0,1). The bracket starts at [0, 1]
/// and doubles its upper end until h(hi) >= 1.
[[nodiscard]] double bisect_lambda(const ColumnSubproblem& sub, double tol, const BisectionObserver& observer = {});

/// Exact minimizer of S over column `source` with all other columns frozen.
/// Returns the full length-n column.
[[nodiscard]] Eigen::VectorXd solve_column(const ConnectivityGraph& g, const RelayWeights& prev, ClientId source,
                                           double bisect_tol);

struct OptimizerOptions {
  std::size_t max_sweeps = 100;
  double bisect_tol = 1e-10;
  double stall_tol = 1e-12;
};

struct OptimizationResult {
  RelayWeights weights;
  /// S before the first sweep followed by S after each completed sweep.
  std::vector<double> s_history;
  std::size_t sweeps = 0;
};

/// Cyclic Gauss-Seidel over columns 0..n-1, starting from initial_weights.
[[nodiscard]] OptimizationResult optimize_weights(const ConnectivityGraph& g, const OptimizerOptions& opts = {});

/// Clients whose closed neighborhood contains no member with p_j > 0.
[[nodiscard]] std::vector<ClientId> unreachable_clients(const ConnectivityGraph& g);

}  // namespace colrel
