#include "colrel/weights.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace colrel {

namespace {

constexpr int kMaxBracketDoublings = 60;
constexpr int kMaxBisectionSteps = 400;

std::string join_ids(const std::vector<ClientId>& ids) {
  std::string s;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (k != 0) {
      s += ",";
    }
    s += std::to_string(ids[k]);
  }
  return s;
}

double column_sum(const ColumnSubproblem& sub, double lambda, std::vector<double>* out) {
  double h = 0.0;
  for (std::size_t k = 0; k < sub.members.size(); ++k) {
    const double a = std::max(0.0, lambda / (2.0 * (1.0 - sub.p[k])) - sub.beta[k]);
    if (out != nullptr) {
      (*out)[k] = a;
    }
    h += sub.p[k] * a;
  }
  return h;
}

// h is piecewise linear in lambda with one breakpoint per member, so the
// exact root follows by walking the sorted breakpoints. Returns it when it
// does not worsen the residual of the bisection estimate.
double refine_lambda(const ColumnSubproblem& sub, double lambda) {
  const auto m = sub.members.size();
  std::vector<double> breakpoint(m);
  std::vector<std::size_t> order(m);
  for (std::size_t k = 0; k < m; ++k) {
    breakpoint[k] = 2.0 * (1.0 - sub.p[k]) * sub.beta[k];
    order[k] = k;
  }
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return breakpoint[a] < breakpoint[b]; });

  double num = 1.0;
  double den = 0.0;
  double exact = lambda;
  for (std::size_t idx = 0; idx < m; ++idx) {
    const auto k = order[idx];
    num += sub.p[k] * sub.beta[k];
    den += sub.p[k] / (2.0 * (1.0 - sub.p[k]));
    const double root = num / den;
    if (idx + 1 == m || root <= breakpoint[order[idx + 1]]) {
      exact = root;
      break;
    }
  }
  const double before = std::abs(lambda_residual_target(sub, lambda) - 1.0);
  const double after = std::abs(lambda_residual_target(sub, exact) - 1.0);
  return after <= before ? exact : lambda;
}

}  // namespace

RelayWeights::RelayWeights(Eigen::MatrixXd m) : m_(std::move(m)) {
  if (m_.rows() != m_.cols()) {
    throw std::invalid_argument("relay weight matrix must be square");
  }
}

RelayWeights RelayWeights::identity(std::size_t n) {
  const auto k = static_cast<Eigen::Index>(n);
  return RelayWeights(Eigen::MatrixXd::Identity(k, k));
}

InfeasibleClientsError::InfeasibleClientsError(std::vector<ClientId> clients)
    : WeightsError("clients {" + join_ids(clients) +
                   "} have no closed-neighborhood member with positive uplink probability"),
      clients_(std::move(clients)) {}

bool UnbiasednessReport::all_pass() const {
  return structural_ok() &&
         std::all_of(columns.begin(), columns.end(), [](const ColumnResidual& c) { return c.pass; });
}

double UnbiasednessReport::max_residual() const {
  double worst = 0.0;
  for (const auto& c : columns) {
    worst = std::max(worst, c.residual);
  }
  return worst;
}

std::vector<ClientId> unreachable_clients(const ConnectivityGraph& g) {
  std::vector<ClientId> out;
  for (ClientId i = 0; i < g.size(); ++i) {
    const auto members = g.closed_neighborhood(i);
    const bool reachable =
        std::any_of(members.begin(), members.end(), [&](ClientId j) { return g.probability(j) > 0.0; });
    if (!reachable) {
      out.push_back(i);
    }
  }
  return out;
}

RelayWeights initial_weights(const ConnectivityGraph& g) {
  const auto n = g.size();
  RelayWeights a(n);
  for (ClientId i = 0; i < n; ++i) {
    const auto degree_plus_one = static_cast<double>(g.neighbors(i).size() + 1);
    for (ClientId j : g.closed_neighborhood(i)) {
      const double pj = g.probability(j);
      if (pj > 0.0) {
        a(j, i) = 1.0 / (degree_plus_one * pj);
      }
    }
  }
  return a;
}

UnbiasednessReport check_unbiasedness(const ConnectivityGraph& g, const RelayWeights& a, double tol) {
  if (tol < 0.0) {
    throw std::invalid_argument("unbiasedness tolerance must be nonnegative");
  }
  UnbiasednessReport report;
  const auto n = g.size();
  if (a.size() != n) {
    report.shape_ok = false;
    return report;
  }
  report.columns.resize(n);
  for (ClientId i = 0; i < n; ++i) {
    double expected_weight = 0.0;
    for (ClientId j = 0; j < n; ++j) {
      const double w = a(j, i);
      if (!g.in_closed_neighborhood(j, i)) {
        if (w != 0.0) {
          report.support_violations.push_back({j, i, w});
        }
        continue;
      }
      expected_weight += g.probability(j) * w;
    }
    const double residual = std::abs(expected_weight - 1.0);
    report.columns[i] = {residual, residual <= tol};
  }
  return report;
}

double variance_objective(const ConnectivityGraph& g, const RelayWeights& a) {
  const auto n = g.size();
  double s = 0.0;
  for (ClientId i = 0; i < n; ++i) {
    const auto members = g.closed_neighborhood(i);
    for (ClientId l = 0; l < n; ++l) {
      for (ClientId j : members) {
        if (!g.in_closed_neighborhood(j, l)) {
          continue;
        }
        const double pj = g.probability(j);
        s += pj * (1.0 - pj) * a(j, i) * a(j, l);
      }
    }
  }
  return s;
}

ColumnSubproblem make_column_subproblem(const ConnectivityGraph& g, const RelayWeights& a, ClientId source) {
  ColumnSubproblem sub;
  sub.source = source;
  const auto n = g.size();
  for (ClientId j : g.closed_neighborhood(source)) {
    const double pj = g.probability(j);
    sub.pbar = std::max(sub.pbar, pj);
    if (pj <= 0.0) {
      continue;
    }
    double beta = 0.0;
    for (ClientId l = 0; l < n; ++l) {
      if (l != source && g.in_closed_neighborhood(j, l)) {
        beta += a(j, l);
      }
    }
    sub.members.push_back(j);
    sub.beta.push_back(beta);
    sub.p.push_back(pj);
  }
  return sub;
}

double lambda_residual_target(const ColumnSubproblem& sub, double lambda) {
  return column_sum(sub, lambda, nullptr);
}

double bisect_lambda(const ColumnSubproblem& sub, double tol, const BisectionObserver& observer) {
  if (!(tol > 0.0)) {
    throw std::invalid_argument("bisection tolerance must be positive");
  }
  if (sub.members.empty()) {
    throw std::invalid_argument("column subproblem has no members");
  }
  for (double pj : sub.p) {
    if (!(pj > 0.0 && pj < 1.0)) {
      throw std::invalid_argument("bisection requires every member probability in (0,1)");
    }
  }

  double lo = 0.0;
  double hi = 1.0;
  double h_hi = lambda_residual_target(sub, hi);
  for (int k = 0; h_hi < 1.0; ++k) {
    if (k == kMaxBracketDoublings) {
      throw BisectionError(sub.source, "bracket expansion exceeded " + std::to_string(kMaxBracketDoublings) +
                                           " doublings for column " + std::to_string(sub.source));
    }
    lo = hi;
    hi *= 2.0;
    h_hi = lambda_residual_target(sub, hi);
  }
  if (std::abs(h_hi - 1.0) <= tol) {
    return hi;
  }

  for (int step = 0; step < kMaxBisectionSteps; ++step) {
    if (observer) {
      observer(lo, hi);
    }
    const double mid = 0.5 * (lo + hi);
    const double h_mid = lambda_residual_target(sub, mid);
    if (std::abs(h_mid - 1.0) <= tol) {
      return mid;
    }
    if (h_mid < 1.0) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (!(lo < mid || mid < hi)) {
      break;
    }
  }
  throw BisectionError(sub.source, "bisection did not reach tolerance for column " + std::to_string(sub.source));
}

Eigen::VectorXd solve_column(const ConnectivityGraph& g, const RelayWeights& prev, ClientId source,
                             double bisect_tol) {
  const auto n = g.size();
  Eigen::VectorXd column = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  const auto members = g.closed_neighborhood(source);

  double pbar = 0.0;
  std::size_t perfect = 0;
  for (ClientId j : members) {
    const double pj = g.probability(j);
    pbar = std::max(pbar, pj);
    if (pj == 1.0) {
      ++perfect;
    }
  }
  if (pbar <= 0.0) {
    throw InfeasibleClientsError({source});
  }

  if (perfect > 0) {
    // Perfectly connected members carry the whole column at zero variance.
    for (ClientId j : members) {
      if (g.probability(j) == 1.0) {
        column(static_cast<Eigen::Index>(j)) = 1.0 / static_cast<double>(perfect);
      }
    }
    return column;
  }

  const auto sub = make_column_subproblem(g, prev, source);
  double lambda = bisect_lambda(sub, bisect_tol);
  lambda = refine_lambda(sub, lambda);

  std::vector<double> values(sub.members.size());
  column_sum(sub, lambda, &values);
  for (std::size_t k = 0; k < sub.members.size(); ++k) {
    column(static_cast<Eigen::Index>(sub.members[k])) = values[k];
  }
  return column;
}

OptimizationResult optimize_weights(const ConnectivityGraph& g, const OptimizerOptions& opts) {
  if (auto bad = unreachable_clients(g); !bad.empty()) {
    throw InfeasibleClientsError(std::move(bad));
  }
  OptimizationResult result;
  result.weights = initial_weights(g);
  result.s_history.push_back(variance_objective(g, result.weights));

  const auto n = g.size();
  auto& a = result.weights;
  for (std::size_t sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    for (ClientId i = 0; i < n; ++i) {
      const Eigen::VectorXd column = solve_column(g, a, i, opts.bisect_tol);
      for (ClientId j = 0; j < n; ++j) {
        a(j, i) = column(static_cast<Eigen::Index>(j));
      }
    }
    ++result.sweeps;
    const double previous = result.s_history.back();
    const double current = variance_objective(g, a);
    result.s_history.push_back(current);
    if (previous == 0.0 || previous - current < opts.stall_tol * previous) {
      break;
    }
  }
  return result;
}

}  // namespace colrel
