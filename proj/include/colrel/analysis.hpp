#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "colrel/objectives.hpp"
#include "colrel/protocol.hpp"
#include "colrel/topology.hpp"
#include "colrel/weights.hpp"

namespace colrel {

/// Constants of the expected-suboptimality bound for ColRel with
/// eta_r = 4 / (mu (r T + 1)).
struct TheoremConstants {
  double B = 0.0;
  double C1 = 0.0;
  double C2 = 0.0;
  double C3 = 0.0;
  double r0 = 0.0;
  double S = 0.0;

  double mu = 0.0;
  double L = 0.0;
  double sigma = 0.0;
  std::size_t n = 0;
  std::size_t local_steps = 0;
};

[[nodiscard]] TheoremConstants theorem_constants(double mu, double L, double sigma, std::size_t n,
                                                 std::size_t local_steps, double S);

/// Same, with S = variance_objective(g, a) and mu, L, sigma from the ensemble.
[[nodiscard]] TheoremConstants theorem_constants(const QuadraticEnsemble& ens, const ConnectivityGraph& g,
                                                 const RelayWeights& a, std::size_t local_steps);

/// Right-hand side of the bound on E||x^{(r+1)} - x*||^2. Throws for r < r0.
[[nodiscard]] double theorem_bound(const TheoremConstants& c, double init_gap, double r);

class SummaryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct SummaryRow {
  std::string variant;
  std::size_t r = 0;
  std::size_t seeds = 0;
  double mean = 0.0;
  double stderr_ = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct SlopeFit {
  std::string variant;
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t points = 0;
};

/// Inclusive round window for the log-log fit. Rounds are fit as
/// log(r + 1) because the record at r describes x^{(r+1)}.
struct TailWindow {
  std::size_t r_min = 0;
  std::size_t r_max = 0;
};

struct Summary {
  std::vector<SummaryRow> rows;  // ordered by (variant, r)
  std::vector<SlopeFit> slopes;

  [[nodiscard]] const SummaryRow& at(const std::string& variant, std::size_t r) const;
  [[nodiscard]] const SlopeFit& slope(const std::string& variant) const;
};

/// Cross-seed mean, standard error and 95% normal CI per (variant, r), plus a
/// least-squares slope of log(mean) on log(r + 1) over `window` (or the last
/// decade of recorded rounds when absent). Every seed of a variant must
/// report the same set of rounds.
[[nodiscard]] Summary summarize(std::span<const RoundTrace> traces, std::optional<TailWindow> window = std::nullopt);

/// Least-squares slope of log(y) against log(x).
[[nodiscard]] SlopeFit fit_log_log(std::span<const double> x, std::span<const double> y);

}  // namespace colrel
