#include "colrel/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace colrel {

TheoremConstants theorem_constants(double mu, double L, double sigma, std::size_t n, std::size_t local_steps,
                                   double S) {
  if (!(mu > 0.0)) {
    throw std::invalid_argument("mu must be positive");
  }
  if (n == 0 || local_steps == 0) {
    throw std::invalid_argument("n and T must be positive");
  }
  if (!(S >= 0.0)) {
    throw std::invalid_argument("S must be nonnegative");
  }
  constexpr double e = std::numbers::e;
  const double nn = static_cast<double>(n);
  const double T = static_cast<double>(local_steps);
  const double L2 = L * L;
  const double s2 = sigma * sigma;
  const double mu2 = mu * mu;

  TheoremConstants c;
  c.mu = mu;
  c.L = L;
  c.sigma = sigma;
  c.n = n;
  c.local_steps = local_steps;
  c.S = S;
  c.B = 2.0 * L2 * S / (nn * nn);
  c.C1 = 16.0 / mu2 * (2.0 * s2 / (nn * nn)) * S;
  c.C2 = 16.0 / mu2 * L2 * (s2 / nn) * e;
  c.C3 = 256.0 / (mu2 * mu2) * (L2 * s2 * e + 2.0 * L2 * s2 * e * S / (nn * nn));
  c.r0 = std::max({L / mu, 4.0 * (c.B / mu2 + 1.0), 1.0 / T, 4.0 * nn / (mu2 * T)});
  return c;
}

TheoremConstants theorem_constants(const QuadraticEnsemble& ens, const ConnectivityGraph& g, const RelayWeights& a,
                                   std::size_t local_steps) {
  return theorem_constants(ens.mu(), ens.smoothness(), ens.sigma(), g.size(), local_steps,
                           variance_objective(g, a));
}

double theorem_bound(const TheoremConstants& c, double init_gap, double r) {
  if (r < c.r0) {
    throw std::domain_error("bound only holds for r >= r0 = " + std::to_string(c.r0));
  }
  const double T = static_cast<double>(c.local_steps);
  const double denom = r * T + 1.0;
  return (c.r0 * T + 1.0) / (denom * denom) * init_gap + c.C1 * T / denom + c.C2 * (T - 1.0) * (T - 1.0) / denom +
         c.C3 * T / (denom * denom);
}

SlopeFit fit_log_log(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw SummaryError("log-log fit needs at least two paired points");
  }
  const double m = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(x[k] > 0.0) || !(y[k] > 0.0)) {
      throw SummaryError("log-log fit needs strictly positive values");
    }
    const double lx = std::log(x[k]);
    const double ly = std::log(y[k]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double denom = m * sxx - sx * sx;
  if (denom == 0.0) {
    throw SummaryError("log-log fit is degenerate (all x equal)");
  }
  SlopeFit fit;
  fit.slope = (m * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / m;
  fit.points = x.size();
  return fit;
}

const SummaryRow& Summary::at(const std::string& variant, std::size_t r) const {
  for (const auto& row : rows) {
    if (row.variant == variant && row.r == r) {
      return row;
    }
  }
  throw SummaryError("no summary row for " + variant + " at r=" + std::to_string(r));
}

const SlopeFit& Summary::slope(const std::string& variant) const {
  for (const auto& s : slopes) {
    if (s.variant == variant) {
      return s;
    }
  }
  throw SummaryError("no slope fit for " + variant);
}

Summary summarize(std::span<const RoundTrace> traces, std::optional<TailWindow> window) {
  if (traces.empty()) {
    throw SummaryError("no traces to summarize");
  }
  // variant -> r -> seed -> value
  std::map<std::string, std::map<std::size_t, std::map<std::uint64_t, double>>> grouped;
  for (const auto& t : traces) {
    auto& cell = grouped[t.variant][t.r];
    if (!cell.emplace(t.seed, t.suboptimality).second) {
      throw SummaryError("duplicate record for " + t.variant + " seed " + std::to_string(t.seed) + " r=" +
                         std::to_string(t.r));
    }
  }

  Summary out;
  constexpr double z95 = 1.959963984540054;
  for (const auto& [variant, by_round] : grouped) {
    std::set<std::uint64_t> seeds;
    for (const auto& [seed, v] : by_round.begin()->second) {
      seeds.insert(seed);
    }
    std::vector<double> rs;
    std::vector<double> means;
    for (const auto& [r, by_seed] : by_round) {
      std::set<std::uint64_t> these;
      for (const auto& [seed, v] : by_seed) {
        these.insert(seed);
      }
      if (these != seeds) {
        throw SummaryError("variant " + variant + " has inconsistent seeds at r=" + std::to_string(r));
      }
      const double k = static_cast<double>(by_seed.size());
      double mean = 0.0;
      for (const auto& [seed, v] : by_seed) {
        mean += v;
      }
      mean /= k;
      double se = 0.0;
      if (by_seed.size() > 1) {
        double ss = 0.0;
        for (const auto& [seed, v] : by_seed) {
          ss += (v - mean) * (v - mean);
        }
        se = std::sqrt(ss / (k - 1.0)) / std::sqrt(k);
      }
      out.rows.push_back({variant, r, by_seed.size(), mean, se, mean - z95 * se, mean + z95 * se});
      rs.push_back(static_cast<double>(r));
      means.push_back(mean);
    }

    TailWindow w;
    if (window) {
      w = *window;
    } else {
      const auto last = static_cast<std::size_t>(rs.back());
      w = {(last + 1) / 10, last};
    }
    std::vector<double> xs;
    std::vector<double> ys;
    for (std::size_t k = 0; k < rs.size(); ++k) {
      const auto r = static_cast<std::size_t>(rs[k]);
      if (r >= w.r_min && r <= w.r_max && means[k] > 0.0) {
        xs.push_back(rs[k] + 1.0);
        ys.push_back(means[k]);
      }
    }
    if (xs.size() >= 2) {
      auto fit = fit_log_log(xs, ys);
      fit.variant = variant;
      out.slopes.push_back(fit);
    }
  }
  return out;
}

}  // namespace colrel
