#include "colrel/objectives.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace colrel {

QuadraticEnsemble::QuadraticEnsemble(std::vector<Eigen::MatrixXd> curvature, std::vector<Eigen::VectorXd> targets,
                                     double mu, double L, double sigma)
    : d_(0), mu_(mu), l_(L), sigma_(sigma), q_(std::move(curvature)), b_(std::move(targets)) {
  if (!(mu > 0.0)) {
    throw ObjectiveError("strong convexity constant mu must be positive");
  }
  if (!(mu <= L)) {
    throw ObjectiveError("mu must not exceed the smoothness constant L");
  }
  if (!(sigma >= 0.0)) {
    throw ObjectiveError("sigma must be nonnegative");
  }
  if (q_.empty() || q_.size() != b_.size()) {
    throw ObjectiveError("need one curvature matrix and one target per client");
  }
  d_ = static_cast<std::size_t>(b_.front().size());
  if (d_ == 0) {
    throw ObjectiveError("model dimension must be positive");
  }

  const auto d = static_cast<Eigen::Index>(d_);
  const double slack = 1e-9 * L;
  Eigen::MatrixXd q_sum = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd qb_sum = Eigen::VectorXd::Zero(d);
  for (std::size_t i = 0; i < q_.size(); ++i) {
    const auto& q = q_[i];
    if (q.rows() != d || q.cols() != d || b_[i].size() != d) {
      throw ObjectiveError("client " + std::to_string(i) + " has inconsistent dimensions");
    }
    if (!q.isApprox(q.transpose(), 1e-12)) {
      throw ObjectiveError("curvature of client " + std::to_string(i) + " is not symmetric");
    }
    const Eigen::VectorXd eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(q, Eigen::EigenvaluesOnly).eigenvalues();
    if (eig.minCoeff() < mu - slack || eig.maxCoeff() > L + slack) {
      throw ObjectiveError("curvature of client " + std::to_string(i) + " has spectrum outside [mu, L]");
    }
    q_sum += q;
    qb_sum += q * b_[i];
  }
  x_star_ = q_sum.ldlt().solve(qb_sum);
}

void QuadraticEnsemble::check_point(const Eigen::VectorXd& x) const {
  if (static_cast<std::size_t>(x.size()) != d_) {
    throw ObjectiveError("point has dimension " + std::to_string(x.size()) + ", expected " + std::to_string(d_));
  }
}

double QuadraticEnsemble::loss(std::size_t i, const Eigen::VectorXd& x) const {
  check_point(x);
  const Eigen::VectorXd r = x - b_.at(i);
  return 0.5 * r.dot(q_[i] * r);
}

double QuadraticEnsemble::global_loss(const Eigen::VectorXd& x) const {
  double total = 0.0;
  for (std::size_t i = 0; i < q_.size(); ++i) {
    total += loss(i, x);
  }
  return total / static_cast<double>(q_.size());
}

Eigen::VectorXd QuadraticEnsemble::gradient(std::size_t i, const Eigen::VectorXd& x) const {
  check_point(x);
  return q_.at(i) * (x - b_[i]);
}

Eigen::VectorXd QuadraticEnsemble::global_gradient(const Eigen::VectorXd& x) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d_));
  for (std::size_t i = 0; i < q_.size(); ++i) {
    g += gradient(i, x);
  }
  return g / static_cast<double>(q_.size());
}

Eigen::VectorXd QuadraticEnsemble::stochastic_gradient(std::size_t i, const Eigen::VectorXd& x, Rng& rng) const {
  Eigen::VectorXd g = gradient(i, x);
  if (sigma_ > 0.0) {
    std::normal_distribution<double> noise(0.0, sigma_ / std::sqrt(static_cast<double>(d_)));
    for (Eigen::Index k = 0; k < g.size(); ++k) {
      g(k) += noise(rng);
    }
  }
  return g;
}

double QuadraticEnsemble::suboptimality(const Eigen::VectorXd& x) const {
  check_point(x);
  return (x - x_star_).squaredNorm();
}

QuadraticEnsemble make_quadratic_ensemble(const EnsembleSpec& spec) {
  if (!(spec.mu > 0.0)) {
    throw ObjectiveError("strong convexity constant mu must be positive");
  }
  if (!(spec.mu <= spec.L)) {
    throw ObjectiveError("mu must not exceed the smoothness constant L");
  }
  if (spec.n == 0 || spec.d == 0) {
    throw ObjectiveError("ensemble needs n >= 1 clients and dimension d >= 1");
  }
  if (!(spec.heterogeneity >= 0.0)) {
    throw ObjectiveError("heterogeneity must be nonnegative");
  }

  Rng rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> spectrum(spec.mu, spec.L);
  const auto d = static_cast<Eigen::Index>(spec.d);
  auto gaussian_vector = [&] {
    Eigen::VectorXd v(d);
    for (Eigen::Index k = 0; k < d; ++k) {
      v(k) = normal(rng);
    }
    return v;
  };

  const Eigen::VectorXd b0 = gaussian_vector();
  std::vector<Eigen::MatrixXd> q;
  std::vector<Eigen::VectorXd> b;
  q.reserve(spec.n);
  b.reserve(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    Eigen::MatrixXd g(d, d);
    for (Eigen::Index c = 0; c < d; ++c) {
      g.col(c) = gaussian_vector();
    }
    const Eigen::MatrixXd basis = g.householderQr().householderQ();
    Eigen::VectorXd eig(d);
    for (Eigen::Index k = 0; k < d; ++k) {
      eig(k) = spectrum(rng);
    }
    Eigen::MatrixXd qi = basis * eig.asDiagonal() * basis.transpose();
    qi = 0.5 * (qi + qi.transpose()).eval();
    q.push_back(std::move(qi));

    Eigen::VectorXd u = gaussian_vector();
    u /= u.norm();
    b.push_back(b0 + spec.heterogeneity * u);
  }
  return QuadraticEnsemble(std::move(q), std::move(b), spec.mu, spec.L, spec.sigma);
}

}  // namespace colrel
