#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace colrel {

using Rng = std::mt19937_64;

class ObjectiveError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct EnsembleSpec {
  std::size_t n = 10;
  std::size_t d = 20;
  double mu = 0.5;
  double L = 5.0;
  double heterogeneity = 0.0;
  double sigma = 1.0;
  std::uint64_t seed = 0;
};

/// n local quadratics f_i(x) = 1/2 (x - b_i)^T Q_i (x - b_i) with
/// mu I <= Q_i <= L I, plus an isotropic Gaussian gradient-noise oracle with
/// E||noise||^2 = sigma^2.
class QuadraticEnsemble {
 public:
  /// Validates every Q_i against [mu, L] and solves for the global minimizer.
  QuadraticEnsemble(std::vector<Eigen::MatrixXd> curvature, std::vector<Eigen::VectorXd> targets, double mu,
                    double L, double sigma);

  [[nodiscard]] std::size_t clients() const noexcept { return q_.size(); }
  [[nodiscard]] std::size_t dim() const noexcept { return d_; }
  [[nodiscard]] double mu() const noexcept { return mu_; }
  [[nodiscard]] double smoothness() const noexcept { return l_; }
  [[nodiscard]] double sigma() const noexcept { return sigma_; }
  [[nodiscard]] const Eigen::MatrixXd& curvature(std::size_t i) const { return q_.at(i); }
  [[nodiscard]] const Eigen::VectorXd& target(std::size_t i) const { return b_.at(i); }
  [[nodiscard]] const Eigen::VectorXd& x_star() const noexcept { return x_star_; }

  [[nodiscard]] double loss(std::size_t i, const Eigen::VectorXd& x) const;
  [[nodiscard]] double global_loss(const Eigen::VectorXd& x) const;

  [[nodiscard]] Eigen::VectorXd gradient(std::size_t i, const Eigen::VectorXd& x) const;
  [[nodiscard]] Eigen::VectorXd global_gradient(const Eigen::VectorXd& x) const;

  /// gradient(i, x) plus N(0, sigma^2/d I). Consumes exactly d normals from
  /// `rng` when sigma > 0 and none otherwise.
  [[nodiscard]] Eigen::VectorXd stochastic_gradient(std::size_t i, const Eigen::VectorXd& x, Rng& rng) const;

  /// ||x - x_star||^2
  [[nodiscard]] double suboptimality(const Eigen::VectorXd& x) const;

 private:
  void check_point(const Eigen::VectorXd& x) const;

  std::size_t d_;
  double mu_;
  double l_;
  double sigma_;
  std::vector<Eigen::MatrixXd> q_;
  std::vector<Eigen::VectorXd> b_;
  Eigen::VectorXd x_star_;
};

/// Random ensemble: Q_i = U_i diag(eig) U_i^T with eig ~ U[mu, L] and U_i a
/// random orthogonal basis; b_i = b0 + heterogeneity * u_i with unit-norm
/// u_i and b0 standard normal. Deterministic in spec.seed.
[[nodiscard]] QuadraticEnsemble make_quadratic_ensemble(const EnsembleSpec& spec);

}  // namespace colrel
