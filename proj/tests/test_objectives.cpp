#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "colrel/objectives.hpp"

using namespace colrel;
using doctest::Approx;

namespace {

QuadraticEnsemble scalar_ensemble(std::vector<double> q, std::vector<double> b, double sigma = 0.0) {
  std::vector<Eigen::MatrixXd> qs;
  std::vector<Eigen::VectorXd> bs;
  for (std::size_t i = 0; i < q.size(); ++i) {
    qs.push_back(Eigen::MatrixXd::Constant(1, 1, q[i]));
    bs.push_back(Eigen::VectorXd::Constant(1, b[i]));
  }
  const double lo = *std::min_element(q.begin(), q.end());
  const double hi = *std::max_element(q.begin(), q.end());
  return QuadraticEnsemble(qs, bs, lo, hi, sigma);
}

Eigen::VectorXd random_point(Rng& rng, std::size_t d, double scale = 3.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Eigen::VectorXd x(static_cast<Eigen::Index>(d));
  for (auto& v : x) {
    v = normal(rng);
  }
  return x;
}

}  // namespace

TEST_CASE("make_quadratic_ensemble") {
  SUBCASE("identical identity quadratics have x_star = b0") {
    const Eigen::VectorXd b0 = Eigen::VectorXd::LinSpaced(4, -1.0, 2.0);
    QuadraticEnsemble ens(std::vector<Eigen::MatrixXd>(3, Eigen::MatrixXd::Identity(4, 4)),
                          std::vector<Eigen::VectorXd>(3, b0), 1.0, 1.0, 0.0);
    CHECK((ens.x_star() - b0).norm() == 0.0);
  }
  SUBCASE("scalar weighted mean") {
    const auto ens = scalar_ensemble({1.0, 3.0}, {0.0, 4.0});
    CHECK(ens.x_star()(0) == Approx(3.0).epsilon(1e-15));
  }
  SUBCASE("zero heterogeneity shares one target") {
    const auto ens = make_quadratic_ensemble({.n = 5, .d = 6, .heterogeneity = 0.0, .seed = 3});
    for (std::size_t i = 1; i < 5; ++i) {
      CHECK(ens.target(i) == ens.target(0));
    }
  }
  SUBCASE("x_star agrees with gradient descent on the average") {
    const auto ens = make_quadratic_ensemble({.n = 10, .d = 20, .mu = 0.5, .L = 5.0, .heterogeneity = 2.0, .seed = 7});
    Eigen::VectorXd x = Eigen::VectorXd::Zero(20);
    const double step = 1.0 / ens.smoothness();
    for (int it = 0; it < 100000; ++it) {
      Eigen::VectorXd g = Eigen::VectorXd::Zero(20);
      for (std::size_t i = 0; i < 10; ++i) {
        g += ens.curvature(i) * (x - ens.target(i));
      }
      g /= 10.0;
      if (g.norm() <= 1e-12) {
        break;
      }
      x -= step * g;
    }
    CHECK((x - ens.x_star()).norm() <= 1e-10);
    CHECK(ens.suboptimality(x) <= 1e-20);
  }
  SUBCASE("targets spread by exactly the heterogeneity") {
    const auto a = make_quadratic_ensemble({.n = 4, .d = 5, .heterogeneity = 0.0, .seed = 11});
    const auto b = make_quadratic_ensemble({.n = 4, .d = 5, .heterogeneity = 2.5, .seed = 11});
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK((b.target(i) - a.target(i)).norm() == Approx(2.5).epsilon(1e-12));
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS((void)make_quadratic_ensemble({.mu = 6.0, .L = 5.0}), ObjectiveError);
    CHECK_THROWS_AS((void)make_quadratic_ensemble({.mu = 0.0}), ObjectiveError);
    CHECK_THROWS_AS((void)make_quadratic_ensemble({.mu = -1.0}), ObjectiveError);
    CHECK_THROWS_AS((void)make_quadratic_ensemble({.d = 0}), ObjectiveError);
    CHECK_THROWS_AS((void)make_quadratic_ensemble({.heterogeneity = -1.0}), ObjectiveError);
    CHECK_THROWS_AS((void)scalar_ensemble({1.0, 3.0}, {0.0, 0.0}).curvature(2), std::out_of_range);
    // Spectrum outside the declared [mu, L].
    CHECK_THROWS_AS(QuadraticEnsemble({Eigen::MatrixXd::Constant(1, 1, 7.0)}, {Eigen::VectorXd::Zero(1)}, 1.0, 5.0, 0.0),
                    ObjectiveError);
  }
  SUBCASE("determinism") {
    const EnsembleSpec spec{.n = 6, .d = 8, .heterogeneity = 1.0, .seed = 42};
    const auto a = make_quadratic_ensemble(spec);
    const auto b = make_quadratic_ensemble(spec);
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(a.curvature(i) == b.curvature(i));
      CHECK(a.target(i) == b.target(i));
    }
    CHECK(a.x_star() == b.x_star());
  }
}

TEST_CASE("gradient") {
  const auto ens = make_quadratic_ensemble({.n = 4, .d = 7, .heterogeneity = 1.5, .seed = 2});
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(ens.gradient(i, ens.target(i)).isZero(0.0));
  }
  const auto scalar = scalar_ensemble({2.0}, {1.0});
  CHECK(scalar.gradient(0, Eigen::VectorXd::Constant(1, 3.0))(0) == 4.0);

  Rng rng(5);
  for (int t = 0; t < 100; ++t) {
    const auto i = static_cast<std::size_t>(t) % 4;
    const Eigen::VectorXd x = random_point(rng, 7);
    const Eigen::VectorXd g = ens.gradient(i, x);
    const double h = 1e-5;
    Eigen::VectorXd fd(7);
    for (Eigen::Index k = 0; k < 7; ++k) {
      Eigen::VectorXd xp = x;
      Eigen::VectorXd xm = x;
      xp(k) += h;
      xm(k) -= h;
      fd(k) = (ens.loss(i, xp) - ens.loss(i, xm)) / (2.0 * h);
    }
    CHECK((fd - g).norm() <= 1e-6 * std::max(1.0, g.norm()));
  }
}

TEST_CASE("stochastic_gradient") {
  SUBCASE("noise-free oracle is exact and draws nothing") {
    const auto ens = make_quadratic_ensemble({.n = 3, .d = 4, .sigma = 0.0, .seed = 1});
    Rng rng(0);
    Rng untouched(0);
    const Eigen::VectorXd x = Eigen::VectorXd::Ones(4);
    CHECK(ens.stochastic_gradient(1, x, rng) == ens.gradient(1, x));
    CHECK(rng == untouched);
  }
  SUBCASE("Monte-Carlo mean and second moment") {
    const std::size_t d = 20;
    const double sigma = 1.3;
    const auto ens = make_quadratic_ensemble({.n = 2, .d = d, .sigma = sigma, .seed = 9});
    Rng rng(77);
    const Eigen::VectorXd x = random_point(rng, d);
    const Eigen::VectorXd exact = ens.gradient(0, x);
    const int draws = 100000;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
    double second = 0.0;
    for (int k = 0; k < draws; ++k) {
      const Eigen::VectorXd xi = ens.stochastic_gradient(0, x, rng) - exact;
      sum += xi;
      second += xi.squaredNorm();
    }
    const double se = sigma / std::sqrt(static_cast<double>(d)) / std::sqrt(static_cast<double>(draws));
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(d); ++k) {
      CHECK(std::abs(sum(k) / draws) <= 4.0 * se);
    }
    CHECK(second / draws == Approx(sigma * sigma).epsilon(0.02));
  }
}

TEST_CASE("suboptimality") {
  const auto ens = make_quadratic_ensemble({.n = 5, .d = 9, .heterogeneity = 3.0, .seed = 4});
  CHECK(ens.suboptimality(ens.x_star()) == 0.0);
  const auto scalar = scalar_ensemble({1.0, 3.0}, {0.0, 4.0});
  CHECK(scalar.suboptimality(Eigen::VectorXd::Constant(1, 5.0)) == Approx(4.0).epsilon(1e-15));

  // Recompute x_star independently through a normal-equations solve.
  Eigen::MatrixXd sum_q = Eigen::MatrixXd::Zero(9, 9);
  Eigen::VectorXd sum_qb = Eigen::VectorXd::Zero(9);
  for (std::size_t i = 0; i < 5; ++i) {
    sum_q += ens.curvature(i);
    sum_qb += ens.curvature(i) * ens.target(i);
  }
  const Eigen::VectorXd x_star = sum_q.fullPivLu().solve(sum_qb);
  Rng rng(8);
  for (int t = 0; t < 20; ++t) {
    const Eigen::VectorXd x = random_point(rng, 9);
    CHECK(ens.suboptimality(x) == Approx((x - x_star).squaredNorm()).epsilon(1e-10));
  }
  CHECK_THROWS_AS((void)ens.suboptimality(Eigen::VectorXd::Zero(3)), ObjectiveError);
}

TEST_CASE("smoothness and strong-convexity certificates") {
  const double mu = 0.5;
  const double L = 5.0;
  const auto ens = make_quadratic_ensemble({.n = 10, .d = 20, .mu = mu, .L = L, .heterogeneity = 2.0, .seed = 13});
  Rng rng(21);
  for (int t = 0; t < 1000; ++t) {
    const auto i = static_cast<std::size_t>(t) % 10;
    const Eigen::VectorXd x = random_point(rng, 20);
    const Eigen::VectorXd y = random_point(rng, 20);
    const double inner = (ens.gradient(i, x) - ens.gradient(i, y)).dot(x - y);
    const double dist = (x - y).squaredNorm();
    CHECK(mu * dist <= inner * (1.0 + 1e-12));
    CHECK(inner <= L * dist * (1.0 + 1e-12));
  }
  CHECK(ens.global_gradient(ens.x_star()).norm() <= 1e-10);
}
