#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>
#include <numeric>

#include "doctest.h"
#include "dualiv/dgp.hpp"
#include "dualiv/error.hpp"
#include "dualiv/estimator.hpp"
#include "dualiv/rng.hpp"

using namespace dualiv;

namespace {

// X = [0, 1], Y = [0, 1], Z = [0, 1].
Dataset toy() {
  Dataset d{PointMatrix(2, 1), Eigen::VectorXd(2), PointMatrix(2, 1), std::nullopt};
  d.x << 0, 1;
  d.y << 0, 1;
  d.z << 0, 1;
  return d;
}

Dataset smooth_data(std::uint64_t seed, Eigen::Index n) {
  Rng rng(seed);
  Dataset d{PointMatrix(n, 1), Eigen::VectorXd(n), PointMatrix(n, 1), std::nullopt};
  for (Eigen::Index i = 0; i < n; ++i) {
    const double z = rng.uniform(-2, 2);
    const double h = rng.normal();
    d.z(i, 0) = z;
    d.x(i, 0) = z + 0.5 * h + 0.1 * rng.normal();
    d.y(i) = std::sin(d.x(i, 0)) + 0.5 * h + 0.1 * rng.normal();
  }
  return d;
}

double rel_inf(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).lpNorm<Eigen::Infinity>() / b.lpNorm<Eigen::Infinity>();
}

const KernelSpec kLin = KernelSpec::linear();
const KernelSpec kRbf1 = KernelSpec::rbf({0.8});
const KernelSpec kRbf2 = KernelSpec::rbf({0.7, 0.9});
// Narrow enough that K is well conditioned on smooth_data, so beta itself is stable.
const KernelSpec kNarrow = KernelSpec::rbf({0.05});

}  // namespace

TEST_CASE("fit on the toy problem") {
  // K = diag(0, 1), L = diag(0, 2), M = diag(0, 10/11); the first row of the
  // system is identically zero, so the minimum-norm solution has beta_1 = 0.
  const DualIVModel m = fit(toy(), kLin, kLin, 0.1, 0.1);
  CHECK(m.beta()(0) == doctest::Approx(0.0));
  CHECK(m.beta()(1) == doctest::Approx(10.0 / 12.2).epsilon(1e-12));

  PointMatrix half(1, 1);
  half << 0.5;
  CHECK(predict(m, half)(0) == doctest::Approx(0.5 * 10.0 / 12.2).epsilon(1e-12));
  CHECK((predict(m, toy().x) - m.k_gram() * m.beta()).norm() < 1e-15);
}

TEST_CASE("fit argument errors") {
  CHECK_THROWS_AS(fit(toy(), kLin, kLin, 0.0, 0.1), ArgumentError);
  CHECK_THROWS_AS(fit(toy(), kLin, kLin, 0.1, -1.0), ArgumentError);
  CHECK_THROWS_AS(fit(toy().slice(0, 1), kLin, kLin, 0.1, 0.1), ArgumentError);
  CHECK_THROWS_AS(fit(toy(), KernelSpec::rbf({1, 1}), kLin, 0.1, 0.1), ArgumentError);
  const DualIVModel m = fit(toy(), kLin, kLin, 0.1, 0.1);
  CHECK_THROWS_AS(predict(m, PointMatrix::Zero(3, 2)), ArgumentError);
}

TEST_CASE("zero outcome gives zero coefficients and predictions") {
  Dataset d = smooth_data(1, 15);
  d.y.setZero();
  const DualIVModel m = fit(d, kRbf1, kRbf2, 1e-2, 1e-2);
  CHECK(m.beta().cwiseAbs().maxCoeff() == 0.0);
  CHECK(predict(m, d.x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("fitted coefficients satisfy the defining system") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Dataset d = smooth_data(seed, 25);
    const double l1 = 1e-2, l2 = 1e-2;
    const DualIVModel m = fit(d, kRbf1, kRbf2, l1, l2);
    const Eigen::MatrixXd& k = m.k_gram();
    const Eigen::MatrixXd& l = m.l_gram();
    const double n = 25.0;
    const Eigen::MatrixXd mm =
        k * (l + n * l1 * Eigen::MatrixXd::Identity(25, 25)).ldlt().solve(l);
    const Eigen::VectorXd my = mm * d.y;
    const Eigen::VectorXd lhs = (mm * k + n * l2 * k) * m.beta();
    CHECK((lhs - my).lpNorm<Eigen::Infinity>() / my.lpNorm<Eigen::Infinity>() <= 1e-8);
  }
}

TEST_CASE("scale equivariance and shrinkage in lambda2") {
  const Dataset d = smooth_data(4, 30);
  Dataset scaled = d;
  scaled.y *= 3.0;
  // l is evaluated on W = (y, z); widen the y bandwidth with the scale so L is unchanged.
  const DualIVModel a = fit(d, kNarrow, kRbf2, 1e-2, 1e-2);
  const DualIVModel b = fit(scaled, kNarrow, KernelSpec::rbf({0.7 * 3.0, 0.9}), 1e-2, 1e-2);
  CHECK(rel_inf(b.beta(), 3.0 * a.beta()) < 1e-10);
  CHECK(rel_inf(predict(b, d.x), 3.0 * predict(a, d.x)) < 1e-10);

  double prev = std::numeric_limits<double>::infinity();
  for (double l2 : {1e-3, 1e-2, 1e-1}) {
    const double norm = fit(d, kNarrow, kRbf2, 1e-2, l2).beta().norm();
    CHECK(norm <= prev);
    prev = norm;
  }
}

TEST_CASE("predictions are invariant to permuting training rows") {
  const Dataset d = smooth_data(9, 30);
  std::vector<Eigen::Index> order(30);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::reverse(order.begin(), order.begin() + 17);
  PointMatrix test(7, 1);
  test << -2, -1.2, -0.3, 0, 0.4, 1.1, 2;
  const auto a = predict(fit(d, kNarrow, kRbf2, 1e-2, 1e-2), test);
  const auto b = predict(fit(d.permuted(order), kNarrow, kRbf2, 1e-2, 1e-2), test);
  CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("estimate_dual") {
  // Toy: K beta - y = (0, 10/12.2 - 1); alpha = diag(0.2, 2.2)^{-1} times that.
  const DualIVModel m = fit(toy(), kLin, kLin, 0.1, 0.1);
  const DualEstimate dual = estimate_dual(m, 0.1);
  const double r2 = 10.0 / 12.2 - 1.0;
  CHECK(dual.alpha(0) == doctest::Approx(0.0));
  CHECK(dual.alpha(1) == doctest::Approx(r2 / 2.2).epsilon(1e-12));
  CHECK(dual.ridge == 0.1);

  // Held-out point w = (0.5, 0.5): Ltilde = [0, 1].
  PointMatrix held(1, 2);
  held << 0.5, 0.5;
  CHECK(dual_oos_loss(dual, kLin, held) == doctest::Approx(r2 / 2.2).epsilon(1e-12));
  CHECK_THROWS_AS(dual_oos_loss(dual, kLin, PointMatrix(0, 2)), ArgumentError);
  CHECK_THROWS_AS(dual_oos_loss(dual, kLin, PointMatrix::Zero(1, 3)), ArgumentError);
  CHECK_THROWS_AS(estimate_dual(m, 0.0), ArgumentError);

  const Dataset d = smooth_data(2, 20);
  const DualIVModel fitted = fit(d, kRbf1, kRbf2, 1e-2, 1e-2);
  double prev = std::numeric_limits<double>::infinity();
  for (double lam : {1e-3, 1e-1, 10.0}) {
    const DualEstimate e = estimate_dual(fitted, lam);
    const Eigen::VectorXd r = fitted.k_gram() * fitted.beta() - d.y;
    const Eigen::MatrixXd sys = fitted.l_gram() + 20.0 * lam * Eigen::MatrixXd::Identity(20, 20);
    CHECK((sys * e.alpha - r).lpNorm<Eigen::Infinity>() / r.lpNorm<Eigen::Infinity>() <= 1e-8);
    CHECK(e.alpha.norm() < prev);
    prev = e.alpha.norm();
  }
}

TEST_CASE("estimate_dual is zero when K beta reproduces y") {
  const Dataset d = smooth_data(3, 12);
  const KernelSpec narrow = KernelSpec::rbf({0.05});
  const Eigen::VectorXd beta = gram(narrow, d.x).values.ldlt().solve(d.y);
  const DualIVModel exact(d.x, d.w(), beta, narrow, kRbf2, 1e-2, 1e-2);
  REQUIRE((exact.k_gram() * beta - d.y).norm() < 1e-6);
  CHECK(estimate_dual(exact, 1e-3).alpha.norm() < 1e-5);

  const DualEstimate zero{d.w(), Eigen::VectorXd::Zero(12), 1e-3};
  CHECK(dual_oos_loss(zero, kRbf2, d.w()) == 0.0);
  PointMatrix w1(1, 2);
  w1 << 0.3, -0.2;
  const DualEstimate single{w1, Eigen::VectorXd::Constant(1, 2.0), 1e-3};
  CHECK(dual_oos_loss(single, kRbf2, w1) == 2.0);
}

TEST_CASE("hyper grid validation") {
  CHECK_NOTHROW(HyperGrid::decades().validate());
  CHECK(HyperGrid::decades().lambda1.size() == 10);
  CHECK(HyperGrid::decades().lambda1.front() == doctest::Approx(1e-1));
  CHECK(HyperGrid::decades().lambda1.back() == doctest::Approx(1e-10));
  CHECK_THROWS_AS((HyperGrid{{}, {1.0}}.validate()), ArgumentError);
  CHECK_THROWS_AS((HyperGrid{{1e-2, 1e-1}, {1.0}}.validate()), ArgumentError);
  CHECK_THROWS_AS((HyperGrid{{1e-2, 1e-2}, {1.0}}.validate()), ArgumentError);
  CHECK_THROWS_AS((HyperGrid{{-1.0}, {1.0}}.validate()), ArgumentError);
}

TEST_CASE("select_hyperparams") {
  const Dataset d = smooth_data(5, 40);
  const HyperGrid single{{1e-3}, {1e-2}};
  const Selection s = select_hyperparams(d, kRbf1, kRbf2, single);
  CHECK(s.lambda1 == 1e-3);
  CHECK(s.lambda2 == 1e-2);
  CHECK(s.table.size() == 1);

  const DualIVModel a = fit_auto(d, kRbf1, kRbf2, single);
  const DualIVModel b = fit(d, kRbf1, kRbf2, 1e-3, 1e-2);
  CHECK((a.beta() - b.beta()).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(select_hyperparams(d.slice(0, 3), kRbf1, kRbf2, single), ArgumentError);
}

TEST_CASE("selection prefers a pair whose dual vanishes on validation") {
  // With y = 0 every pair gives beta = 0 and u = 0: all scores tie at zero and
  // the largest pair wins.
  Dataset d = smooth_data(6, 20);
  d.y.setZero();
  const HyperGrid grid{{1e-1, 1e-3}, {1e-2, 1e-4}};
  const Selection s = select_hyperparams(d, kRbf1, kRbf2, grid);
  CHECK(s.lambda1 == 1e-1);
  CHECK(s.lambda2 == 1e-2);
  for (const auto& row : s.table) CHECK(row.loss == 0.0);
}

TEST_CASE("selection matches an independent re-implementation of the grid loop") {
  const Dataset d = dgp::sample_demand({100, 0.5, 77});
  const KernelSpec k = KernelSpec::product_rbf(median_heuristic(d.x));
  const KernelSpec l = KernelSpec::product_rbf(median_heuristic(d.w()));
  const HyperGrid grid = HyperGrid::decades();
  const Selection s = select_hyperparams(d, k, l, grid);
  REQUIRE(s.table.size() == 100);

  // Oracle: walk the grid in reverse order using only public operations.
  const Dataset train = d.slice(0, 50);
  const PointMatrix w_val = d.slice(50, 100).w();
  double best = std::numeric_limits<double>::infinity();
  double b1 = 0, b2 = 0;
  for (auto i1 = grid.lambda1.rbegin(); i1 != grid.lambda1.rend(); ++i1) {
    for (auto i2 = grid.lambda2.rbegin(); i2 != grid.lambda2.rend(); ++i2) {
      const DualIVModel m = fit(train, k, l, *i1, *i2);
      const Eigen::VectorXd u = dual_values(estimate_dual(m, kDefaultDualRidge), l, w_val);
      const double loss = u.squaredNorm() / 50.0;
      if (loss < best || (loss == best && std::tie(*i1, *i2) > std::tie(b1, b2))) {
        best = loss;
        b1 = *i1;
        b2 = *i2;
      }
    }
  }
  CHECK(s.lambda1 == b1);
  CHECK(s.lambda2 == b2);
  // fit_auto stays on the grid.
  const DualIVModel m = fit_auto(d, k, l, grid);
  CHECK(std::find(grid.lambda1.begin(), grid.lambda1.end(), m.lambda1()) != grid.lambda1.end());
  CHECK(std::find(grid.lambda2.begin(), grid.lambda2.end(), m.lambda2()) != grid.lambda2.end());
}

TEST_CASE("empirical saddle objective") {
  const Dataset d = smooth_data(8, 15);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(15);
  const Eigen::VectorXd beta = fit(d, kRbf1, kRbf2, 1e-2, 1e-2).beta();
  CHECK(empirical_saddle_objective(d, kRbf1, kRbf2, beta, zero) == 0.0);
  CHECK_THROWS_AS(empirical_saddle_objective(d, kRbf1, kRbf2, beta, Eigen::VectorXd::Zero(3)),
                  ArgumentError);

  // Against the formula with independently assembled Gram matrices.
  const Eigen::MatrixXd k = gram(kRbf1, d.x).values;
  const Eigen::MatrixXd l = gram(kRbf2, d.w()).values;
  Rng rng(1);
  for (int rep = 0; rep < 5; ++rep) {
    Eigen::VectorXd a(15);
    for (auto& v : a) v = rng.normal();
    const Eigen::VectorXd u = l * a;
    const double expected = u.dot(k * beta - d.y) / 15.0 - u.squaredNorm() / 30.0;
    CHECK(empirical_saddle_objective(d, kRbf1, kRbf2, beta, a) ==
          doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("saddle objective is maximized by the closed-form dual") {
  // Maximizer over alpha solves L L alpha = L (K beta - y).
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Dataset d = smooth_data(seed + 20, 12);
    const KernelSpec l = KernelSpec::rbf({0.3, 0.3});
    const DualIVModel m = fit(d, kRbf1, l, 1e-2, 1e-2);
    const Eigen::MatrixXd& lg = m.l_gram();
    const Eigen::VectorXd r = m.k_gram() * m.beta() - d.y;
    const Eigen::VectorXd astar = (lg * lg).ldlt().solve(lg * r);
    const double top = empirical_saddle_objective(d, kRbf1, l, m.beta(), astar);
    Rng rng(seed);
    for (int rep = 0; rep < 100; ++rep) {
      Eigen::VectorXd delta(12);
      for (auto& v : delta) v = rng.normal();
      delta *= rng.uniform(0.0, 1e-2) / delta.norm();
      CHECK(top >= empirical_saddle_objective(d, kRbf1, l, m.beta(), astar + delta) - 1e-12);
    }
    // The ridge dual approaches the exact maximizer as its ridge shrinks.
    const DualEstimate e = estimate_dual(m, 1e-12);
    CHECK((lg * e.alpha - lg * astar).norm() <= 1e-4 * (lg * astar).norm() + 1e-10);
  }
}

TEST_CASE("Fenchel conjugate of the half squared loss") {
  CHECK(fenchel_conjugate_sq(0.0, 0.0) == 0.0);
  CHECK(fenchel_conjugate_sq(1.0, 2.0) == 4.0);
  CHECK(fenchel_conjugate_sq(-1.0, 3.0) == doctest::Approx(1.5));
}

TEST_CASE("GMM quadratic form") {
  Eigen::MatrixXd g = Eigen::MatrixXd::Random(10, 3);
  CHECK(gmm_quadratic_form(Eigen::VectorXd::Zero(10), g) == 0.0);

  Eigen::VectorXd r(4);
  r << 1, 2, 3, 6;
  CHECK(gmm_quadratic_form(r, Eigen::MatrixXd::Ones(4, 1)) == doctest::Approx(0.5 * 3.0 * 3.0));

  // Duplicate dictionary columns: singular Lambda, rescued by the ridge.
  Eigen::MatrixXd dup(4, 2);
  dup << Eigen::VectorXd::Ones(4), Eigen::VectorXd::Ones(4);
  CHECK(std::isfinite(gmm_quadratic_form(r, dup)));

  CHECK_THROWS_AS(gmm_quadratic_form(r, Eigen::MatrixXd::Ones(3, 1)), ArgumentError);
  CHECK_THROWS_AS(gmm_quadratic_form(r, Eigen::MatrixXd(4, 0)), ArgumentError);
  CHECK_THROWS_AS(gmm_quadratic_form(r, Eigen::MatrixXd::Zero(4, 2)), NumericalError);
}
