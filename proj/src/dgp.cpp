#include "dualiv/dgp.hpp"

#include <cmath>

#include "dualiv/error.hpp"
#include "dualiv/rng.hpp"

namespace dualiv::dgp {

double psi(double t) {
  const double u = t - 5.0;
  return 2.0 * ((u * u * u * u) / 600.0 + std::exp(-4.0 * u * u) + t / 10.0 - 2.0);
}

double demand_true_f(double p, double t, double s) {
  return 100.0 + (10.0 + p) * s * psi(t) - 2.0 * p;
}

Dataset sample_demand(const DemandConfig& cfg) {
  if (cfg.n < 1) throw ArgumentError("demand sample size must be at least 1");
  if (!(cfg.rho >= 0.0 && cfg.rho < 1.0)) throw ArgumentError("demand rho must lie in [0, 1)");
  const Eigen::Index n = cfg.n;
  Dataset d{PointMatrix(n, 3), Eigen::VectorXd(n), PointMatrix(n, 3), PointMatrix(n, 2)};
  Rng rng(cfg.seed);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto s = static_cast<double>(rng.uniform_int(1, 7));
    const double t = rng.uniform(0.0, 10.0);
    const double c = rng.normal();
    const double v = rng.normal();
    const double eps = rng.normal(cfg.rho * v, 1.0 - cfg.rho * cfg.rho);
    const double p = 25.0 + (c + 3.0) * psi(t) + v;
    d.x.row(i) << p, t, s;
    d.z.row(i) << c, t, s;
    d.y(i) = demand_true_f(p, t, s) + eps;
    d.latents->row(i) << v, eps;
  }
  return d;
}

const TestGrid& demand_test_grid() {
  static const TestGrid grid = [] {
    constexpr int kP = 20, kT = 20, kS = 7;
    TestGrid g{PointMatrix(kP * kT * kS, 3), Eigen::VectorXd(kP * kT * kS)};
    Eigen::Index r = 0;
    for (int s = 1; s <= kS; ++s) {
      for (int ti = 0; ti < kT; ++ti) {
        const double t = 10.0 * ti / (kT - 1);
        for (int pi = 0; pi < kP; ++pi) {
          const double p = 10.0 + 15.0 * pi / (kP - 1);
          g.x.row(r) << p, t, static_cast<double>(s);
          g.f(r) = demand_true_f(p, t, s);
          ++r;
        }
      }
    }
    return g;
  }();
  return grid;
}

Dataset sample_linear(const LinearConfig& cfg) {
  if (cfg.n < 1) throw ArgumentError("linear sample size must be at least 1");
  if (!(cfg.rho >= 0.0 && cfg.rho <= 1.0)) throw ArgumentError("linear rho must lie in [0, 1]");
  const Eigen::Index n = cfg.n;
  Dataset d{PointMatrix(n, 1), Eigen::VectorXd(n), PointMatrix(n, 1), PointMatrix(n, 1)};
  Rng rng(cfg.seed);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double e = rng.normal(0.0, 2.0);
    const double z = rng.normal(0.0, 2.0);
    const double eps = rng.normal(0.0, 0.1);
    const double eta = rng.normal(0.0, 0.1);
    const double x = (1.0 - cfg.rho) * z + cfg.rho * e + eta;
    d.x(i, 0) = x;
    d.z(i, 0) = z;
    d.y(i) = x * cfg.beta + e + eps;
    (*d.latents)(i, 0) = e;
  }
  return d;
}

double analytic_optimal_dual_linear(double y, double z, double beta_hat, double rho) {
  return beta_hat * (1.0 - rho) * z - y;
}

}  // namespace dualiv::dgp
