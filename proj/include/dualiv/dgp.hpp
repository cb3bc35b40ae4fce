#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "dualiv/dataset.hpp"

namespace dualiv::dgp {

// Demand design: price P is confounded with sales Y through the shared shock V.
struct DemandConfig {
  Eigen::Index n = 1000;
  double rho = 0.5;  // confounding level, in [0, 1)
  std::uint64_t seed = 0;
};

// Y = X beta + e + eps, X = (1 - rho) Z + rho e + eta.
struct LinearConfig {
  Eigen::Index n = 300;
  double rho = 0.2;  // in [0, 1]
  double beta = 0.7;
  std::uint64_t seed = 0;
};

// Seasonal price pattern: 2[(t-5)^4/600 + exp(-4(t-5)^2) + t/10 - 2].
double psi(double t);

// True demand function f(p, t, s) = 100 + (10 + p) s psi(t) - 2p.
double demand_true_f(double p, double t, double s);

// X = (P, T, S), Z = (C, T, S); latents columns are (V, eps).
Dataset sample_demand(const DemandConfig& cfg);

struct TestGrid {
  PointMatrix x;       // 2800 x 3 rows of (p, t, s)
  Eigen::VectorXd f;   // demand_true_f at each row
};

// 20 x 20 x 7 grid: p in linspace(10, 25, 20) varies fastest, then t in
// linspace(0, 10, 20), then s in {1..7}.
const TestGrid& demand_test_grid();

// One-dimensional X and Z; latents column is e. Normal second moments are variances.
Dataset sample_linear(const LinearConfig& cfg);

// Optimal dual of the linear model under slope estimate beta_hat: beta_hat (1 - rho) z - y.
double analytic_optimal_dual_linear(double y, double z, double beta_hat, double rho);

}  // namespace dualiv::dgp
