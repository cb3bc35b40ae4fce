#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dualiv::checks {

struct CheckResult {
  std::string name;
  bool passed = false;
  double metric = 0.0;     // worst observed error (or the statistic being thresholded)
  double threshold = 0.0;
  std::string detail;
};

// fit() against an oracle that materializes M and solves the dense system by
// Gaussian elimination. Random RBF / product kernels, n <= 20.
CheckResult closed_form_equivalence(int instances = 100, std::uint64_t seed = 1);

// Closed-form GMM quadratic form against a gradient-free coordinate ascent on the
// finite-dictionary dual objective.
CheckResult gmm_equivalence(int instances = 50, std::uint64_t seed = 2);

// max_u {u v - conj(y, u)} over a grid recovers (y - v)^2 / 2 on {-2, 0, 2}^2.
CheckResult fenchel_biconjugate();

// Pearson correlation between the fitted dual and beta_ols (1 - rho) z - y on
// the linear model (n = 300, beta = 0.7, rho = 0.2).
CheckResult dual_correlation(std::uint64_t seed = 0);

std::vector<CheckResult> run_all();

}  // namespace dualiv::checks
