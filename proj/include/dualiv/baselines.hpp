#pragma once

#include <vector>

#include <Eigen/Dense>

#include "dualiv/dataset.hpp"
#include "dualiv/kernels.hpp"

namespace dualiv {

// f(x) = intercept + coefficients . x
struct LinearModel {
  Eigen::VectorXd coefficients;
  double intercept = 0.0;
  // Set by 2SLS when some first-stage R^2 falls below kWeakInstrumentR2.
  bool weak_instrument = false;
  std::vector<double> first_stage_r2;

  Eigen::VectorXd predict(const PointMatrix& x) const;
};

inline constexpr double kWeakInstrumentR2 = 0.01;

// Least squares with intercept. Requires n > d + 1.
LinearModel fit_ols(const PointMatrix& x, const Eigen::VectorXd& y);

// Regress each X column on [1, Z], then y on [1, X_hat].
LinearModel fit_2sls(const Dataset& data);

/// Naive nonlinear two-stage estimator: kernel ridge of each X column on Z,
/// then kernel ridge of (y - mean y) on the fitted X_hat.
class TwoStageKernelRidge {
 public:
  TwoStageKernelRidge(KernelSpec k_x, PointMatrix x_hat, Eigen::VectorXd coefficients,
                      double y_mean);

  Eigen::VectorXd predict(const PointMatrix& x) const;

  const KernelSpec& k_x() const { return k_x_; }
  const PointMatrix& x_hat() const { return x_hat_; }
  const Eigen::VectorXd& coefficients() const { return coef_; }
  double y_mean() const { return y_mean_; }

 private:
  KernelSpec k_x_;
  PointMatrix x_hat_;
  Eigen::VectorXd coef_;
  double y_mean_;
};

TwoStageKernelRidge fit_ts_kernel_ridge(const Dataset& data, const KernelSpec& k_z,
                                        const KernelSpec& k_x, double lambda_first,
                                        double lambda_second);

}  // namespace dualiv
