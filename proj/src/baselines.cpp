#include "dualiv/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dualiv/error.hpp"

namespace dualiv {
namespace {

constexpr double kNormalRidge = 1e-10;

double r_squared(const Eigen::VectorXd& target, const Eigen::VectorXd& fitted) {
  const double ss_tot = (target.array() - target.mean()).square().sum();
  if (ss_tot == 0.0) return 1.0;
  return 1.0 - (target - fitted).squaredNorm() / ss_tot;
}

}  // namespace

Eigen::VectorXd LinearModel::predict(const PointMatrix& x) const {
  if (x.cols() != coefficients.size()) {
    throw ArgumentError("linear model expects " + std::to_string(coefficients.size()) +
                        " columns, got " + std::to_string(x.cols()));
  }
  return (x * coefficients).array() + intercept;
}

LinearModel fit_ols(const PointMatrix& x, const Eigen::VectorXd& y) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  if (y.size() != n) throw ArgumentError("OLS: row counts differ");
  if (n <= d + 1) throw ArgumentError("OLS needs more than d + 1 samples");

  // Centering absorbs the intercept; the ridge only touches the slopes.
  const Eigen::RowVectorXd x_mean = x.colwise().mean();
  const double y_mean = y.mean();
  const Eigen::MatrixXd xc = x.rowwise() - x_mean;
  Eigen::MatrixXd normal = xc.transpose() * xc;
  normal.diagonal().array() += kNormalRidge;
  const Eigen::VectorXd rhs = xc.transpose() * (y.array() - y_mean).matrix();

  Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
  Eigen::VectorXd beta = ldlt.solve(rhs);
  if (ldlt.info() != Eigen::Success || !beta.allFinite()) {
    throw NumericalError("OLS normal equations are rank deficient");
  }
  LinearModel m;
  m.intercept = y_mean - x_mean.dot(beta);
  m.coefficients = std::move(beta);
  return m;
}

LinearModel fit_2sls(const Dataset& data) {
  data.validate();
  const Eigen::Index n = data.size();
  if (n <= std::max(data.x.cols(), data.z.cols()) + 1) {
    throw ArgumentError("2SLS needs more than max(d_x, d_z) + 1 samples");
  }
  PointMatrix x_hat(n, data.x.cols());
  std::vector<double> r2;
  for (Eigen::Index j = 0; j < data.x.cols(); ++j) {
    const Eigen::VectorXd target = data.x.col(j);
    const LinearModel first = fit_ols(data.z, target);
    const Eigen::VectorXd fitted = first.predict(data.z);
    x_hat.col(j) = fitted;
    r2.push_back(r_squared(target, fitted));
  }
  LinearModel m = fit_ols(x_hat, data.y);
  m.first_stage_r2 = r2;
  m.weak_instrument = std::any_of(r2.begin(), r2.end(), [](double v) { return v < kWeakInstrumentR2; });
  return m;
}

TwoStageKernelRidge::TwoStageKernelRidge(KernelSpec k_x, PointMatrix x_hat,
                                         Eigen::VectorXd coefficients, double y_mean)
    : k_x_(std::move(k_x)), x_hat_(std::move(x_hat)), coef_(std::move(coefficients)), y_mean_(y_mean) {
  if (coef_.size() != x_hat_.rows()) throw ArgumentError("coefficient count must match X_hat rows");
}

Eigen::VectorXd TwoStageKernelRidge::predict(const PointMatrix& x) const {
  if (x.cols() != x_hat_.cols()) throw ArgumentError("prediction inputs have the wrong dimension");
  return (gram(k_x_, x, x_hat_).values * coef_).array() + y_mean_;
}

TwoStageKernelRidge fit_ts_kernel_ridge(const Dataset& data, const KernelSpec& k_z,
                                        const KernelSpec& k_x, double lambda_first,
                                        double lambda_second) {
  data.validate();
  const Eigen::Index n = data.size();
  const auto nn = static_cast<double>(n);
  const GramMatrix kz = gram(k_z, data.z);
  // X_hat = Kz (Kz + n lambda I)^{-1} X, all columns at once.
  const Eigen::MatrixXd x_dense = data.x;
  PointMatrix x_hat = kz.values * solve_regularized(kz, nn * lambda_first, x_dense);

  const double y_mean = data.y.mean();
  const GramMatrix kx = gram(k_x, x_hat);
  Eigen::VectorXd coef =
      solve_regularized(kx, nn * lambda_second, Eigen::MatrixXd(data.y.array() - y_mean)).col(0);
  return TwoStageKernelRidge(k_x, std::move(x_hat), std::move(coef), y_mean);
}

}  // namespace dualiv
