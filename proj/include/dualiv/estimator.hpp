#pragma once

#include <vector>

#include <Eigen/Dense>

#include "dualiv/dataset.hpp"
#include "dualiv/kernels.hpp"

namespace dualiv {

/// Kernel DualIV fit: f(x) = sum_i beta_i k(x_i, x).
///
/// beta solves (M K + n lambda2 K) beta = M y with M = K (L + n lambda1 I)^{-1} L,
/// where K is the Gram matrix of k on the training X and L the Gram matrix of l
/// on W = [y | Z]. Feature maps and covariance operators are never formed; all
/// algebra goes through K, L and y.
class DualIVModel {
 public:
  // Rebuilds a model from stored parts (e.g. a serialized model); recomputes K and L.
  DualIVModel(PointMatrix x_train, PointMatrix w_train, Eigen::VectorXd beta, KernelSpec k,
              KernelSpec l, double lambda1, double lambda2);

  const PointMatrix& x_train() const { return x_; }
  const PointMatrix& w_train() const { return w_; }
  // Training outcomes, i.e. the first column of W.
  Eigen::VectorXd y_train() const { return w_.col(0); }
  const Eigen::VectorXd& beta() const { return beta_; }
  const KernelSpec& k() const { return k_; }
  const KernelSpec& l() const { return l_; }
  double lambda1() const { return lambda1_; }
  double lambda2() const { return lambda2_; }
  const Eigen::MatrixXd& k_gram() const { return kgram_; }
  const Eigen::MatrixXd& l_gram() const { return lgram_; }

 private:
  friend DualIVModel fit(const Dataset&, const KernelSpec&, const KernelSpec&, double, double);
  DualIVModel(PointMatrix x_train, PointMatrix w_train, Eigen::VectorXd beta, KernelSpec k,
              KernelSpec l, double lambda1, double lambda2, Eigen::MatrixXd kgram,
              Eigen::MatrixXd lgram);

  PointMatrix x_;
  PointMatrix w_;
  Eigen::VectorXd beta_;
  KernelSpec k_;
  KernelSpec l_;
  double lambda1_;
  double lambda2_;
  Eigen::MatrixXd kgram_;
  Eigen::MatrixXd lgram_;
};

// Dual function u(w) = sum_i alpha_i l(w_i, w) estimated from a fitted model.
struct DualEstimate {
  PointMatrix w_train;
  Eigen::VectorXd alpha;
  double ridge = 0.0;
};

// Candidate regularizers, each list strictly descending.
struct HyperGrid {
  std::vector<double> lambda1;
  std::vector<double> lambda2;

  // {1e-1, 1e-2, ..., 1e-10} for both.
  static HyperGrid decades();
  // `count` log-spaced values from 1e-1 down to 1e-10 for both.
  static HyperGrid log_spaced(int count);
  void validate() const;
};

struct SelectionScore {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double loss = 0.0;         // mean of u(w_j)^2 over validation points; +inf on failure
  double signed_mean = 0.0;  // mean of u(w_j) over validation points
  bool failed = false;
};

struct Selection {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  std::vector<SelectionScore> table;  // lambda1-major, grid order
};

// Default ridge for the dual function used in model selection.
inline constexpr double kDefaultDualRidge = 1e-4;

DualIVModel fit(const Dataset& data, const KernelSpec& k, const KernelSpec& l, double lambda1,
                double lambda2);

Eigen::VectorXd predict(const DualIVModel& model, const PointMatrix& x_new);

// alpha = (L + n lambda I)^{-1} (K beta - y).
DualEstimate estimate_dual(const DualIVModel& model, double lambda);

// u evaluated at each row of w.
Eigen::VectorXd dual_values(const DualEstimate& dual, const KernelSpec& l, const PointMatrix& w);

// Mean of u over held-out W points, i.e. alpha^T Ltilde 1 / m.
double dual_oos_loss(const DualEstimate& dual, const KernelSpec& l, const PointMatrix& w_heldout);

/// Half-split selection: fit on the first floor(n/2) rows, score each grid pair
/// by the mean squared dual function over the remaining rows, return the argmin.
/// Ties go to the lexicographically largest (lambda1, lambda2).
Selection select_hyperparams(const Dataset& data, const KernelSpec& k, const KernelSpec& l,
                             const HyperGrid& grid, double dual_ridge = kDefaultDualRidge);

// select_hyperparams, then fit on the full data with the chosen pair.
DualIVModel fit_auto(const Dataset& data, const KernelSpec& k, const KernelSpec& l,
                     const HyperGrid& grid, double dual_ridge = kDefaultDualRidge);

// (1/n) a^T L (K b - y) - (1/2n) a^T L L a.
double empirical_saddle_objective(const Dataset& data, const KernelSpec& k, const KernelSpec& l,
                                  const Eigen::VectorXd& beta, const Eigen::VectorXd& alpha);

// Convex conjugate of v -> (y - v)^2 / 2: u y + u^2 / 2.
double fenchel_conjugate_sq(double y, double u);

/// 1/2 psi^T Lambda^{-1} psi with psi_j = mean_i(r_i g_ij) and Lambda = G^T G / n.
/// This is the maximum of the saddle objective when u ranges over span{g_1..g_m}.
double gmm_quadratic_form(const Eigen::VectorXd& residuals, const Eigen::MatrixXd& dictionary);

}  // namespace dualiv
