#include "dualiv/estimator.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <tuple>

#include "dualiv/error.hpp"

namespace dualiv {
namespace {

void check_lambda(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ArgumentError(std::string(name) + " must be positive and finite");
  }
}

// M = K (L + n lambda1 I)^{-1} L.
Eigen::MatrixXd stage_operator(const Eigen::MatrixXd& kgram, const Eigen::MatrixXd& lgram,
                               double lambda1) {
  const auto n = static_cast<double>(kgram.rows());
  return kgram * RegularizedSolver(lgram, n * lambda1).solve(lgram);
}

double relative_residual(const Eigen::MatrixXd& a, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& b) {
  const double scale = b.lpNorm<Eigen::Infinity>();
  const double r = (a * x - b).lpNorm<Eigen::Infinity>();
  return scale > 0.0 ? r / scale : r;
}

// Solves the non-symmetric system a x = b by LU with partial pivoting plus two
// refinement steps; falls back to a minimum-norm least-squares solve when the
// LU answer is non-finite or misses the residual target.
Eigen::VectorXd solve_coefficients(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  constexpr double kTarget = 1e-8;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  Eigen::VectorXd x = lu.solve(b);
  for (int step = 0; step < 2 && x.allFinite(); ++step) x += lu.solve(Eigen::VectorXd(b - a * x));

  double res = x.allFinite() ? relative_residual(a, x, b) : std::numeric_limits<double>::infinity();
  if (res <= kTarget) return x;

  Eigen::VectorXd y = a.completeOrthogonalDecomposition().solve(b);
  if (y.allFinite() && relative_residual(a, y, b) < res) return y;
  if (!x.allFinite()) throw NumericalError("coefficient system is singular");
  return x;
}

// beta for one lambda2, given M K and M y.
Eigen::VectorXd coefficients(const Eigen::MatrixXd& kgram, const Eigen::MatrixXd& mk,
                             const Eigen::VectorXd& my, double lambda2) {
  const auto n = static_cast<double>(kgram.rows());
  return solve_coefficients(mk + n * lambda2 * kgram, my);
}

bool pair_greater(double a1, double a2, double b1, double b2) {
  return std::tie(a1, a2) > std::tie(b1, b2);
}

}  // namespace

DualIVModel::DualIVModel(PointMatrix x_train, PointMatrix w_train, Eigen::VectorXd beta,
                         KernelSpec k, KernelSpec l, double lambda1, double lambda2)
    : x_(std::move(x_train)),
      w_(std::move(w_train)),
      beta_(std::move(beta)),
      k_(std::move(k)),
      l_(std::move(l)),
      lambda1_(lambda1),
      lambda2_(lambda2) {
  check_lambda(lambda1_, "lambda1");
  check_lambda(lambda2_, "lambda2");
  if (beta_.size() != x_.rows() || w_.rows() != x_.rows()) {
    throw ArgumentError("model coefficient and training sizes disagree");
  }
  if (!beta_.allFinite()) throw ArgumentError("model coefficients must be finite");
  kgram_ = gram(k_, x_).values;
  lgram_ = gram(l_, w_).values;
}

DualIVModel::DualIVModel(PointMatrix x_train, PointMatrix w_train, Eigen::VectorXd beta,
                         KernelSpec k, KernelSpec l, double lambda1, double lambda2,
                         Eigen::MatrixXd kgram, Eigen::MatrixXd lgram)
    : x_(std::move(x_train)),
      w_(std::move(w_train)),
      beta_(std::move(beta)),
      k_(std::move(k)),
      l_(std::move(l)),
      lambda1_(lambda1),
      lambda2_(lambda2),
      kgram_(std::move(kgram)),
      lgram_(std::move(lgram)) {}

HyperGrid HyperGrid::decades() { return log_spaced(10); }

HyperGrid HyperGrid::log_spaced(int count) {
  if (count < 1) throw ArgumentError("grid needs at least one value");
  std::vector<double> v;
  for (int i = 0; i < count; ++i) {
    const double e = count == 1 ? -1.0 : -1.0 - 9.0 * i / (count - 1);
    v.push_back(std::pow(10.0, e));
  }
  return {v, v};
}

void HyperGrid::validate() const {
  for (const auto* list : {&lambda1, &lambda2}) {
    if (list->empty()) throw ArgumentError("hyperparameter grid is empty");
    for (std::size_t i = 0; i < list->size(); ++i) {
      check_lambda((*list)[i], "grid value");
      if (i > 0 && !((*list)[i] < (*list)[i - 1])) {
        throw ArgumentError("hyperparameter grid must be strictly descending");
      }
    }
  }
}

DualIVModel fit(const Dataset& data, const KernelSpec& k, const KernelSpec& l, double lambda1,
                double lambda2) {
  check_lambda(lambda1, "lambda1");
  check_lambda(lambda2, "lambda2");
  data.validate();
  if (data.size() < 2) throw ArgumentError("fit needs at least 2 samples");
  PointMatrix w = data.w();
  Eigen::MatrixXd kgram = gram(k, data.x).values;
  Eigen::MatrixXd lgram = gram(l, w).values;
  const Eigen::MatrixXd m = stage_operator(kgram, lgram, lambda1);
  Eigen::VectorXd beta = coefficients(kgram, m * kgram, m * data.y, lambda2);
  return DualIVModel(data.x, std::move(w), std::move(beta), k, l, lambda1, lambda2,
                     std::move(kgram), std::move(lgram));
}

Eigen::VectorXd predict(const DualIVModel& model, const PointMatrix& x_new) {
  if (x_new.rows() > 0 && x_new.cols() != model.x_train().cols()) {
    throw ArgumentError("prediction inputs have " + std::to_string(x_new.cols()) +
                        " columns, model expects " + std::to_string(model.x_train().cols()));
  }
  return gram(model.k(), x_new, model.x_train()).values * model.beta();
}

DualEstimate estimate_dual(const DualIVModel& model, double lambda) {
  check_lambda(lambda, "dual ridge");
  const auto n = static_cast<double>(model.beta().size());
  const Eigen::VectorXd residual = model.k_gram() * model.beta() - model.y_train();
  RegularizedSolver solver(model.l_gram(), n * lambda);
  return {model.w_train(), solver.solve(residual), lambda};
}

Eigen::VectorXd dual_values(const DualEstimate& dual, const KernelSpec& l, const PointMatrix& w) {
  if (w.rows() > 0 && w.cols() != dual.w_train.cols()) {
    throw ArgumentError("dual evaluation points have the wrong dimension");
  }
  return gram(l, w, dual.w_train).values * dual.alpha;
}

double dual_oos_loss(const DualEstimate& dual, const KernelSpec& l, const PointMatrix& w_heldout) {
  if (w_heldout.rows() < 1) throw ArgumentError("held-out set is empty");
  return dual_values(dual, l, w_heldout).mean();
}

Selection select_hyperparams(const Dataset& data, const KernelSpec& k, const KernelSpec& l,
                             const HyperGrid& grid, double dual_ridge) {
  grid.validate();
  check_lambda(dual_ridge, "dual ridge");
  data.validate();
  if (data.size() < 4) throw ArgumentError("model selection needs at least 4 samples");

  const Eigen::Index half = data.size() / 2;
  const Dataset train = data.slice(0, half);
  const PointMatrix w_train = train.w();
  const PointMatrix w_val = data.slice(half, data.size()).w();
  const Eigen::MatrixXd kgram = gram(k, train.x).values;
  const Eigen::MatrixXd lgram = gram(l, w_train).values;
  const Eigen::MatrixXd cross = gram(l, w_val, w_train).values;
  const RegularizedSolver dual(lgram, static_cast<double>(half) * dual_ridge);

  Selection sel;
  sel.table.reserve(grid.lambda1.size() * grid.lambda2.size());
  for (double lambda1 : grid.lambda1) {
    Eigen::MatrixXd m;
    bool stage_ok = true;
    try {
      m = stage_operator(kgram, lgram, lambda1);
    } catch (const NumericalError&) {
      stage_ok = false;
    }
    const Eigen::MatrixXd mk = stage_ok ? Eigen::MatrixXd(m * kgram) : Eigen::MatrixXd();
    const Eigen::VectorXd my = stage_ok ? Eigen::VectorXd(m * train.y) : Eigen::VectorXd();
    for (double lambda2 : grid.lambda2) {
      SelectionScore s{lambda1, lambda2, std::numeric_limits<double>::infinity(), 0.0, true};
      if (stage_ok) {
        try {
          const Eigen::VectorXd beta = coefficients(kgram, mk, my, lambda2);
          const Eigen::VectorXd u = cross * dual.solve(Eigen::VectorXd(kgram * beta - train.y));
          if (u.allFinite()) {
            s.loss = u.squaredNorm() / static_cast<double>(u.size());
            s.signed_mean = u.mean();
            s.failed = false;
          }
        } catch (const NumericalError&) {
        }
      }
      sel.table.push_back(s);
    }
  }

  const SelectionScore* best = nullptr;
  for (const auto& s : sel.table) {
    if (s.failed) continue;
    if (!best || s.loss < best->loss ||
        (s.loss == best->loss && pair_greater(s.lambda1, s.lambda2, best->lambda1, best->lambda2))) {
      best = &s;
    }
  }
  if (!best) throw NumericalError("every hyperparameter pair failed to fit");
  sel.lambda1 = best->lambda1;
  sel.lambda2 = best->lambda2;
  return sel;
}

DualIVModel fit_auto(const Dataset& data, const KernelSpec& k, const KernelSpec& l,
                     const HyperGrid& grid, double dual_ridge) {
  const Selection sel = select_hyperparams(data, k, l, grid, dual_ridge);
  return fit(data, k, l, sel.lambda1, sel.lambda2);
}

double empirical_saddle_objective(const Dataset& data, const KernelSpec& k, const KernelSpec& l,
                                  const Eigen::VectorXd& beta, const Eigen::VectorXd& alpha) {
  data.validate();
  const Eigen::Index n = data.size();
  if (beta.size() != n || alpha.size() != n) {
    throw ArgumentError("saddle objective needs coefficient vectors of length n");
  }
  const Eigen::MatrixXd kgram = gram(k, data.x).values;
  const Eigen::MatrixXd lgram = gram(l, data.w()).values;
  const Eigen::VectorXd u = lgram * alpha;  // dual function at the training W
  const auto nn = static_cast<double>(n);
  return u.dot(kgram * beta - data.y) / nn - u.squaredNorm() / (2.0 * nn);
}

double fenchel_conjugate_sq(double y, double u) { return u * y + 0.5 * u * u; }

double gmm_quadratic_form(const Eigen::VectorXd& residuals, const Eigen::MatrixXd& dictionary) {
  const Eigen::Index n = residuals.size();
  const Eigen::Index m = dictionary.cols();
  if (n < 1 || m < 1) throw ArgumentError("GMM form needs residuals and at least one moment");
  if (dictionary.rows() != n) throw ArgumentError("dictionary rows must match residuals");
  const auto nn = static_cast<double>(n);
  const Eigen::VectorXd psi = dictionary.transpose() * residuals / nn;
  Eigen::MatrixXd lambda = dictionary.transpose() * dictionary / nn;

  Eigen::LLT<Eigen::MatrixXd> llt(lambda);
  if (llt.info() != Eigen::Success) {
    lambda.diagonal().array() += 1e-12 * lambda.trace() / static_cast<double>(m);
    llt.compute(lambda);
    if (llt.info() != Eigen::Success) throw NumericalError("moment covariance is degenerate");
  }
  const Eigen::VectorXd sol = llt.solve(psi);
  if (!sol.allFinite()) throw NumericalError("moment covariance is degenerate");
  return 0.5 * psi.dot(sol);
}

}  // namespace dualiv
