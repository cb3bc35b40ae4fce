#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace dualiv {

// Points are stored one per row, row-major, so each point is a contiguous span.
using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct RbfKernel {
  std::vector<double> bandwidths;  // one length scale per input dimension
};

struct LinearKernel {};

struct ProductFactor;

struct ProductKernel {
  std::vector<ProductFactor> factors;
};

/// A positive definite kernel on R^d.
///
/// RBF: exp(-sum_d (a_d - b_d)^2 / (2 sigma_d^2)).
/// Linear: a . b (any dimension).
/// Product: product of factor kernels, each applied to a half-open column range
/// [begin, end). Ranges are disjoint and cover [0, d).
///
/// Instances are validated on construction and immutable afterwards.
class KernelSpec {
 public:
  using Variant = std::variant<RbfKernel, LinearKernel, ProductKernel>;

  static KernelSpec rbf(std::vector<double> bandwidths);
  static KernelSpec linear();
  static KernelSpec product(std::vector<ProductFactor> factors);
  // Product of one-dimensional RBF factors, one per bandwidth.
  static KernelSpec product_rbf(const std::vector<double>& bandwidths);

  const Variant& variant() const { return kernel_; }
  // Number of input dimensions, or nullopt for a Linear kernel (any dimension).
  std::optional<std::size_t> dimension() const;

  double operator()(std::span<const double> a, std::span<const double> b) const;

 private:
  explicit KernelSpec(Variant kernel) : kernel_(std::move(kernel)) {}
  Variant kernel_;
};

struct ProductFactor {
  std::size_t begin = 0;
  std::size_t end = 0;
  KernelSpec kernel;
};

struct GramMatrix {
  Eigen::MatrixXd values;
  bool square_symmetric = false;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

double eval_kernel(const KernelSpec& spec, std::span<const double> a, std::span<const double> b);

// G[i][j] = k(rows_i, cols_j).
GramMatrix gram(const KernelSpec& spec, const PointMatrix& rows, const PointMatrix& cols);
// Symmetric Gram matrix of a point set with itself; fills only the upper triangle then mirrors.
GramMatrix gram(const KernelSpec& spec, const PointMatrix& points);

// Per-dimension median of the positive pairwise coordinate distances (1 when none are positive).
std::vector<double> median_heuristic(const PointMatrix& points);

/// Cholesky factorization of G + ridge * I that escalates a diagonal jitter by
/// decades (1e-10 to 1e-4 times trace(G)/n) when G is not numerically positive
/// definite, and falls back to a least-squares solve after that.
class RegularizedSolver {
 public:
  RegularizedSolver(const Eigen::MatrixXd& g, double ridge);

  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

  // Jitter added on top of the ridge; 0 when the plain factorization succeeded.
  double jitter() const { return jitter_; }
  bool used_least_squares() const { return cod_.has_value(); }

 private:
  Eigen::Index n_ = 0;
  std::vector<double> attempted_;
  double jitter_ = 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  std::optional<Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>> cod_;
};

// Solves (G + ridge * I) S = rhs.
Eigen::MatrixXd solve_regularized(const GramMatrix& g, double ridge, const Eigen::MatrixXd& rhs);

}  // namespace dualiv
