#include "dualiv/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "dualiv/error.hpp"

namespace dualiv {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

std::span<const double> row_span(const PointMatrix& m, Eigen::Index i) {
  return {m.data() + i * m.cols(), static_cast<std::size_t>(m.cols())};
}

void check_dims(const KernelSpec& spec, std::size_t a, std::size_t b) {
  if (a != b) {
    throw ArgumentError("kernel arguments have different dimensions (" + std::to_string(a) +
                        " vs " + std::to_string(b) + ")");
  }
  if (auto d = spec.dimension(); d && *d != a) {
    throw ArgumentError("kernel expects " + std::to_string(*d) + " dimensions, got " +
                        std::to_string(a));
  }
}

double median_of(std::vector<double>& v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

}  // namespace

KernelSpec KernelSpec::rbf(std::vector<double> bandwidths) {
  if (bandwidths.empty()) throw ArgumentError("RBF kernel needs at least one bandwidth");
  for (double s : bandwidths) {
    if (!std::isfinite(s) || s <= 0.0) {
      throw ArgumentError("RBF bandwidths must be positive and finite");
    }
  }
  return KernelSpec(RbfKernel{std::move(bandwidths)});
}

KernelSpec KernelSpec::linear() { return KernelSpec(LinearKernel{}); }

KernelSpec KernelSpec::product(std::vector<ProductFactor> factors) {
  if (factors.empty()) throw ArgumentError("product kernel needs at least one factor");
  auto sorted = factors;
  std::sort(sorted.begin(), sorted.end(),
            [](const ProductFactor& a, const ProductFactor& b) { return a.begin < b.begin; });
  std::size_t next = 0;
  for (const auto& f : sorted) {
    if (f.end <= f.begin) throw ArgumentError("product factor has an empty column range");
    if (f.begin != next) {
      throw ArgumentError("product factor ranges must be disjoint and cover all dimensions");
    }
    if (auto d = f.kernel.dimension(); d && *d != f.end - f.begin) {
      throw ArgumentError("product factor kernel dimension does not match its column range");
    }
    next = f.end;
  }
  return KernelSpec(ProductKernel{std::move(factors)});
}

KernelSpec KernelSpec::product_rbf(const std::vector<double>& bandwidths) {
  std::vector<ProductFactor> factors;
  factors.reserve(bandwidths.size());
  for (std::size_t d = 0; d < bandwidths.size(); ++d) {
    factors.push_back({d, d + 1, KernelSpec::rbf({bandwidths[d]})});
  }
  return product(std::move(factors));
}

std::optional<std::size_t> KernelSpec::dimension() const {
  return std::visit(
      overloaded{
          [](const RbfKernel& k) -> std::optional<std::size_t> { return k.bandwidths.size(); },
          [](const LinearKernel&) -> std::optional<std::size_t> { return std::nullopt; },
          [](const ProductKernel& k) -> std::optional<std::size_t> {
            std::size_t d = 0;
            for (const auto& f : k.factors) d = std::max(d, f.end);
            return d;
          },
      },
      kernel_);
}

double KernelSpec::operator()(std::span<const double> a, std::span<const double> b) const {
  return std::visit(
      overloaded{
          [&](const RbfKernel& k) {
            double s = 0.0;
            for (std::size_t d = 0; d < a.size(); ++d) {
              const double z = (a[d] - b[d]) / k.bandwidths[d];
              s += z * z;
            }
            return std::exp(-0.5 * s);
          },
          [&](const LinearKernel&) {
            double s = 0.0;
            for (std::size_t d = 0; d < a.size(); ++d) s += a[d] * b[d];
            return s;
          },
          [&](const ProductKernel& k) {
            double p = 1.0;
            for (const auto& f : k.factors) {
              const std::size_t len = f.end - f.begin;
              p *= f.kernel(a.subspan(f.begin, len), b.subspan(f.begin, len));
            }
            return p;
          },
      },
      kernel_);
}

double eval_kernel(const KernelSpec& spec, std::span<const double> a, std::span<const double> b) {
  check_dims(spec, a.size(), b.size());
  return spec(a, b);
}

GramMatrix gram(const KernelSpec& spec, const PointMatrix& rows, const PointMatrix& cols) {
  if (rows.rows() > 0 && cols.rows() > 0) {
    check_dims(spec, static_cast<std::size_t>(rows.cols()), static_cast<std::size_t>(cols.cols()));
  }
  GramMatrix g;
  g.values.resize(rows.rows(), cols.rows());
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const auto a = row_span(rows, i);
    for (Eigen::Index j = 0; j < cols.rows(); ++j) g.values(i, j) = spec(a, row_span(cols, j));
  }
  g.square_symmetric = &rows == &cols || (rows.rows() == cols.rows() &&
                                            rows.cols() == cols.cols() && rows == cols);
  return g;
}

GramMatrix gram(const KernelSpec& spec, const PointMatrix& points) {
  if (points.rows() > 0) {
    check_dims(spec, static_cast<std::size_t>(points.cols()),
               static_cast<std::size_t>(points.cols()));
  }
  const Eigen::Index n = points.rows();
  GramMatrix g;
  g.values.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto b = row_span(points, j);
    for (Eigen::Index i = 0; i <= j; ++i) {
      const double v = spec(row_span(points, i), b);
      g.values(i, j) = v;
      g.values(j, i) = v;
    }
  }
  g.square_symmetric = true;
  return g;
}

std::vector<double> median_heuristic(const PointMatrix& points) {
  const Eigen::Index n = points.rows();
  if (n < 2) throw ArgumentError("median heuristic needs at least 2 points");
  std::vector<double> out;
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index d = 0; d < points.cols(); ++d) {
    dists.clear();
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double v = std::abs(points(i, d) - points(j, d));
        if (v > 0.0) dists.push_back(v);
      }
    }
    out.push_back(dists.empty() ? 1.0 : median_of(dists));
  }
  return out;
}

RegularizedSolver::RegularizedSolver(const Eigen::MatrixXd& g, double ridge) {
  if (g.rows() != g.cols()) throw ArgumentError("regularized solve needs a square matrix");
  if (!(ridge > 0.0) || !std::isfinite(ridge)) {
    throw ArgumentError("regularized solve needs a positive ridge");
  }
  const Eigen::Index n = g.rows();
  n_ = n;
  Eigen::MatrixXd a = g;
  a.diagonal().array() += ridge;
  llt_.compute(a);
  if (llt_.info() == Eigen::Success) return;

  const double scale = n > 0 ? std::abs(g.trace()) / static_cast<double>(n) : 1.0;
  for (double factor = 1e-10; factor <= 1e-4 * (1.0 + 1e-9); factor *= 10.0) {
    const double jitter = factor * scale;
    attempted_.push_back(jitter);
    Eigen::MatrixXd aj = a;
    aj.diagonal().array() += jitter;
    llt_.compute(aj);
    if (llt_.info() == Eigen::Success) {
      jitter_ = jitter;
      return;
    }
  }
  cod_.emplace(a);
}

Eigen::MatrixXd RegularizedSolver::solve(const Eigen::MatrixXd& rhs) const {
  if (rhs.rows() != n_) {
    throw ArgumentError("right-hand side has the wrong number of rows");
  }
  Eigen::MatrixXd x = cod_ ? Eigen::MatrixXd(cod_->solve(rhs)) : Eigen::MatrixXd(llt_.solve(rhs));
  if (!x.allFinite()) {
    std::ostringstream msg;
    msg << "regularized solve is singular; attempted jitters:";
    for (double j : attempted_) msg << ' ' << j;
    throw NumericalError(msg.str());
  }
  return x;
}

Eigen::VectorXd RegularizedSolver::solve(const Eigen::VectorXd& rhs) const {
  return solve(Eigen::MatrixXd(rhs)).col(0);
}

Eigen::MatrixXd solve_regularized(const GramMatrix& g, double ridge, const Eigen::MatrixXd& rhs) {
  if (g.rows() != g.cols()) throw ArgumentError("regularized solve needs a square matrix");
  if (rhs.rows() != g.rows()) throw ArgumentError("right-hand side has the wrong number of rows");
  return RegularizedSolver(g.values, ridge).solve(rhs);
}

}  // namespace dualiv
