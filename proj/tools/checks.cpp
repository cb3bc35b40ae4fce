#include "checks.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include <Eigen/Dense>

#include "dualiv/baselines.hpp"
#include "dualiv/dgp.hpp"
#include "dualiv/estimator.hpp"
#include "dualiv/kernels.hpp"
#include "dualiv/rng.hpp"

namespace dualiv::checks {
namespace {

// Plain row-major dense matrix for the oracles; deliberately shares no code with the library.
struct Dense {
  int rows = 0, cols = 0;
  std::vector<double> a;
  Dense(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r * c), 0.0) {}
  double& operator()(int i, int j) { return a[static_cast<std::size_t>(i * cols + j)]; }
  double operator()(int i, int j) const { return a[static_cast<std::size_t>(i * cols + j)]; }
};

Dense mul(const Dense& x, const Dense& y) {
  Dense out(x.rows, y.cols);
  for (int i = 0; i < x.rows; ++i)
    for (int k = 0; k < x.cols; ++k)
      for (int j = 0; j < y.cols; ++j) out(i, j) += x(i, k) * y(k, j);
  return out;
}

// Gauss-Jordan elimination with partial pivoting; solves a x = b column by column.
Dense gauss_solve(Dense a, Dense b) {
  const int n = a.rows;
  for (int c = 0; c < n; ++c) {
    int piv = c;
    for (int r = c + 1; r < n; ++r)
      if (std::abs(a(r, c)) > std::abs(a(piv, c))) piv = r;
    for (int j = 0; j < n; ++j) std::swap(a(c, j), a(piv, j));
    for (int j = 0; j < b.cols; ++j) std::swap(b(c, j), b(piv, j));
    for (int r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a(r, c) / a(c, c);
      if (f == 0.0) continue;
      for (int j = c; j < n; ++j) a(r, j) -= f * a(c, j);
      for (int j = 0; j < b.cols; ++j) b(r, j) -= f * b(c, j);
    }
  }
  for (int r = 0; r < n; ++r)
    for (int j = 0; j < b.cols; ++j) b(r, j) /= a(r, r);
  return b;
}

double oracle_rbf(const std::vector<double>& a, const std::vector<double>& b,
                  const std::vector<double>& bw) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) s += (a[d] - b[d]) * (a[d] - b[d]) / (2.0 * bw[d] * bw[d]);
  return std::exp(-s);
}

Dense oracle_gram(const std::vector<std::vector<double>>& pts, const std::vector<double>& bw) {
  const int n = static_cast<int>(pts.size());
  Dense g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = oracle_rbf(pts[static_cast<std::size_t>(i)], pts[static_cast<std::size_t>(j)], bw);
  return g;
}

double condition_number(const Dense& a) {
  Eigen::MatrixXd m(a.rows, a.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) m(i, j) = a(i, j);
  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues();
  return sv(0) / sv(sv.size() - 1);
}

double log_uniform(Rng& rng, double lo, double hi) {
  return std::exp(rng.uniform(std::log(lo), std::log(hi)));
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(3);
  s << v;
  return s.str();
}

}  // namespace

CheckResult closed_form_equivalence(int instances, std::uint64_t seed) {
  CheckResult res{"closed_form_equivalence", true, 0.0, 1e-8, ""};
  Rng rng(seed);
  int done = 0, rejected = 0;
  while (done < instances) {
    const int n = static_cast<int>(rng.uniform_int(3, 20));
    const int dx = static_cast<int>(rng.uniform_int(1, 3));
    const int dz = static_cast<int>(rng.uniform_int(1, 2));
    Dataset data{PointMatrix(n, dx), Eigen::VectorXd(n), PointMatrix(n, dz), std::nullopt};
    std::vector<std::vector<double>> xs(static_cast<std::size_t>(n)), ws(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      for (int d = 0; d < dz; ++d) data.z(i, d) = rng.uniform(0.0, 4.0);
      for (int d = 0; d < dx; ++d) data.x(i, d) = 0.5 * data.z(i, 0) + rng.uniform(0.0, 3.0);
      data.y(i) = std::sin(data.x(i, 0)) + rng.normal(0.0, 0.25);
      for (int d = 0; d < dx; ++d) xs[static_cast<std::size_t>(i)].push_back(data.x(i, d));
      ws[static_cast<std::size_t>(i)].push_back(data.y(i));
      for (int d = 0; d < dz; ++d) ws[static_cast<std::size_t>(i)].push_back(data.z(i, d));
    }
    std::vector<double> bx, bw;
    for (int d = 0; d < dx; ++d) bx.push_back(rng.uniform(0.3, 1.5));
    for (int d = 0; d < dz + 1; ++d) bw.push_back(rng.uniform(0.3, 1.5));
    const double lambda1 = log_uniform(rng, 1e-3, 1e-1);
    const double lambda2 = log_uniform(rng, 1e-3, 1e-1);
    const bool product = rng.uniform() < 0.5;

    // Oracle: M = K (L + n l1 I)^{-1} L, then (M K + n l2 K) beta = M y.
    const Dense k = oracle_gram(xs, bx);
    const Dense l = oracle_gram(ws, bw);
    Dense lreg = l;
    for (int i = 0; i < n; ++i) lreg(i, i) += n * lambda1;
    const Dense m = mul(k, gauss_solve(lreg, l));
    Dense a = mul(m, k);
    for (std::size_t i = 0; i < a.a.size(); ++i) a.a[i] += n * lambda2 * k.a[i];
    if (condition_number(a) > 1e6) {
      ++rejected;
      continue;
    }
    Dense y(n, 1);
    for (int i = 0; i < n; ++i) y(i, 0) = data.y(i);
    const Dense beta_oracle = gauss_solve(a, mul(m, y));

    const KernelSpec kx = product ? KernelSpec::product_rbf(bx) : KernelSpec::rbf(bx);
    const KernelSpec lw = product ? KernelSpec::product_rbf(bw) : KernelSpec::rbf(bw);
    const Eigen::VectorXd beta = fit(data, kx, lw, lambda1, lambda2).beta();

    double diff = 0.0, scale = 0.0;
    for (int i = 0; i < n; ++i) {
      diff = std::max(diff, std::abs(beta(i) - beta_oracle(i, 0)));
      scale = std::max(scale, std::abs(beta_oracle(i, 0)));
    }
    const double rel = scale > 0.0 ? diff / scale : diff;
    res.metric = std::max(res.metric, rel);
    ++done;
  }
  res.passed = res.metric <= res.threshold;
  res.detail = std::to_string(instances) + " datasets (" + std::to_string(rejected) +
               " ill-conditioned draws skipped), worst relative inf-norm difference " + fmt(res.metric);
  return res;
}

CheckResult gmm_equivalence(int instances, std::uint64_t seed) {
  CheckResult res{"gmm_equivalence", true, 0.0, 1e-6, ""};
  Rng rng(seed);
  for (int inst = 0; inst < instances; ++inst) {
    const int n = static_cast<int>(rng.uniform_int(30, 80));
    const int m = static_cast<int>(rng.uniform_int(1, 4));
    Eigen::MatrixXd g(n, m);
    Eigen::VectorXd r(n);
    for (int i = 0; i < n; ++i) {
      r(i) = rng.normal() + 0.3;
      for (int j = 0; j < m; ++j) g(i, j) = rng.normal() + (j == 0 ? 1.0 : 0.0);
    }
    // Oracle moments by plain summation.
    std::vector<double> psi(static_cast<std::size_t>(m), 0.0);
    Dense lam(m, m);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < m; ++j) {
        psi[static_cast<std::size_t>(j)] += r(i) * g(i, j) / n;
        for (int k = 0; k < m; ++k) lam(j, k) += g(i, j) * g(i, k) / n;
      }
    }
    const auto objective = [&](const std::vector<double>& a) {
      double v = 0.0;
      for (int j = 0; j < m; ++j) {
        v += a[static_cast<std::size_t>(j)] * psi[static_cast<std::size_t>(j)];
        for (int k = 0; k < m; ++k) v -= 0.5 * a[static_cast<std::size_t>(j)] * lam(j, k) * a[static_cast<std::size_t>(k)];
      }
      return v;
    };
    // Coordinate ascent; each line search fits a parabola through three objective values.
    std::vector<double> a(static_cast<std::size_t>(m), 0.0);
    double prev = objective(a);
    for (int sweep = 0; sweep < 10000; ++sweep) {
      for (std::size_t j = 0; j < a.size(); ++j) {
        const double c = a[j];
        a[j] = c - 1.0;
        const double fm = objective(a);
        a[j] = c + 1.0;
        const double fp = objective(a);
        a[j] = c;
        const double f0 = objective(a);
        const double curv = fp - 2.0 * f0 + fm;
        if (curv < 0.0) a[j] = c - 0.5 * (fp - fm) / curv;
      }
      const double cur = objective(a);
      if (std::abs(cur - prev) <= 1e-15 * std::max(1.0, std::abs(cur))) break;
      prev = cur;
    }
    const double numeric = objective(a);
    const double closed = gmm_quadratic_form(r, g);
    res.metric = std::max(res.metric, std::abs(closed - numeric));
  }
  res.passed = res.metric <= res.threshold;
  res.detail = std::to_string(instances) + " instances, worst |closed form - maximized dual| " + fmt(res.metric);
  return res;
}

CheckResult fenchel_biconjugate() {
  CheckResult res{"fenchel_biconjugate", true, 0.0, 1e-5, ""};
  for (double y : {-2.0, 0.0, 2.0}) {
    for (double v : {-2.0, 0.0, 2.0}) {
      double best = -std::numeric_limits<double>::infinity();
      for (int i = -10000; i <= 10000; ++i) {
        const double u = i * 1e-3;
        best = std::max(best, u * v - fenchel_conjugate_sq(y, u));
      }
      res.metric = std::max(res.metric, std::abs(best - 0.5 * (y - v) * (y - v)));
    }
  }
  res.passed = res.metric <= res.threshold;
  res.detail = "3x3 (y, v) lattice, worst error " + fmt(res.metric);
  return res;
}

CheckResult dual_correlation(std::uint64_t seed) {
  CheckResult res{"dual_correlation", true, 0.0, 0.9, ""};
  constexpr double kRho = 0.2;
  const Dataset data = dgp::sample_linear({300, kRho, 0.7, seed});
  const KernelSpec k = KernelSpec::product_rbf(median_heuristic(data.x));
  const KernelSpec l = KernelSpec::product_rbf(median_heuristic(data.w()));
  const DualIVModel model = fit_auto(data, k, l, HyperGrid::decades());
  const DualEstimate dual = estimate_dual(model, kDefaultDualRidge);
  const Eigen::VectorXd u = dual_values(dual, l, data.w());
  const double beta_ols = fit_ols(data.x, data.y).coefficients(0);

  Eigen::VectorXd ustar(data.size());
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    ustar(i) = dgp::analytic_optimal_dual_linear(data.y(i), data.z(i, 0), beta_ols, kRho);
  }
  const Eigen::ArrayXd a = u.array() - u.mean();
  const Eigen::ArrayXd b = ustar.array() - ustar.mean();
  res.metric = (a * b).sum() / std::sqrt(a.square().sum() * b.square().sum());
  res.passed = res.metric >= res.threshold;
  res.detail = "Pearson r = " + fmt(res.metric) + " (OLS slope " + fmt(beta_ols) + ", lambda1 " +
               fmt(model.lambda1()) + ", lambda2 " + fmt(model.lambda2()) + ")";
  return res;
}

std::vector<CheckResult> run_all() {
  return {closed_form_equivalence(), gmm_equivalence(), fenchel_biconjugate(), dual_correlation()};
}

}  // namespace dualiv::checks
