// Acceptance run: one [PASS]/[FAIL] line per criterion, nonzero exit if any fail.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "checks.hpp"
#include "dualiv/baselines.hpp"
#include "dualiv/dgp.hpp"
#include "dualiv/harness.hpp"

using namespace dualiv;
using namespace dualiv::harness;

namespace {

int failures = 0;

void report(int id, bool passed, const std::string& what) {
  std::printf("[%s] criterion %d: %s\n", passed ? "PASS" : "FAIL", id, what.c_str());
  std::fflush(stdout);
  if (!passed) ++failures;
}

std::string f3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

const Summary* find(const BenchmarkResult& r, Method m, Eigen::Index n, double rho) {
  for (const auto& s : r.summary) {
    if (s.method == m && s.n == n && s.rho == rho) return &s;
  }
  return nullptr;
}

std::string describe(const Summary* s) {
  if (!s) return "missing";
  return f3(s->mean_log10_mse) + " +/- " + f3(s->std_log10_mse) + " (" +
         std::to_string(s->successes) + "/" + std::to_string(s->trials) + " ok)";
}

bool in_band(const Summary* s, double lo, double hi) {
  return s && s->successes == s->trials && s->mean_log10_mse >= lo && s->mean_log10_mse <= hi;
}

ExperimentConfig demand_config(std::vector<Method> methods, Eigen::Index n,
                               std::vector<double> rhos, int trials) {
  ExperimentConfig cfg;
  cfg.methods = std::move(methods);
  cfg.sizes = {n};
  cfg.rhos = std::move(rhos);
  cfg.trials = trials;
  cfg.seed = 2019;
  return cfg;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

}  // namespace

int main() {
  const auto start = std::chrono::steady_clock::now();
  const std::vector<double> rhos{0.1, 0.5, 0.9};

  // Criteria 1 and 3 share the n = 1000 runs; the grid is thinned to 5 x 5.
  ExperimentConfig medium = demand_config({Method::DualIV, Method::TwoSls}, 1000, rhos, 20);
  medium.grid = HyperGrid::log_spaced(5);
  const BenchmarkResult big = run_benchmark(medium);
  {
    bool ok = true;
    std::string detail;
    for (double rho : rhos) {
      const Summary* s = find(big, Method::DualIV, 1000, rho);
      ok = ok && in_band(s, 3.9, 4.4);
      detail += " rho=" + f3(rho) + ": " + describe(s) + ";";
    }
    report(1, ok, "DualIV n=1000 mean log10 MSE in [3.9, 4.4]:" + detail);
  }

  const ExperimentConfig small = demand_config({Method::DualIV}, 50, rhos, 20);
  const nlohmann::json small_json = to_json(small, run_benchmark(small));
  {
    bool ok = true;
    std::string detail;
    for (const auto& s : small_json.at("summary")) {
      const double m = s.at("mean_log10_mse").is_number() ? s.at("mean_log10_mse").get<double>() : NAN;
      ok = ok && s.at("successes") == s.at("trials") && m >= 4.0 && m <= 4.6;
      detail += " rho=" + f3(s.at("rho").get<double>()) + ": " + f3(m) + " +/- " +
                f3(s.at("std_log10_mse").is_number() ? s.at("std_log10_mse").get<double>() : NAN) + ";";
    }
    report(2, ok, "DualIV n=50 mean log10 MSE in [4.0, 4.6]:" + detail);
  }

  {
    const Summary* iv = find(big, Method::TwoSls, 1000, 0.5);
    const Summary* dual = find(big, Method::DualIV, 1000, 0.5);
    const bool band = in_band(iv, 7.0, 9.5);
    const bool gap = iv && dual && iv->mean_log10_mse - dual->mean_log10_mse >= 3.0;
    report(3, band && gap,
           "2SLS n=1000 rho=0.5 in [7.0, 9.5] and >= 3 above DualIV: 2SLS " + describe(iv) +
               ", DualIV " + describe(dual));
  }

  const auto emit = [](int id, const checks::CheckResult& r) { report(id, r.passed, r.name + ": " + r.detail); };
  emit(4, checks::closed_form_equivalence(100, 1));
  emit(5, checks::gmm_equivalence(50, 2));
  emit(6, checks::fenchel_biconjugate());
  emit(7, checks::dual_correlation(0));

  {
    int close = 0, biased = 0;
    double worst_bias = INFINITY;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const Dataset d = dgp::sample_linear({10000, 0.2, 0.7, 1000 + seed});
      const double iv = fit_2sls(d).coefficients(0);
      const double ols = fit_ols(d.x, d.y).coefficients(0);
      close += std::abs(iv - 0.7) <= 0.05;
      biased += std::abs(ols - 0.7) >= 0.03;
      worst_bias = std::min(worst_bias, std::abs(ols - 0.7));
    }
    report(8, close >= 45 && biased == 50,
           "2SLS slope within 0.7 +/- 0.05 in " + std::to_string(close) +
               "/50 seeds; OLS bias >= 0.03 in " + std::to_string(biased) +
               "/50 (smallest bias " + f3(worst_bias) + ")");
  }

  {
    ExperimentConfig cons = demand_config({Method::DualIV}, 50, {0.5}, 10);
    cons.sizes = {50, 800};
    const BenchmarkResult r = run_benchmark(cons);
    std::vector<double> at50, at800;
    bool ok = true;
    for (const auto& t : r.trials) {
      ok = ok && t.ok();
      (t.n == 50 ? at50 : at800).push_back(t.ok() ? t.mse : INFINITY);
    }
    const double m50 = median(at50), m800 = median(at800);
    report(9, ok && m800 < m50,
           "median test MSE over 10 seeds, n=800 " + f3(std::log10(m800)) + " vs n=50 " +
               f3(std::log10(m50)) + " (log10)");
  }

  {
    const std::string again = to_json(small, run_benchmark(small)).dump(2);
    report(10, again == small_json.dump(2), "re-run of the n=50 benchmark gives byte-identical JSON");
  }

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("%d criteria failed, %.1f s\n", failures, secs);
  return failures == 0 ? 0 : 1;
}
