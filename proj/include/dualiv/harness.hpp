#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dualiv/dataset.hpp"
#include "dualiv/estimator.hpp"

namespace dualiv::harness {

enum class Method { DualIV, TwoSls, Ols, TsKernelRidge };
enum class Dgp { Demand, Linear };

std::string to_string(Method m);
Method method_from_string(const std::string& s);
std::string to_string(Dgp d);
Dgp dgp_from_string(const std::string& s);

struct ExperimentConfig {
  std::vector<Method> methods{Method::DualIV};
  std::vector<Eigen::Index> sizes{1000};
  std::vector<double> rhos{0.1, 0.25, 0.5, 0.75, 0.9};
  int trials = 20;
  std::uint64_t seed = 0;
  Dgp dgp = Dgp::Demand;
  double linear_beta = 0.7;
  HyperGrid grid = HyperGrid::decades();
  double dual_ridge = kDefaultDualRidge;
  double ts_lambda1 = 1e-3;
  double ts_lambda2 = 1e-3;
  int workers = 0;  // 0: hardware concurrency
  std::optional<std::filesystem::path> output_dir;

  void validate() const;
};

/// Flat key=value config. Keys: methods, n, rho, trials, seed, dgp, beta,
/// lambda_grid (comma list) or grid_points (log-spaced count), dual_ridge,
/// ts_lambda1, ts_lambda2, workers, output. '#' starts a comment; [section]
/// lines are ignored.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

struct TrialKey {
  Method method = Method::DualIV;
  Eigen::Index n = 0;
  double rho = 0.0;
  int trial = 0;
};

struct TrialResult {
  Method method = Method::DualIV;
  Eigen::Index n = 0;
  double rho = 0.0;
  int trial = 0;
  std::uint64_t seed = 0;
  double mse = 0.0;
  double log10_mse = 0.0;
  std::optional<double> lambda1;
  std::optional<double> lambda2;
  double seconds = 0.0;
  std::optional<std::string> error;

  bool ok() const { return !error.has_value(); }
};

struct Summary {
  Method method = Method::DualIV;
  Eigen::Index n = 0;
  double rho = 0.0;
  int trials = 0;
  int successes = 0;
  double mean_log10_mse = 0.0;
  double std_log10_mse = 0.0;  // sample standard deviation across trials
  double log10_mean_mse = 0.0;
  double log10_std_mse = 0.0;
  bool degenerate = false;     // fewer than two successful trials
};

struct BenchmarkResult {
  std::vector<TrialResult> trials;  // ordered by (method, n, rho, trial)
  std::vector<Summary> summary;
};

// Seed of the sample for (rho, trial); shared by every method and size.
std::uint64_t trial_seed(std::uint64_t base_seed, double rho, int trial);

// Draws the training sample for a trial, shuffled with the trial seed.
Dataset trial_dataset(const ExperimentConfig& cfg, Eigen::Index n, double rho, int trial);

// Test inputs and true structural values for the configured DGP.
std::pair<PointMatrix, Eigen::VectorXd> test_set(const ExperimentConfig& cfg);

TrialResult run_trial(const ExperimentConfig& cfg, const TrialKey& key);

std::vector<Summary> summarize(const std::vector<TrialResult>& trials);

BenchmarkResult run_benchmark(const ExperimentConfig& cfg);

// Deterministic JSON document (no timings); schema 1.
nlohmann::json to_json(const ExperimentConfig& cfg, const BenchmarkResult& result);

// Writes results.json, trials.csv and timings.csv into the directory.
void write_outputs(const ExperimentConfig& cfg, const BenchmarkResult& result,
                   const std::filesystem::path& dir);

// DUALIV_THREADS when set, else cfg.workers, else hardware concurrency.
int resolve_workers(const ExperimentConfig& cfg);

}  // namespace dualiv::harness
