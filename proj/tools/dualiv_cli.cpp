// dualiv: simulate data, fit and apply IV regression models, run benchmarks and self-checks.
//
// Exit codes: 0 success, 1 argument/parse errors, 2 numerical errors, 3 failed checks.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "checks.hpp"
#include "dualiv/baselines.hpp"
#include "dualiv/dgp.hpp"
#include "dualiv/error.hpp"
#include "dualiv/estimator.hpp"
#include "dualiv/harness.hpp"
#include "dualiv/io.hpp"

namespace {

using namespace dualiv;

struct SimulateOptions {
  std::string dgp = "demand";
  long long n = 1000;
  double rho = 0.5;
  double beta = 0.7;
  std::uint64_t seed = 0;
  std::string out;
};

struct FitOptions {
  std::string data;
  std::string method = "dualiv";
  std::optional<double> lambda1;
  std::optional<double> lambda2;
  bool autoselect = false;
  double dual_ridge = kDefaultDualRidge;
  std::string model_out;
};

struct PredictOptions {
  std::string model;
  std::string data;
  std::string out;
};

int simulate(const SimulateOptions& o) {
  const Dataset d = o.dgp == "demand"
                        ? dgp::sample_demand({o.n, o.rho, o.seed})
                        : dgp::sample_linear({o.n, o.rho, o.beta, o.seed});
  io::write_dataset_csv(d, o.out);
  std::cout << "wrote " << d.size() << " rows to " << o.out << '\n';
  return 0;
}

int fit_model(const FitOptions& o) {
  const Dataset data = io::load_dataset_csv(o.data);
  const auto method = harness::method_from_string(o.method);
  std::optional<io::StoredModel> model;
  switch (method) {
    case harness::Method::DualIV: {
      const KernelSpec k = KernelSpec::product_rbf(median_heuristic(data.x));
      const KernelSpec l = KernelSpec::product_rbf(median_heuristic(data.w()));
      if (o.autoselect) {
        const Selection sel = select_hyperparams(data, k, l, HyperGrid::decades(), o.dual_ridge);
        std::cout << "selected lambda1=" << sel.lambda1 << " lambda2=" << sel.lambda2 << '\n';
        model.emplace(fit(data, k, l, sel.lambda1, sel.lambda2));
      } else {
        if (!o.lambda1 || !o.lambda2) {
          throw ArgumentError("dualiv needs --lambda1 and --lambda2, or --auto");
        }
        model.emplace(fit(data, k, l, *o.lambda1, *o.lambda2));
      }
      break;
    }
    case harness::Method::TwoSls: {
      io::LinearFit f{"2sls", fit_2sls(data)};
      if (f.model.weak_instrument) std::cerr << "warning: weak instrument (first-stage R^2 < 0.01)\n";
      model.emplace(std::move(f));
      break;
    }
    case harness::Method::Ols: model.emplace(io::LinearFit{"ols", fit_ols(data.x, data.y)}); break;
    case harness::Method::TsKernelRidge: {
      const KernelSpec kz = KernelSpec::product_rbf(median_heuristic(data.z));
      const KernelSpec kx = KernelSpec::product_rbf(median_heuristic(data.x));
      model.emplace(fit_ts_kernel_ridge(data, kz, kx, o.lambda1.value_or(1e-3), o.lambda2.value_or(1e-3)));
      break;
    }
  }
  io::save_model(*model, o.model_out);
  std::cout << "wrote " << o.method << " model to " << o.model_out << '\n';
  return 0;
}

int predict_model(const PredictOptions& o) {
  const io::StoredModel model = io::load_model(o.model);
  const PointMatrix x = io::load_features_csv(o.data);
  io::write_column_csv(o.out, "f_hat", io::predict(model, x));
  std::cout << "wrote " << x.rows() << " predictions to " << o.out << '\n';
  return 0;
}

int benchmark(const std::string& config_path, const std::string& out_override) {
  harness::ExperimentConfig cfg = harness::load_config(config_path);
  if (!out_override.empty()) cfg.output_dir = out_override;
  const harness::BenchmarkResult result = harness::run_benchmark(cfg);
  for (const auto& s : result.summary) {
    std::cout << harness::to_string(s.method) << " n=" << s.n << " rho=" << s.rho
              << " log10 MSE = " << s.mean_log10_mse << " +- " << s.std_log10_mse << " ("
              << s.successes << "/" << s.trials << " trials)\n";
  }
  if (cfg.output_dir) {
    harness::write_outputs(cfg, result, *cfg.output_dir);
    std::cout << "results in " << cfg.output_dir->string() << '\n';
  } else {
    std::cout << harness::to_json(cfg, result).dump(2) << '\n';
  }
  return 0;
}

int check() {
  bool ok = true;
  for (const auto& r : checks::run_all()) {
    std::cout << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail << '\n';
    ok = ok && r.passed;
  }
  return ok ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kernel DualIV instrumental-variable regression"};
  app.require_subcommand(1);

  SimulateOptions sim;
  auto* simulate_cmd = app.add_subcommand("simulate", "Sample a synthetic dataset to CSV");
  simulate_cmd->add_option("--dgp", sim.dgp, "demand or linear")->check(CLI::IsMember({"demand", "linear"}));
  simulate_cmd->add_option("--n", sim.n, "sample size")->check(CLI::PositiveNumber);
  simulate_cmd->add_option("--rho", sim.rho, "confounding / instrument-strength parameter");
  simulate_cmd->add_option("--beta", sim.beta, "structural slope (linear DGP)");
  simulate_cmd->add_option("--seed", sim.seed, "64-bit seed");
  simulate_cmd->add_option("--out", sim.out, "output CSV")->required();

  FitOptions fo;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a model to a CSV dataset");
  fit_cmd->add_option("--data", fo.data, "training CSV")->required();
  fit_cmd->add_option("--method", fo.method, "dualiv, 2sls, ols or ts-kernel-ridge");
  fit_cmd->add_option("--lambda1", fo.lambda1, "first regularizer");
  fit_cmd->add_option("--lambda2", fo.lambda2, "second regularizer");
  fit_cmd->add_flag("--auto", fo.autoselect, "select (lambda1, lambda2) on a half split");
  fit_cmd->add_option("--dual-ridge", fo.dual_ridge, "ridge of the dual function used in selection");
  fit_cmd->add_option("--model-out", fo.model_out, "output model JSON")->required();

  PredictOptions po;
  auto* predict_cmd = app.add_subcommand("predict", "Evaluate a fitted model on CSV inputs");
  predict_cmd->add_option("--model", po.model, "model JSON")->required();
  predict_cmd->add_option("--data", po.data, "CSV with x0.. columns")->required();
  predict_cmd->add_option("--out", po.out, "output CSV")->required();

  std::string config_path, bench_out;
  auto* bench_cmd = app.add_subcommand("benchmark", "Run a Monte Carlo benchmark");
  bench_cmd->add_option("--config", config_path, "key=value config file")->required();
  bench_cmd->add_option("--out", bench_out, "output directory (overrides the config)");

  app.add_subcommand("check", "Run the oracle and property self-checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*simulate_cmd) return simulate(sim);
    if (*fit_cmd) return fit_model(fo);
    if (*predict_cmd) return predict_model(po);
    if (*bench_cmd) return benchmark(config_path, bench_out);
    return check();
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
