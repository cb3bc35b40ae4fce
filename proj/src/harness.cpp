#include "dualiv/harness.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include "dualiv/baselines.hpp"
#include "dualiv/dgp.hpp"
#include "dualiv/error.hpp"
#include "dualiv/io.hpp"
#include "dualiv/kernels.hpp"
#include "dualiv/rng.hpp"

namespace dualiv::harness {
namespace {

using nlohmann::json;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ParseError("config key '" + key + "': not a number: '" + v + "'");
  }
}

long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long d = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ParseError("config key '" + key + "': not an integer: '" + v + "'");
  }
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::pair<PointMatrix, Eigen::VectorXd> linear_test_set(double beta) {
  constexpr int kPoints = 200;
  PointMatrix x(kPoints, 1);
  Eigen::VectorXd f(kPoints);
  for (int i = 0; i < kPoints; ++i) {
    x(i, 0) = -4.0 + 8.0 * i / (kPoints - 1);
    f(i) = beta * x(i, 0);
  }
  return {std::move(x), std::move(f)};
}

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::DualIV: return "dualiv";
    case Method::TwoSls: return "2sls";
    case Method::Ols: return "ols";
    case Method::TsKernelRidge: return "ts-kernel-ridge";
  }
  return "?";
}

Method method_from_string(const std::string& s) {
  for (Method m : {Method::DualIV, Method::TwoSls, Method::Ols, Method::TsKernelRidge}) {
    if (to_string(m) == s) return m;
  }
  throw ArgumentError("unknown method '" + s + "' (expected dualiv, 2sls, ols, ts-kernel-ridge)");
}

std::string to_string(Dgp d) { return d == Dgp::Demand ? "demand" : "linear"; }

Dgp dgp_from_string(const std::string& s) {
  if (s == "demand") return Dgp::Demand;
  if (s == "linear") return Dgp::Linear;
  throw ArgumentError("unknown dgp '" + s + "' (expected demand or linear)");
}

void ExperimentConfig::validate() const {
  if (methods.empty()) throw ArgumentError("no methods configured");
  if (sizes.empty() || rhos.empty()) throw ArgumentError("sample sizes and rho lists must be non-empty");
  if (trials < 1) throw ArgumentError("trials must be at least 1");
  for (auto n : sizes) {
    if (n < 4) throw ArgumentError("sample sizes must be at least 4");
  }
  for (double r : rhos) {
    const bool ok = dgp == Dgp::Demand ? (r >= 0.0 && r < 1.0) : (r >= 0.0 && r <= 1.0);
    if (!ok) throw ArgumentError("rho out of range for the " + to_string(dgp) + " DGP");
  }
  grid.validate();
  if (!(dual_ridge > 0.0) || !(ts_lambda1 > 0.0) || !(ts_lambda2 > 0.0)) {
    throw ArgumentError("ridges must be positive");
  }
  if (workers < 0) throw ArgumentError("workers must be non-negative");
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "methods" || key == "method") {
      cfg.methods.clear();
      for (const auto& m : split_list(value)) cfg.methods.push_back(method_from_string(m));
    } else if (key == "n") {
      cfg.sizes.clear();
      for (const auto& v : split_list(value)) cfg.sizes.push_back(to_int(key, v));
    } else if (key == "rho") {
      cfg.rhos.clear();
      for (const auto& v : split_list(value)) cfg.rhos.push_back(to_double(key, v));
    } else if (key == "trials") {
      cfg.trials = static_cast<int>(to_int(key, value));
    } else if (key == "seed") {
      cfg.seed = static_cast<std::uint64_t>(to_int(key, value));
    } else if (key == "dgp") {
      cfg.dgp = dgp_from_string(value);
    } else if (key == "beta") {
      cfg.linear_beta = to_double(key, value);
    } else if (key == "lambda_grid") {
      std::vector<double> g;
      for (const auto& v : split_list(value)) g.push_back(to_double(key, v));
      std::sort(g.begin(), g.end(), std::greater<>());
      cfg.grid = {g, g};
    } else if (key == "grid_points") {
      cfg.grid = HyperGrid::log_spaced(static_cast<int>(to_int(key, value)));
    } else if (key == "dual_ridge") {
      cfg.dual_ridge = to_double(key, value);
    } else if (key == "ts_lambda1") {
      cfg.ts_lambda1 = to_double(key, value);
    } else if (key == "ts_lambda2") {
      cfg.ts_lambda2 = to_double(key, value);
    } else if (key == "workers") {
      cfg.workers = static_cast<int>(to_int(key, value));
    } else if (key == "output") {
      cfg.output_dir = value;
    } else {
      throw ParseError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::uint64_t trial_seed(std::uint64_t base_seed, double rho, int trial) {
  return derive_seed(derive_seed(base_seed, std::bit_cast<std::uint64_t>(rho)),
                     static_cast<std::uint64_t>(trial));
}

Dataset trial_dataset(const ExperimentConfig& cfg, Eigen::Index n, double rho, int trial) {
  const std::uint64_t seed = trial_seed(cfg.seed, rho, trial);
  Dataset d = cfg.dgp == Dgp::Demand
                  ? dgp::sample_demand({n, rho, seed})
                  : dgp::sample_linear({n, rho, cfg.linear_beta, seed});
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(derive_seed(seed, 1));
  for (std::size_t i = order.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
    std::swap(order[i - 1], order[j]);
  }
  return d.permuted(order);
}

std::pair<PointMatrix, Eigen::VectorXd> test_set(const ExperimentConfig& cfg) {
  if (cfg.dgp == Dgp::Demand) {
    const auto& g = dgp::demand_test_grid();
    return {g.x, g.f};
  }
  return linear_test_set(cfg.linear_beta);
}

TrialResult run_trial(const ExperimentConfig& cfg, const TrialKey& key) {
  TrialResult r;
  r.method = key.method;
  r.n = key.n;
  r.rho = key.rho;
  r.trial = key.trial;
  r.seed = trial_seed(cfg.seed, key.rho, key.trial);
  const auto start = std::chrono::steady_clock::now();
  try {
    const Dataset train = trial_dataset(cfg, key.n, key.rho, key.trial);
    const auto [x_test, f_test] = test_set(cfg);
    Eigen::VectorXd pred;
    switch (key.method) {
      case Method::DualIV: {
        const KernelSpec k = KernelSpec::product_rbf(median_heuristic(train.x));
        const KernelSpec l = KernelSpec::product_rbf(median_heuristic(train.w()));
        const Selection sel = select_hyperparams(train, k, l, cfg.grid, cfg.dual_ridge);
        r.lambda1 = sel.lambda1;
        r.lambda2 = sel.lambda2;
        pred = predict(fit(train, k, l, sel.lambda1, sel.lambda2), x_test);
        break;
      }
      case Method::TwoSls: pred = fit_2sls(train).predict(x_test); break;
      case Method::Ols: pred = fit_ols(train.x, train.y).predict(x_test); break;
      case Method::TsKernelRidge: {
        const KernelSpec kz = KernelSpec::product_rbf(median_heuristic(train.z));
        const KernelSpec kx = KernelSpec::product_rbf(median_heuristic(train.x));
        pred = fit_ts_kernel_ridge(train, kz, kx, cfg.ts_lambda1, cfg.ts_lambda2).predict(x_test);
        break;
      }
    }
    r.mse = (pred - f_test).squaredNorm() / static_cast<double>(f_test.size());
    if (!std::isfinite(r.mse)) throw NumericalError("non-finite test error");
    r.log10_mse = std::log10(r.mse);
  } catch (const std::exception& e) {
    r.error = e.what();
    r.mse = std::numeric_limits<double>::quiet_NaN();
    r.log10_mse = std::numeric_limits<double>::quiet_NaN();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

std::vector<Summary> summarize(const std::vector<TrialResult>& trials) {
  std::vector<Summary> out;
  for (const auto& t : trials) {
    auto it = std::find_if(out.begin(), out.end(), [&](const Summary& s) {
      return s.method == t.method && s.n == t.n && s.rho == t.rho;
    });
    if (it == out.end()) {
      out.push_back({t.method, t.n, t.rho});
      it = std::prev(out.end());
    }
    ++it->trials;
  }
  for (auto& s : out) {
    std::vector<double> logs, mses;
    for (const auto& t : trials) {
      if (t.method == s.method && t.n == s.n && t.rho == s.rho && t.ok()) {
        logs.push_back(t.log10_mse);
        mses.push_back(t.mse);
      }
    }
    s.successes = static_cast<int>(logs.size());
    s.degenerate = logs.size() < 2;
    if (logs.empty()) {
      s.mean_log10_mse = s.std_log10_mse = s.log10_mean_mse = s.log10_std_mse =
          std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    s.mean_log10_mse = std::accumulate(logs.begin(), logs.end(), 0.0) / static_cast<double>(logs.size());
    s.std_log10_mse = sample_std(logs);
    s.log10_mean_mse =
        std::log10(std::accumulate(mses.begin(), mses.end(), 0.0) / static_cast<double>(mses.size()));
    s.log10_std_mse = std::log10(sample_std(mses));
  }
  return out;
}

int resolve_workers(const ExperimentConfig& cfg) {
  if (const char* env = std::getenv("DUALIV_THREADS"); env && *env) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  if (cfg.workers > 0) return cfg.workers;
  return std::max(1u, std::thread::hardware_concurrency());
}

BenchmarkResult run_benchmark(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<TrialKey> keys;
  for (Method m : cfg.methods) {
    for (auto n : cfg.sizes) {
      for (double rho : cfg.rhos) {
        for (int t = 0; t < cfg.trials; ++t) keys.push_back({m, n, rho, t});
      }
    }
  }
  BenchmarkResult out;
  out.trials.resize(keys.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < keys.size(); i = next++) out.trials[i] = run_trial(cfg, keys[i]);
  };
  const int workers = std::min<int>(resolve_workers(cfg), static_cast<int>(keys.size()));
  {
    std::vector<std::jthread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
  }
  out.summary = summarize(out.trials);
  return out;
}

json to_json(const ExperimentConfig& cfg, const BenchmarkResult& result) {
  json config{
      {"methods", json::array()},
      {"n", cfg.sizes},
      {"rho", cfg.rhos},
      {"trials", cfg.trials},
      {"seed", cfg.seed},
      {"dgp", to_string(cfg.dgp)},
      {"lambda1_grid", cfg.grid.lambda1},
      {"lambda2_grid", cfg.grid.lambda2},
      {"dual_ridge", cfg.dual_ridge},
  };
  for (Method m : cfg.methods) config["methods"].push_back(to_string(m));
  if (cfg.dgp == Dgp::Linear) config["beta"] = cfg.linear_beta;
  if (std::find(cfg.methods.begin(), cfg.methods.end(), Method::TsKernelRidge) != cfg.methods.end()) {
    config["ts_lambda1"] = cfg.ts_lambda1;
    config["ts_lambda2"] = cfg.ts_lambda2;
  }

  json trials = json::array();
  for (const auto& t : result.trials) {
    json j{{"method", to_string(t.method)}, {"n", t.n},     {"rho", t.rho},
           {"trial", t.trial},              {"seed", t.seed}, {"mse", t.mse},
           {"log10_mse", t.log10_mse}};
    if (t.lambda1) j["lambda1"] = *t.lambda1;
    if (t.lambda2) j["lambda2"] = *t.lambda2;
    if (t.error) j["error"] = *t.error;
    trials.push_back(std::move(j));
  }
  json summary = json::array();
  for (const auto& s : result.summary) {
    summary.push_back({{"method", to_string(s.method)},
                       {"n", s.n},
                       {"rho", s.rho},
                       {"trials", s.trials},
                       {"successes", s.successes},
                       {"mean_log10_mse", s.mean_log10_mse},
                       {"std_log10_mse", s.std_log10_mse},
                       {"log10_mean_mse", s.log10_mean_mse},
                       {"log10_std_mse", s.log10_std_mse},
                       {"degenerate", s.degenerate}});
  }
  return {{"schema", io::kSchemaVersion}, {"config", config}, {"summary", summary}, {"trials", trials}};
}

void write_outputs(const ExperimentConfig& cfg, const BenchmarkResult& result,
                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "results.json", std::ios::binary);
    out << to_json(cfg, result).dump(2) << '\n';
  }
  std::ofstream trials(dir / "trials.csv", std::ios::binary);
  std::ofstream timings(dir / "timings.csv", std::ios::binary);
  trials << "method,n,rho,trial,seed,mse,log10_mse,lambda1,lambda2\n";
  timings << "method,n,rho,trial,seconds\n";
  for (const auto& t : result.trials) {
    trials << to_string(t.method) << ',' << t.n << ',' << io::format_double(t.rho) << ',' << t.trial
           << ',' << t.seed << ',' << io::format_double(t.mse) << ','
           << io::format_double(t.log10_mse) << ','
           << (t.lambda1 ? io::format_double(*t.lambda1) : "") << ','
           << (t.lambda2 ? io::format_double(*t.lambda2) : "") << '\n';
    timings << to_string(t.method) << ',' << t.n << ',' << io::format_double(t.rho) << ','
            << t.trial << ',' << t.seconds << '\n';
  }
}

}  // namespace dualiv::harness
