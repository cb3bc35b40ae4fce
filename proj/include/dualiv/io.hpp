#pragma once

#include <filesystem>
#include <string>
#include <variant>

#include "json.hpp"

#include "dualiv/baselines.hpp"
#include "dualiv/dataset.hpp"
#include "dualiv/estimator.hpp"
#include "dualiv/kernels.hpp"

namespace dualiv::io {

inline constexpr int kSchemaVersion = 1;

// CSV with header x0..x{dx-1},y,z0..z{dz-1}; values written in shortest round-trip form.
void write_dataset_csv(const Dataset& data, const std::filesystem::path& path);
std::string dataset_to_csv(const Dataset& data);

// Columns may appear in any order. Errors carry the line number and offending cell.
Dataset load_dataset_csv(const std::filesystem::path& path);
Dataset parse_dataset_csv(const std::string& text);

// Only the x* columns of a CSV; other columns are ignored.
PointMatrix load_features_csv(const std::filesystem::path& path);

void write_column_csv(const std::filesystem::path& path, const std::string& name,
                      const Eigen::VectorXd& values);

nlohmann::json kernel_to_json(const KernelSpec& spec);
KernelSpec kernel_from_json(const nlohmann::json& j);

struct LinearFit {
  std::string method;  // "ols" or "2sls"
  LinearModel model;
};

using StoredModel = std::variant<DualIVModel, LinearFit, TwoStageKernelRidge>;

nlohmann::json model_to_json(const StoredModel& model);
StoredModel model_from_json(const nlohmann::json& j);

void save_model(const StoredModel& model, const std::filesystem::path& path);
StoredModel load_model(const std::filesystem::path& path);

// Predictions of any stored model.
Eigen::VectorXd predict(const StoredModel& model, const PointMatrix& x);

// Format a double in shortest round-trip decimal form.
std::string format_double(double v);

}  // namespace dualiv::io
