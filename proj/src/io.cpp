#include "dualiv/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <regex>
#include <sstream>
#include <vector>

#include "dualiv/error.hpp"

namespace dualiv::io {
namespace {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write " + path.string());
  out << text;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  for (auto& c : cells) {
    const auto b = c.find_first_not_of(" \t");
    const auto e = c.find_last_not_of(" \t");
    c = b == std::string::npos ? std::string() : c.substr(b, e - b + 1);
  }
  return cells;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

double parse_cell(const std::string& cell, std::size_t line_no, const std::string& column) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = first + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (cell.empty() || ec != std::errc() || ptr != last) {
    throw ParseError("line " + std::to_string(line_no) + ", column '" + column +
                     "': not a number: '" + cell + "'");
  }
  if (!std::isfinite(v)) {
    throw ParseError("line " + std::to_string(line_no) + ", column '" + column +
                     "': non-finite value '" + cell + "'");
  }
  return v;
}

struct Header {
  std::vector<std::optional<int>> x_of;  // per CSV column: x index
  std::vector<std::optional<int>> z_of;
  std::optional<std::size_t> y_col;
  int dx = 0;
  int dz = 0;
  std::vector<std::string> names;
};

Header parse_header(const std::string& line, bool features_only) {
  static const std::regex named(R"(([xz])(\d+))");
  Header h;
  h.names = split_line(line);
  std::vector<bool> seen_x, seen_z;
  for (std::size_t c = 0; c < h.names.size(); ++c) {
    const auto& name = h.names[c];
    std::smatch m;
    h.x_of.emplace_back();
    h.z_of.emplace_back();
    if (name == "y") {
      if (h.y_col) throw ParseError("line 1: duplicate column 'y'");
      h.y_col = c;
    } else if (std::regex_match(name, m, named)) {
      const int idx = std::stoi(m[2]);
      auto& seen = m[1] == "x" ? seen_x : seen_z;
      if (static_cast<int>(seen.size()) <= idx) seen.resize(static_cast<std::size_t>(idx) + 1);
      if (seen[static_cast<std::size_t>(idx)]) throw ParseError("line 1: duplicate column '" + name + "'");
      seen[static_cast<std::size_t>(idx)] = true;
      (m[1] == "x" ? h.x_of : h.z_of).back() = idx;
    } else if (!features_only) {
      throw ParseError("line 1: unknown column '" + name + "'");
    }
  }
  for (std::size_t i = 0; i < seen_x.size(); ++i) {
    if (!seen_x[i]) throw ParseError("line 1: missing column 'x" + std::to_string(i) + "'");
  }
  for (std::size_t i = 0; i < seen_z.size(); ++i) {
    if (!seen_z[i] && !features_only) {
      throw ParseError("line 1: missing column 'z" + std::to_string(i) + "'");
    }
  }
  h.dx = static_cast<int>(seen_x.size());
  h.dz = static_cast<int>(seen_z.size());
  if (h.dx == 0) throw ParseError("line 1: missing column 'x0'");
  if (!features_only) {
    if (!h.y_col) throw ParseError("line 1: missing column 'y'");
    if (h.dz == 0) throw ParseError("line 1: missing column 'z0'");
  }
  return h;
}

template <class Fn>
void for_each_row(const std::vector<std::string>& lines, const Header& h, Fn&& fn) {
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split_line(lines[i]);
    if (cells.size() != h.names.size()) {
      throw ParseError("line " + std::to_string(i + 1) + ": expected " +
                       std::to_string(h.names.size()) + " cells, found " +
                       std::to_string(cells.size()));
    }
    fn(static_cast<Eigen::Index>(i - 1), i + 1, cells);
  }
}

json matrix_to_json(const PointMatrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

PointMatrix matrix_from_json(const json& j) {
  if (!j.is_array()) throw ParseError("expected a matrix (array of rows)");
  const auto n = static_cast<Eigen::Index>(j.size());
  const auto d = n > 0 ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
  PointMatrix m(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = j.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != d) throw ParseError("ragged matrix in model file");
    for (Eigen::Index c = 0; c < d; ++c) m(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.begin(), v.end()); }

Eigen::VectorXd vector_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string dataset_to_csv(const Dataset& data) {
  data.validate();
  std::string out;
  for (Eigen::Index j = 0; j < data.x.cols(); ++j) out += "x" + std::to_string(j) + ",";
  out += "y";
  for (Eigen::Index j = 0; j < data.z.cols(); ++j) out += ",z" + std::to_string(j);
  out += '\n';
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (Eigen::Index j = 0; j < data.x.cols(); ++j) out += format_double(data.x(i, j)) + ",";
    out += format_double(data.y(i));
    for (Eigen::Index j = 0; j < data.z.cols(); ++j) out += "," + format_double(data.z(i, j));
    out += '\n';
  }
  return out;
}

void write_dataset_csv(const Dataset& data, const std::filesystem::path& path) {
  write_file(path, dataset_to_csv(data));
}

Dataset parse_dataset_csv(const std::string& text) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw ParseError("line 1: missing header row");
  const Header h = parse_header(lines[0], false);
  const auto n = static_cast<Eigen::Index>(lines.size() - 1);
  Dataset d{PointMatrix(n, h.dx), Eigen::VectorXd(n), PointMatrix(n, h.dz), std::nullopt};
  for_each_row(lines, h, [&](Eigen::Index r, std::size_t line_no, const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const double v = parse_cell(cells[c], line_no, h.names[c]);
      if (h.x_of[c]) d.x(r, *h.x_of[c]) = v;
      else if (h.z_of[c]) d.z(r, *h.z_of[c]) = v;
      else d.y(r) = v;
    }
  });
  if (n < 1) throw ParseError("dataset has a header but no rows");
  return d;
}

Dataset load_dataset_csv(const std::filesystem::path& path) {
  try {
    return parse_dataset_csv(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

PointMatrix load_features_csv(const std::filesystem::path& path) {
  const auto lines = lines_of(read_file(path));
  if (lines.empty()) throw ParseError(path.string() + ": line 1: missing header row");
  const Header h = parse_header(lines[0], true);
  PointMatrix x(static_cast<Eigen::Index>(lines.size() - 1), h.dx);
  for_each_row(lines, h, [&](Eigen::Index r, std::size_t line_no, const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (h.x_of[c]) x(r, *h.x_of[c]) = parse_cell(cells[c], line_no, h.names[c]);
    }
  });
  return x;
}

void write_column_csv(const std::filesystem::path& path, const std::string& name,
                      const Eigen::VectorXd& values) {
  std::string out = name + "\n";
  for (double v : values) out += format_double(v) + "\n";
  write_file(path, out);
}

json kernel_to_json(const KernelSpec& spec) {
  if (const auto* rbf = std::get_if<RbfKernel>(&spec.variant())) {
    return {{"type", "rbf"}, {"bandwidths", rbf->bandwidths}};
  }
  if (std::holds_alternative<LinearKernel>(spec.variant())) return {{"type", "linear"}};
  const auto& prod = std::get<ProductKernel>(spec.variant());
  json factors = json::array();
  for (const auto& f : prod.factors) {
    factors.push_back({{"begin", f.begin}, {"end", f.end}, {"kernel", kernel_to_json(f.kernel)}});
  }
  return {{"type", "product"}, {"factors", factors}};
}

KernelSpec kernel_from_json(const json& j) {
  try {
    const auto type = j.at("type").get<std::string>();
    if (type == "rbf") return KernelSpec::rbf(j.at("bandwidths").get<std::vector<double>>());
    if (type == "linear") return KernelSpec::linear();
    if (type == "product") {
      std::vector<ProductFactor> factors;
      for (const auto& f : j.at("factors")) {
        factors.push_back({f.at("begin").get<std::size_t>(), f.at("end").get<std::size_t>(),
                           kernel_from_json(f.at("kernel"))});
      }
      return KernelSpec::product(std::move(factors));
    }
    throw ParseError("unknown kernel type '" + type + "'");
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed kernel: ") + e.what());
  }
}

json model_to_json(const StoredModel& model) {
  json j{{"schema", kSchemaVersion}};
  if (const auto* m = std::get_if<DualIVModel>(&model)) {
    j["method"] = "dualiv";
    j["k"] = kernel_to_json(m->k());
    j["l"] = kernel_to_json(m->l());
    j["lambda1"] = m->lambda1();
    j["lambda2"] = m->lambda2();
    j["beta"] = vector_to_json(m->beta());
    j["x_train"] = matrix_to_json(m->x_train());
    j["w_train"] = matrix_to_json(m->w_train());
  } else if (const auto* lin = std::get_if<LinearFit>(&model)) {
    j["method"] = lin->method;
    j["coefficients"] = vector_to_json(lin->model.coefficients);
    j["intercept"] = lin->model.intercept;
    j["weak_instrument"] = lin->model.weak_instrument;
    j["first_stage_r2"] = lin->model.first_stage_r2;
  } else {
    const auto& ts = std::get<TwoStageKernelRidge>(model);
    j["method"] = "ts-kernel-ridge";
    j["k_x"] = kernel_to_json(ts.k_x());
    j["x_hat"] = matrix_to_json(ts.x_hat());
    j["coefficients"] = vector_to_json(ts.coefficients());
    j["y_mean"] = ts.y_mean();
  }
  return j;
}

StoredModel model_from_json(const json& j) {
  try {
    if (j.at("schema").get<int>() != kSchemaVersion) {
      throw ParseError("unsupported model schema " + j.at("schema").dump());
    }
    const auto method = j.at("method").get<std::string>();
    if (method == "dualiv") {
      return DualIVModel(matrix_from_json(j.at("x_train")), matrix_from_json(j.at("w_train")),
                         vector_from_json(j.at("beta")), kernel_from_json(j.at("k")),
                         kernel_from_json(j.at("l")), j.at("lambda1").get<double>(),
                         j.at("lambda2").get<double>());
    }
    if (method == "ols" || method == "2sls") {
      LinearFit fit{method, {}};
      fit.model.coefficients = vector_from_json(j.at("coefficients"));
      fit.model.intercept = j.at("intercept").get<double>();
      fit.model.weak_instrument = j.value("weak_instrument", false);
      fit.model.first_stage_r2 = j.value("first_stage_r2", std::vector<double>{});
      return fit;
    }
    if (method == "ts-kernel-ridge") {
      return TwoStageKernelRidge(kernel_from_json(j.at("k_x")), matrix_from_json(j.at("x_hat")),
                                 vector_from_json(j.at("coefficients")), j.at("y_mean").get<double>());
    }
    throw ParseError("unknown model method '" + method + "'");
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed model: ") + e.what());
  }
}

void save_model(const StoredModel& model, const std::filesystem::path& path) {
  write_file(path, model_to_json(model).dump(2) + "\n");
}

StoredModel load_model(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

Eigen::VectorXd predict(const StoredModel& model, const PointMatrix& x) {
  if (const auto* m = std::get_if<DualIVModel>(&model)) return dualiv::predict(*m, x);
  if (const auto* lin = std::get_if<LinearFit>(&model)) return lin->model.predict(x);
  return std::get<TwoStageKernelRidge>(model).predict(x);
}

}  // namespace dualiv::io
