#include "ngpflow/serialize.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace ngp {

namespace {
constexpr const char* kModule = "cli-io";
using json = nlohmann::json;

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError(kModule, "cannot write " + path.string());
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}
}  // namespace

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  auto out = open_out(path);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& row : rows) {
    if (row.size() != header.size()) throw ConfigError(kModule, "CSV row width differs from header");
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_double(row[i]);
    out << '\n';
  }
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(kModule, "cannot open " + path.string());
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(kModule, path.string() + " is empty");
  table.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    for (const auto& cell : split(line)) row.push_back(std::stod(cell));
    table.rows.push_back(std::move(row));
  }
  return table;
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) return Matrix(0, 0);
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j.at(0).size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = j.at(r).at(c).get<double>();
  return m;
}

json network_json(const NetworkConfig& config) {
  const auto& act = config.activation();
  json a = {{"name", act.name()}};
  if (act.is_polynomial()) a["coefficients"] = act.coefficients();
  return {{"widths", config.widths()},
          {"bias_var", config.bias_vars()},
          {"weight_var", config.weight_vars()},
          {"activation", a}};
}

json trace_json(const FlowTrace& trace, Backend backend) {
  json layers = json::array();
  for (std::size_t k = 0; k < trace.states.size(); ++k) {
    const auto& s = trace.states[k];
    json layer = {{"layer", s.layer()},
                  {"kernel", matrix_json(s.kernel())},
                  {"self_energy", matrix_json(s.self_energy())},
                  {"vertex", matrix_json(s.vertex())}};
    const auto& ratio = k < trace.ratios.size() ? trace.ratios[k] : std::nullopt;
    layer["width_ratio"] = ratio ? json(*ratio) : json(nullptr);
    layers.push_back(std::move(layer));
  }
  return {{"config", network_json(trace.config)},
          {"dataset_digest", trace.dataset_digest},
          {"backend", backend_name(backend)},
          {"vertex_pair_order", "row-major upper triangle (a <= b), 0-based"},
          {"layers", std::move(layers)}};
}

json posterior_json(const PosteriorResult& result, std::optional<double> accuracy) {
  json out = {{"epsilon", result.epsilon},
              {"jitter", result.jitter},
              {"gp_mean", matrix_json(result.gp_mean)},
              {"correction", matrix_json(result.correction)},
              {"corrected_mean", matrix_json(result.corrected_mean)}};
  out["accuracy"] = accuracy ? json(*accuracy) : json(nullptr);
  return out;
}

void write_json(const std::filesystem::path& path, const json& doc) {
  auto out = open_out(path);
  out << doc.dump(2) << '\n';
}

}  // namespace ngp
