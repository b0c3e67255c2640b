#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ngpflow/bayes.hpp"
#include "ngpflow/flow.hpp"

namespace ngp {

/// 17 significant digits, '.' decimal separator.
std::string format_double(double value);

/// Header row then one line per row, values formatted by format_double.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

/// Parsed CSV: header and numeric rows.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};
CsvTable read_csv(const std::filesystem::path& path);

/// Row-major array of arrays.
nlohmann::json matrix_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

nlohmann::json network_json(const NetworkConfig& config);
nlohmann::json trace_json(const FlowTrace& trace, Backend backend);
nlohmann::json posterior_json(const PosteriorResult& result, std::optional<double> accuracy);

void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

}  // namespace ngp
