#pragma once

// Output files: CSV tables whose first line carries the manifest hash, and
// JSON run manifests.

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace spinsme {

inline constexpr const char* kArtifactVersion = "1.0.0";

class OutputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// FNV-1a over the canonical dump of the manifest without `wall_clock`,
/// `manifest_hash` and the output directory; 16 hex digits.
std::string manifest_hash(const nlohmann::json& manifest);

/// Shortest text that parses back to the same double.
std::string format_number(double x);

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

/// "# manifest_hash=<hash>", header line, rows.
void write_csv(const std::filesystem::path& path, const std::string& hash, const CsvTable& table);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);

/// Current UTC time, ISO 8601.
std::string wall_clock();

}  // namespace spinsme
