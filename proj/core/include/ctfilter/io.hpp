// Text serialization helpers. Numbers are written with 17 significant digits
// so files round-trip exactly and reruns can be compared byte for byte.
#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctfilter/simulate.hpp"

namespace ctf {

/// "%.17g", with "nan", "inf" and "-inf" for non-finite values.
std::string format_double(double v);

/// Minimal CSV writer: a header line followed by numeric rows.
class CsvWriter {
 public:
  CsvWriter(std::ostream& os, const std::vector<std::string>& header);
  CsvWriter& operator<<(double v);
  CsvWriter& operator<<(int v);
  CsvWriter& operator<<(const std::string& v);
  void end_row();

 private:
  void sep();
  std::ostream& os_;
  bool first_ = true;
};

/// Columns: t, x_0..x_{n-1} (or x for finite-state labels), dY_0.., dN_0..
/// One row per step; t is the end time of the step. The initial state is not
/// part of the CSV (use JSON for a lossless record).
void write_path_csv(const PathRecord& path, std::ostream& os);
void write_path_csv(const PathRecord& path, const std::filesystem::path& file);

nlohmann::json path_to_json(const PathRecord& path);
PathRecord path_from_json(const nlohmann::json& j);

void write_json(const nlohmann::json& j, const std::filesystem::path& file);
nlohmann::json read_json(const std::filesystem::path& file);

/// Opens `file` for writing, creating parent directories; throws Error on failure.
std::ofstream open_output(const std::filesystem::path& file);

}  // namespace ctf
