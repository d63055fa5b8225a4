#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace txfreq {

/// Minimal CSV table: header row plus string cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;  // throws std::out_of_range
};

/// Throws std::ios_base::failure when the file cannot be opened.
CsvTable read_csv(const std::filesystem::path& path);

/// Regenerates the plot-ready tables from a run directory and prints a
/// summary. Returns kExitIo when a required artifact is missing.
int write_report(const std::filesystem::path& dir, std::ostream& out);

}  // namespace txfreq
