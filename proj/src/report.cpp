#include "txfreq/report.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

#include "txfreq/scenario.hpp"

namespace txfreq {
namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

void write_table(const std::filesystem::path& path, const CsvTable& table) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::ios_base::failure("cannot write " + path.string());
  const auto row = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  };
  row(table.header);
  for (const auto& r : table.rows) row(r);
}

std::string seconds(const std::string& micros) {
  std::ostringstream os;
  os << std::setprecision(9) << std::stod(micros) / 1e6;
  return os.str();
}

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw std::out_of_range("missing column " + name);
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot read " + path.string());
  CsvTable table;
  std::string line;
  if (std::getline(in, line)) table.header = split(line);
  while (std::getline(in, line))
    if (!line.empty()) table.rows.push_back(split(line));
  return table;
}

int write_report(const std::filesystem::path& dir, std::ostream& out) {
  for (const char* name : {"trace.csv", "packets.csv", "usage.csv", "summary.csv"}) {
    if (!std::filesystem::exists(dir / name)) {
      out << "missing artifact: " << (dir / name).string() << '\n';
      return kExitIo;
    }
  }
  try {
    const auto trace = read_csv(dir / "trace.csv");
    CsvTable freq{{"round", "device", "z"}, {}};
    const auto round = trace.column("round"), dev = trace.column("device"), z = trace.column("z");
    for (const auto& r : trace.rows) freq.rows.push_back({r[round], r[dev], r[z]});
    write_table(dir / "frequency_evolution.csv", freq);

    const auto usage = read_csv(dir / "usage.csv");
    CsvTable resource{{"t_s", "total_rate", "c", "total_data_rate", "d"}, {}};
    for (const auto& r : usage.rows)
      resource.rows.push_back({r[usage.column("t_s")], r[usage.column("total_rate")], r[usage.column("c")],
                               r[usage.column("total_data_rate")], r[usage.column("d")]});
    write_table(dir / "resource_consumption.csv", resource);

    const auto packets = read_csv(dir / "packets.csv");
    CsvTable zest{{"t_s", "device", "reference_z", "estimated_rate"}, {}};
    for (const auto& r : packets.rows) {
      const auto& est = r[packets.column("estimated_rate")];
      if (est.empty()) continue;
      zest.rows.push_back({seconds(r[packets.column("arrival_us")]), r[packets.column("device")],
                           r[packets.column("reference_z")], est});
    }
    write_table(dir / "z_vs_estimate.csv", zest);

    const auto summary = read_csv(dir / "summary.csv");
    const auto cell = [](const std::vector<std::string>& r, std::size_t i) { return i < r.size() ? r[i] : ""; };
    out << std::left << std::setw(10) << "device" << std::setw(18) << "theoretical" << std::setw(18)
        << "estimated" << "abs_error\n";
    for (const auto& r : summary.rows)
      out << std::setw(10) << cell(r, 0) << std::setw(18) << cell(r, 1) << std::setw(18) << cell(r, 2)
          << cell(r, 3) << '\n';
    if (std::filesystem::exists(dir / "utility.csv")) {
      const auto utility = read_csv(dir / "utility.csv");
      out << std::setw(14) << "allocation" << std::setw(18) << "utility" << std::setw(12) << "reference"
          << "gap\n";
      for (const auto& r : utility.rows)
        out << std::setw(14) << cell(r, 0) << std::setw(18) << cell(r, 1) << std::setw(12) << cell(r, 2)
            << cell(r, 3) << '\n';
    }
    if (!usage.rows.empty()) {
      const auto& last = usage.rows.back();
      out << "final usage: rate " << last[usage.column("total_rate")] << " / " << last[usage.column("c")]
          << ", data " << last[usage.column("total_data_rate")] << " / " << last[usage.column("d")] << '\n';
    }
  } catch (const std::ios_base::failure& e) {
    out << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    out << "malformed artifact: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitOk;
}

}  // namespace txfreq
