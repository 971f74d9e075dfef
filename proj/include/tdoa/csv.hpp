#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace tdoa::csv {

/// Shortest-safe round-trip text for a double (17 significant digits).
std::string format(double v);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name; throws if absent.
  std::size_t column(const std::string& name) const;
};

std::vector<std::string> split(const std::string& line, char sep = ',');

/// Reads a comma-separated file with a header row. Blank lines are skipped.
Table read(const std::filesystem::path& path);

double to_double(const std::string& s);
long long to_int(const std::string& s);

}  // namespace tdoa::csv
