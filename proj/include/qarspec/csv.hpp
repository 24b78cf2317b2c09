#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qarspec {

/// A header row plus string cells. Lines starting with '#' are comments.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> comments;  ///< comment lines, without the leading '#'

  [[nodiscard]] std::optional<std::size_t> column(std::string_view name) const;
};

CsvTable parse_csv(std::istream& in);
CsvTable read_csv(const std::string& path);

/// Locale-independent parse of a decimal real; nullopt on blank or garbage.
std::optional<double> parse_real(std::string_view text);

/// Shortest representation that round-trips exactly.
std::string format_real(double value);

}  // namespace qarspec
