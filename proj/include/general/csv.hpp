#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace general::csv {

struct Document {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> column(std::string_view name) const;
};

/// Comma-separated, header row first. Surrounding whitespace and double quotes are
/// stripped from each cell; blank lines are skipped.
Document read(const std::filesystem::path& path);

std::vector<std::string> split_line(std::string_view line);

/// Strict decimal parse; rejects empty cells, trailing junk, NaN, and infinities.
std::optional<double> parse_number(std::string_view cell);

/// Shortest representation that round-trips.
std::string format_number(double value);

}  // namespace general::csv
