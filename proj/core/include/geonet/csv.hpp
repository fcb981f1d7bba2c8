#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace geonet::csv {

/// Shortest decimal text that parses back to the identical double.
std::string format_double(double value);

/// Strict parse of a full field. Throws ParseError tagged with `line`.
double parse_double(std::string_view field, std::size_t line);
std::uint64_t parse_index(std::string_view field, std::size_t line);

/// Splits on commas; no quoting (all project formats are numeric).
std::vector<std::string_view> split(std::string_view line);

/// Line-numbered reader that strips a trailing '\r'.
class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}
  bool next(std::string& line);
  std::size_t line_number() const noexcept { return line_number_; }

 private:
  std::istream& in_;
  std::size_t line_number_ = 0;
};

std::ofstream open_output(const std::filesystem::path& path);
std::ifstream open_input(const std::filesystem::path& path);

/// `<stem>.json` next to a data file.
std::filesystem::path sidecar_path(const std::filesystem::path& data_path);

}  // namespace geonet::csv
