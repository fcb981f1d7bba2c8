#include "geonet/csv.hpp"

#include <charconv>
#include <fstream>
#include <istream>

#include "geonet/errors.hpp"

namespace geonet::csv {

std::string format_double(double value) {
  char buffer[32];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

double parse_double(std::string_view field, std::size_t line) {
  double value = 0.0;
  const char* end = field.data() + field.size();
  const auto result = std::from_chars(field.data(), end, value);
  if (field.empty() || result.ec != std::errc{} || result.ptr != end) {
    throw ParseError("invalid number '" + std::string(field) + "'", line);
  }
  return value;
}

std::uint64_t parse_index(std::string_view field, std::size_t line) {
  std::uint64_t value = 0;
  const char* end = field.data() + field.size();
  const auto result = std::from_chars(field.data(), end, value);
  if (field.empty() || result.ec != std::errc{} || result.ptr != end) {
    throw ParseError("invalid index '" + std::string(field) + "'", line);
  }
  return value;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

bool LineReader::next(std::string& line) {
  if (!std::getline(in_, line)) {
    return false;
  }
  ++line_number_;
  if (!line.empty() && line.back() == '\r') {
    line.pop_back();
  }
  return true;
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw InputError("cannot open '" + path.string() + "' for writing");
  }
  return out;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InputError("cannot open '" + path.string() + "'");
  }
  return in;
}

std::filesystem::path sidecar_path(const std::filesystem::path& data_path) {
  std::filesystem::path result = data_path;
  result.replace_extension(".json");
  return result;
}

}  // namespace geonet::csv
