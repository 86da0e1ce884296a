#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace selfnorm {

/// Header plus rows of already formatted cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column; throws ConfigError if absent.
  [[nodiscard]] std::size_t column(std::string_view name) const;
};

/// Shortest decimal form that parses back to the same double.
std::string format_double(double value);
double parse_double(std::string_view text);

/// Incremental writer; each row must have as many cells as the header.
class CsvWriter {
 public:
  CsvWriter(std::ostream& out, std::vector<std::string> header);

  CsvWriter& cell(std::string_view text);
  CsvWriter& cell(double value);
  CsvWriter& cell(std::int64_t value);
  CsvWriter& cell(std::uint64_t value);
  CsvWriter& cell(int value) { return cell(static_cast<std::int64_t>(value)); }
  void end_row();

 private:
  std::ostream& out_;
  std::size_t width_;
  std::size_t filled_ = 0;
};

void write_csv(std::ostream& out, const CsvTable& table);
void write_csv_file(const std::string& path, const CsvTable& table);

/// Parses comma-separated text without quoting; every row must match the header width.
CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

}  // namespace selfnorm
