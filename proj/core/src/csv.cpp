#include "selfnorm/csv.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "selfnorm/error.hpp"

namespace selfnorm {

namespace {

void check_cell(std::string_view text) {
  if (text.find_first_of(",\n\r\"") != std::string_view::npos) {
    throw DomainError("csv: cell '" + std::string(text) + "' contains a separator or quote");
  }
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

}  // namespace

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw ConfigError("csv: no column named '" + std::string(name) + "'");
}

std::string format_double(double value) {
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof(buf), value);
  return {buf, result.ptr};
}

double parse_double(std::string_view text) {
  double value = 0.0;
  const auto result = std::from_chars(text.data(), text.data() + text.size(), value);
  if (result.ec != std::errc() || result.ptr != text.data() + text.size()) {
    // from_chars rejects "inf"/"nan" spellings produced by some tools.
    if (text == "inf") return std::numeric_limits<double>::infinity();
    if (text == "-inf") return -std::numeric_limits<double>::infinity();
    if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
    throw ConfigError("csv: cannot parse '" + std::string(text) + "' as a number");
  }
  return value;
}

CsvWriter::CsvWriter(std::ostream& out, std::vector<std::string> header) : out_(out), width_(header.size()) {
  if (header.empty()) throw DomainError("csv: empty header");
  for (std::size_t i = 0; i < header.size(); ++i) {
    check_cell(header[i]);
    out_ << (i ? "," : "") << header[i];
  }
  out_ << '\n';
}

CsvWriter& CsvWriter::cell(std::string_view text) {
  check_cell(text);
  if (filled_ == width_) throw DomainError("csv: row has more cells than the header");
  out_ << (filled_ ? "," : "") << text;
  ++filled_;
  return *this;
}

CsvWriter& CsvWriter::cell(double value) { return cell(std::string_view(format_double(value))); }

CsvWriter& CsvWriter::cell(std::int64_t value) { return cell(std::string_view(std::to_string(value))); }

CsvWriter& CsvWriter::cell(std::uint64_t value) { return cell(std::string_view(std::to_string(value))); }

void CsvWriter::end_row() {
  if (filled_ != width_) {
    std::ostringstream msg;
    msg << "csv: row has " << filled_ << " cells, header has " << width_;
    throw DomainError(msg.str());
  }
  out_ << '\n';
  filled_ = 0;
}

void write_csv(std::ostream& out, const CsvTable& table) {
  CsvWriter writer(out, table.header);
  for (const auto& row : table.rows) {
    for (const auto& c : row) writer.cell(std::string_view(c));
    writer.end_row();
  }
}

void write_csv_file(const std::string& path, const CsvTable& table) {
  std::ofstream out(path);
  if (!out) throw ConfigError("csv: cannot open '" + path + "' for writing");
  write_csv(out, table);
}

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (table.header.empty()) {
      table.header = std::move(cells);
      continue;
    }
    if (cells.size() != table.header.size()) {
      std::ostringstream msg;
      msg << "csv: line " << line_no << " has " << cells.size() << " cells, header has " << table.header.size();
      throw ConfigError(msg.str());
    }
    table.rows.push_back(std::move(cells));
  }
  if (table.header.empty()) throw ConfigError("csv: missing header");
  return table;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("csv: cannot open '" + path + "'");
  return read_csv(in);
}

}  // namespace selfnorm
