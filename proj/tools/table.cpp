#include "table.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "dualdiv/errors.hpp"

namespace dualdiv::cli {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

void Table::add_row(std::vector<std::string> row) {
  if (row.size() != columns.size()) {
    throw DomainError("table row has " + std::to_string(row.size()) + " cells for " +
                      std::to_string(columns.size()) + " columns");
  }
  rows.push_back(std::move(row));
}

std::string Table::to_csv() const {
  std::string out;
  for (const auto& c : comments) out += "# " + c + "\n";
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  line(columns);
  for (const auto& r : rows) line(r);
  return out;
}

std::string cell(double v) {
  if (!std::isfinite(v)) throw NumericalError("non-finite value in output table");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string cell(long long v) { return std::to_string(v); }

Table parse_csv(std::string_view text) {
  Table t;
  std::istringstream in{std::string(text)};
  bool header = false;
  for (std::string line; std::getline(in, line);) {
    if (!header && line.rfind("# ", 0) == 0) {
      t.comments.push_back(line.substr(2));
      continue;
    }
    if (!header) {
      t.columns = split(line);
      header = true;
      continue;
    }
    auto cells = split(line);
    for (auto& c : cells) {
      // Re-format numeric cells so the table is canonical.
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      if (!c.empty() && end == c.c_str() + c.size() && c.find_first_of("eE.") != std::string::npos) {
        c = cell(v);
      }
    }
    t.add_row(std::move(cells));
  }
  if (!header) throw DomainError("CSV has no header line");
  return t;
}

}  // namespace dualdiv::cli
