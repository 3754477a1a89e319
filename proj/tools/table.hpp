#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace dualdiv::cli {

/// A CSV table with '#' comment lines above the column header. Cells are
/// stored as text; numbers go through `cell` so they round-trip exactly.
struct Table {
  std::vector<std::string> comments;  // without the leading "# "
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row);
  std::string to_csv() const;
};

/// %.17g; throws NumericalError for NaN or infinity.
std::string cell(double v);
std::string cell(long long v);

Table parse_csv(std::string_view text);

}  // namespace dualdiv::cli
