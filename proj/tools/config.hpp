#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dualdiv/levy_model.hpp"
#include "dualdiv/mc_oracle.hpp"

namespace dualdiv::cli {

/// One or more configuration problems, each prefixed with its line number.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const { return errors_; }

private:
  std::vector<std::string> errors_;
};

struct RunConfig {
  ModelSpec model;
  PolicyParams policy;
  SimConfig sim;
  std::vector<double> x;
  std::vector<double> b;
  /// Line of each key as "section.key", for error messages.
  std::map<std::string, int> lines;
  std::uint64_t hash = 0;
};

/// Parses the sectioned key-value format documented in the README and runs
/// levy_model validation on the result.
RunConfig parse_config(std::string_view text);

/// "a, b, c" or "lo:step:hi" (inclusive of hi up to rounding).
std::vector<double> parse_grid(std::string_view text);

std::uint64_t fnv1a(std::string_view text);

}  // namespace dualdiv::cli
