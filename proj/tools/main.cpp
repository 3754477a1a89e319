#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "commands.hpp"
#include "dualdiv/errors.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw dualdiv::DomainError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw dualdiv::DomainError("cannot write '" + path + "'");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace dualdiv;
  using namespace dualdiv::cli;

  CLI::App app{"Threshold dividend strategies for spectrally positive Lévy surplus models"};
  app.set_version_flag("--version", std::string(kVersion));
  std::string command, config_path, out_path, x_grid, b_grid, from;
  std::uint64_t paths = 0, seed = 0;
  double dt = 0.0;
  app.add_option("command", command, "value | optimize | barrier | scale-table | simulate | verify")
      ->required()
      ->check(CLI::IsMember(kCommands));
  auto* config_opt = app.add_option("-c,--config", config_path, "model configuration file");
  app.add_option("-o,--out", out_path, "output CSV (default stdout)");
  app.add_option("--x", x_grid, "surplus grid, 'a,b,c' or 'lo:step:hi'");
  app.add_option("--b", b_grid, "threshold grid, same syntax as --x");
  auto* paths_opt = app.add_option("--paths", paths, "Monte Carlo paths");
  auto* seed_opt = app.add_option("--seed", seed, "Monte Carlo seed");
  auto* dt_opt = app.add_option("--dt", dt, "Euler step near levels")->check(CLI::PositiveNumber);
  app.add_option("--from", from, "scale-table: re-emit an existing CSV instead of computing");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (!from.empty()) {
      if (command != "scale-table") throw DomainError("--from only applies to scale-table");
      write_output(out_path, parse_csv(read_file(from)).to_csv());
      return 0;
    }
    if (config_opt->count() == 0) throw DomainError("--config is required");
    RunConfig cfg = parse_config(read_file(config_path));
    if (!x_grid.empty()) cfg.x = parse_grid(x_grid);
    if (!b_grid.empty()) cfg.b = parse_grid(b_grid);
    if (paths_opt->count()) {
      if (paths == 0) throw DomainError("--paths must be positive");
      cfg.sim.n_paths = paths;
    }
    if (seed_opt->count()) cfg.sim.seed = seed;
    if (dt_opt->count()) cfg.sim.dt = dt;

    const auto result = run_command(command, cfg);
    write_output(out_path, result.table.to_csv());
    return result.gates_failed ? 3 : 0;
  } catch (const NumericalError& e) {
    std::cerr << "dualdiv: numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const UnsupportedModelError& e) {
    std::cerr << "dualdiv: unsupported model: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "dualdiv: " << e.what() << "\n";
    return 1;
  }
}
