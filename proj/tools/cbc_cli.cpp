#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cbc/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Control barrier corridor simulator"};
  app.require_subcommand(1);

  std::string scenario;
  std::string out;
  std::vector<std::string> sweeps;
  for (const char* name : {"corridor", "follow", "explore", "lor"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("scenario", scenario, "Scenario file (JSON)")->required();
    sub->add_option("--out", out, "Output directory (overrides the scenario's 'out')");
    sub->add_option("--sweep", sweeps, "key=v1,v2,... ; repeat for a cartesian product");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cbc::kExitValidation;
  }

  const auto command = cbc::parse_command(app.get_subcommands().front()->get_name());
  const std::optional<std::filesystem::path> out_dir =
      out.empty() ? std::nullopt : std::optional<std::filesystem::path>(out);
  return cbc::run_cli(*command, scenario, out_dir, sweeps, std::cout, std::cerr);
}
