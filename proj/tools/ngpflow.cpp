#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ngpflow/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Finite-width corrections to neural network Gaussian processes"};
  std::string command;
  std::string config;
  std::string out;
  std::string backend;
  std::string mode;
  std::optional<std::uint64_t> seed;

  app.add_option("command", command, "flow | density | mc | infer | fig1 | fig2 | synth")
      ->required()
      ->check(CLI::IsMember(ngp::command_names()));
  app.add_option("--config", config, "experiment JSON file")->required();
  app.add_option("--out", out, "output directory (overrides output.directory)");
  app.add_option("--seed", seed, "run seed (overrides run.seed)");
  app.add_option("--backend", backend, "wick | quad")->check(CLI::IsMember({"wick", "quad", "quadrature"}));
  app.add_option("--mode", mode, "exp | lin | both | auto")->check(CLI::IsMember({"exp", "lin", "both", "auto"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  ngp::CommandOverrides overrides;
  if (!out.empty()) overrides.out = out;
  overrides.seed = seed;
  if (!backend.empty()) overrides.backend = ngp::parse_backend(backend);
  if (!mode.empty()) overrides.mode = mode;
  return ngp::run_command(command, config, overrides, std::cout, std::cerr);
}
