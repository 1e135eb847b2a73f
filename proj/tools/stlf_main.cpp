#include <iostream>

#include <CLI11.hpp>

#include "stlf/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Short-term load forecasting experiments with leading temperature conditions"};
  std::string command;
  std::string config;
  std::vector<std::string> overrides;
  std::string output;
  std::string commands;
  for (const auto& c : stlf::cli::command_names()) commands += (commands.empty() ? "" : ", ") + c;
  app.add_option("command", command, "One of: " + commands)->required();
  app.add_option("-c,--config", config, "JSON config file (comments allowed)");
  app.add_option("-s,--set", overrides, "Override a config field, e.g. --set window.n_points=16");
  app.add_option("-o,--output-root", output,
                 std::string("Directory receiving the timestamped run folder (default: config output_dir, then $") +
                     stlf::cli::kOutputRootEnv + ", then ./stlf-output)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  stlf::cli::RunOptions opts;
  if (!output.empty()) opts.output_root = output;
  std::optional<std::filesystem::path> cfg;
  if (!config.empty()) cfg = config;
  const auto outcome = stlf::cli::run(command, cfg, overrides, opts);
  if (outcome.exit_code == 0) std::cout << outcome.output_dir.string() << '\n';
  return outcome.exit_code;
}
