#include "nvscan/commands.hpp"
#include "nvscan/config.hpp"
#include "nvscan/field_solver.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <exception>
#include <iostream>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

const char* describe(const std::string& command) {
  if (command == "odmr") return "ODMR spectrum and resolved transitions";
  if (command == "ramsey") return "Ramsey train against a slow sinusoid, with fit";
  if (command == "lockin-sweep") return "screening amplitude and phase versus frequency";
  if (command == "ac-scan") return "AC-driven line or map scan";
  if (command == "dc-scan") return "motion-enabled DC scan";
  if (command == "sensitivity") return "closed-form and Monte Carlo sensitivities";
  if (command == "solve-field") return "potential grid and E_zeta profile at the NV height";
  return "";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Virtual scanning NV electrometer"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string seed;
  int threads = 0;
  app.add_option("-c,--config", config_path, "INI configuration file")->check(CLI::ExistingFile);
  app.add_option("-o,--out", out_dir, "output directory (default $NVSCAN_OUT_DIR or .)");
  app.add_option("--seed", seed, "override run.seed");
  app.add_option("--threads", threads, "OpenMP threads, 0 = runtime default")
      ->check(CLI::NonNegativeNumber);
  app.fallthrough();

  for (const char* name : nvscan::kCommands) app.add_subcommand(name, describe(name))->fallthrough();

  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  if (out_dir.empty()) {
    const char* env = std::getenv("NVSCAN_OUT_DIR");
    out_dir = env != nullptr && *env != '\0' ? env : ".";
  }
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#endif

  try {
    nvscan::Config config =
        config_path.empty() ? nvscan::Config() : nvscan::Config::from_file(config_path);
    if (!seed.empty()) config.set("run", "seed", seed);
    for (const std::string& path : nvscan::run_command(command, config, out_dir, std::cout)) {
      std::cout << "wrote " << path << '\n';
    }
  } catch (const nvscan::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const nvscan::SolverError& e) {
    std::cerr << "solver error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
