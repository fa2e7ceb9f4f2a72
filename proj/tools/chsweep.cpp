// chsweep: penalty-parameter sweep for one step of the relaxed
// double-obstacle Cahn-Hilliard system.
//
//   chsweep --config sweep.cfg [--preset paper2d] [--key value ...]
//
// Settings are applied in the order preset, config file, command-line
// overrides. Writes <out>/records.csv, <out>/plot.gp, <out>/slopes.txt and
// <out>/sweep.log.

#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "chmy/harness.hpp"
#include "chmy/kernels.hpp"

namespace {

enum ExitCode { kOk = 0, kUnexpectedFailure = 1, kConfigError = 2, kIoError = 3 };

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Penalty sweep for the Moreau-Yosida relaxed Cahn-Hilliard step"};
  std::string config_path;
  std::string preset_name = "desk";
  bool quiet = false;
  app.add_option("--config", config_path, "key = value configuration file")->check(CLI::ExistingFile);
  app.add_option("--preset", preset_name, "named profile: desk (default) or paper2d");
  app.add_flag("--quiet", quiet, "do not echo the sweep log to stderr");
  app.footer("Any configuration key may also be passed as --key value or --key=value, e.g.\n"
             "  --k 3,4 --schemes lumped --s_grid \"1e2 1e8 13\" --divergence_factor 1e14");
  app.allow_extras();
  CLI11_PARSE(app, argc, argv);

  chmy::SweepConfig cfg;
  try {
    cfg = chmy::preset(preset_name);
    if (!config_path.empty()) chmy::apply_config_file(cfg, config_path);
    const std::vector<std::string> extras = app.remaining();
    for (std::size_t i = 0; i < extras.size(); ++i) {
      const std::string& arg = extras[i];
      if (arg.rfind("--", 0) != 0) throw chmy::ConfigError("unexpected argument '" + arg + "'");
      std::string key = arg.substr(2);
      std::string value;
      if (const auto eq = key.find('='); eq != std::string::npos) {
        value = key.substr(eq + 1);
        key.erase(eq);
      } else {
        if (i + 1 >= extras.size()) throw chmy::ConfigError("missing value for '" + arg + "'");
        value = extras[++i];
      }
      chmy::apply_setting(cfg, key, value);
    }
    cfg.validate();
  } catch (const std::exception& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfigError;
  }

  std::ofstream log_file;
  try {
    std::filesystem::create_directories(cfg.output);
    log_file.open(cfg.output / "sweep.log");
    if (!log_file) throw std::runtime_error("cannot write " + (cfg.output / "sweep.log").string());
  } catch (const std::exception& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIoError;
  }

  const auto log = [&](const std::string& line) {
    log_file << line << std::endl;
    if (!quiet) std::cerr << line << '\n';
  };
  log("kernels: " + std::string(chmy::kernels::isa_name(chmy::kernels::active_isa())));

  std::vector<chmy::SweepRecord> records;
  try {
    records = chmy::run_sweep(cfg, log);
    chmy::emit_csv(records, cfg.output / "records.csv");
    chmy::emit_plot_script(records, cfg.output / "plot.gp");
    std::ofstream slopes(cfg.output / "slopes.txt");
    if (!slopes) throw std::runtime_error("cannot write slopes.txt");
    chmy::write_slopes(slopes, records);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIoError;
  }

  int unexpected = 0;
  for (const auto& r : records) {
    if (chmy::unexpected_failure(r)) ++unexpected;
  }
  if (unexpected > 0) {
    log(std::to_string(unexpected) + " unexpected solver failure(s)");
    return kUnexpectedFailure;
  }
  return kOk;
}
