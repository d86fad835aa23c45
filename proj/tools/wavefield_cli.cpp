// Command-line driver: lists and runs the registered scenarios.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "wavefield/io.hpp"
#include "wavefield/scenarios.hpp"

namespace {

constexpr const char* kSchemaPath = "docs/config-schema.md";

void print_checks(const wavefield::RunResult& r) {
  for (const auto& c : r.checks) {
    std::cout << (c.passed ? "ok    " : "FAIL  ") << c.name << ": " << c.detail << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  using namespace wavefield;

  CLI::App app{"Local space-time wave-field simulator.\nConfiguration files use flat 'key = value' lines; see " +
               std::string(kSchemaPath) + " for every key."};
  app.require_subcommand(1);

  app.add_subcommand("list", "list the registered scenarios");

  CLI::App* run = app.add_subcommand("run", "run one scenario and write its outputs");
  std::string scenario;
  std::string config_path;
  std::optional<long long> seed;
  std::optional<long long> trials;
  std::optional<long long> snapshot_every;
  std::optional<long long> jobs;
  std::string out;
  run->add_option("scenario", scenario, "scenario name (see 'list')")->required();
  run->add_option("--config", config_path, std::string("key = value file, schema in ") + kSchemaPath);
  run->add_option("--seed", seed, "RNG seed for ensemble statistics");
  run->add_option("--out", out, "output directory for snapshots.csv, boundary.csv, summary.json, config.txt");
  run->add_option("--trials", trials, "ensemble trials (0 disables)");
  run->add_option("--snapshot-every", snapshot_every, "steps between snapshots and oracle checkpoints");
  run->add_option("--jobs", jobs, "worker threads for ensemble statistics");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (app.got_subcommand("list")) {
      for (const auto& s : scenario_registry()) std::cout << s.name << "  " << s.description << '\n';
      return kExitOk;
    }

    ScenarioConfig cfg;
    if (!config_path.empty()) cfg = ScenarioConfig::load(config_path);
    if (seed) cfg.set("seed", std::to_string(*seed));
    if (trials) cfg.set("trials", std::to_string(*trials));
    if (snapshot_every) cfg.set("snapshot_every", std::to_string(*snapshot_every));
    if (jobs) cfg.set("jobs", std::to_string(*jobs));
    if (!out.empty()) cfg.set("out", out);

    const RunResult r = run_scenario(scenario, cfg);
    print_checks(r);
    if (out.empty() && !cfg.has("out")) io::write_json(std::cout, r.summary);
    return r.exit_code;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "assertion failure: " << e.what() << '\n';
    return kExitAssertion;
  }
}
