#include "qao/harness.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

constexpr const char* kVersion = "0.1.0";

enum ExitCode { kOk = 0, kConfigError = 2, kCapacityError = 3, kFitError = 4, kOtherError = 1 };

void print_summary(const qao::ExperimentReport& report, const std::filesystem::path& dir) {
  for (const auto& [name, value] : report.scalars) std::cout << name << " = " << value << '\n';
  std::cout << "wrote " << report.files.size() + 2 << " files to " << dir.string() << " in " << report.runtime_seconds
            << " s\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantum-assisted adaptive optics simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  CLI::App* run = app.add_subcommand("run", "Run a scenario from a JSON config");
  run->add_option("config", config_path, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  run->add_option("--set", overrides, "Override a config value: dotted.key=value (JSON or string)");
  run->add_option("--out", out_dir, "Output directory (overrides config 'output')");
  run->add_option("--seed", seed, "Seed (overrides config 'seed')");

  std::string experiment;
  int repeats = 0;
  CLI::App* exp = app.add_subcommand("experiment", "Run a built-in experiment preset");
  exp->add_option("id", experiment, "Preset id")->required()->check(CLI::IsMember(qao::experiment_ids()));
  exp->add_option("--out", out_dir, "Output directory")->default_str("out");
  exp->add_option("--seed", seed, "Base seed");
  exp->add_option("--repeats", repeats, "Seeds/aberrations per point (0: preset default)")->check(CLI::NonNegativeNumber);

  app.add_subcommand("version", "Print the version");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("version")) {
      std::cout << "qao " << kVersion << '\n';
      return kOk;
    }
    if (run->parsed()) {
      nlohmann::json doc = qao::load_json(config_path);
      for (const auto& o : overrides) qao::apply_override(doc, o);
      if (!out_dir.empty()) doc["output"] = out_dir;
      if (seed) doc["seed"] = *seed;
      const qao::ScenarioConfig config = qao::parse_config(doc);
      print_summary(qao::run_scenario(config), config.output);
      return kOk;
    }
    qao::ExperimentOptions options;
    options.output = out_dir.empty() ? std::filesystem::path("out") : std::filesystem::path(out_dir);
    options.seed = seed.value_or(1);
    options.repeats = repeats;
    print_summary(qao::run_experiment(experiment, options), options.output);
    return kOk;
  } catch (const qao::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const qao::CapacityError& e) {
    std::cerr << "capacity error: " << e.what() << '\n';
    return kCapacityError;
  } catch (const qao::FitError& e) {
    std::cerr << "fit error: " << e.what() << '\n';
    return kFitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kOtherError;
  }
}
