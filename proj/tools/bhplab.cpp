// Command-line front end: run, validate, list-domains.

#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "bhplab/domain_io.hpp"
#include "bhplab/error.hpp"
#include "bhplab/runner.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;

int report(const std::string& kind, const std::string& message, int code) {
  nlohmann::json record = {{"status", "error"}, {"kind", kind}, {"message", message}, {"exit_code", code}};
  std::cerr << record.dump() << "\n";
  return code;
}

bhplab::RunConfig load(const std::string& path, const std::optional<std::uint64_t>& seed, const std::string& out,
                       int workers) {
  bhplab::RunConfig cfg = bhplab::load_config(path);
  if (seed) cfg.seed = *seed;
  if (const char* env = std::getenv("BHPLAB_OUTPUT"); env && *env) cfg.output = env;
  if (!out.empty()) cfg.output = out;
  if (workers > 0) cfg.workers = workers;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Potential-theory experiments on slit domains"};
  app.require_subcommand(1);

  std::string config_path, out;
  std::uint64_t seed_value = 0;
  int workers = 0;

  CLI::App* run = app.add_subcommand("run", "Run the experiment described by a config file");
  run->add_option("config", config_path, "Config file")->required();
  CLI::Option* seed_opt = run->add_option("--seed", seed_value, "Override the config seed");
  run->add_option("--out", out, "Output directory");
  run->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);

  CLI::App* validate = app.add_subcommand("validate", "Check a config without running it");
  validate->add_option("config", config_path, "Config file")->required();

  CLI::App* list = app.add_subcommand("list-domains", "List the built-in domains");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return kConfigError;
  }

  try {
    if (list->parsed()) {
      for (const std::string& name : bhplab::list_domains()) std::cout << name << "\n";
      return 0;
    }
    if (validate->parsed()) {
      const bhplab::RunConfig cfg = load(config_path, std::nullopt, "", 0);
      const std::vector<std::string> diagnostics = bhplab::validate_config(cfg);
      bool failed = false;
      for (const std::string& d : diagnostics) {
        std::cout << d << "\n";
        failed = failed || d.starts_with("error:");
      }
      if (diagnostics.empty()) std::cout << "ok\n";
      return failed ? kConfigError : 0;
    }
    std::optional<std::uint64_t> seed;
    if (seed_opt->count()) seed = seed_value;
    const bhplab::RunConfig cfg = load(config_path, seed, out, workers);
    for (const std::string& d : bhplab::validate_config(cfg)) {
      if (d.starts_with("error:")) return report("ConfigError", d.substr(7), kConfigError);
      std::cerr << d << "\n";
    }
    const bhplab::RunResult result = bhplab::run_experiment(cfg);
    for (const std::string& f : result.files) std::cout << "wrote " << f << "\n";
    return 0;
  } catch (const bhplab::Error& e) {
    const int code = bhplab::is_numerical(e.kind()) ? kNumericalError : kConfigError;
    return report(std::string(bhplab::to_string(e.kind())), e.what(), code);
  } catch (const std::exception& e) {
    return report("InternalError", e.what(), kNumericalError);
  }
}
