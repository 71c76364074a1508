#include "nci/harness.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

enum Exit { ok = 0, failure = 1, config_error = 2, not_certified = 3 };

nci::json load(const std::string& path) {
  if (path.empty()) return nci::json::object();
  std::ifstream in(path);
  if (!in) throw nci::ConfigError("cannot open config " + path);
  nci::json j = nci::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw nci::ConfigError("config " + path + " is not valid JSON");
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Noncommutative index experiments on finite lattices"};
  std::string config_path, out_dir, experiment;
  std::vector<std::string> overrides;
  int workers = 1;
  std::optional<std::uint64_t> seed;
  bool strict = false, print_config = false;
  app.add_option("experiment", experiment, "experiment to run (defaults to the config's)")
      ->check(CLI::IsMember(nci::experiment_names()));
  app.add_option("-c,--config", config_path, "JSON run configuration");
  app.add_option("-o,--out", out_dir, "output directory");
  app.add_option("-w,--workers", workers, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("-s,--seed", seed, "base disorder seed");
  app.add_option("--override", overrides, "dotted.key=value, value parsed as JSON");
  app.add_flag("--strict", strict, "exit 3 if any record is not certified");
  app.add_flag("--print-config", print_config, "print the resolved config and exit");
  CLI11_PARSE(app, argc, argv);

  nci::json resolved;
  try {
    nci::json user = load(config_path);
    for (const auto& o : overrides) nci::cfg::apply_override(user, o);
    if (!experiment.empty()) user["experiment"] = experiment;
    if (seed) user["disorder"]["seed"] = *seed;
    if (!out_dir.empty()) user["output"]["dir"] = out_dir;
    resolved = nci::cfg::resolve(user);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return config_error;
  }
  if (print_config) {
    std::cout << resolved.dump(2) << "\n";
    return ok;
  }

  nci::RunResult run;
  try {
    run = nci::run_experiment(resolved.at("experiment").get<std::string>(), resolved, workers);
  } catch (const nci::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return config_error;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return failure;
  }
  const std::filesystem::path dir = resolved.at("output").at("dir").get<std::string>();
  nci::write_outputs(run, dir);
  std::cout << "config " << run.hash << ", " << run.records.size() << " records -> " << dir.string() << "\n";
  std::cout << run.summary.dump(2) << "\n";
  if (strict && !run.all_certified()) return not_certified;
  return ok;
}
