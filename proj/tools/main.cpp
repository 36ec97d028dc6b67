#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "polymer2d/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"2D lattice polymer experiment driver"};
  app.require_subcommand(1);

  std::string name, config_path, out_dir = ".";
  uint64_t seed = 0;

  CLI::App* run = app.add_subcommand("run", "run a catalog experiment");
  run->add_option("name", name, "experiment name")->required();
  run->add_option("--config", config_path, "config file path")->required();
  CLI::Option* seed_opt = run->add_option("--seed", seed, "master seed override");
  run->add_option("--out", out_dir, "output directory");

  CLI::App* list = app.add_subcommand("list", "print the experiment catalog");

  std::string vpath;
  CLI::App* val = app.add_subcommand("validate", "validate a config file");
  val->add_option("--config", vpath, "config file path")->required();

  CLI11_PARSE(app, argc, argv);
  using namespace polymer2d;

  if (list->parsed()) {
    for (const std::string& s : experiment_catalog())
      std::cout << s << "  - " << experiment_description(s) << "\n";
    return 0;
  }

  if (val->parsed()) {
    try {
      const Config cfg = parse_config_file(vpath);
      const std::vector<std::string> v = validate_config(cfg);
      if (v.empty()) {
        std::cout << "ok (digest " << cfg.digest << ")\n";
        return 0;
      }
      for (const std::string& m : v) std::cout << "violation: " << m << "\n";
      return 3;
    } catch (const std::exception& e) {
      std::cout << "violation: " << e.what() << "\n";
      return 3;
    }
  }

  // run
  const auto& cat = experiment_catalog();
  Config cfg;
  if (std::find(cat.begin(), cat.end(), name) != cat.end()) {
    try {
      cfg = parse_config_file(config_path);
    } catch (const std::exception& e) {
      std::cerr << "invalid config: " << e.what() << "\n";
      return 3;
    }
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) {
      std::cerr << "cannot create output directory: " << out_dir << "\n";
      return 1;
    }
  }
  std::optional<uint64_t> seed_ov;
  if (seed_opt->count() > 0) seed_ov = seed;
  try {
    return run_experiment(name, cfg, seed_ov, out_dir, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
