#pragma once
// Named, reproducible experiment drivers: flat dotted key=value configs with
// schema validation, a fixed 12-entry catalog, and CSV/JSON/gnuplot artifact
// emission. Every output embeds (config digest, seed, artifact version).
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace polymer2d {

inline constexpr const char* kArtifactVersion = "1.0.0";

struct Config {
  std::map<std::string, std::string> kv;
  std::string digest;  // 16 hex digits over the normalized key=value lines

  bool has(const std::string& key) const { return kv.count(key) != 0; }
};

// throws std::invalid_argument with a line-tagged message on malformed input
Config parse_config_text(const std::string& text);
Config parse_config_file(const std::string& path);  // + runtime_error on I/O

const std::vector<std::string>& experiment_catalog();  // stable order, 12 names
std::string experiment_description(const std::string& name);

// schema + cross-field checks; empty result means valid. name_hint, when
// nonempty, must match the config's own experiment key.
std::vector<std::string> validate_config(const Config& cfg,
                                         const std::string& name_hint = "");

// runs one catalog entry, writing {name}.json, {name}.csv, {name}.plot under
// out_dir. Returns 0 if every declared check passed, 1 if any failed,
// 2 for an unknown name (catalog printed to log), 3 for an invalid config
// (first violation printed to log).
int run_experiment(const std::string& name, const Config& cfg,
                   std::optional<uint64_t> seed_override,
                   const std::string& out_dir, std::ostream& log);

}  // namespace polymer2d
