#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

namespace wkb {

// Experiment ids accepted by run().
const std::vector<std::string>& experiment_ids();

struct RunConfig {
  std::string experiment;
  std::string fixture;  // resolved against the config file directory
  std::string out = "out";
  unsigned long long seed = 1;
  int threads = 1;  // 0: hardware concurrency
  nlohmann::json params = nlohmann::json::object();

  bool has(const std::string& key) const { return params.contains(key); }
  double num(const std::string& key, double def) const;
  int integer(const std::string& key, int def) const;
  bool flag(const std::string& key, bool def) const;
  std::string text(const std::string& key, const std::string& def) const;
  std::vector<double> list(const std::string& key, const std::vector<double>& def) const;
};

// key = value lines, JSON literal values, # comments. Unknown keys are rejected.
RunConfig parse_config(const std::string& text, const std::string& base_dir = ".");
RunConfig load_config(const std::string& path);
// Experiment id and admissible ranges: alpha in (0,1), xi in [0,alpha), eps in (0,1), gamma >= 1.
void validate(const RunConfig& cfg);

struct RunResult {
  std::string out_dir;
  std::vector<std::string> files;  // relative to out_dir, in write order
  nlohmann::json summary;
  double wall_seconds = 0.0;
};

// Runs the experiment and writes its reports plus manifest.json. Throws wkb::Error.
RunResult run(const RunConfig& cfg);
// run() with errors mapped to exit codes 0, 2, 3, 4; messages go to err.
int run_guarded(const RunConfig& cfg, std::ostream& err);

nlohmann::json version_info();

}  // namespace wkb
