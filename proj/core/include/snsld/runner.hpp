#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace snsld {

namespace fs = std::filesystem;

/// Environment variable naming the default output root.
inline constexpr const char* kOutputRootVariable = "SNSLD_OUTPUT_ROOT";

/// Experiment kinds accepted by the runner.
const std::vector<std::string>& experiment_kinds();

/// A validated experiment. `document` is the normalized configuration with
/// every default made explicit; it alone determines the run.
struct ExperimentConfig {
  std::string kind;
  std::string name;
  std::uint64_t master_seed = 0;
  fs::path output_dir;  // empty: <output root>/<name>
  std::string document;
  std::string hash;     // of `document`
};

/// Parses and validates a configuration. Relative file references resolve
/// against `base_dir`. Throws ConfigError listing every violated field.
ExperimentConfig parse_config(const std::string& text, const fs::path& base_dir = {});
ExperimentConfig load_config(const fs::path& path);

/// $SNSLD_OUTPUT_ROOT, or ./runs when unset.
fs::path default_output_root();

struct Assertion {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double threshold = 0.0;
};

struct ArtifactEntry {
  std::string file;  // relative to the run directory
  std::string hash;
};

struct RunRecord {
  std::string kind;
  std::string name;
  std::string config_hash;
  std::string started;
  std::string finished;
  fs::path output_dir;
  std::vector<ArtifactEntry> artifacts;
  std::vector<Assertion> assertions;

  bool passed() const;
};

/// Executes the experiment, writes its artifacts, `config.json` and
/// `record.json` into the output directory (under an exclusive lock), and
/// returns the record. Outputs of a run that throws are moved to
/// `failed/` inside the output directory.
RunRecord run(const ExperimentConfig& config, const fs::path& output_override = {});

RunRecord read_record(const fs::path& run_dir);

struct InspectReport {
  RunRecord record;
  std::vector<std::string> missing;     // listed but absent
  std::vector<std::string> mismatched;  // hash differs from the manifest
  bool consistent() const { return missing.empty() && mismatched.empty(); }
};

InspectReport inspect(const fs::path& run_dir);

}  // namespace snsld
