#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "snsld/chain.hpp"
#include "snsld/empirical.hpp"
#include "snsld/feynman_kac.hpp"
#include "snsld/galerkin_model.hpp"
#include "snsld/sde.hpp"

namespace snsld {

namespace fs = std::filesystem;

/// Shortest decimal form that reads back to the same double.
std::string format_double(double x);

std::string read_text(const fs::path& path);
/// Writes via a temporary file and rename.
void write_text(const fs::path& path, const std::string& text);

/// FNV-1a of a file's bytes, as 16 hex digits.
std::string hash_file(const fs::path& path);

// Structured-text (JSON) documents. Parsers throw ConfigError with the
// offending field named.

std::string model_document(const GalerkinModel& model);
/// `validate` runs the cancellation probe; otherwise the model is built
/// unchecked.
GalerkinModel parse_model(const std::string& text, bool validate = true);
void save_model(const fs::path& path, const GalerkinModel& model);
GalerkinModel load_model(const fs::path& path, bool validate = true);

std::string chain_document(const FiniteChain& chain);
FiniteChain parse_chain(const std::string& text);

std::string potential_document(const Potential& v);
Potential parse_potential(const std::string& text);

std::string measure_document(const EmpiricalMeasure& mu);
EmpiricalMeasure parse_measure(const std::string& text);

std::string pf_document(const PFData& pf);

/// Binary trajectory block: magic, version, model id, dt, n_modes,
/// n_steps, seed, then the row-major state matrix (little endian).
void save_trajectory(const fs::path& path, const Trajectory& traj);
Trajectory load_trajectory(const fs::path& path);

/// Writes one block per member plus `index.json`; returns the index path.
fs::path save_ensemble(const fs::path& dir, const TrajectoryEnsemble& ens);
TrajectoryEnsemble load_ensemble(const fs::path& index_path);

/// Delimiter-separated table with `# key: value` metadata lines.
struct Table {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::string to_string() const;
  std::string meta_value(const std::string& key) const;
};

Table parse_table(const std::string& text);

}  // namespace snsld
