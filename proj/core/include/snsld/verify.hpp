#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "snsld/galerkin_model.hpp"

namespace snsld {

struct CriterionResult {
  std::string suite;
  std::string name;
  bool passed = false;
  std::string measured;  // space-separated key=value pairs, full precision
  double seconds = 0.0;
};

struct VerifyOptions {
  /// Replaces the torus fixture in the model-dependent algebraic checks.
  std::shared_ptr<const GalerkinModel> model;
  std::uint64_t seed = 20261019;
  /// Working directory for stored trajectories and rerun artifacts; a
  /// fresh temporary directory when empty.
  std::filesystem::path scratch;
};

const std::vector<std::string>& suite_names();

/// Criteria of a suite in execution order; throws ConfigError for unknown
/// suites.
std::vector<std::string> suite_criteria(const std::string& suite);

using ResultCallback = std::function<void(const CriterionResult&)>;

/// Runs every criterion of the suite, reporting each result as it finishes.
std::vector<CriterionResult> run_suite(const std::string& suite, const VerifyOptions& options = {},
                                       const ResultCallback& on_result = {});

/// Machine-readable summary (JSON).
std::string results_document(const std::vector<CriterionResult>& results);

}  // namespace snsld
