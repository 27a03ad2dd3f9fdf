#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "snsld/empirical.hpp"
#include "snsld/error.hpp"
#include "snsld/io.hpp"
#include "snsld/runner.hpp"
#include "snsld/sde.hpp"
#include "snsld/transport.hpp"
#include "snsld/verify.hpp"

namespace {

using namespace snsld;

constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kConfig = 2;

void emit(const std::string& text, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    write_text(out, text);
  }
}

struct TorusOptions {
  int modes = 2;
  double amplitude = 0.5;
  double decay = 0.0;
  std::vector<std::string> forcing{"0:1.0"};
  std::string model_file;

  void attach(CLI::App* cmd) {
    cmd->add_option("--modes", modes, "Maximum wavenumber of the torus truncation")->check(CLI::PositiveNumber);
    cmd->add_option("--amplitude", amplitude, "Noise amplitude");
    cmd->add_option("--noise-decay", decay, "Noise decay exponent in |k|");
    cmd->add_option("--forcing", forcing, "Forcing entries index:value");
    cmd->add_option("--model", model_file, "Model document; overrides the torus options");
  }

  GalerkinModel build() const {
    if (!model_file.empty()) return load_model(model_file);
    TorusForcingSpec f;
    for (const auto& entry : forcing) {
      const auto colon = entry.find(':');
      if (colon == std::string::npos) throw ConfigError("forcing entry '" + entry + "' is not index:value");
      try {
        f.entries.emplace_back(std::stoi(entry.substr(0, colon)), std::stod(entry.substr(colon + 1)));
      } catch (const std::logic_error&) {
        throw ConfigError("forcing entry '" + entry + "' is not index:value");
      }
    }
    TorusNoiseSpec n;
    n.amplitude = amplitude;
    n.decay_exponent = decay;
    return build_torus_model(modes, f, n);
  }
};

int cmd_run(const std::string& config_path, const std::string& out) {
  const auto config = load_config(config_path);
  const auto record = run(config, out);
  for (const auto& a : record.assertions) {
    std::printf("%s %s value=%s threshold=%s\n", a.passed ? "PASS" : "FAIL", a.name.c_str(),
                format_double(a.value).c_str(), format_double(a.threshold).c_str());
  }
  std::printf("%s %s -> %s\n", record.passed() ? "passed" : "failed", record.name.c_str(),
              record.output_dir.string().c_str());
  return record.passed() ? kPass : kFail;
}

int cmd_verify(const std::string& suite, const std::string& model_file, std::uint64_t seed, const std::string& scratch,
               const std::string& json_out) {
  if (suite.empty()) {
    for (const auto& s : suite_names()) {
      std::printf("%s:", s.c_str());
      for (const auto& c : suite_criteria(s)) std::printf(" %s", c.c_str());
      std::printf("\n");
    }
    return kPass;
  }
  suite_criteria(suite);
  VerifyOptions options;
  options.seed = seed;
  options.scratch = scratch;
  if (!model_file.empty()) {
    options.model = std::make_shared<const GalerkinModel>(load_model(model_file, false));
  }
  const auto results = run_suite(suite, options, [](const CriterionResult& r) {
    std::printf("%s %s/%s (%.2fs) %s\n", r.passed ? "PASS" : "FAIL", r.suite.c_str(), r.name.c_str(), r.seconds,
                r.measured.c_str());
    std::fflush(stdout);
  });
  if (!json_out.empty()) emit(results_document(results), json_out);
  std::size_t failed = 0;
  for (const auto& r : results) failed += r.passed ? 0 : 1;
  std::printf("%zu/%zu criteria passed\n", results.size() - failed, results.size());
  return failed == 0 ? kPass : kFail;
}

int cmd_inspect(const std::string& dir) {
  const auto rep = inspect(dir);
  const auto& r = rep.record;
  std::printf("kind: %s\nname: %s\nconfig_hash: %s\nstarted: %s\nfinished: %s\n", r.kind.c_str(), r.name.c_str(),
              r.config_hash.c_str(), r.started.c_str(), r.finished.c_str());
  for (const auto& a : r.artifacts) {
    const char* state = "ok";
    for (const auto& m : rep.missing) state = m == a.file ? "missing" : state;
    for (const auto& m : rep.mismatched) state = m == a.file ? "modified" : state;
    std::printf("artifact %s %s %s\n", a.hash.c_str(), state, a.file.c_str());
  }
  for (const auto& a : r.assertions) {
    std::printf("assertion %s %s value=%s threshold=%s\n", a.passed ? "PASS" : "FAIL", a.name.c_str(),
                format_double(a.value).c_str(), format_double(a.threshold).c_str());
  }
  std::printf("manifest: %s\nstatus: %s\n", rep.consistent() ? "consistent" : "inconsistent",
              r.passed() ? "passed" : "failed");
  return rep.consistent() && r.passed() ? kPass : kFail;
}

Metric metric_for(const EmpiricalMeasure& mu, const std::string& name) {
  if (name == "state") return {MetricKind::state_norm};
  if (name == "window-sup") return {MetricKind::window_sup};
  if (name == "window") return {MetricKind::window_weighted};
  if (name == "discrete") return {MetricKind::discrete};
  if (!name.empty()) throw ConfigError("unknown metric '" + name + "'");
  switch (mu.space()) {
    case SpaceKind::state: return {MetricKind::state_norm};
    case SpaceKind::window: return {MetricKind::window_weighted};
    case SpaceKind::label: return {MetricKind::discrete};
  }
  return {};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic Navier-Stokes large-deviation toolkit"};
  app.require_subcommand(1);

  std::string out;

  auto* run_cmd = app.add_subcommand("run", "Execute an experiment configuration");
  std::string config_path;
  run_cmd->add_option("config", config_path, "Configuration file")->required();
  run_cmd->add_option("--out", out, "Output directory (default: $" + std::string(kOutputRootVariable) + "/<name>)");

  auto* verify_cmd = app.add_subcommand("verify", "Run a verification suite; no name lists the suites");
  std::string suite, model_file, scratch, json_out;
  std::uint64_t seed = VerifyOptions{}.seed;
  verify_cmd->add_option("suite", suite, "Suite name");
  verify_cmd->add_option("--model", model_file, "Model document for the algebraic checks");
  verify_cmd->add_option("--seed", seed, "Master seed");
  verify_cmd->add_option("--scratch", scratch, "Working directory");
  verify_cmd->add_option("--json", json_out, "Write the machine-readable summary here ('-' for stdout)");

  auto* export_cmd = app.add_subcommand("export-model", "Write a model document");
  TorusOptions export_torus;
  export_torus.attach(export_cmd);
  export_cmd->add_option("--out", out, "Destination (default stdout)");

  auto* inspect_cmd = app.add_subcommand("inspect", "Summarize a run directory and check its manifest");
  std::string run_dir;
  inspect_cmd->add_option("run-dir", run_dir, "Run directory")->required();

  auto* sim_cmd = app.add_subcommand("simulate", "Simulate an ensemble and store the trajectories");
  TorusOptions sim_torus;
  sim_torus.attach(sim_cmd);
  double dt = 1e-3, horizon = 1.0;
  std::size_t count = 1;
  std::uint64_t sim_seed = 1;
  std::vector<double> initial;
  sim_cmd->add_option("--dt", dt, "Time step")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--horizon", horizon, "Final time")->check(CLI::NonNegativeNumber);
  sim_cmd->add_option("--count", count, "Ensemble size");
  sim_cmd->add_option("--seed", sim_seed, "Master seed");
  sim_cmd->add_option("--initial", initial, "Initial coefficients (default zero)");
  sim_cmd->add_option("--out", out, "Ensemble directory")->required();

  auto* emp_cmd = app.add_subcommand("empirical", "Empirical measures of stored trajectories");
  emp_cmd->require_subcommand(1);
  std::string traj_path, emp_out;
  double emp_t = 0.0, window = 0.0, shift_by = 0.0;
  bool backward = false;

  auto* occ_cmd = emp_cmd->add_subcommand("occupation", "Occupation measure over [0, t)");
  occ_cmd->add_option("trajectory", traj_path)->required();
  occ_cmd->add_option("--t", emp_t, "Averaging time (default: horizon)");
  occ_cmd->add_option("--out", emp_out);

  auto* win_cmd = emp_cmd->add_subcommand("window", "Empirical measure of path windows");
  win_cmd->add_option("trajectory", traj_path)->required();
  win_cmd->add_option("--window", window, "Window length")->required();
  win_cmd->add_option("--t", emp_t, "Averaging time (default: horizon minus window)");
  win_cmd->add_flag("--backward", backward, "Windows ending at the sample times");
  win_cmd->add_option("--out", emp_out);

  auto* per_cmd = emp_cmd->add_subcommand("periodize", "Window measure of the periodized path");
  per_cmd->add_option("trajectory", traj_path)->required();
  per_cmd->add_option("--window", window, "Window length")->required();
  per_cmd->add_option("--t", emp_t, "Period (default: horizon)");
  per_cmd->add_option("--shift", shift_by, "Shift the periodized path before measuring");
  per_cmd->add_option("--out", emp_out);

  auto* dist_cmd = emp_cmd->add_subcommand("distance", "Dual-Lipschitz distance between two measures");
  std::string first, second, metric_name;
  dist_cmd->add_option("first", first, "Measure document")->required();
  dist_cmd->add_option("second", second, "Measure document")->required();
  dist_cmd->add_option("--metric", metric_name, "state | window | window-sup | discrete (default by space)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kConfig;
  }

  try {
    if (*run_cmd) return cmd_run(config_path, out);
    if (*verify_cmd) return cmd_verify(suite, model_file, seed, scratch, json_out);
    if (*export_cmd) {
      emit(model_document(export_torus.build()), out);
      return kPass;
    }
    if (*inspect_cmd) return cmd_inspect(run_dir);
    if (*sim_cmd) {
      const auto model = sim_torus.build();
      State u0 = State::Zero(model.n_modes());
      if (!initial.empty()) {
        if (static_cast<int>(initial.size()) != model.n_modes()) {
          throw ConfigError("--initial has " + std::to_string(initial.size()) + " values, model has " +
                            std::to_string(model.n_modes()) + " modes");
        }
        u0 = Eigen::Map<const State>(initial.data(), model.n_modes());
      }
      const auto ens = ensemble(model, fixed_initial(u0), count, horizon, dt, sim_seed);
      save_model(fs::path(out) / "model.json", model);
      const auto index = save_ensemble(out, ens);
      std::printf("%zu trajectories, %zu blow-ups -> %s\n", ens.trajectories.size(), ens.failures.size(),
                  index.string().c_str());
      return ens.failures.empty() ? kPass : kFail;
    }
    if (*emp_cmd) {
      if (*dist_cmd) {
        const auto mu1 = parse_measure(read_text(first));
        const auto mu2 = parse_measure(read_text(second));
        std::printf("%s\n", format_double(dual_lipschitz(mu1, mu2, metric_for(mu1, metric_name))).c_str());
        return kPass;
      }
      const Trajectory traj = load_trajectory(traj_path);
      std::optional<EmpiricalMeasure> mu;
      if (*occ_cmd) {
        mu = occupation_measure(traj, emp_t > 0.0 ? emp_t : traj.horizon());
      } else if (*win_cmd) {
        mu = windowed_empirical(traj, window, emp_t > 0.0 ? emp_t : traj.horizon() - window, backward);
      } else {
        auto per = periodize(traj, emp_t > 0.0 ? emp_t : traj.horizon());
        if (shift_by != 0.0) per = shift(per, shift_by);
        mu = periodized_empirical(per, window);
      }
      emit(measure_document(*mu), emp_out);
      return kPass;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kConfig;
  }
  return kConfig;
}
