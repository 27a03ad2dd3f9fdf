#include "snsld/runner.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "snsld/chain.hpp"
#include "snsld/dv_rate.hpp"
#include "snsld/dynamics_probes.hpp"
#include "snsld/empirical.hpp"
#include "snsld/error.hpp"
#include "snsld/feynman_kac.hpp"
#include "snsld/hash.hpp"
#include "snsld/io.hpp"
#include "snsld/sde.hpp"

namespace snsld {

using json = nlohmann::json;

const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> kinds{"simulate", "pressure", "rate", "oracle", "couple", "probes", "entropy"};
  return kinds;
}

bool RunRecord::passed() const {
  return std::all_of(assertions.begin(), assertions.end(), [](const Assertion& a) { return a.passed; });
}

fs::path default_output_root() {
  const char* root = std::getenv(kOutputRootVariable);
  if (root != nullptr && *root != '\0') return fs::path(root);
  return fs::path("runs");
}

namespace {

enum class Rule { any, positive, non_negative, unit_interval };

const char* rule_text(Rule r) {
  switch (r) {
    case Rule::positive:
      return "must be positive";
    case Rule::non_negative:
      return "must be non-negative";
    case Rule::unit_interval:
      return "must lie in [0, 1]";
    case Rule::any:
      break;
  }
  return "must be finite";
}

bool rule_ok(Rule r, double x) {
  if (!std::isfinite(x)) return false;
  switch (r) {
    case Rule::positive:
      return x > 0.0;
    case Rule::non_negative:
      return x >= 0.0;
    case Rule::unit_interval:
      return x >= 0.0 && x <= 1.0;
    case Rule::any:
      break;
  }
  return true;
}

// Reads one JSON object. Every violation is recorded rather than thrown,
// and the values actually used (defaults included) are echoed into
// `resolved`.
class Params {
 public:
  Params(const json& src, std::string path, std::vector<std::string>& issues)
      : src_(src.is_object() ? src : json::object()), path_(std::move(path)), issues_(&issues) {
    if (!src.is_null() && !src.is_object()) issue("", "must be an object");
  }

  double real(const std::string& key, std::optional<double> fallback, Rule rule = Rule::any) {
    seen_.insert(key);
    double v = fallback.value_or(0.0);
    if (!src_.contains(key)) {
      if (!fallback) issue(key, "is required");
    } else if (!src_[key].is_number()) {
      issue(key, "must be a number");
    } else {
      v = src_[key].get<double>();
      if (!rule_ok(rule, v)) issue(key, rule_text(rule));
    }
    resolved[key] = v;
    return v;
  }

  long long integer(const std::string& key, std::optional<long long> fallback, long long min_value) {
    seen_.insert(key);
    long long v = fallback.value_or(min_value);
    if (!src_.contains(key)) {
      if (!fallback) issue(key, "is required");
    } else if (!src_[key].is_number_integer()) {
      issue(key, "must be an integer");
    } else {
      v = src_[key].get<long long>();
      if (v < min_value) issue(key, "must be at least " + std::to_string(min_value));
    }
    resolved[key] = v;
    return v;
  }

  std::uint64_t seed(const std::string& key, std::uint64_t fallback) {
    seen_.insert(key);
    std::uint64_t v = fallback;
    if (src_.contains(key)) {
      const json& x = src_[key];
      if (x.is_number_unsigned() || (x.is_number_integer() && x.get<long long>() >= 0)) {
        v = x.get<std::uint64_t>();
      } else {
        issue(key, "must be a non-negative integer");
      }
    }
    resolved[key] = v;
    return v;
  }

  std::vector<double> reals(const std::string& key, std::optional<std::vector<double>> fallback, Rule rule = Rule::any,
                            std::size_t min_size = 1) {
    seen_.insert(key);
    std::vector<double> v = fallback.value_or(std::vector<double>{});
    if (!src_.contains(key)) {
      if (!fallback) issue(key, "is required");
    } else if (!src_[key].is_array()) {
      issue(key, "must be an array of numbers");
    } else {
      v.clear();
      bool ok = true;
      for (const auto& x : src_[key]) {
        if (!x.is_number()) {
          ok = false;
          continue;
        }
        v.push_back(x.get<double>());
        if (!rule_ok(rule, v.back())) ok = false;
      }
      if (!ok) issue(key, std::string("entries ") + rule_text(rule));
      if (v.size() < min_size) issue(key, "needs at least " + std::to_string(min_size) + " entries");
    }
    resolved[key] = v;
    return v;
  }

  std::vector<int> integers(const std::string& key, std::vector<int> fallback, int min_value) {
    seen_.insert(key);
    std::vector<int> v = std::move(fallback);
    if (src_.contains(key)) {
      if (!src_[key].is_array() || src_[key].empty()) {
        issue(key, "must be a non-empty array of integers");
      } else {
        v.clear();
        for (const auto& x : src_[key]) {
          if (!x.is_number_integer() || x.get<long long>() < min_value) {
            issue(key, "entries must be integers >= " + std::to_string(min_value));
            break;
          }
          v.push_back(x.get<int>());
        }
      }
    }
    resolved[key] = v;
    return v;
  }

  std::vector<std::vector<double>> matrix(const std::string& key) {
    seen_.insert(key);
    std::vector<std::vector<double>> m;
    if (!src_.contains(key)) {
      issue(key, "is required");
    } else {
      try {
        m = src_[key].get<std::vector<std::vector<double>>>();
      } catch (const json::exception&) {
        issue(key, "must be an array of numeric rows");
      }
    }
    resolved[key] = m;
    return m;
  }

  bool flag(const std::string& key, bool fallback) {
    seen_.insert(key);
    bool v = fallback;
    if (src_.contains(key)) {
      if (src_[key].is_boolean()) {
        v = src_[key].get<bool>();
      } else {
        issue(key, "must be true or false");
      }
    }
    resolved[key] = v;
    return v;
  }

  std::string text(const std::string& key, std::optional<std::string> fallback,
                   const std::vector<std::string>& allowed = {}) {
    seen_.insert(key);
    std::string v = fallback.value_or("");
    if (!src_.contains(key)) {
      if (!fallback) issue(key, "is required");
    } else if (!src_[key].is_string()) {
      issue(key, "must be a string");
    } else {
      v = src_[key].get<std::string>();
      if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
        std::string list;
        for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
        issue(key, "must be one of: " + list);
      }
    }
    resolved[key] = v;
    return v;
  }

  bool has(const std::string& key) const { return src_.contains(key); }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    static const json null_value;
    return src_.contains(key) ? src_[key] : null_value;
  }

  void echo(const std::string& key, json value) { resolved[key] = std::move(value); }

  Params child(const std::string& key) {
    seen_.insert(key);
    return Params(src_.contains(key) ? src_[key] : json(), path_ + key + ".", *issues_);
  }

  /// Closes a child: flags its unknown keys and echoes its resolved values.
  void attach(const std::string& key, Params& child) {
    child.finish();
    resolved[key] = child.resolved;
  }

  /// Flags keys that were never read.
  void finish() {
    for (auto it = src_.begin(); it != src_.end(); ++it) {
      if (!seen_.count(it.key())) issue(it.key(), "is not a recognized field");
    }
  }

  void issue(const std::string& key, const std::string& what) {
    std::string where = key.empty() ? (path_.empty() ? "config" : path_.substr(0, path_.size() - 1)) : path_ + key;
    issues_->push_back(where + " " + what);
  }

  std::size_t issue_count() const { return issues_->size(); }
  std::vector<std::string>& issues() { return *issues_; }
  const std::string& path() const { return path_; }

  json resolved = json::object();

 private:
  json src_;
  std::string path_;
  std::vector<std::string>* issues_;
  std::set<std::string> seen_;
};

fs::path resolve_path(const fs::path& base, const std::string& file) {
  fs::path p(file);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p;
}

std::optional<json> file_reference(Params& parent, const std::string& key, const json& spec, const fs::path& base) {
  if (!spec.is_object() || !spec.contains("file")) return std::nullopt;
  if (spec.size() != 1 || !spec["file"].is_string()) {
    parent.issue(key, "file reference must be {\"file\": path}");
    return json();
  }
  try {
    return json::parse(read_text(resolve_path(base, spec["file"].get<std::string>())));
  } catch (const json::exception& e) {
    parent.issue(key, std::string("file is not valid JSON: ") + e.what());
  } catch (const Error& e) {
    parent.issue(key, e.what());
  }
  return json();
}

// {"torus": {...}}, {"file": path} or an inline model document.
std::optional<GalerkinModel> read_model(Params& top, const fs::path& base) {
  if (!top.has("model")) {
    top.issue("model", "is required");
    top.raw("model");
    return std::nullopt;
  }
  json spec = top.raw("model");
  if (auto loaded = file_reference(top, "model", spec, base)) {
    if (loaded->is_null()) return std::nullopt;
    spec = *loaded;
  }
  if (spec.is_object() && spec.contains("torus")) {
    if (spec.size() != 1) top.issue("model", "torus specification must be the only field");
    Params t(spec["torus"], top.path() + "model.torus.", top.issues());
    const std::size_t before = t.issue_count();
    const int k = static_cast<int>(t.integer("max_wavenumber", 2, 1));
    TorusNoiseSpec noise;
    noise.amplitude = t.real("noise_amplitude", 0.5, Rule::positive);
    noise.decay_exponent = t.real("noise_decay", 0.0, Rule::non_negative);
    TorusForcingSpec forcing;
    const json& f = t.raw("forcing");
    json forcing_echo = json::array();
    if (!f.is_null()) {
      bool ok = f.is_array();
      if (ok) {
        for (const auto& e : f) {
          if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number()) {
            ok = false;
            break;
          }
          forcing.entries.emplace_back(e[0].get<int>(), e[1].get<double>());
          forcing_echo.push_back(json::array({e[0].get<int>(), e[1].get<double>()}));
        }
      }
      if (!ok) t.issue("forcing", "must be a list of [mode index, coefficient] pairs");
    }
    t.echo("forcing", forcing_echo);
    t.finish();
    top.echo("model", json{{"torus", t.resolved}});
    if (t.issue_count() != before) return std::nullopt;
    try {
      return build_torus_model(k, forcing, noise);
    } catch (const Error& e) {
      top.issue("model", std::string("is invalid: ") + e.what());
      return std::nullopt;
    }
  }
  try {
    auto model = parse_model(spec.dump());
    top.echo("model", json::parse(model_document(model)));
    return model;
  } catch (const Error& e) {
    top.issue("model", std::string("is invalid: ") + e.what());
  }
  return std::nullopt;
}

std::optional<FiniteChain> read_chain(Params& top, const fs::path& base) {
  if (!top.has("chain")) {
    top.issue("chain", "is required");
    top.raw("chain");
    return std::nullopt;
  }
  json spec = top.raw("chain");
  if (auto loaded = file_reference(top, "chain", spec, base)) {
    if (loaded->is_null()) return std::nullopt;
    spec = *loaded;
  }
  try {
    auto chain = parse_chain(spec.dump());
    top.echo("chain", json::parse(chain_document(chain)));
    return chain;
  } catch (const Error& e) {
    top.issue("chain", std::string("is invalid: ") + e.what());
  }
  return std::nullopt;
}

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

void require_size(Params& p, const std::string& key, const std::vector<double>& v, int n) {
  if (static_cast<int>(v.size()) != n) p.issue(key, "must have " + std::to_string(n) + " entries");
}

void require_probability(Params& p, const std::string& key, const std::vector<double>& v) {
  double total = 0.0;
  for (double x : v) {
    if (x < 0.0) {
      p.issue(key, "entries must be non-negative");
      return;
    }
    total += x;
  }
  if (std::abs(total - 1.0) > 1e-9) p.issue(key, "must sum to 1");
}

void require_increasing(Params& p, const std::string& key, const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] > v[i - 1])) {
      p.issue(key, "must be strictly increasing");
      return;
    }
  }
}

bool on_grid(double t, double dt) {
  try {
    grid_index(t, dt);
    return true;
  } catch (const GridMismatch&) {
    return false;
  }
}

// Collects artifacts in the staging directory and assertion outcomes.
class Output {
 public:
  explicit Output(fs::path dir) : dir_(std::move(dir)) {}

  const fs::path& dir() const { return dir_; }
  void text(const std::string& name, const std::string& body) { write_text(dir_ / name, body); }
  void table(const std::string& name, const Table& t) { text(name, t.to_string()); }
  void check(const std::string& name, bool passed, double value, double threshold) {
    assertions.push_back({name, passed, value, threshold});
  }

  std::vector<Assertion> assertions;

 private:
  fs::path dir_;
};

using Job = std::function<void(Output&)>;

struct Plan {
  Job job;
};

Table meta_table(std::uint64_t seed, std::vector<std::string> columns) {
  Table t;
  t.meta.emplace_back("seed", std::to_string(seed));
  t.columns = std::move(columns);
  return t;
}

// ---------------------------------------------------------------- simulate

Job plan_simulate(Params& top, Params& p, const fs::path& base, std::uint64_t seed) {
  auto model = read_model(top, base);
  const int n = model ? model->n_modes() : 0;
  auto u0 = p.reals("u0", std::vector<double>(static_cast<std::size_t>(n), 0.0));
  if (model) require_size(p, "u0", u0, n);
  const double horizon = p.real("horizon", 1.0, Rule::positive);
  const double dt = p.real("dt", 1e-3, Rule::positive);
  const auto count = static_cast<std::size_t>(p.integer("count", 10, 1));
  const double tolerance = p.real("energy_tolerance", 0.05, Rule::positive);
  if (!on_grid(horizon, dt)) p.issue("horizon", "must be a multiple of dt");
  if (!model) return {};
  return [=, model = *model](Output& out) {
    out.text("model.json", model_document(model));
    auto ens = ensemble(model, fixed_initial(to_eigen(u0)), count, horizon, dt, seed);
    save_ensemble(out.dir() / "ensemble", ens);
    out.check("no_blowups", ens.failures.empty(), static_cast<double>(ens.failures.size()), 0.0);
    if (!ens.failures.empty()) return;
    Table t = meta_table(seed, {"t", "residual", "std_error", "corrected_residual", "corrected_std_error"});
    t.meta.emplace_back("dt", format_double(dt));
    t.meta.emplace_back("count", std::to_string(count));
    const std::size_t steps = grid_index(horizon, dt);
    EnergyResidual last;
    for (int k = 1; k <= 10; ++k) {
      const std::size_t idx = steps * static_cast<std::size_t>(k) / 10;
      if (idx == 0) continue;
      last = energy_identity_residual(model, ens, static_cast<double>(idx) * dt);
      t.rows.push_back({static_cast<double>(idx) * dt, last.residual, last.standard_error, last.corrected_residual,
                        last.corrected_standard_error});
    }
    out.table("energy.tsv", t);
    // Discretization tolerance plus four Monte Carlo standard errors.
    const double allowed = tolerance + 4.0 * last.standard_error;
    out.check("energy_identity", std::abs(last.residual) <= allowed, last.residual, allowed);
  };
}

// ---------------------------------------------------------------- pressure

void write_pressure(Output& out, const PressureEstimate& est, std::uint64_t seed, const std::string& extra_key,
                    double extra) {
  Table t = meta_table(seed, {"t", "log_mean", "log_mean_error", "per_t_log_mean"});
  t.meta.emplace_back("count", std::to_string(est.count));
  t.meta.emplace_back("value", format_double(est.value));
  t.meta.emplace_back("std_error", format_double(est.std_error));
  t.meta.emplace_back("mc_error", format_double(est.mc_error));
  t.meta.emplace_back("fit_error", format_double(est.fit_error));
  t.meta.emplace_back("intercept", format_double(est.intercept));
  t.meta.emplace_back("jackknife_bias", format_double(est.jackknife_bias));
  t.meta.emplace_back("blowups", std::to_string(est.blowups));
  if (!extra_key.empty()) t.meta.emplace_back(extra_key, format_double(extra));
  for (std::size_t i = 0; i < est.t_grid.size(); ++i) {
    t.rows.push_back({est.t_grid[i], est.log_means[i], est.log_mean_errors[i], est.per_t_logmeans[i]});
  }
  out.table("pressure.tsv", t);
}

std::optional<Potential> read_potential(Params& p, const std::string& key) {
  const json& spec = p.raw(key);
  if (spec.is_null()) {
    p.issue(key, "is required");
    return std::nullopt;
  }
  try {
    auto v = parse_potential(spec.dump());
    p.echo(key, json::parse(potential_document(v)));
    return v;
  } catch (const Error& e) {
    p.issue(key, std::string("is invalid: ") + e.what());
  }
  return std::nullopt;
}

Job plan_pressure(Params& top, Params& p, const fs::path& base, std::uint64_t seed) {
  if (top.has("chain")) {
    if (top.has("model")) top.issue("model", "cannot be combined with chain");
    auto chain = read_chain(top, base);
    const int n = chain ? chain->size() : 0;
    auto v = p.reals("potential", std::nullopt);
    auto t_list = p.reals("t_list", std::vector<double>{20, 30, 40, 50}, Rule::positive, 3);
    require_increasing(p, "t_list", t_list);
    const auto count = static_cast<std::size_t>(p.integer("count", 20000, 2));
    std::vector<double> initial;
    if (chain) {
      if (chain->clocking() != Clocking::continuous) top.issue("chain", "must be continuous-clocked for pressure runs");
      require_size(p, "potential", v, n);
      if (!chain->irreducible()) top.issue("chain", "must be irreducible");
      std::vector<double> fallback(static_cast<std::size_t>(n), 1.0 / n);
      initial = p.reals("initial", fallback, Rule::non_negative);
      require_size(p, "initial", initial, n);
      require_probability(p, "initial", initial);
    } else {
      p.reals("initial", std::vector<double>{});
      return {};
    }
    return [=, chain = *chain](Output& out) {
      auto est = pressure_mc(chain, to_eigen(v), t_list, count, seed, to_eigen(initial));
      const double exact = exact_pressure(chain, to_eigen(v));
      write_pressure(out, est, seed, "exact", exact);
      out.check("matches_exact_pressure", std::abs(est.value - exact) <= 3.0 * est.std_error, est.value - exact,
                3.0 * est.std_error);
    };
  }
  auto model = read_model(top, base);
  const int n = model ? model->n_modes() : 0;
  auto v = read_potential(p, "potential");
  auto t_list = p.reals("t_list", std::vector<double>{1, 2, 3}, Rule::positive, 3);
  require_increasing(p, "t_list", t_list);
  const double dt = p.real("dt", 1e-2, Rule::positive);
  for (double t : t_list) {
    if (!on_grid(t, dt)) p.issue("t_list", "entries must be multiples of dt");
  }
  const auto count = static_cast<std::size_t>(p.integer("count", 1000, 2));
  auto u0 = p.reals("u0", std::vector<double>(static_cast<std::size_t>(n), 0.0));
  if (model) require_size(p, "u0", u0, n);
  if (model && v && v->level() > n) p.issue("potential", "level exceeds the number of modes");
  if (v && v->window() > 0.0) p.issue("potential", "must be a state potential (window 0)");
  if (!model || !v) return {};
  return [=, model = *model, v = *v](Output& out) {
    auto est = pressure_mc(model, v, t_list, dt, count, seed, fixed_initial(to_eigen(u0)));
    write_pressure(out, est, seed, "potential_bound", v.bound());
    const double allowed = v.bound() + 3.0 * est.std_error;
    out.check("bounded_by_sup_norm", std::abs(est.value) <= allowed, est.value, allowed);
  };
}

// ---------------------------------------------------------------- rate

json rate_json(const RateEstimate& r) {
  return {{"mode", to_string(r.mode)},
          {"value", r.value},
          {"argmax_params", r.argmax_params},
          {"evaluations", r.evaluations},
          {"converged", r.converged},
          {"restart_seeds", r.restart_seeds},
          {"restart_values", r.restart_values},
          {"diagnostics", r.diagnostics}};
}

json chain_rate_json(const char* mode, const ChainRate& r) {
  return {{"mode", mode},
          {"value", r.value},
          {"argmax_params", to_std(r.argmax)},
          {"iterations", r.iterations},
          {"gradient_norm", r.gradient_norm},
          {"converged", r.converged}};
}

Job plan_rate(Params& top, Params& p, const fs::path& base, std::uint64_t seed) {
  const auto budget = static_cast<std::size_t>(p.integer("search_budget", 20000, 10));
  const int restarts = static_cast<int>(p.integer("restarts", 8, 1));
  SearchOptions opts;
  opts.budget = budget;
  opts.restarts = restarts;
  opts.seed = seed;
  if (top.has("chain")) {
    if (top.has("model")) top.issue("model", "cannot be combined with chain");
    auto chain = read_chain(top, base);
    auto lambda = p.reals("lambda", std::nullopt, Rule::non_negative);
    const int newton_budget = static_cast<int>(p.integer("newton_budget", 2000, 1));
    if (chain) {
      require_size(p, "lambda", lambda, chain->size());
      require_probability(p, "lambda", lambda);
      if (!chain->irreducible()) top.issue("chain", "must be irreducible");
    }
    if (!chain) return {};
    return [=, chain = *chain](Output& out) {
      const auto lam = to_eigen(lambda);
      auto legendre = exact_rate_legendre(chain, lam, newton_budget);
      auto variational = exact_rate_variational(chain, lam, newton_budget);
      auto searched = legendre_rate(chain, lam, ChainFamily::full, opts);
      GeneratorProbe probe;
      probe.chain = &chain;
      auto searched_var = variational_rate(lam, probe, opts);
      json rec{{"format", "snsld-rate-record"},
               {"target", lambda},
               {"seed", seed},
               {"estimates",
                json::array({chain_rate_json("exact_legendre", legendre), chain_rate_json("exact_variational", variational),
                             rate_json(searched), rate_json(searched_var)})}};
      out.text("rate.json", rec.dump(1) + "\n");
      const double gap = std::abs(legendre.value - variational.value);
      out.check("duality", gap <= 1e-6, gap, 1e-6);
      out.check("exact_converged", legendre.converged && variational.converged, legendre.gradient_norm, 1e-8);
      out.check("legendre_search_lower_bound", searched.value <= legendre.value + 1e-6, searched.value - legendre.value, 1e-6);
      out.check("variational_search_lower_bound", searched_var.value <= legendre.value + 1e-6,
                searched_var.value - legendre.value, 1e-6);
      out.check("non_negative", legendre.value >= -1e-8, legendre.value, -1e-8);
    };
  }
  auto model = read_model(top, base);
  const int n = model ? model->n_modes() : 0;
  auto shape = read_potential(p, "potential");
  Params path = p.child("lambda_path");
  auto lam_u0 = path.reals("u0", std::vector<double>(static_cast<std::size_t>(n), 0.0));
  if (model) require_size(path, "u0", lam_u0, n);
  const double lam_horizon = path.real("horizon", 10.0, Rule::positive);
  const double lam_dt = path.real("dt", 1e-2, Rule::positive);
  const auto lam_seed = path.seed("seed", split_seed(seed, 17));
  if (!on_grid(lam_horizon, lam_dt)) path.issue("horizon", "must be a multiple of dt");
  p.attach("lambda_path", path);
  Params ps = p.child("pressure");
  ModelPressureSettings settings;
  settings.t_list = ps.reals("t_list", settings.t_list, Rule::positive, 3);
  require_increasing(ps, "t_list", settings.t_list);
  settings.dt = ps.real("dt", settings.dt, Rule::positive);
  settings.count = static_cast<std::size_t>(ps.integer("count", 200, 2));
  settings.seed = ps.seed("seed", split_seed(seed, 23));
  settings.u0 = to_eigen(lam_u0);
  for (double t : settings.t_list) {
    if (!on_grid(t, settings.dt)) ps.issue("t_list", "entries must be multiples of dt");
  }
  p.attach("pressure", ps);
  if (model && shape && shape->level() > n) p.issue("potential", "level exceeds the number of modes");
  if (!model || !shape) return {};
  return [=, model = *model, shape = *shape](Output& out) {
    auto traj = simulate(model, to_eigen(lam_u0), lam_horizon, lam_dt, lam_seed);
    auto lambda = occupation_measure(traj, lam_horizon);
    out.text("lambda.json", measure_document(lambda));
    auto est = legendre_rate(model, lambda, shape, settings, opts);
    json rec{{"format", "snsld-rate-record"},
             {"target", "lambda.json"},
             {"seed", seed},
             {"note", "model rates are lower bounds over the parametric potential family"},
             {"estimates", json::array({rate_json(est)})}};
    out.text("rate.json", rec.dump(1) + "\n");
    out.check("non_negative", est.value >= -1e-8, est.value, -1e-8);
  };
}

// ---------------------------------------------------------------- oracle

Job plan_oracle(Params& top, Params& p, const fs::path& base, std::uint64_t seed) {
  auto chain = read_chain(top, base);
  const int n = chain ? chain->size() : 0;
  auto v = p.reals("potential", std::vector<double>(static_cast<std::size_t>(n), 0.0));
  auto f = p.reals("f", std::vector<double>(static_cast<std::size_t>(n), 1.0));
  const int horizon = static_cast<int>(p.integer("met_horizon", 40, 2));
  const double tol = p.real("tolerance", 1e-12, Rule::positive);
  if (chain) {
    require_size(p, "potential", v, n);
    require_size(p, "f", f, n);
    if (!chain->irreducible()) top.issue("chain", "must be irreducible");
  }
  bool with_ldp = p.has("ldp");
  std::vector<double> center, initial;
  std::vector<int> k_list;
  double radius = 0.0, slack = 0.0;
  std::size_t samples = 0;
  if (with_ldp) {
    Params l = p.child("ldp");
    center = l.reals("center", std::nullopt, Rule::non_negative);
    radius = l.real("radius", 0.05, Rule::positive);
    k_list = l.integers("k_list", {50, 100, 200}, 1);
    samples = static_cast<std::size_t>(l.integer("samples", 100000, 1));
    std::vector<double> first(static_cast<std::size_t>(n), 0.0);
    if (n > 0) first[0] = 1.0;
    initial = l.reals("initial", first, Rule::non_negative);
    slack = l.real("slack", 0.05, Rule::positive);
    if (chain) {
      require_size(l, "center", center, n);
      require_probability(l, "center", center);
      require_size(l, "initial", initial, n);
      require_probability(l, "initial", initial);
      if (chain->clocking() != Clocking::discrete) l.issue("", "requires a discrete-clocked chain");
    }
    p.attach("ldp", l);
  }
  if (!chain) return {};
  return [=, chain = *chain](Output& out) {
    const auto pot = to_eigen(v);
    auto kernel = tilt(chain, pot);
    auto pf = pf_eigen(kernel, tol);
    out.text("pfdata.json", pf_document(pf));
    auto spectrum = dense_spectrum(kernel.matrix);
    Table st = meta_table(seed, {"real", "imag"});
    double dominant = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < spectrum.size(); ++i) {
      st.rows.push_back({spectrum[i].real(), spectrum[i].imag()});
      dominant = std::max(dominant, chain.clocking() == Clocking::discrete ? std::abs(spectrum[i]) : spectrum[i].real());
    }
    out.table("spectrum.tsv", st);
    const double principal = chain.clocking() == Clocking::discrete ? pf.c : pf.log_c;
    const double scale = std::max(1.0, kernel.matrix.cwiseAbs().maxCoeff());
    out.check("pf_residual", pf.converged && pf.residual <= 1e-10 * scale, pf.residual, 1e-10 * scale);
    out.check("pf_matches_dense_spectrum", std::abs(principal - dominant) <= 1e-10 * scale, principal - dominant,
              1e-10 * scale);
    auto met = met_convergence(chain, pot, to_eigen(f), horizon);
    auto met_h = met_convergence(chain, pot, pf.h, horizon);
    Table mt = meta_table(seed, {"t", "error", "error_f_eq_h"});
    mt.meta.emplace_back("spectral_ratio", format_double(met.spectral_ratio));
    mt.meta.emplace_back("tail_ratio", format_double(met.tail_ratio));
    double worst_h = 0.0;
    for (std::size_t i = 0; i < met.errors.size(); ++i) {
      mt.rows.push_back({static_cast<double>(i + 1), met.errors[i], met_h.errors[i]});
      worst_h = std::max(worst_h, met_h.errors[i]);
    }
    out.table("met.tsv", mt);
    out.check("met_decay_ratio", met.decay_ok, met.tail_ratio, met.spectral_ratio + 0.05);
    out.check("met_eigenvector_exact", worst_h <= 1e-12, worst_h, 1e-12);
    if (with_ldp) {
      auto ldp = ldp_frequency(chain, to_eigen(center), radius, k_list, samples, seed, to_eigen(initial), slack);
      Table lt = meta_table(seed, {"k", "hits", "samples", "frequency", "empirical_rate", "rate_lo", "rate_hi",
                                   "wide_interval"});
      lt.meta.emplace_back("radius", format_double(radius));
      lt.meta.emplace_back("inf_closed", format_double(ldp.inf_closed));
      lt.meta.emplace_back("inf_open", format_double(ldp.inf_open));
      lt.meta.emplace_back("slack", format_double(ldp.slack));
      for (const auto& r : ldp.rows) {
        lt.rows.push_back({static_cast<double>(r.k), static_cast<double>(r.hits), static_cast<double>(r.samples),
                           r.frequency, r.empirical_rate, r.rate_lo, r.rate_hi, r.wide_interval ? 1.0 : 0.0});
      }
      out.table("ldp.tsv", lt);
      const double rate = ldp.rows.empty() ? 0.0 : ldp.rows.back().empirical_rate;
      out.check("ldp_bracketed", ldp.bracketed, rate, ldp.inf_closed);
    }
  };
}

// ---------------------------------------------------------------- couple

Job plan_couple(Params& top, Params& p, const fs::path& base, std::uint64_t seed) {
  auto model = read_model(top, base);
  const int n = model ? model->n_modes() : 1;
  auto u0 = p.reals("u0", std::vector<double>(static_cast<std::size_t>(n), 0.0));
  if (model) require_size(p, "u0", u0, n);
  const double d = p.real("distance", 0.1, Rule::positive);
  if (d > 1.0) p.issue("distance", "must not exceed 1");
  auto levels = p.integers("levels", {1, std::max(1, n / 2), n}, 0);
  for (int l : levels) {
    if (l > n) p.issue("levels", "entries must not exceed the number of modes");
  }
  auto penalties = p.reals("penalties", std::vector<double>{1.0, 5.0}, Rule::positive);
  const double horizon = p.real("horizon", 1.0, Rule::positive);
  const double dt = p.real("dt", 1e-3, Rule::positive);
  const double slack_constant = p.real("slack_constant", 10.0, Rule::non_negative);
  if (!on_grid(horizon, dt)) p.issue("horizon", "must be a multiple of dt");
  if (!model) return {};
  return [=, model = *model](Output& out) {
    NormalStream rng(split_seed(seed, 0x636f75706c65ULL));
    State dir(n);
    for (int j = 0; j < n; ++j) dir[j] = rng();
    const State a = to_eigen(u0);
    const State b = a + d * dir / dir.norm();
    Table summary = meta_table(seed, {"level", "penalty", "worst_ratio", "passed"});
    summary.meta.emplace_back("dt", format_double(dt));
    summary.meta.emplace_back("slack", format_double(slack_constant * dt));
    summary.meta.emplace_back("note", "synchronous-noise coupling surrogate");
    Table traces = meta_table(seed, {"level", "penalty", "t", "projected_gap", "bound"});
    for (int level : levels) {
      for (double pen : penalties) {
        auto r = foias_decay_check(model, a, b, level, pen, horizon, dt, seed, slack_constant);
        summary.rows.push_back({static_cast<double>(level), pen, r.worst_ratio, r.passed ? 1.0 : 0.0});
        for (std::size_t i = 0; i < r.times.size(); ++i) {
          traces.rows.push_back({static_cast<double>(level), pen, r.times[i], r.projected_gap[i], r.bound[i]});
        }
        std::ostringstream name;
        name << "decay_N" << level << "_a" << format_double(pen);
        out.check(name.str(), r.passed, r.worst_ratio, 1.0 + r.slack);
      }
    }
    out.table("couple.tsv", summary);
    out.table("decay.tsv", traces);
  };
}

// ---------------------------------------------------------------- probes

Job plan_probes(Params& top, Params& p, const fs::path& base, std::uint64_t seed) {
  auto model = read_model(top, base);
  const int n = model ? model->n_modes() : 1;
  std::vector<double> unit(static_cast<std::size_t>(n), 0.0);
  unit[0] = 1.0;
  auto u0 = p.reals("u0", unit);
  if (model) require_size(p, "u0", u0, n);
  const double dt = p.real("dt", 1e-2, Rule::positive);
  const auto count = static_cast<std::size_t>(p.integer("count", 1000, 1000));
  const bool with_moment = p.has("moment"), with_exp = p.has("exp_moment"), with_log = p.has("doubly_log"),
             with_rec = p.has("recurrence");
  if (!with_moment && !with_exp && !with_log && !with_rec) {
    p.issue("", "needs at least one of moment, exp_moment, doubly_log, recurrence");
  }
  int m = 1;
  std::vector<double> t_grid, kappas, rho, scales;
  double window = 0.0, exp_t = 1.0, log_t = 1.0, log_window = 0.5, kappa = 1.0, radius = 1.0, rec_horizon = 10.0;
  bool assert_decay = true;
  std::size_t rec_count = 0;
  if (with_moment) {
    Params q = p.child("moment");
    m = static_cast<int>(q.integer("m", 1, 1));
    t_grid = q.reals("t_grid", std::vector<double>{0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0}, Rule::non_negative, 3);
    require_increasing(q, "t_grid", t_grid);
    window = q.real("window", 0.0, Rule::non_negative);
    assert_decay = q.flag("assert_decay", true);
    p.attach("moment", q);
  }
  if (with_exp) {
    Params q = p.child("exp_moment");
    kappas = q.reals("kappas", std::vector<double>{0.05, 0.1, 0.2, 0.4, 0.8}, Rule::positive);
    require_increasing(q, "kappas", kappas);
    exp_t = q.real("t", 1.0, Rule::positive);
    rho = q.reals("rho", std::vector<double>{0.0, 0.25, 0.5, 1.0, 1.5, 2.0}, Rule::non_negative);
    require_increasing(q, "rho", rho);
    p.attach("exp_moment", q);
  }
  if (with_log) {
    Params q = p.child("doubly_log");
    log_t = q.real("t", 1.0, Rule::positive);
    log_window = q.real("window", 0.5, Rule::non_negative);
    scales = q.reals("scales", std::vector<double>{0.0, 0.5, 1.0, 2.0}, Rule::non_negative);
    p.attach("doubly_log", q);
  }
  if (with_rec) {
    Params q = p.child("recurrence");
    kappa = q.real("kappa", 1.0, Rule::non_negative);
    radius = q.real("radius", 1.0, Rule::positive);
    rec_horizon = q.real("horizon", 10.0, Rule::positive);
    rec_count = static_cast<std::size_t>(q.integer("count", 1000, 100));
    p.attach("recurrence", q);
  }
  if (!model) return {};
  return [=, model = *model](Output& out) {
    const State start = to_eigen(u0);
    if (with_moment) {
      auto mt = moment_probe(model, m, t_grid, count, split_seed(seed, 1), start, dt, window);
      Table t = meta_table(mt.seed, {"t", "moment", "std_error", "sup_moment"});
      t.meta.emplace_back("dt", format_double(dt));
      t.meta.emplace_back("count", std::to_string(count));
      t.meta.emplace_back("m", std::to_string(m));
      t.meta.emplace_back("decay_rate", format_double(mt.decay_rate));
      t.meta.emplace_back("amplitude", format_double(mt.amplitude));
      t.meta.emplace_back("offset", format_double(mt.offset));
      for (const auto& r : mt.rows) t.rows.push_back({r.t, r.moment, r.std_error, r.sup_moment});
      out.table("moment.tsv", t);
      if (assert_decay) out.check("moment_decay_rate", mt.decay_ok, mt.decay_rate, mt.required_rate);
    }
    if (with_exp) {
      auto et = exp_moment_probe(model, kappas, exp_t, count, split_seed(seed, 2), start, dt, rho);
      Table t = meta_table(et.seed, {"kappa", "log_moment", "effective_fraction", "stable"});
      t.meta.emplace_back("dt", format_double(dt));
      t.meta.emplace_back("count", std::to_string(count));
      t.meta.emplace_back("k_constant", format_double(et.k_constant));
      t.meta.emplace_back("destabilizing_kappa", et.destabilizing_kappa ? format_double(*et.destabilizing_kappa) : "none");
      t.meta.emplace_back("fitted_gamma", format_double(et.fitted_gamma));
      for (const auto& r : et.rows) t.rows.push_back({r.kappa, r.log_moment, r.effective_fraction, r.stable ? 1.0 : 0.0});
      out.table("exp_moment.tsv", t);
      Table e = meta_table(et.seed, {"rho", "exceedance"});
      for (std::size_t i = 0; i < et.rho.size(); ++i) e.rows.push_back({et.rho[i], et.exceedance[i]});
      out.table("exceedance.tsv", e);
      out.check("exceedance_monotone", et.exceedance_monotone, et.exceedance.empty() ? 0.0 : et.exceedance.back(), 0.0);
    }
    if (with_log) {
      std::vector<State> starts;
      for (double s : scales) starts.push_back(s * start);
      auto dl = doubly_log_probe(model, log_t, log_window, count, split_seed(seed, 3), starts, dt);
      Table t = meta_table(dl.seed, {"initial_energy", "statistic", "std_error"});
      t.meta.emplace_back("dt", format_double(dt));
      t.meta.emplace_back("count", std::to_string(count));
      t.meta.emplace_back("slope", format_double(dl.slope));
      t.meta.emplace_back("intercept", format_double(dl.intercept));
      t.meta.emplace_back("margin", format_double(dl.margin));
      for (const auto& r : dl.rows) t.rows.push_back({r.initial_energy, r.statistic, r.std_error});
      out.table("doubly_log.tsv", t);
      out.check("doubly_log_dominated", dl.dominated, dl.margin, 0.0);
    }
    if (with_rec) {
      auto rr = recurrence_moment(model, start, kappa, radius, rec_count, rec_horizon, dt, split_seed(seed, 4));
      Table t = meta_table(rr.seed, {"estimate", "std_error", "timeout_fraction", "half_a", "half_b", "half_error"});
      t.meta.emplace_back("dt", format_double(dt));
      t.meta.emplace_back("count", std::to_string(rec_count));
      t.meta.emplace_back("kappa", format_double(kappa));
      t.meta.emplace_back("radius", format_double(radius));
      t.rows.push_back({rr.estimate, rr.std_error, rr.timeout_fraction, rr.half_a, rr.half_b, rr.half_error});
      out.table("recurrence.tsv", t);
      out.check("recurrence_stable", rr.stable, std::abs(rr.half_a - rr.half_b), 3.0 * rr.half_error);
    }
  };
}

// ---------------------------------------------------------------- entropy

Job plan_entropy(Params& top, Params& p, const fs::path& base, std::uint64_t seed) {
  auto chain = read_chain(top, base);
  const int n = chain ? chain->size() : 0;
  auto rows = p.matrix("q");
  const int t_max = static_cast<int>(p.integer("t_max", 10, 1));
  const int k_max = static_cast<int>(p.integer("k_max", 3, 1));
  std::optional<FiniteChain> q;
  if (chain) {
    if (chain->clocking() != Clocking::discrete) top.issue("chain", "must be discrete-clocked for entropy runs");
    if (!chain->irreducible()) top.issue("chain", "must be irreducible");
    if (static_cast<int>(rows.size()) != n) {
      p.issue("q", "must have " + std::to_string(n) + " rows");
    } else {
      Eigen::MatrixXd m(n, n);
      bool ok = true;
      for (int i = 0; i < n && ok; ++i) {
        if (static_cast<int>(rows[static_cast<std::size_t>(i)].size()) != n) ok = false;
        for (int j = 0; ok && j < n; ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      }
      if (!ok) {
        p.issue("q", "rows must have " + std::to_string(n) + " entries");
      } else {
        try {
          q = FiniteChain::discrete(m);
          if (!q->irreducible()) p.issue("q", "must be irreducible");
        } catch (const Error& e) {
          p.issue("q", std::string("is invalid: ") + e.what());
        }
      }
    }
  }
  std::vector<double> lambda;
  const bool witness = p.has("lambda");
  if (witness) {
    lambda = p.reals("lambda", std::nullopt, Rule::non_negative);
    if (chain) {
      require_size(p, "lambda", lambda, n);
      require_probability(p, "lambda", lambda);
    }
  }
  if (!chain || !q) return {};
  return [=, chain = *chain, q = *q](Output& out) {
    Table t = meta_table(seed, {"t", "entropy", "t_times_unit_entropy"});
    t.meta.emplace_back("note", "Markov process measures only; conditioning on the past reduces to the current state");
    const double unit = dv_entropy(chain, q, 1);
    bool exact = true;
    double worst = 0.0;
    for (int s = 1; s <= t_max; ++s) {
      const double h = dv_entropy(chain, q, s);
      const double scaled = static_cast<double>(s) * unit;
      t.rows.push_back({static_cast<double>(s), h, scaled});
      if (h != scaled) exact = false;
      worst = std::max(worst, std::abs(h - scaled));
    }
    out.table("entropy.tsv", t);
    out.check("time_scaling_exact", exact, worst, 0.0);
    Table pt = meta_table(seed, {"k", "past_conditioned_entropy"});
    double spread = 0.0;
    for (int k = 1; k <= k_max; ++k) {
      const double v = past_conditioned_entropy(chain, q, k);
      pt.rows.push_back({static_cast<double>(k), v});
      spread = std::max(spread, std::abs(v - unit));
    }
    out.table("past_conditioned.tsv", pt);
    out.check("markov_past_reduction", spread <= 1e-12, spread, 1e-12);
    const double gap = contraction_gap(chain, q);
    Table gt = meta_table(seed, {"entropy", "rate_of_stationary", "gap"});
    gt.rows.push_back({unit, unit - gap, gap});
    if (witness) {
      auto w = contraction_equality_witness(chain, to_eigen(lambda));
      gt.rows.push_back({w.entropy, w.rate, w.gap});
      out.check("equality_witness", std::abs(w.gap) <= 1e-6, w.gap, 1e-6);
    }
    out.table("contraction.tsv", gt);
    out.check("contraction_gap_non_negative", gap >= -1e-8, gap, -1e-8);
  };
}

struct Parsed {
  ExperimentConfig config;
  Job job;
};

Parsed parse_internal(const std::string& text, const fs::path& base) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  std::vector<std::string> issues;
  Params top(doc, "", issues);
  const std::string kind = top.text("kind", std::nullopt, experiment_kinds());
  const std::string name = top.text("name", kind.empty() ? std::string("run") : kind);
  if (name.empty() || name.find('/') != std::string::npos || name == "." || name == "..") {
    top.issue("name", "must be a non-empty plain directory name");
  }
  const std::uint64_t seed = top.seed("master_seed", 1);
  std::string output_dir;
  if (top.has("output_dir")) {
    output_dir = top.text("output_dir", std::nullopt);
    top.resolved.erase("output_dir");
  }
  Params params = top.child("params");
  Job job;
  const bool known = std::find(experiment_kinds().begin(), experiment_kinds().end(), kind) != experiment_kinds().end();
  if (known) {
    if (kind == "simulate") job = plan_simulate(top, params, base, seed);
    if (kind == "pressure") job = plan_pressure(top, params, base, seed);
    if (kind == "rate") job = plan_rate(top, params, base, seed);
    if (kind == "oracle") job = plan_oracle(top, params, base, seed);
    if (kind == "couple") job = plan_couple(top, params, base, seed);
    if (kind == "probes") job = plan_probes(top, params, base, seed);
    if (kind == "entropy") job = plan_entropy(top, params, base, seed);
  }
  top.attach("params", params);
  top.finish();
  if (!issues.empty()) {
    std::string msg = "invalid config:";
    for (const auto& i : issues) msg += "\n  - " + i;
    throw ConfigError(msg);
  }
  Parsed out;
  out.config.kind = kind;
  out.config.name = name;
  out.config.master_seed = seed;
  if (!output_dir.empty()) out.config.output_dir = resolve_path(base, output_dir);
  out.config.document = top.resolved.dump(1) + "\n";
  out.config.hash = to_hex(fnv1a(out.config.document));
  out.job = std::move(job);
  return out;
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t secs = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[40];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

class DirectoryLock {
 public:
  explicit DirectoryLock(const fs::path& dir) {
    const fs::path file = dir / ".lock";
    fd_ = ::open(file.c_str(), O_CREAT | O_RDWR, 0644);
    if (fd_ < 0) throw Error("cannot open lock file " + file.string());
    if (::flock(fd_, LOCK_EX) != 0) {
      ::close(fd_);
      throw Error("cannot lock " + dir.string());
    }
  }
  ~DirectoryLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  int fd_ = -1;
};

std::vector<std::string> list_files(const fs::path& dir) {
  std::vector<std::string> files;
  if (!fs::exists(dir)) return files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), dir).generic_string());
  }
  std::sort(files.begin(), files.end());
  return files;
}

json record_json(const RunRecord& r, const std::string& document, std::uint64_t seed) {
  json arts = json::array();
  for (const auto& a : r.artifacts) arts.push_back({{"file", a.file}, {"hash", a.hash}});
  json asserts = json::array();
  for (const auto& a : r.assertions) {
    asserts.push_back({{"name", a.name}, {"passed", a.passed}, {"value", a.value}, {"threshold", a.threshold}});
  }
  return {{"format", "snsld-run-record"},
          {"kind", r.kind},
          {"name", r.name},
          {"master_seed", seed},
          {"config_hash", r.config_hash},
          {"started", r.started},
          {"finished", r.finished},
          {"parameters", json::parse(document)},
          {"artifacts", arts},
          {"assertions", asserts},
          {"status", r.passed() ? "pass" : "fail"}};
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const fs::path& base_dir) {
  return parse_internal(text, base_dir).config;
}

ExperimentConfig load_config(const fs::path& path) {
  return parse_config(read_text(path), path.has_parent_path() ? path.parent_path() : fs::path("."));
}

RunRecord run(const ExperimentConfig& config, const fs::path& output_override) {
  Parsed parsed = parse_internal(config.document, {});
  fs::path out_dir = output_override;
  if (out_dir.empty()) out_dir = config.output_dir;
  if (out_dir.empty()) out_dir = default_output_root() / config.name;
  fs::create_directories(out_dir);
  DirectoryLock lock(out_dir);

  RunRecord record;
  record.kind = config.kind;
  record.name = config.name;
  record.config_hash = parsed.config.hash;
  record.output_dir = out_dir;
  record.started = timestamp();

  const fs::path staging = out_dir / ".staging";
  fs::remove_all(staging);
  fs::create_directories(staging);
  Output output(staging);
  try {
    parsed.job(output);
    write_text(staging / "config.json", parsed.config.document);
  } catch (const std::exception& e) {
    std::string stamp = record.started;
    std::replace(stamp.begin(), stamp.end(), ':', '-');
    const fs::path failed = out_dir / "failed" / (record.config_hash + "-" + stamp);
    fs::create_directories(failed.parent_path());
    fs::rename(staging, failed);
    write_text(failed / "error.txt", std::string(e.what()) + "\n");
    throw;
  }

  // Replace the artifacts of any previous run in this directory.
  const fs::path record_path = out_dir / "record.json";
  if (fs::exists(record_path)) {
    try {
      for (const auto& a : read_record(out_dir).artifacts) fs::remove(out_dir / a.file);
    } catch (const Error&) {
    }
    fs::remove(record_path);
  }
  for (const auto& file : list_files(staging)) {
    const fs::path dest = out_dir / file;
    fs::create_directories(dest.parent_path());
    fs::rename(staging / file, dest);
    record.artifacts.push_back({file, hash_file(dest)});
  }
  fs::remove_all(staging);
  record.assertions = output.assertions;
  record.finished = timestamp();
  write_text(record_path, record_json(record, parsed.config.document, config.master_seed).dump(1) + "\n");
  return record;
}

RunRecord read_record(const fs::path& run_dir) {
  json doc;
  try {
    doc = json::parse(read_text(run_dir / "record.json"));
  } catch (const json::exception& e) {
    throw ConfigError("record.json is not valid JSON: " + std::string(e.what()));
  }
  RunRecord r;
  try {
    r.kind = doc.at("kind").get<std::string>();
    r.name = doc.at("name").get<std::string>();
    r.config_hash = doc.at("config_hash").get<std::string>();
    r.started = doc.at("started").get<std::string>();
    r.finished = doc.at("finished").get<std::string>();
    for (const auto& a : doc.at("artifacts")) r.artifacts.push_back({a.at("file"), a.at("hash")});
    for (const auto& a : doc.at("assertions")) {
      r.assertions.push_back({a.at("name"), a.at("passed"), a.at("value").is_number() ? a.at("value").get<double>() : 0.0,
                              a.at("threshold").is_number() ? a.at("threshold").get<double>() : 0.0});
    }
  } catch (const json::exception& e) {
    throw ConfigError("record.json is malformed: " + std::string(e.what()));
  }
  r.output_dir = run_dir;
  return r;
}

InspectReport inspect(const fs::path& run_dir) {
  InspectReport rep;
  rep.record = read_record(run_dir);
  for (const auto& a : rep.record.artifacts) {
    const fs::path file = run_dir / a.file;
    if (!fs::exists(file)) {
      rep.missing.push_back(a.file);
    } else if (hash_file(file) != a.hash) {
      rep.mismatched.push_back(a.file);
    }
  }
  return rep;
}

}  // namespace snsld
