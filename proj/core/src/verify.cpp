#include "snsld/verify.hpp"

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <sstream>

#include <json.hpp>

#include "snsld/chain.hpp"
#include "snsld/dv_rate.hpp"
#include "snsld/dynamics_probes.hpp"
#include "snsld/empirical.hpp"
#include "snsld/error.hpp"
#include "snsld/feynman_kac.hpp"
#include "snsld/io.hpp"
#include "snsld/rng.hpp"
#include "snsld/runner.hpp"
#include "snsld/sde.hpp"

namespace snsld {

using json = nlohmann::json;

namespace {

struct Measured {
  bool passed = true;
  std::vector<std::pair<std::string, std::string>> values;

  void add(const std::string& key, double v) { values.emplace_back(key, format_double(v)); }
  void add(const std::string& key, const std::string& v) { values.emplace_back(key, v); }
  void require(bool ok) { passed = passed && ok; }

  std::string text() const {
    std::string s;
    for (const auto& [k, v] : values) s += (s.empty() ? "" : " ") + k + "=" + v;
    return s;
  }
};

struct Context {
  const VerifyOptions& options;
  fs::path scratch;
  std::map<std::string, std::string> first_run;

  std::uint64_t seed(std::uint64_t stream) const { return split_seed(options.seed, stream); }
};

using Criterion = Measured (*)(Context&);

GalerkinModel torus_fixture(int max_wavenumber) {
  TorusForcingSpec forcing;
  forcing.entries = {{0, 1.0}};
  TorusNoiseSpec noise;
  noise.amplitude = 0.5;
  return build_torus_model(max_wavenumber, forcing, noise);
}

const GalerkinModel& model_or(const Context& ctx, const GalerkinModel& fallback) {
  return ctx.options.model ? *ctx.options.model : fallback;
}

Eigen::MatrixXd fixture_p() {
  Eigen::MatrixXd p(2, 2);
  p << 0.9, 0.1, 0.2, 0.8;
  return p;
}

FiniteChain random_discrete(int n, NormalStream& rng) {
  Eigen::MatrixXd p(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) p(i, j) = 0.05 + rng.uniform();
    p.row(i) /= p.row(i).sum();
  }
  return FiniteChain::discrete(p);
}

FiniteChain random_continuous(int n, NormalStream& rng) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j) g(i, j) = 0.1 + rng.uniform();
    }
    g(i, i) = -g.row(i).sum();
  }
  return FiniteChain::continuous(g);
}

Eigen::VectorXd random_vector(int n, NormalStream& rng, double lo, double hi) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * rng.uniform();
  return v;
}

Eigen::VectorXd random_probability(int n, NormalStream& rng) {
  Eigen::VectorXd v = random_vector(n, rng, 0.05, 1.0);
  return v / v.sum();
}

// ---------------------------------------------------------------- algebraic

Measured cancellation(Context& ctx) {
  const GalerkinModel fixture = torus_fixture(3);
  const GalerkinModel& model = model_or(ctx, fixture);
  NormalStream rng(ctx.seed(1));
  const int n = model.n_modes();
  double worst = 0.0;
  for (int s = 0; s < 1000; ++s) {
    State u(n);
    for (int j = 0; j < n; ++j) u[j] = rng();
    u *= std::pow(10.0, 2.0 * rng.uniform() - 1.0);
    worst = std::max(worst, cancellation_defect(model, u));
  }
  Measured m;
  m.add("modes", n);
  m.add("states", 1000);
  m.add("max_defect", worst);
  m.require(worst <= 1e-10);
  return m;
}

// Every tensor entry couples at most three modes, so states supported on
// each triple see every entry in isolation.
Measured cancellation_sparse(Context& ctx) {
  const GalerkinModel fixture = torus_fixture(3);
  const GalerkinModel& model = model_or(ctx, fixture);
  NormalStream rng(ctx.seed(17));
  const int n = model.n_modes();
  double worst = 0.0;
  std::size_t states = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      for (int k = j; k < n; ++k) {
        State u = State::Zero(n);
        u[i] += 0.5 + rng.uniform();
        u[j] += 0.5 + rng.uniform();
        u[k] -= 0.5 + rng.uniform();
        worst = std::max(worst, cancellation_defect(model, u));
        ++states;
      }
    }
  }
  Measured m;
  m.add("states", static_cast<double>(states));
  m.add("max_defect", worst);
  m.require(worst <= 1e-10);
  return m;
}

Measured cancellation_revalidation(Context& ctx) {
  const GalerkinModel fixture = torus_fixture(3);
  const GalerkinModel& model = model_or(ctx, fixture);
  Measured m;
  const std::string doc = model_document(model);
  try {
    const auto back = parse_model(doc, true);
    const bool same = model_document(back) == doc;
    m.add("revalidated", "yes");
    m.add("bit_exact", same ? "yes" : "no");
    m.require(same);
  } catch (const CancellationViolation& e) {
    m.add("revalidated", "no");
    m.require(false);
  }
  return m;
}

Measured norm_consistency(Context& ctx) {
  const GalerkinModel fixture = torus_fixture(3);
  const GalerkinModel& model = model_or(ctx, fixture);
  NormalStream rng(ctx.seed(2));
  const int n = model.n_modes();
  int mismatches = 0;
  for (int s = 0; s < 200; ++s) {
    State u(n);
    for (int j = 0; j < n; ++j) u[j] = rng();
    const State lu = model.apply_stokes(u);
    double pairing = 0.0;
    for (int j = 0; j < n; ++j) pairing += lu[j] * u[j];
    if (pairing != model.squared_norm_u(u)) ++mismatches;
  }
  Measured m;
  m.add("states", 200);
  m.add("mismatches", mismatches);
  m.require(mismatches == 0);
  return m;
}

Measured projection_identities(Context& ctx) {
  const GalerkinModel fixture = torus_fixture(3);
  const GalerkinModel& model = model_or(ctx, fixture);
  NormalStream rng(ctx.seed(3));
  const int n = model.n_modes();
  int failures = 0;
  double worst_pythagoras = 0.0;
  for (int s = 0; s < 20; ++s) {
    State u(n);
    for (int j = 0; j < n; ++j) u[j] = rng();
    for (int level = 0; level <= n; ++level) {
      const auto [p, q] = project(u, level);
      if ((p + q).array().cwiseNotEqual(u.array()).any()) ++failures;
      if (project(p, level).first.array().cwiseNotEqual(p.array()).any()) ++failures;
      const double rel = std::abs(p.squaredNorm() + q.squaredNorm() - u.squaredNorm()) / u.squaredNorm();
      worst_pythagoras = std::max(worst_pythagoras, rel);
    }
  }
  Measured m;
  m.add("exact_failures", failures);
  m.add("max_pythagoras_error", worst_pythagoras);
  m.require(failures == 0 && worst_pythagoras <= 1e-12);
  return m;
}

Measured torus_spectrum(Context& ctx) {
  const GalerkinModel fixture = torus_fixture(3);
  const GalerkinModel& model = model_or(ctx, fixture);
  const auto& labels = model.index_map();
  int bad = 0;
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (model.eigenvalues()[static_cast<Eigen::Index>(j)] != labels[j].wavenumber_squared()) ++bad;
  }
  Measured m;
  m.add("modes_checked", static_cast<double>(labels.size()));
  m.add("mismatches", bad);
  m.require(bad == 0 && (labels.empty() || static_cast<int>(labels.size()) == model.n_modes()));
  return m;
}

Measured ou_exactness(Context& ctx) {
  const auto model = GalerkinModel::build_custom({1.0, 2.0, 4.0}, {}, {0.0, 0.0, 0.0}, {1.0, 0.5, 0.25});
  const double dt = 0.1;
  State u(3);
  u << 1.0, -0.5, 2.0;
  const std::size_t draws = 100000;
  NormalStream rng(ctx.seed(4));
  Eigen::VectorXd xi(3), mean = Eigen::VectorXd::Zero(3), m2 = Eigen::VectorXd::Zero(3);
  for (std::size_t i = 0; i < draws; ++i) {
    for (int j = 0; j < 3; ++j) xi[j] = rng();
    const State next = step(model, u, dt, xi);
    const Eigen::VectorXd delta = next - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta.cwiseProduct(next - mean);
  }
  double worst = 0.0;
  Measured m;
  for (int j = 0; j < 3; ++j) {
    const double a = model.eigenvalues()[j], b = model.noise_amps()[j];
    const double exact_mean = std::exp(-a * dt) * u[j];
    const double exact_var = b * b * (1.0 - std::exp(-2.0 * a * dt)) / (2.0 * a);
    const double var = m2[j] / static_cast<double>(draws - 1);
    const double z_mean = std::abs(mean[j] - exact_mean) / std::sqrt(exact_var / static_cast<double>(draws));
    const double z_var = std::abs(var - exact_var) / (exact_var * std::sqrt(2.0 / static_cast<double>(draws - 1)));
    m.add("z_mean_" + std::to_string(j), z_mean);
    m.add("z_var_" + std::to_string(j), z_var);
    worst = std::max({worst, z_mean, z_var});
  }
  m.add("max_z", worst);
  m.require(worst <= 4.0);
  return m;
}

Measured ou_decay_exact(Context&) {
  const auto model = GalerkinModel::build_custom({1.0, 2.0}, {}, {0.0, 0.0}, {1.0, 1.0}).without_noise();
  State u = State::Zero(2);
  u[0] = 1.0;
  const State next = step(model, u, 0.5, Eigen::VectorXd::Zero(2));
  const double err = std::max(std::abs(next[0] - std::exp(-0.5)), std::abs(next[1]));
  Measured m;
  m.add("error", err);
  m.require(err <= 1e-15);
  return m;
}

// ---------------------------------------------------------------- stochastic

Measured energy_identity(Context& ctx) {
  const GalerkinModel model = torus_fixture(2);
  State u0 = State::Zero(model.n_modes());
  u0[0] = 1.0;
  u0[3] = 0.5;
  const auto full = energy_identity_mc(model, u0, 10000, 1.0, 1e-3, ctx.seed(5));
  const auto half = energy_identity_mc(model, u0, 10000, 1.0, 5e-4, ctx.seed(5));
  const double factor = std::abs(full.corrected_residual) / std::abs(half.corrected_residual);
  Measured m;
  m.add("residual", full.residual);
  m.add("std_error", full.standard_error);
  m.add("deterministic_dt", full.corrected_residual);
  m.add("deterministic_dt_se", full.corrected_standard_error);
  m.add("deterministic_half_dt", half.corrected_residual);
  m.add("deterministic_half_dt_se", half.corrected_standard_error);
  m.add("reduction_factor", factor);
  m.require(std::abs(full.residual) <= 0.05 && factor >= 1.5);
  return m;
}

Measured exp_equiv(Context& ctx) {
  const GalerkinModel model = torus_fixture(2);
  const double dt = 0.01, window = 1.0;
  State u0 = State::Zero(model.n_modes());
  u0[0] = 1.0;
  const fs::path dir = ctx.scratch / "trajectories";
  Measured m;
  double worst_excess = -1.0;
  for (int s = 0; s < 3; ++s) {
    const fs::path file = dir / ("path_" + std::to_string(s) + ".traj");
    save_trajectory(file, simulate(model, u0, 21.0, dt, ctx.seed(100 + static_cast<std::uint64_t>(s))));
    const Trajectory traj = load_trajectory(file);
    for (double t : {5.0, 10.0, 20.0}) {
      const auto g = exp_equiv_gap(traj, t, window);
      m.add("gap_" + std::to_string(s) + "_t" + std::to_string(static_cast<int>(t)), g.gap);
      worst_excess = std::max(worst_excess, g.gap - g.bound - g.slack);
      m.require(g.within && g.slack <= 2.0 * dt);
    }
  }
  m.add("max_excess_over_bound", worst_excess);
  return m;
}

Measured coupling_decay(Context& ctx) {
  const GalerkinModel model = torus_fixture(2);
  const int n = model.n_modes();
  NormalStream rng(ctx.seed(6));
  State u0 = State::Zero(n);
  u0[0] = 1.0;
  State dir(n);
  for (int j = 0; j < n; ++j) dir[j] = rng();
  const State u1 = u0 + 0.1 * dir / dir.norm();
  Measured m;
  for (int level : {1, n / 2, n}) {
    for (double a : {1.0, 5.0}) {
      const auto r = foias_decay_check(model, u0, u1, level, a, 2.0, 1e-3, ctx.seed(7), 10.0);
      m.add("worst_ratio_N" + std::to_string(level) + "_a" + std::to_string(static_cast<int>(a)), r.worst_ratio);
      m.require(r.passed);
    }
  }
  return m;
}

Measured pressure_consistency(Context& ctx) {
  Eigen::MatrixXd g = fixture_p() - Eigen::MatrixXd::Identity(2, 2);
  const auto chain = FiniteChain::continuous(g);
  Eigen::VectorXd v(2);
  v << std::log(2.0), 0.0;
  const double exact = exact_pressure(chain, v);
  const std::vector<double> t_list{20, 30, 40, 50};
  const auto a = pressure_mc(chain, v, t_list, 20000, ctx.seed(8), Eigen::Vector2d(1.0, 0.0));
  const auto b = pressure_mc(chain, v, t_list, 20000, ctx.seed(9), Eigen::Vector2d(0.0, 1.0));
  const double combined = std::hypot(a.std_error, b.std_error);
  Measured m;
  m.add("exact", exact);
  m.add("estimate_a", a.value);
  m.add("std_error_a", a.std_error);
  m.add("estimate_b", b.value);
  m.add("std_error_b", b.std_error);
  m.require(std::abs(a.value - exact) <= 3.0 * a.std_error);
  m.require(std::abs(b.value - exact) <= 3.0 * b.std_error);
  m.require(std::abs(a.value - b.value) <= 3.0 * combined);
  return m;
}

Measured pressure_shift_covariance(Context& ctx) {
  const GalerkinModel model = torus_fixture(1);
  Potential v(2, 0.0, {{0.4, {1.0, -0.5}, 0.1}, {-0.3, {0.2, 0.7}, 0.0}});
  const double c = 0.37;
  State u0 = State::Zero(model.n_modes());
  const auto a = pressure_mc(model, v, {1.0, 2.0, 3.0}, 0.01, 400, ctx.seed(10), fixed_initial(u0));
  const auto b = pressure_mc(model, v.shifted(c), {1.0, 2.0, 3.0}, 0.01, 400, ctx.seed(10), fixed_initial(u0));
  Measured m;
  m.add("q", a.value);
  m.add("q_shifted", b.value);
  m.add("difference_minus_c", b.value - a.value - c);
  m.require(b.value == a.value + c);
  return m;
}

// ---------------------------------------------------------------- oracle

Measured duhamel(Context& ctx) {
  NormalStream rng(ctx.seed(11));
  double worst_cont = 0.0, worst_disc = 0.0;
  for (int c = 0; c < 5; ++c) {
    const auto chain = random_continuous(4, rng);
    const auto v = random_vector(4, rng, -1.0, 1.0);
    const auto f = random_vector(4, rng, 0.5, 2.0);
    worst_cont = std::max(worst_cont, duhamel_residual(chain, v, f, 1.0, 100).residual);
    const auto dchain = random_discrete(4, rng);
    worst_disc = std::max(worst_disc, duhamel_residual(dchain, v, f, 3.0).residual);
  }
  Measured m;
  m.add("max_residual_continuous", worst_cont);
  m.add("max_residual_discrete", worst_disc);
  m.require(worst_cont <= 1e-6 && worst_disc <= 1e-6);
  return m;
}

Measured eigen_fixture(Context&) {
  const auto chain = FiniteChain::discrete(fixture_p());
  const auto pf = pf_eigen(tilt(chain, Eigen::Vector2d(std::log(2.0), 0.0)));
  const auto pf0 = pf_eigen(tilt(chain, Eigen::Vector2d::Zero()));
  Measured m;
  m.add("c", pf.c);
  m.add("q", std::log(pf.c));
  m.add("c_zero", pf0.c);
  m.add("mu_zero_0", pf0.mu[0]);
  m.add("mu_zero_1", pf0.mu[1]);
  m.require(std::abs(pf.c - 2.0) <= 1e-10);
  m.require(std::abs(std::log(pf.c) - std::log(2.0)) <= 1e-10);
  m.require(std::abs(pf0.c - 1.0) <= 1e-10);
  m.require(std::abs(pf0.mu[0] - 2.0 / 3.0) <= 1e-10 && std::abs(pf0.mu[1] - 1.0 / 3.0) <= 1e-10);
  return m;
}

Measured eigen_fixture_doubled(Context&) {
  const auto chain = FiniteChain::discrete(fixture_p());
  const auto kernel = tilt(chain, Eigen::Vector2d(std::log(2.0), std::log(2.0)));
  Eigen::MatrixXd expected(2, 2);
  expected << 1.8, 0.2, 0.4, 1.6;
  const auto pf = pf_eigen(kernel);
  Measured m;
  m.add("matrix_error", (kernel.matrix - expected).cwiseAbs().maxCoeff());
  m.add("c", pf.c);
  m.add("q", pf.log_c);
  m.require((kernel.matrix - expected).cwiseAbs().maxCoeff() <= 1e-15);
  m.require(std::abs(pf.c - 2.0) <= 1e-10 && std::abs(pf.log_c - std::log(2.0)) <= 1e-10);
  return m;
}

Measured eigen_fixture_stationary(Context&) {
  const auto chain = FiniteChain::discrete(fixture_p());
  const auto pf = pf_eigen(tilt(chain, Eigen::Vector2d::Zero()));
  const auto pi = stationary(chain);
  Measured m;
  m.add("c", pf.c);
  m.add("h_error", (pf.h - Eigen::Vector2d::Ones()).cwiseAbs().maxCoeff());
  m.add("mu_error", std::max(std::abs(pf.mu[0] - 2.0 / 3.0), std::abs(pf.mu[1] - 1.0 / 3.0)));
  m.add("stationary_error", (pi - pf.mu).cwiseAbs().maxCoeff());
  m.require(std::abs(pf.c - 1.0) <= 1e-10);
  m.require((pf.h - Eigen::Vector2d::Ones()).cwiseAbs().maxCoeff() <= 1e-10);
  m.require(std::abs(pf.mu[0] - 2.0 / 3.0) <= 1e-10 && std::abs(pf.mu[1] - 1.0 / 3.0) <= 1e-10);
  m.require((pi - pf.mu).cwiseAbs().maxCoeff() <= 1e-10);
  return m;
}

Measured pf_dense_crosscheck(Context& ctx) {
  NormalStream rng(ctx.seed(12));
  double worst = 0.0, worst_residual = 0.0;
  for (int c = 0; c < 10; ++c) {
    const auto chain = c % 2 == 0 ? random_discrete(5, rng) : random_continuous(5, rng);
    const auto kernel = tilt(chain, random_vector(5, rng, -1.0, 1.0));
    const auto pf = pf_eigen(kernel);
    const auto spec = dense_spectrum(kernel.matrix);
    double dominant = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < spec.size(); ++i) {
      dominant = std::max(dominant, chain.clocking() == Clocking::discrete ? std::abs(spec[i]) : spec[i].real());
    }
    const double principal = chain.clocking() == Clocking::discrete ? pf.c : pf.log_c;
    worst = std::max(worst, std::abs(principal - dominant));
    worst_residual = std::max(worst_residual, pf.residual);
  }
  Measured m;
  m.add("max_eigenvalue_gap", worst);
  m.add("max_residual", worst_residual);
  m.require(worst <= 1e-10 && worst_residual <= 1e-10);
  return m;
}

Measured rate_duality(Context& ctx) {
  NormalStream rng(ctx.seed(13));
  double worst_gap = 0.0, worst_stationary = 0.0;
  for (int c = 0; c < 20; ++c) {
    const int n = 2 + c % 5;
    const auto chain = c % 2 == 0 ? random_discrete(n, rng) : random_continuous(n, rng);
    const auto lambda = random_probability(n, rng);
    const auto a = exact_rate_legendre(chain, lambda);
    const auto b = exact_rate_variational(chain, lambda);
    worst_gap = std::max(worst_gap, std::abs(a.value - b.value));
    const auto pi = stationary(chain);
    worst_stationary = std::max({worst_stationary, std::abs(exact_rate_legendre(chain, pi).value),
                                 std::abs(exact_rate_variational(chain, pi).value)});
  }
  const auto fixture = FiniteChain::discrete(fixture_p());
  const Eigen::Vector2d corner(1.0, 0.0);
  const double leg = exact_rate_legendre(fixture, corner).value;
  const double var = exact_rate_variational(fixture, corner).value;
  const double target = -std::log(0.9);
  Measured m;
  m.add("max_duality_gap", worst_gap);
  m.add("max_stationary_rate", worst_stationary);
  m.add("corner_legendre", leg);
  m.add("corner_variational", var);
  m.require(worst_gap <= 1e-6 && worst_stationary <= 1e-8);
  m.require(std::abs(leg - target) <= 1e-6 && std::abs(var - target) <= 1e-6);
  return m;
}

Measured resolvent_calculus(Context& ctx) {
  NormalStream rng(ctx.seed(14));
  std::vector<FiniteChain> chains{FiniteChain::discrete(fixture_p()),
                                  FiniteChain::continuous(fixture_p() - Eigen::MatrixXd::Identity(2, 2)),
                                  random_discrete(4, rng), random_continuous(4, rng)};
  bool decreasing = true;
  double worst_generator = 0.0, worst_commute = 0.0, worst_fd = 0.0, worst_exact = 0.0;
  Measured m;
  for (std::size_t c = 0; c < chains.size(); ++c) {
    const auto& chain = chains[c];
    const auto f = random_vector(chain.size(), rng, 0.5, 2.0);
    double previous = std::numeric_limits<double>::infinity();
    const double t = chain.clocking() == Clocking::discrete ? 2.0 : 0.7;
    const Eigen::MatrixXd pt = chain.semigroup(t);
    GeneratorProbe probe;
    probe.chain = &chain;
    for (double alpha : {1.0, 10.0, 100.0}) {
      const auto r = resolvent(chain, f, alpha);
      const double err = (alpha * r.values - f).cwiseAbs().maxCoeff();
      m.add("limit_error_c" + std::to_string(c) + "_a" + std::to_string(static_cast<int>(alpha)), err);
      if (!(err < previous)) decreasing = false;
      previous = err;
      const Eigen::VectorXd lhs = chain.generator() * r.values;
      worst_generator = std::max(worst_generator, (lhs - generator_of_resolvent(r, f, alpha)).cwiseAbs().maxCoeff());
      const Eigen::VectorXd commuted = resolvent(chain, pt * f, alpha).values;
      worst_commute = std::max(worst_commute, (pt * r.values - commuted).cwiseAbs().maxCoeff());
      worst_exact = std::max(worst_exact, (r.values - resolvent_exact(chain, f, alpha)).cwiseAbs().maxCoeff());
      worst_fd = std::max(worst_fd, (generator_finite_difference(probe, r.values) - generator_of_resolvent(r, f, alpha))
                                        .cwiseAbs()
                                        .maxCoeff());
    }
  }
  m.add("max_generator_identity_error", worst_generator);
  m.add("max_commutation_error", worst_commute);
  m.add("max_quadrature_error", worst_exact);
  m.add("max_finite_difference_error", worst_fd);
  m.require(decreasing && worst_generator <= 1e-8 && worst_commute <= 1e-8 && worst_fd <= 1e-6);
  return m;
}

Measured entropy_properties(Context& ctx) {
  const auto p = FiniteChain::discrete(fixture_p());
  Eigen::MatrixXd qm(2, 2);
  qm << 0.5, 0.5, 0.5, 0.5;
  const auto q = FiniteChain::discrete(qm);
  const double unit = dv_entropy(p, q, 1);
  bool exact = true;
  for (int t = 1; t <= 10; ++t) {
    if (dv_entropy(p, q, t) != static_cast<double>(t) * unit) exact = false;
  }
  NormalStream rng(ctx.seed(15));
  double min_gap = std::numeric_limits<double>::infinity();
  for (int c = 0; c < 100; ++c) {
    const int n = 2 + c % 4;
    const auto pc = random_discrete(n, rng);
    const auto qc = random_discrete(n, rng);
    min_gap = std::min(min_gap, contraction_gap(pc, qc));
  }
  double worst_witness = 0.0;
  for (const auto& lambda : {Eigen::Vector2d(0.3, 0.7), Eigen::Vector2d(0.8, 0.2)}) {
    worst_witness = std::max(worst_witness, std::abs(contraction_equality_witness(p, lambda).gap));
  }
  const auto p3 = random_discrete(3, rng);
  worst_witness = std::max(worst_witness, std::abs(contraction_equality_witness(p3, random_probability(3, rng)).gap));
  Measured m;
  m.add("entropy_per_unit_time", unit);
  m.add("scaling_exact", exact ? "yes" : "no");
  m.add("min_contraction_gap", min_gap);
  m.add("max_witness_gap", worst_witness);
  m.require(exact && std::abs(unit - 0.3670) <= 1e-4 && min_gap >= -1e-8 && worst_witness <= 1e-6);
  return m;
}

Measured met(Context&) {
  const auto chain = FiniteChain::discrete(fixture_p());
  const Eigen::Vector2d v(std::log(2.0), std::log(2.0));
  const auto report = met_convergence(chain, v, Eigen::Vector2d(1.0, 0.0), 40);
  const auto pf = pf_eigen(tilt(chain, v));
  const auto exact = met_convergence(chain, v, pf.h, 40);
  double worst_h = 0.0;
  for (double e : exact.errors) worst_h = std::max(worst_h, e);
  const auto stated = met_convergence(chain, Eigen::Vector2d(std::log(2.0), 0.0), Eigen::Vector2d(1.0, 0.0), 40);
  Measured m;
  m.add("tail_ratio", report.tail_ratio);
  m.add("spectral_ratio", report.spectral_ratio);
  m.add("max_error_f_eq_h", worst_h);
  m.add("single_tilt_tail_ratio", stated.tail_ratio);
  m.add("single_tilt_spectral_ratio", stated.spectral_ratio);
  m.require(std::abs(report.tail_ratio - 0.7) <= 0.05 && worst_h <= 1e-12);
  return m;
}

Measured ldp_bracket(Context& ctx) {
  const auto chain = FiniteChain::discrete(fixture_p());
  const auto table = ldp_frequency(chain, Eigen::Vector2d(1.0, 0.0), 0.05, {50, 100, 200}, 100000, ctx.seed(16),
                                   Eigen::Vector2d(1.0, 0.0));
  const auto& last = table.rows.back();
  Measured m;
  m.add("hits", static_cast<double>(last.hits));
  m.add("empirical_rate", last.empirical_rate);
  m.add("inf_closed", table.inf_closed);
  m.add("inf_open", table.inf_open);
  m.add("bracketed", table.bracketed ? "yes" : "no");
  m.require(std::abs(last.empirical_rate - table.inf_closed) <= 0.05);
  return m;
}

// ---------------------------------------------------------------- determinism

std::vector<std::pair<std::string, json>> determinism_configs() {
  const json torus1 = {{"torus", {{"max_wavenumber", 1}, {"noise_amplitude", 0.5}, {"forcing", {{0, 1.0}}}}}};
  const json disc = {{"clocking", "discrete"}, {"n_states", 2}, {"rows", {{0.9, 0.1}, {0.2, 0.8}}}};
  const json cont = {{"clocking", "continuous"}, {"n_states", 2}, {"rows", {{-0.1, 0.1}, {0.2, -0.2}}}};
  const double log2 = std::log(2.0);
  return {
      {"simulate",
       {{"kind", "simulate"}, {"model", torus1}, {"params", {{"horizon", 0.1}, {"dt", 0.01}, {"count", 4}}}}},
      {"pressure",
       {{"kind", "pressure"}, {"chain", cont}, {"params", {{"potential", {log2, 0.0}}, {"count", 2000}}}}},
      {"rate",
       {{"kind", "rate"},
        {"chain", disc},
        {"params", {{"lambda", {0.3, 0.7}}, {"search_budget", 2000}, {"restarts", 2}}}}},
      {"oracle",
       {{"kind", "oracle"},
        {"chain", disc},
        {"params",
         {{"potential", {log2, 0.0}},
          {"ldp", {{"center", {1.0, 0.0}}, {"radius", 0.05}, {"k_list", {20, 40}}, {"samples", 2000}}}}}}},
      {"couple", {{"kind", "couple"}, {"model", torus1}, {"params", {{"horizon", 0.2}}}}},
      {"probes",
       {{"kind", "probes"},
        {"model", torus1},
        {"params",
         {{"count", 1000},
          {"moment", {{"t_grid", {0.0, 0.5, 1.0}}}},
          {"recurrence", {{"count", 100}, {"horizon", 2.0}, {"radius", 2.0}}}}}}},
      {"entropy",
       {{"kind", "entropy"},
        {"chain", disc},
        {"params", {{"q", {{0.5, 0.5}, {0.5, 0.5}}}, {"lambda", {0.3, 0.7}}}}}},
  };
}

const std::map<std::string, Criterion>& registry();
const std::vector<std::string>& acceptance_list();

Measured determinism(Context& ctx) {
  Measured m;
  int compared = 0, differing = 0;
  for (const auto& name : acceptance_list()) {
    if (name == "determinism") continue;
    auto fn = registry().at(name);
    auto it = ctx.first_run.find(name);
    const std::string first = it != ctx.first_run.end() ? it->second : fn(ctx).text();
    const std::string second = fn(ctx).text();
    ++compared;
    if (first != second) {
      ++differing;
      m.add("differs", name);
    }
  }
  int runs = 0, run_differences = 0;
  for (const auto& [name, cfg] : determinism_configs()) {
    const auto config = parse_config(cfg.dump());
    const auto a = run(config, ctx.scratch / "rerun_a" / name);
    const auto b = run(config, ctx.scratch / "rerun_b" / name);
    ++runs;
    bool same = a.artifacts.size() == b.artifacts.size() && !a.artifacts.empty();
    for (std::size_t i = 0; same && i < a.artifacts.size(); ++i) {
      same = a.artifacts[i].file == b.artifacts[i].file && a.artifacts[i].hash == b.artifacts[i].hash;
    }
    if (!same) {
      ++run_differences;
      m.add("run_differs", name);
    }
  }
  m.add("criteria_rerun", compared);
  m.add("criteria_differing", differing);
  m.add("configs_rerun", runs);
  m.add("configs_differing", run_differences);
  m.require(differing == 0 && run_differences == 0);
  return m;
}

const std::map<std::string, Criterion>& registry() {
  static const std::map<std::string, Criterion> r{
      {"cancellation", cancellation},
      {"cancellation_sparse", cancellation_sparse},
      {"cancellation_revalidation", cancellation_revalidation},
      {"norm_consistency", norm_consistency},
      {"projection_identities", projection_identities},
      {"torus_spectrum", torus_spectrum},
      {"ou_exactness", ou_exactness},
      {"ou_decay_exact", ou_decay_exact},
      {"energy_identity", energy_identity},
      {"exp_equiv", exp_equiv},
      {"coupling_decay", coupling_decay},
      {"pressure_consistency", pressure_consistency},
      {"pressure_shift_covariance", pressure_shift_covariance},
      {"duhamel", duhamel},
      {"eigen_fixture", eigen_fixture},
      {"eigen_fixture_doubled", eigen_fixture_doubled},
      {"eigen_fixture_stationary", eigen_fixture_stationary},
      {"pf_dense_crosscheck", pf_dense_crosscheck},
      {"rate_duality", rate_duality},
      {"resolvent", resolvent_calculus},
      {"entropy", entropy_properties},
      {"met", met},
      {"ldp_bracket", ldp_bracket},
      {"determinism", determinism},
  };
  return r;
}

const std::vector<std::string>& acceptance_list() {
  static const std::vector<std::string> list{
      "cancellation", "energy_identity", "ou_exactness", "duhamel",        "eigen_fixture",
      "rate_duality", "resolvent",       "entropy",      "met",            "exp_equiv",
      "coupling_decay", "ldp_bracket",   "pressure_consistency", "determinism"};
  return list;
}

// Wall-clock limits in seconds.
double time_limit(const std::string& name) {
  static const std::map<std::string, double> limits{{"cancellation", 10.0}, {"energy_identity", 300.0},
                                                    {"ou_exactness", 30.0}, {"duhamel", 10.0},
                                                    {"coupling_decay", 60.0}, {"ldp_bracket", 120.0}};
  auto it = limits.find(name);
  return it == limits.end() ? std::numeric_limits<double>::infinity() : it->second;
}

}  // namespace

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"algebraic", "oracle", "stochastic", "determinism", "acceptance"};
  return names;
}

std::vector<std::string> suite_criteria(const std::string& suite) {
  if (suite == "algebraic") {
    return {"cancellation",   "cancellation_sparse", "cancellation_revalidation", "norm_consistency",
            "projection_identities", "torus_spectrum",    "ou_exactness",              "ou_decay_exact"};
  }
  if (suite == "oracle") {
    return {"duhamel",      "eigen_fixture", "eigen_fixture_doubled", "eigen_fixture_stationary", "pf_dense_crosscheck",
            "rate_duality", "resolvent",     "entropy",               "met",                      "ldp_bracket"};
  }
  if (suite == "stochastic") {
    return {"energy_identity", "exp_equiv", "coupling_decay", "pressure_consistency", "pressure_shift_covariance"};
  }
  if (suite == "determinism") return {"determinism"};
  if (suite == "acceptance") return acceptance_list();
  std::string known;
  for (const auto& s : suite_names()) known += (known.empty() ? "" : ", ") + s;
  throw ConfigError("unknown suite '" + suite + "' (available: " + known + ")");
}

std::vector<CriterionResult> run_suite(const std::string& suite, const VerifyOptions& options,
                                       const ResultCallback& on_result) {
  const auto names = suite_criteria(suite);
  fs::path scratch = options.scratch;
  const bool temporary = scratch.empty();
  if (temporary) {
    scratch = fs::temp_directory_path() / ("snsld-verify-" + std::to_string(::getpid()) + "-" + suite);
  }
  fs::create_directories(scratch);
  Context ctx{options, scratch, {}};
  std::vector<CriterionResult> results;
  for (const auto& name : names) {
    CriterionResult r;
    r.suite = suite;
    r.name = name;
    const auto start = std::chrono::steady_clock::now();
    try {
      const Measured m = registry().at(name)(ctx);
      r.passed = m.passed;
      r.measured = m.text();
      ctx.first_run[name] = r.measured;
    } catch (const std::exception& e) {
      r.passed = false;
      r.measured = std::string("error=\"") + e.what() + "\"";
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (r.seconds >= time_limit(name)) {
      r.passed = false;
      r.measured += " time_limit_exceeded=" + format_double(time_limit(name));
    }
    if (on_result) on_result(r);
    results.push_back(std::move(r));
  }
  if (temporary) {
    std::error_code ec;
    fs::remove_all(scratch, ec);
  }
  return results;
}

std::string results_document(const std::vector<CriterionResult>& results) {
  json doc = json::array();
  for (const auto& r : results) {
    doc.push_back({{"suite", r.suite},
                   {"criterion", r.name},
                   {"passed", r.passed},
                   {"measured", r.measured},
                   {"seconds", r.seconds}});
  }
  return doc.dump(1) + "\n";
}

}  // namespace snsld
