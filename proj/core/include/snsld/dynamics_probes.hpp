#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "snsld/galerkin_model.hpp"
#include "snsld/sde.hpp"

namespace snsld {

/// Synchronous-noise coupling at level (N, a): both components see the same
/// Gaussian increments, and the second one is pulled toward the first at
/// rate a on the leading N modes. Surrogate for a maximal coupling.
struct CoupledPair {
  State u;
  State v;
  int level = 0;
  double penalty = 0.0;
  std::uint64_t shared_seed = 0;
};

/// One exponential-Euler step. On the first `level` modes the difference
/// v - u is multiplied by e^{-(alpha_j + a) dt} exactly; the remaining
/// modes of v take an ordinary step with B(v).
CoupledPair coupled_step(const GalerkinModel& model, const CoupledPair& pair, double dt,
                         const Eigen::VectorXd& increments);

struct DecayReport {
  double distance = 0.0;  // d = |u0 - u0'|
  int level = 0;
  double penalty = 0.0;
  double dt = 0.0;
  double slack = 0.0;     // C dt
  double worst_ratio = 0.0;  // max_t |P_N w(t)| / (e^{-a t} d)
  std::optional<double> failing_time;
  bool passed = false;
  std::vector<double> times;
  std::vector<double> projected_gap;  // |P_N w(t)|
  std::vector<double> bound;          // e^{-a t} d
};

/// Integrates the coupled pair and checks |P_N w(t)| <= e^{-a t} d (1 + C dt)
/// at every grid time.
DecayReport foias_decay_check(const GalerkinModel& model, const State& u0, const State& u0_prime, int level,
                              double penalty, double horizon, double dt, std::uint64_t seed,
                              double slack_constant = 10.0);

/// w_m(u) = |u|^{2m} + 1; on windows the norm is the sup over the window.
struct WeightFunction {
  int m = 1;

  double operator()(const State& u) const;
  double on_window(const Trajectory& traj, std::size_t first, std::size_t last) const;
};

/// First grid time with |u_t| <= radius (or, with window > 0, with
/// sup_{[t, t+window]} |u| <= radius); empty past the horizon.
std::optional<double> hitting_time(const GalerkinModel& model, const State& u0, double radius, double horizon,
                                   double dt, std::uint64_t seed, double window = 0.0);

struct RecurrenceReport {
  double estimate = 0.0;        // mean exp(kappa tau) over non-timeout paths
  double std_error = 0.0;
  double timeout_fraction = 0.0;
  double half_a = 0.0, half_b = 0.0;  // half-sample estimates
  double half_error = 0.0;            // combined standard error of the halves
  bool stable = false;                // halves within 3 errors and timeouts < 1%
  std::uint64_t seed = 0;
  double dt = 0.0;
  std::size_t count = 0;
};

RecurrenceReport recurrence_moment(const GalerkinModel& model, const State& u0, double kappa, double radius,
                                   std::size_t count, double horizon, double dt, std::uint64_t master_seed);

struct MomentRow {
  double t = 0.0;
  double moment = 0.0;      // E |u_t|^{2m}
  double std_error = 0.0;
  double sup_moment = 0.0;  // E sup_{[t, t+T]} |u|^{2m}
};

struct MomentTable {
  int m = 1;
  double window = 0.0;
  std::vector<MomentRow> rows;
  double decay_rate = 0.0;  // fit of A e^{-r t} + C
  double amplitude = 0.0;
  double offset = 0.0;
  double required_rate = 0.0;  // m alpha_1 (1 - 0.2)
  bool decay_ok = false;
  std::uint64_t seed = 0;
  double dt = 0.0;
  std::size_t count = 0;
};

MomentTable moment_probe(const GalerkinModel& model, int m, const std::vector<double>& t_grid, std::size_t count,
                         std::uint64_t master_seed, const State& u0, double dt, double window = 0.0);

/// Least-squares fit of y = A e^{-r t} + C: r on a log grid refined by
/// golden section, (A, C) linear.
void fit_exponential_decay(const std::vector<double>& t, const std::vector<double>& y, double& rate, double& amplitude,
                           double& offset);

struct ExpMomentRow {
  double kappa = 0.0;
  double log_moment = 0.0;  // (1/t) log E exp(kappa E(t))
  double effective_fraction = 0.0;  // effective sample size / count
  bool stable = false;
};

struct ExpMomentTable {
  double t = 0.0;
  std::vector<ExpMomentRow> rows;
  std::optional<double> destabilizing_kappa;
  double k_constant = 0.0;  // B_0 + |h|_{-1}^2
  std::vector<double> rho;
  std::vector<double> exceedance;  // P{sup_s (E(s) - K s) >= |u0|^2 + rho}
  bool exceedance_monotone = false;
  double fitted_gamma = 0.0;       // slope of -log exceedance in rho
  std::uint64_t seed = 0;
  double dt = 0.0;
  std::size_t count = 0;
};

/// E(t) = |u_t|^2 + int_0^t |u|_1^2 (trapezoid).
ExpMomentTable exp_moment_probe(const GalerkinModel& model, const std::vector<double>& kappa_list, double t,
                                std::size_t count, std::uint64_t master_seed, const State& u0, double dt,
                                std::vector<double> rho = {});

struct DoublyLogRow {
  double initial_energy = 0.0;  // |u0|^2
  double statistic = 0.0;       // E log(1 + log(1 + t sup_{[t, t+T]} |u|_1^2))
  double std_error = 0.0;
};

struct DoublyLogTable {
  double t = 0.0;
  double window = 0.0;
  std::vector<DoublyLogRow> rows;
  double slope = 0.0, intercept = 0.0;  // regression on |u0|^2
  double margin = 0.0;  // min over rows of (|u0|^2 + 1 + t - statistic)
  bool dominated = false;
  std::uint64_t seed = 0;
  double dt = 0.0;
  std::size_t count = 0;
};

DoublyLogTable doubly_log_probe(const GalerkinModel& model, double t, double window, std::size_t count,
                                std::uint64_t master_seed, const std::vector<State>& u0_list, double dt);

}  // namespace snsld
