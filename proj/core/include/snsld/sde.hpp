#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "snsld/galerkin_model.hpp"
#include "snsld/rng.hpp"

namespace snsld {

/// Converts a time to a grid index; throws GridMismatch when t is not a
/// non-negative multiple of dt (relative tolerance 1e-9).
std::size_t grid_index(double t, double dt);

/// Uniformly gridded path; the time of state i is i * dt.
class Trajectory {
 public:
  Trajectory(double dt, int n_modes, std::uint64_t seed = 0, std::uint64_t model_id = 0);

  double dt() const noexcept { return dt_; }
  int n_modes() const noexcept { return n_; }
  std::size_t size() const noexcept { return data_.size() / static_cast<std::size_t>(n_); }
  std::size_t steps() const noexcept { return size() - 1; }
  double time(std::size_t i) const noexcept { return static_cast<double>(i) * dt_; }
  double horizon() const noexcept { return time(steps()); }
  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t model_id() const noexcept { return model_id_; }

  Eigen::Map<const State> state(std::size_t i) const {
    return Eigen::Map<const State>(data_.data() + i * static_cast<std::size_t>(n_), n_);
  }
  const double* row(std::size_t i) const noexcept { return data_.data() + i * static_cast<std::size_t>(n_); }

  void push_back(const double* coeffs);
  void push_back(const State& u);
  void reserve(std::size_t states) { data_.reserve(states * static_cast<std::size_t>(n_)); }

  /// Row-major state matrix.
  const std::vector<double>& data() const noexcept { return data_; }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;

 private:
  double dt_;
  int n_;
  std::uint64_t seed_;
  std::uint64_t model_id_;
  std::vector<double> data_;
};

struct BlowUp {
  std::size_t index;
  std::size_t step;
  std::string message;
};

struct TrajectoryEnsemble {
  std::uint64_t master_seed = 0;
  double dt = 0.0;
  double horizon = 0.0;
  std::uint64_t model_id = 0;
  std::vector<std::size_t> indices;  // ensemble index of each stored trajectory
  std::vector<Trajectory> trajectories;
  std::vector<BlowUp> failures;
};

/// Exponential Euler step with exact Ornstein-Uhlenbeck increments:
///   u'_j = e^{-a_j dt} (u_j + dt (h_j - B(u,u)_j)) + b_j s_j(dt) xi_j,
///   s_j(dt)^2 = (1 - e^{-2 a_j dt}) / (2 a_j).
class ExponentialEuler {
 public:
  ExponentialEuler(const GalerkinModel& model, double dt);

  const GalerkinModel& model() const noexcept { return *model_; }
  double dt() const noexcept { return dt_; }
  /// Per-mode b_j s_j(dt).
  const std::vector<double>& noise_scale() const noexcept { return noise_scale_; }
  const std::vector<double>& decay() const noexcept { return decay_; }

  /// In-place update using `scratch` (n_modes values); returns false if
  /// any coefficient became non-finite.
  bool advance(double* u, const double* xi, double* scratch) const noexcept;

  /// Deterministic part e^{-a dt}(u + dt(h - B(u,u))) written to `out`.
  void drift_part(const double* u, double* out) const noexcept;

 private:
  const GalerkinModel* model_;
  double dt_;
  std::vector<double> decay_, noise_scale_;
};

State step(const GalerkinModel& model, const State& u, double dt, const Eigen::VectorXd& gaussian_increments);

/// Called with (step index, state, increments that produced the *next*
/// state or nullptr at the final state). Returning false stops the run.
using PathVisitor = std::function<bool(std::size_t, const double*, const double*)>;

/// Integrates `steps` steps from u0 and streams every state to the visitor
/// without storing the path. Throws NonFiniteState on blow-up.
void integrate(const GalerkinModel& model, const State& u0, std::size_t steps, double dt, std::uint64_t seed,
               const PathVisitor& visit);

Trajectory simulate(const GalerkinModel& model, const State& u0, double horizon, double dt, std::uint64_t seed);

/// Draws an initial condition for ensemble member `index` from its own stream.
using InitialSampler = std::function<State(std::size_t index, NormalStream& rng)>;

InitialSampler fixed_initial(State u0);

/// Seed of trajectory `index`; its initial condition uses split_seed(seed, 1).
inline std::uint64_t member_seed(std::uint64_t master_seed, std::size_t index) {
  return split_seed(master_seed, index);
}

State draw_initial(const InitialSampler& sampler, std::uint64_t master_seed, std::size_t index);

/// Member i is simulate(model, sampler(i), horizon, dt, member_seed(master, i)).
/// Blow-ups are recorded in `failures`, never thrown. `order` (optional)
/// permutes the execution order without affecting the result.
TrajectoryEnsemble ensemble(const GalerkinModel& model, const InitialSampler& initial, std::size_t count,
                            double horizon, double dt, std::uint64_t master_seed,
                            const std::vector<std::size_t>& order = {});

/// Per-path terms of the energy balance
///   |u_t|^2 + 2 int |u|_1^2 - 2 int <u,h> - |u_0|^2 - B_0 t
/// with trapezoid time integrals, plus two control variates with exact mean
/// zero: sum_n 2 <D_n, xi_n> and sum_n (|xi_n|^2 - E|xi_n|^2), where xi_n is
/// the noise increment and D_n the drift part of step n.
struct EnergyBalance {
  double final_energy = 0.0;
  double dissipation = 0.0;  // int |u|_1^2
  double work = 0.0;         // int <u,h>
  double initial_energy = 0.0;
  double martingale = 0.0;
  double quadratic_variation = 0.0;
};

struct EnergyResidual {
  double residual = 0.0;            // (LHS - RHS) / max(|RHS|, 1)
  double corrected_residual = 0.0;  // same, with the control variates removed
  double standard_error = 0.0;      // of `residual`
  double corrected_standard_error = 0.0;
  std::size_t paths = 0;
};

/// Energy-identity residual over a stored ensemble at grid time t.
EnergyResidual energy_identity_residual(const GalerkinModel& model, const TrajectoryEnsemble& ensemble, double t);

/// Same estimator computed on the fly over `count` paths from u0.
EnergyResidual energy_identity_mc(const GalerkinModel& model, const State& u0, std::size_t count, double t,
                                  double dt, std::uint64_t master_seed);

}  // namespace snsld
