#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "snsld/chain.hpp"
#include "snsld/galerkin_model.hpp"
#include "snsld/sde.hpp"

namespace snsld {

/// One saturated feature weight * tanh(<x, direction> + offset).
struct TanhFeature {
  double weight = 0.0;
  std::vector<double> direction;
  double offset = 0.0;

  friend bool operator==(const TanhFeature&, const TanhFeature&) = default;
};

/// Bounded Lipschitz function of the first `level` coefficients,
///   F(x) = constant + sum_i weight_i tanh(<x, direction_i> + offset_i).
/// With window > 0 the argument is the window (P_N u(s + p dt))_p,
/// flattened point-major, p = 0..window/dt.
class Potential {
 public:
  Potential(int level, double constant, std::vector<TanhFeature> features, double window = 0.0, double dt = 0.0);

  static Potential constant(double value, int level = 0);

  int level() const noexcept { return level_; }
  double window() const noexcept { return window_; }
  double dt() const noexcept { return dt_; }
  /// Number of grid states in a window (1 for state potentials).
  std::size_t window_points() const noexcept { return points_; }
  double constant_term() const noexcept { return constant_; }
  const std::vector<TanhFeature>& features() const noexcept { return features_; }
  /// |constant| + sum |weight_i|; an upper bound for |F|.
  double bound() const noexcept { return bound_; }

  /// F at a full state (state potentials) or at `window_points` consecutive
  /// full states laid out row-major.
  double operator()(std::span<const double> x, int n_modes) const;
  double operator()(const State& u) const { return (*this)({u.data(), static_cast<std::size_t>(u.size())}, static_cast<int>(u.size())); }
  /// Same without the constant term.
  double variable_part(std::span<const double> x, int n_modes) const;
  /// <P_N x, direction_i> + offset_i.
  double preactivation(std::size_t feature, std::span<const double> x, int n_modes) const;

  /// V + c.
  Potential shifted(double c) const;

  friend bool operator==(const Potential&, const Potential&) = default;

 private:
  int level_;
  double constant_;
  std::vector<TanhFeature> features_;
  double window_;
  double dt_;
  std::size_t points_;
  double bound_;
};

/// Window potential on length-T windows; constant + features over
/// (P_N u(t_i))_i.
Potential window_potential(double constant, std::vector<TanhFeature> features, int level, double window, double dt);

using StateFunction = std::function<double(std::span<const double>)>;

/// Trapezoid integral of V along the path on [0, t]. Window potentials use
/// the forward windows u_[s, s+T] and need the path up to t + T.
double potential_integral(const Trajectory& traj, const Potential& v, double t);

/// f(u_t) exp(int_0^t V(u_s) ds).
double fk_functional(const Trajectory& traj, const Potential& v, const StateFunction& f, double t);

struct FkEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t count = 0;
  std::size_t blowups = 0;
};

/// Monte Carlo mean of fk_functional over `count` fresh paths from u0,
/// path i seeded with member_seed(seed, i). Fails when more than 1% of the
/// paths blow up.
FkEstimate fk_expectation(const GalerkinModel& model, const Potential& v, const StateFunction& f, const State& u0,
                          double t, double dt, std::size_t count, std::uint64_t seed);

struct PressureEstimate {
  double value = 0.0;
  double std_error = 0.0;       // sqrt(mc^2 + fit^2)
  double mc_error = 0.0;        // delta-method error of the slope
  double fit_error = 0.0;       // residual scatter of the linear fit
  double intercept = 0.0;
  double jackknife_bias = 0.0;  // of the slope
  std::vector<double> t_grid;
  std::vector<double> per_t_logmeans;  // (1/t) log mean exp(int_0^t V)
  std::vector<double> log_means;       // log mean exp(int_0^t V)
  std::vector<double> log_mean_errors;
  std::size_t count = 0;
  std::size_t blowups = 0;
};

/// Per-sample integrals int_0^{t_k} (V - constant) for every t in the grid.
using IntegralSampler = std::function<std::vector<double>(std::size_t index)>;

/// Slope of log mean exp(int V) against t over `t_list`, plus the constant
/// term of V. Samples are produced in parallel and reduced in index order.
PressureEstimate pressure_from_samples(const IntegralSampler& sampler, std::size_t count,
                                       const std::vector<double>& t_list, double constant);

PressureEstimate pressure_mc(const GalerkinModel& model, const Potential& v, const std::vector<double>& t_list,
                             double dt, std::size_t count, std::uint64_t seed, const InitialSampler& initial);

/// Continuous-clock chain: exact path integrals of V along simulated
/// jump paths started from `initial` (a probability vector).
PressureEstimate pressure_mc(const FiniteChain& chain, const Eigen::VectorXd& v, const std::vector<double>& t_list,
                             std::size_t count, std::uint64_t seed, const Eigen::VectorXd& initial);

/// One jump path of a continuous-clock chain on [0, horizon]:
/// states[i] is held on [times[i], times[i+1]).
struct JumpPath {
  std::vector<int> states;
  std::vector<double> times;
  double horizon = 0.0;

  double integral(const Eigen::VectorXd& v, double t) const;
};

JumpPath simulate_jump_path(const FiniteChain& chain, int start, double horizon, NormalStream& rng);

enum class QuadratureKind { gauss_legendre, trapezoid };

struct DuhamelReport {
  double residual = 0.0;
  double lhs_norm = 0.0;
  int nodes = 0;
  QuadratureKind rule = QuadratureKind::gauss_legendre;
};

/// sup_x |P^V_t f - P_t f - int_0^t P_{t-s}(V P^V_s f) ds| on a chain, with
/// exact matrix semigroups. Discrete clocks use the exact telescoping sum
/// with V replaced by e^V - 1 and ignore the quadrature arguments.
DuhamelReport duhamel_residual(const FiniteChain& chain, const Eigen::VectorXd& v, const Eigen::VectorXd& f, double t,
                               int nodes = 100, QuadratureKind rule = QuadratureKind::gauss_legendre);

struct ModelDuhamelReport {
  double residual = 0.0;     // sup over probes of |mean(LHS - RHS)|
  double std_error = 0.0;    // at the maximizing probe
  bool resolved = false;     // std_error <= 1% of mean |LHS| at the reported probe
  std::size_t count = 0;
};

/// Model version: the inner expectation P_{t-s}(V P^V_s f)(u) is estimated
/// along the same path (Markov property), paths shared between both sides.
/// Nodes are grid points of a trapezoid rule with spacing a multiple of dt.
ModelDuhamelReport duhamel_residual(const GalerkinModel& model, const Potential& v, const StateFunction& f,
                                    const std::vector<State>& probes, double t, double dt, std::size_t count,
                                    std::uint64_t seed, int nodes = 100);

}  // namespace snsld
