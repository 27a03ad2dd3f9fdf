#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "snsld/sde.hpp"

namespace snsld {

enum class SpaceKind { state, window, label };

/// Finitely supported probability measure. Each atom is a flattened point:
/// `window_points` consecutive states of `n_modes` coefficients (a single
/// state when window_points == 1, a chain label when space == label).
class EmpiricalMeasure {
 public:
  EmpiricalMeasure(SpaceKind space, int n_modes, std::size_t window_points, double dt);

  /// Uniform measure over the given points (row-major, point_size() each).
  static EmpiricalMeasure uniform(SpaceKind space, int n_modes, std::size_t window_points, double dt,
                                  std::vector<double> points);
  /// Probability vector over chain states 0..n-1.
  static EmpiricalMeasure over_labels(const std::vector<double>& probabilities);

  void add_atom(std::span<const double> point, double weight);

  SpaceKind space() const noexcept { return space_; }
  int n_modes() const noexcept { return n_modes_; }
  std::size_t window_points() const noexcept { return window_points_; }
  double dt() const noexcept { return dt_; }
  std::size_t point_size() const noexcept { return window_points_ * static_cast<std::size_t>(n_modes_); }
  std::size_t size() const noexcept { return weights_.size(); }
  std::span<const double> point(std::size_t i) const {
    return {points_.data() + i * point_size(), point_size()};
  }
  double weight(std::size_t i) const { return weights_[i]; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  const std::vector<double>& points() const noexcept { return points_; }

  double total_weight() const;

  /// <f, mu>.
  double integrate(const std::function<double(std::span<const double>)>& f) const;

 private:
  SpaceKind space_;
  int n_modes_;
  std::size_t window_points_;
  double dt_;
  std::vector<double> points_;
  std::vector<double> weights_;
};

/// Distances on the point spaces above.
enum class MetricKind {
  state_norm,       // H-norm distance between states
  window_sup,       // max over grid times of the H-distance
  window_weighted,  // sum_m 2^{-m} min(1, sup_{[m-1,m]} |x - y|), truncated at the window length
  discrete,         // 0/1 metric on chain labels
};

struct Metric {
  MetricKind kind = MetricKind::state_norm;

  double operator()(const EmpiricalMeasure& space, std::span<const double> x, std::span<const double> y) const;
};

/// Metric used for window spaces unless stated otherwise, and the note
/// recorded in persisted measures.
inline constexpr const char* kWindowMetricNote =
    "window distances use the truncated weighted sup metric sum_m 2^-m min(1, sup_[m-1,m] |x-y|) "
    "in place of the Skorokhod metric";

/// (1/m) sum of delta_{u(i dt)}, i = 0..m-1, with t = m dt.
EmpiricalMeasure occupation_measure(const Trajectory& traj, double t);

/// Uniform atoms on windows u_[s, s+T], s = 0..t-dt. With `backward`, the
/// windows are u_[s-T, s] and times before 0 are filled with u_0.
EmpiricalMeasure windowed_empirical(const Trajectory& traj, double window, double t, bool backward = false);

/// t-periodic extension of the first m = t/dt states.
class PeriodizedTrajectory {
 public:
  PeriodizedTrajectory(const Trajectory& base, double period);

  double period() const noexcept { return period_; }
  double dt() const noexcept { return base_.dt(); }
  int n_modes() const noexcept { return base_.n_modes(); }
  std::size_t period_steps() const noexcept { return base_.size(); }
  const Trajectory& base() const noexcept { return base_; }

  /// State at grid time index * dt, any integer index.
  Eigen::Map<const State> at(long long index) const;
  const double* row(long long index) const;

 private:
  Trajectory base_;
  double period_;
};

PeriodizedTrajectory periodize(const Trajectory& traj, double t);

/// Uniform atoms on the windows of theta_s u_per, s = 0..t-dt, length T.
EmpiricalMeasure periodized_empirical(const PeriodizedTrajectory& per, double window);
EmpiricalMeasure periodized_empirical(const Trajectory& traj, double t, double window);

/// theta_s u(.) = u(s + .); the result lives on [0, horizon - s].
Trajectory shift(const Trajectory& traj, double s);
/// Rotation of the period by s; shifting by the period is the identity.
PeriodizedTrajectory shift(const PeriodizedTrajectory& per, double s);

/// ||mu1 - mu2||*_L = sup { <f, mu1> - <f, mu2> : ||f||_inf + Lip(f) <= 1 },
/// computed exactly on the union support after cancelling shared atoms.
double dual_lipschitz(const EmpiricalMeasure& mu1, const EmpiricalMeasure& mu2, Metric metric);

struct EquivalenceGap {
  double gap = 0.0;
  double bound = 0.0;  // 2 log 2 / t
  double slack = 0.0;  // 2 dt
  bool within = false;
};

/// Distance between the length-`window` projections of the periodized and
/// plain level-3 empirical measures at time t, under the weighted window
/// metric, against the bound 2 log 2 / t.
EquivalenceGap exp_equiv_gap(const Trajectory& traj, double t, double window);

}  // namespace snsld
