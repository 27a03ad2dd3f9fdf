#include "snsld/empirical.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "snsld/error.hpp"
#include "snsld/transport.hpp"

namespace snsld {

EmpiricalMeasure::EmpiricalMeasure(SpaceKind space, int n_modes, std::size_t window_points, double dt)
    : space_(space), n_modes_(n_modes), window_points_(window_points), dt_(dt) {
  if (n_modes <= 0 || window_points == 0) throw DimensionMismatch("measure points must be non-empty");
}

EmpiricalMeasure EmpiricalMeasure::uniform(SpaceKind space, int n_modes, std::size_t window_points, double dt,
                                           std::vector<double> points) {
  EmpiricalMeasure mu(space, n_modes, window_points, dt);
  const std::size_t ps = mu.point_size();
  if (points.empty() || points.size() % ps != 0) throw DimensionMismatch("point table has a ragged last row");
  const std::size_t m = points.size() / ps;
  mu.points_ = std::move(points);
  mu.weights_.assign(m, 1.0 / static_cast<double>(m));
  return mu;
}

EmpiricalMeasure EmpiricalMeasure::over_labels(const std::vector<double>& probabilities) {
  EmpiricalMeasure mu(SpaceKind::label, 1, 1, 1.0);
  for (std::size_t x = 0; x < probabilities.size(); ++x) {
    if (probabilities[x] < 0.0) throw Error("probabilities must be non-negative");
    if (probabilities[x] == 0.0) continue;
    const double label = static_cast<double>(x);
    mu.add_atom(std::span<const double>(&label, 1), probabilities[x]);
  }
  return mu;
}

void EmpiricalMeasure::add_atom(std::span<const double> point, double weight) {
  if (point.size() != point_size()) throw DimensionMismatch("atom has the wrong number of coordinates");
  if (!(weight > 0.0)) throw Error("atom weights must be positive");
  points_.insert(points_.end(), point.begin(), point.end());
  weights_.push_back(weight);
}

double EmpiricalMeasure::total_weight() const {
  double s = 0.0;
  for (double w : weights_) s += w;
  return s;
}

double EmpiricalMeasure::integrate(const std::function<double(std::span<const double>)>& f) const {
  double s = 0.0;
  for (std::size_t i = 0; i < size(); ++i) s += weights_[i] * f(point(i));
  return s;
}

namespace {

double state_distance(const double* x, const double* y, int n) {
  double s = 0.0;
  for (int j = 0; j < n; ++j) s += (x[j] - y[j]) * (x[j] - y[j]);
  return std::sqrt(s);
}

}  // namespace

double Metric::operator()(const EmpiricalMeasure& space, std::span<const double> x, std::span<const double> y) const {
  const int n = space.n_modes();
  const std::size_t w = space.window_points();
  switch (kind) {
    case MetricKind::discrete:
      return std::equal(x.begin(), x.end(), y.begin()) ? 0.0 : 1.0;
    case MetricKind::state_norm:
      if (w != 1) throw DimensionMismatch("state metric applied to window points");
      return state_distance(x.data(), y.data(), n);
    case MetricKind::window_sup: {
      double d = 0.0;
      for (std::size_t i = 0; i < w; ++i) d = std::max(d, state_distance(x.data() + i * n, y.data() + i * n, n));
      return d;
    }
    case MetricKind::window_weighted: {
      if (w == 1) return 0.5 * std::min(1.0, state_distance(x.data(), y.data(), n));
      const double dt = space.dt();
      const double length = static_cast<double>(w - 1) * dt;
      const int intervals = std::max(1, static_cast<int>(std::ceil(length - 1e-9)));
      double d = 0.0;
      for (int m = 1; m <= intervals; ++m) {
        const auto first = static_cast<std::size_t>(std::ceil((m - 1) / dt - 1e-9));
        const auto last = std::min(w - 1, static_cast<std::size_t>(std::floor(m / dt + 1e-9)));
        double sup = 0.0;
        for (std::size_t i = first; i <= last; ++i)
          sup = std::max(sup, state_distance(x.data() + i * n, y.data() + i * n, n));
        d += std::ldexp(std::min(1.0, sup), -m);
      }
      return d;
    }
  }
  return 0.0;
}

EmpiricalMeasure occupation_measure(const Trajectory& traj, double t) {
  const std::size_t m = grid_index(t, traj.dt());
  if (m == 0) throw GridMismatch("occupation measure needs t >= dt");
  if (m > traj.size()) throw GridMismatch("occupation time exceeds the trajectory");
  std::vector<double> pts(traj.data().begin(), traj.data().begin() + m * traj.n_modes());
  return EmpiricalMeasure::uniform(SpaceKind::state, traj.n_modes(), 1, traj.dt(), std::move(pts));
}

EmpiricalMeasure windowed_empirical(const Trajectory& traj, double window, double t, bool backward) {
  const std::size_t w = grid_index(window, traj.dt());
  const std::size_t m = grid_index(t, traj.dt());
  if (m == 0) throw GridMismatch("empirical measure needs t >= dt");
  const std::size_t n = static_cast<std::size_t>(traj.n_modes());
  if (!backward && m - 1 + w > traj.steps()) throw GridMismatch("windows extend past the trajectory horizon");
  if (backward && m > traj.size()) throw GridMismatch("windows extend past the trajectory horizon");
  std::vector<double> pts;
  pts.reserve(m * (w + 1) * n);
  for (std::size_t s = 0; s < m; ++s) {
    for (std::size_t i = 0; i <= w; ++i) {
      std::size_t idx;
      if (backward) {
        const long long r = static_cast<long long>(s) - static_cast<long long>(w) + static_cast<long long>(i);
        idx = r < 0 ? 0 : static_cast<std::size_t>(r);
      } else {
        idx = s + i;
      }
      pts.insert(pts.end(), traj.row(idx), traj.row(idx) + n);
    }
  }
  return EmpiricalMeasure::uniform(SpaceKind::window, traj.n_modes(), w + 1, traj.dt(), std::move(pts));
}

PeriodizedTrajectory::PeriodizedTrajectory(const Trajectory& base, double period)
    : base_(base.dt(), base.n_modes(), base.seed(), base.model_id()), period_(period) {
  const std::size_t m = grid_index(period, base.dt());
  if (m == 0) throw GridMismatch("period must be positive");
  if (m > base.size()) throw GridMismatch("period exceeds the trajectory");
  base_.reserve(m);
  for (std::size_t i = 0; i < m; ++i) base_.push_back(base.row(i));
}

const double* PeriodizedTrajectory::row(long long index) const {
  const auto m = static_cast<long long>(base_.size());
  long long r = index % m;
  if (r < 0) r += m;
  return base_.row(static_cast<std::size_t>(r));
}

Eigen::Map<const State> PeriodizedTrajectory::at(long long index) const {
  return Eigen::Map<const State>(row(index), base_.n_modes());
}

PeriodizedTrajectory periodize(const Trajectory& traj, double t) { return PeriodizedTrajectory(traj, t); }

EmpiricalMeasure periodized_empirical(const PeriodizedTrajectory& per, double window) {
  const std::size_t w = grid_index(window, per.dt());
  const std::size_t m = per.period_steps();
  const std::size_t n = static_cast<std::size_t>(per.n_modes());
  std::vector<double> pts;
  pts.reserve(m * (w + 1) * n);
  for (std::size_t s = 0; s < m; ++s)
    for (std::size_t i = 0; i <= w; ++i) {
      const double* r = per.row(static_cast<long long>(s + i));
      pts.insert(pts.end(), r, r + n);
    }
  return EmpiricalMeasure::uniform(SpaceKind::window, per.n_modes(), w + 1, per.dt(), std::move(pts));
}

EmpiricalMeasure periodized_empirical(const Trajectory& traj, double t, double window) {
  return periodized_empirical(periodize(traj, t), window);
}

Trajectory shift(const Trajectory& traj, double s) {
  const std::size_t k = grid_index(s, traj.dt());
  if (k > traj.steps()) throw GridMismatch("shift exceeds the trajectory horizon");
  Trajectory out(traj.dt(), traj.n_modes(), traj.seed(), traj.model_id());
  out.reserve(traj.size() - k);
  for (std::size_t i = k; i < traj.size(); ++i) out.push_back(traj.row(i));
  return out;
}

PeriodizedTrajectory shift(const PeriodizedTrajectory& per, double s) {
  const std::size_t k = grid_index(s, per.dt());
  const std::size_t m = per.period_steps();
  Trajectory rotated(per.dt(), per.n_modes(), per.base().seed(), per.base().model_id());
  rotated.reserve(m);
  for (std::size_t i = 0; i < m; ++i) rotated.push_back(per.row(static_cast<long long>(i + k)));
  return PeriodizedTrajectory(rotated, per.period());
}

double dual_lipschitz(const EmpiricalMeasure& mu1, const EmpiricalMeasure& mu2, Metric metric) {
  if (mu1.size() == 0 || mu2.size() == 0) throw Error("dual-Lipschitz distance of an empty measure");
  if (mu1.point_size() != mu2.point_size() || mu1.space() != mu2.space())
    throw DimensionMismatch("measures live on different spaces");

  std::map<std::vector<double>, double> net;
  auto accumulate = [&](const EmpiricalMeasure& mu, double sign) {
    for (std::size_t i = 0; i < mu.size(); ++i) {
      auto p = mu.point(i);
      net[std::vector<double>(p.begin(), p.end())] += sign * mu.weight(i);
    }
  };
  accumulate(mu1, 1.0);
  accumulate(mu2, -1.0);

  std::vector<const std::vector<double>*> src, dst;
  std::vector<double> supply, demand;
  for (const auto& [pt, w] : net) {
    if (w > 1e-15) {
      src.push_back(&pt);
      supply.push_back(w);
    } else if (w < -1e-15) {
      dst.push_back(&pt);
      demand.push_back(-w);
    }
  }
  if (src.empty() || dst.empty()) return 0.0;
  // Rounding can leave the two parts with slightly different totals.
  double ts = 0.0, td = 0.0;
  for (double x : supply) ts += x;
  for (double x : demand) td += x;
  for (double& x : demand) x *= ts / td;

  Eigen::MatrixXd dist(static_cast<Eigen::Index>(src.size()), static_cast<Eigen::Index>(dst.size()));
  for (std::size_t i = 0; i < src.size(); ++i)
    for (std::size_t j = 0; j < dst.size(); ++j) dist(i, j) = metric(mu1, *src[i], *dst[j]);
  return bounded_lipschitz_dual(supply, demand, dist);
}

EquivalenceGap exp_equiv_gap(const Trajectory& traj, double t, double window) {
  EquivalenceGap g;
  const auto plain = windowed_empirical(traj, window, t);
  const auto per = periodized_empirical(traj, t, window);
  g.gap = dual_lipschitz(per, plain, Metric{MetricKind::window_weighted});
  g.bound = 2.0 * std::numbers::ln2 / t;
  g.slack = 2.0 * traj.dt();
  g.within = g.gap <= g.bound + g.slack;
  return g;
}

}  // namespace snsld
