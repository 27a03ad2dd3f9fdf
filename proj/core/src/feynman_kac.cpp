#include "snsld/feynman_kac.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "snsld/error.hpp"
#include "snsld/linalg.hpp"
#include "snsld/parallel.hpp"

namespace snsld {

Potential::Potential(int level, double constant, std::vector<TanhFeature> features, double window, double dt)
    : level_(level), constant_(constant), features_(std::move(features)), window_(window), dt_(dt), points_(1) {
  if (level_ < 0) throw ConfigError("projection level must be non-negative");
  if (window_ < 0.0) throw ConfigError("window length must be non-negative");
  if (window_ > 0.0) {
    if (!(dt_ > 0.0)) throw ConfigError("window potential needs a positive dt");
    points_ = grid_index(window_, dt_) + 1;
  }
  bound_ = std::abs(constant_);
  for (const auto& f : features_) {
    if (f.direction.size() != static_cast<std::size_t>(level_) * points_)
      throw DimensionMismatch("feature direction length must be level * window points");
    bound_ += std::abs(f.weight);
  }
}

Potential Potential::constant(double value, int level) { return Potential(level, value, {}); }

double Potential::preactivation(std::size_t feature, std::span<const double> x, int n_modes) const {
  if (level_ > n_modes) throw DimensionMismatch("potential level exceeds the state dimension");
  if (x.size() != points_ * static_cast<std::size_t>(n_modes)) throw DimensionMismatch("potential argument has the wrong length");
  const TanhFeature& f = features_.at(feature);
  double s = f.offset;
  for (std::size_t p = 0; p < points_; ++p) {
    const double* row = x.data() + p * static_cast<std::size_t>(n_modes);
    const double* dir = f.direction.data() + p * static_cast<std::size_t>(level_);
    for (int j = 0; j < level_; ++j) s += row[j] * dir[j];
  }
  return s;
}

double Potential::variable_part(std::span<const double> x, int n_modes) const {
  double s = 0.0;
  for (std::size_t i = 0; i < features_.size(); ++i) s += features_[i].weight * std::tanh(preactivation(i, x, n_modes));
  return s;
}

double Potential::operator()(std::span<const double> x, int n_modes) const {
  if (features_.empty()) return constant_;
  return constant_ + variable_part(x, n_modes);
}

Potential Potential::shifted(double c) const {
  Potential out = *this;
  out.constant_ += c;
  out.bound_ += std::abs(constant_ + c) - std::abs(constant_);
  return out;
}

Potential window_potential(double constant, std::vector<TanhFeature> features, int level, double window, double dt) {
  if (!(window > 0.0)) return Potential(level, constant, std::move(features));
  return Potential(level, constant, std::move(features), window, dt);
}

namespace {

void check_grid(const Trajectory& traj, const Potential& v) {
  if (v.window() > 0.0 && std::abs(v.dt() - traj.dt()) > 1e-9 * traj.dt())
    throw GridMismatch("window potential dt differs from the trajectory dt");
}

// Trapezoid integrals of V (or its variable part) at grid indices `marks`.
std::vector<double> cumulative_integrals(const Trajectory& traj, const Potential& v, const std::vector<std::size_t>& marks,
                                         bool variable_only) {
  check_grid(traj, v);
  const std::size_t w = v.window_points() - 1;
  const std::size_t last = marks.empty() ? 0 : *std::max_element(marks.begin(), marks.end());
  if (last + w >= traj.size()) throw GridMismatch("trajectory too short for the requested time and window");
  const int n = traj.n_modes();
  const std::size_t len = v.window_points() * static_cast<std::size_t>(n);
  auto value = [&](std::size_t i) {
    std::span<const double> x(traj.row(i), len);
    return variable_only ? v.variable_part(x, n) : v(x, n);
  };
  std::vector<double> out(marks.size(), 0.0);
  double acc = 0.0;
  double prev = value(0);
  std::size_t k = 0;
  std::vector<std::size_t> order(marks.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return marks[a] < marks[b]; });
  while (k < order.size() && marks[order[k]] == 0) out[order[k++]] = 0.0;
  for (std::size_t i = 1; i <= last; ++i) {
    double cur = value(i);
    acc += 0.5 * traj.dt() * (prev + cur);
    prev = cur;
    while (k < order.size() && marks[order[k]] == i) out[order[k++]] = acc;
  }
  return out;
}

}  // namespace

double potential_integral(const Trajectory& traj, const Potential& v, double t) {
  return cumulative_integrals(traj, v, {grid_index(t, traj.dt())}, false)[0];
}

double fk_functional(const Trajectory& traj, const Potential& v, const StateFunction& f, double t) {
  const std::size_t m = grid_index(t, traj.dt());
  if (m >= traj.size()) throw GridMismatch("time beyond the trajectory horizon");
  double integral = potential_integral(traj, v, t);
  return f({traj.row(m), static_cast<std::size_t>(traj.n_modes())}) * std::exp(integral);
}

FkEstimate fk_expectation(const GalerkinModel& model, const Potential& v, const StateFunction& f, const State& u0,
                          double t, double dt, std::size_t count, std::uint64_t seed) {
  if (count < 2) throw ConfigError("fk_expectation needs at least 2 paths");
  const std::size_t m = grid_index(t, dt);
  FkEstimate est;
  est.count = count;
  if (m == 0 && v.window() == 0.0) {
    est.mean = f({u0.data(), static_cast<std::size_t>(u0.size())});
    return est;
  }
  const double horizon = static_cast<double>(m + v.window_points() - 1) * dt;
  std::vector<double> values(count, 0.0);
  std::vector<char> failed(count, 0);
  parallel_for(count, [&](std::size_t i) {
    try {
      Trajectory traj = simulate(model, u0, horizon, dt, member_seed(seed, i));
      values[i] = fk_functional(traj, v, f, t);
    } catch (const NonFiniteState&) {
      failed[i] = 1;
    }
  });
  double sum = 0.0, sq = 0.0;
  std::size_t ok = 0;
  for (std::size_t i = 0; i < count; ++i) {
    if (failed[i]) {
      ++est.blowups;
      continue;
    }
    sum += values[i];
    ++ok;
  }
  if (est.blowups * 100 > count) throw Error("more than 1% of Feynman-Kac paths blew up");
  est.mean = sum / static_cast<double>(ok);
  for (std::size_t i = 0; i < count; ++i) {
    if (!failed[i]) sq += (values[i] - est.mean) * (values[i] - est.mean);
  }
  est.std_error = ok > 1 ? std::sqrt(sq / static_cast<double>(ok - 1) / static_cast<double>(ok)) : 0.0;
  return est;
}

PressureEstimate pressure_from_samples(const IntegralSampler& sampler, std::size_t count,
                                       const std::vector<double>& t_list, double constant) {
  const std::size_t k = t_list.size();
  if (k < 3) throw ConfigError("pressure fit needs at least 3 times");
  for (std::size_t i = 0; i < k; ++i) {
    if (!(t_list[i] > 0.0) || (i > 0 && !(t_list[i] > t_list[i - 1])))
      throw ConfigError("t_list must be positive and increasing");
  }
  if (count < 2) throw ConfigError("pressure fit needs at least 2 samples");

  std::vector<std::vector<double>> a(count);
  std::vector<char> failed(count, 0);
  parallel_for(count, [&](std::size_t i) {
    try {
      a[i] = sampler(i);
      if (a[i].size() != k) throw DimensionMismatch("sampler returned the wrong number of integrals");
    } catch (const NonFiniteState&) {
      failed[i] = 1;
    }
  });

  PressureEstimate est;
  est.count = count;
  est.t_grid = t_list;
  std::vector<std::size_t> ok;
  for (std::size_t i = 0; i < count; ++i) {
    if (failed[i]) {
      ++est.blowups;
    } else {
      ok.push_back(i);
    }
  }
  if (est.blowups * 100 > count) throw Error("more than 1% of pressure paths blew up");
  const double n = static_cast<double>(ok.size());

  std::vector<double> top(k, -std::numeric_limits<double>::infinity()), mean(k, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t i : ok) top[j] = std::max(top[j], a[i][j]);
  }
  // e_ij = exp(a_ij - top_j), shared across the covariance and jackknife.
  Eigen::MatrixXd e(ok.size(), k);
  for (std::size_t r = 0; r < ok.size(); ++r) {
    for (std::size_t j = 0; j < k; ++j) e(r, j) = std::exp(a[ok[r]][j] - top[j]);
  }
  Eigen::VectorXd sums = e.colwise().sum().transpose();
  for (std::size_t j = 0; j < k; ++j) mean[j] = sums(j) / n;

  est.log_means.resize(k);
  est.per_t_logmeans.resize(k);
  est.log_mean_errors.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    est.log_means[j] = top[j] + std::log(mean[j]);
    est.per_t_logmeans[j] = est.log_means[j] / t_list[j] + constant;
  }
  Eigen::MatrixXd centered = e.rowwise() - Eigen::Map<const Eigen::RowVectorXd>(mean.data(), k);
  Eigen::MatrixXd cov = centered.transpose() * centered / (n - 1.0) / n;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) cov(i, j) /= mean[i] * mean[j];
  }
  for (std::size_t j = 0; j < k; ++j) est.log_mean_errors[j] = std::sqrt(cov(j, j));

  double tbar = std::accumulate(t_list.begin(), t_list.end(), 0.0) / static_cast<double>(k);
  double stt = 0.0;
  for (double t : t_list) stt += (t - tbar) * (t - tbar);
  Eigen::VectorXd w(k);
  for (std::size_t j = 0; j < k; ++j) w(j) = (t_list[j] - tbar) / stt;
  Eigen::Map<const Eigen::VectorXd> lm(est.log_means.data(), k);
  double slope = w.dot(lm);
  double lbar = lm.mean();
  est.intercept = lbar - slope * tbar;
  double rss = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    double r = est.log_means[j] - (est.intercept + slope * t_list[j]);
    rss += r * r;
  }
  est.fit_error = std::sqrt(rss / static_cast<double>(k - 2) / stt);
  est.mc_error = std::sqrt(std::max(0.0, w.dot(cov * w)));
  est.std_error = std::hypot(est.mc_error, est.fit_error);
  est.value = slope + constant;

  double loo_sum = 0.0;
  for (std::size_t r = 0; r < ok.size(); ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      double rest = (sums(j) - e(r, j)) / (n - 1.0);
      s += w(j) * (top[j] + std::log(std::max(rest, std::numeric_limits<double>::min())));
    }
    loo_sum += s;
  }
  est.jackknife_bias = (n - 1.0) * (loo_sum / n - slope);
  return est;
}

PressureEstimate pressure_mc(const GalerkinModel& model, const Potential& v, const std::vector<double>& t_list,
                             double dt, std::size_t count, std::uint64_t seed, const InitialSampler& initial) {
  if (t_list.empty()) throw ConfigError("t_list is empty");
  std::vector<std::size_t> marks;
  for (double t : t_list) marks.push_back(grid_index(t, dt));
  const double horizon = static_cast<double>(marks.back() + v.window_points() - 1) * dt;
  auto sampler = [&](std::size_t i) {
    State u0 = draw_initial(initial, seed, i);
    Trajectory traj = simulate(model, u0, horizon, dt, member_seed(seed, i));
    return cumulative_integrals(traj, v, marks, true);
  };
  return pressure_from_samples(sampler, count, t_list, v.constant_term());
}

double JumpPath::integral(const Eigen::VectorXd& v, double t) const {
  double s = 0.0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    double a = times[i];
    if (a >= t) break;
    double b = i + 1 < times.size() ? times[i + 1] : horizon;
    s += v(states[i]) * (std::min(b, t) - a);
  }
  return s;
}

JumpPath simulate_jump_path(const FiniteChain& chain, int start, double horizon, NormalStream& rng) {
  if (chain.clocking() != Clocking::continuous) throw ConfigError("jump paths need a continuous-clock chain");
  const Eigen::MatrixXd& g = chain.matrix();
  const int n = chain.size();
  JumpPath path;
  path.horizon = horizon;
  int x = start;
  double t = 0.0;
  while (true) {
    path.states.push_back(x);
    path.times.push_back(t);
    double rate = -g(x, x);
    if (!(rate > 0.0)) break;
    t += -std::log1p(-rng.uniform()) / rate;
    if (t >= horizon) break;
    double u = rng.uniform() * rate, acc = 0.0;
    int next = x;
    for (int y = 0; y < n; ++y) {
      if (y == x) continue;
      acc += g(x, y);
      next = y;
      if (u < acc) break;
    }
    x = next;
  }
  return path;
}

PressureEstimate pressure_mc(const FiniteChain& chain, const Eigen::VectorXd& v, const std::vector<double>& t_list,
                             std::size_t count, std::uint64_t seed, const Eigen::VectorXd& initial) {
  if (v.size() != chain.size() || initial.size() != chain.size()) throw DimensionMismatch("vector length differs from state count");
  if (t_list.empty()) throw ConfigError("t_list is empty");
  if (!chain.irreducible()) throw NotIrreducible("chain is not irreducible");
  const double total = initial.sum();
  auto sampler = [&](std::size_t i) {
    NormalStream rng(split_seed(seed, i));
    double u = rng.uniform() * total, acc = 0.0;
    int start = chain.size() - 1;
    for (int x = 0; x < chain.size(); ++x) {
      acc += initial(x);
      if (u < acc) {
        start = x;
        break;
      }
    }
    JumpPath path = simulate_jump_path(chain, start, t_list.back(), rng);
    std::vector<double> out;
    for (double t : t_list) out.push_back(path.integral(v, t));
    return out;
  };
  return pressure_from_samples(sampler, count, t_list, 0.0);
}

DuhamelReport duhamel_residual(const FiniteChain& chain, const Eigen::VectorXd& v, const Eigen::VectorXd& f, double t,
                               int nodes, QuadratureKind rule) {
  if (v.size() != chain.size() || f.size() != chain.size()) throw DimensionMismatch("vector length differs from state count");
  TiltedKernel k = tilt(chain, v);
  DuhamelReport rep;
  rep.rule = rule;
  Eigen::VectorXd lhs, rhs = Eigen::VectorXd::Zero(chain.size());
  if (chain.clocking() == Clocking::discrete) {
    long steps = static_cast<long>(grid_index(t, 1.0));
    const Eigen::MatrixXd& a = k.matrix;
    const Eigen::MatrixXd& p = chain.matrix();
    Eigen::MatrixXd gap = (v.array().exp() - 1.0).matrix().asDiagonal() * p;
    std::vector<Eigen::VectorXd> tilted(steps + 1);
    tilted[0] = f;
    for (long s = 1; s <= steps; ++s) tilted[s] = a * tilted[s - 1];
    Eigen::VectorXd plain = f;
    for (long s = 0; s < steps; ++s) plain = p * plain;
    lhs = tilted[steps] - plain;
    for (long s = 0; s < steps; ++s) {
      Eigen::VectorXd term = gap * tilted[s];
      for (long r = 0; r < steps - 1 - s; ++r) term = p * term;
      rhs += term;
    }
    rep.nodes = static_cast<int>(steps);
  } else {
    if (nodes < 2) throw ConfigError("quadrature needs at least 2 nodes");
    lhs = k.semigroup(t) * f - chain.semigroup(t) * f;
    QuadratureRule q = rule == QuadratureKind::gauss_legendre ? gauss_legendre(nodes, 0.0, t) : trapezoid(nodes, 0.0, t);
    for (std::size_t i = 0; i < q.size(); ++i) {
      double s = q.nodes[i];
      Eigen::VectorXd inner = v.cwiseProduct(k.semigroup(s) * f);
      rhs += q.weights[i] * (chain.semigroup(t - s) * inner);
    }
    rep.nodes = nodes;
  }
  rep.residual = (lhs - rhs).cwiseAbs().maxCoeff();
  rep.lhs_norm = lhs.cwiseAbs().maxCoeff();
  return rep;
}

ModelDuhamelReport duhamel_residual(const GalerkinModel& model, const Potential& v, const StateFunction& f,
                                    const std::vector<State>& probes, double t, double dt, std::size_t count,
                                    std::uint64_t seed, int nodes) {
  if (v.window() > 0.0) throw ConfigError("model Duhamel check needs a state potential");
  if (count < 2) throw ConfigError("model Duhamel check needs at least 2 paths");
  const std::size_t m = grid_index(t, dt);
  std::size_t stride = 1;
  if (nodes >= 2 && m % static_cast<std::size_t>(nodes - 1) == 0) stride = m / static_cast<std::size_t>(nodes - 1);
  const int n = model.n_modes();

  ModelDuhamelReport rep;
  rep.count = count;
  for (std::size_t p = 0; p < probes.size(); ++p) {
    std::vector<double> diff(count, 0.0);
    std::vector<double> lhs_abs(count, 0.0);
    parallel_for(count, [&](std::size_t i) {
      Trajectory traj = simulate(model, probes[p], t, dt, member_seed(seed, i));
      std::vector<double> vals(m + 1), cum(m + 1, 0.0);
      for (std::size_t j = 0; j <= m; ++j) vals[j] = v({traj.row(j), static_cast<std::size_t>(n)}, n);
      for (std::size_t j = 1; j <= m; ++j) cum[j] = cum[j - 1] + 0.5 * dt * (vals[j - 1] + vals[j]);
      double ft = f({traj.row(m), static_cast<std::size_t>(n)});
      double lhs = ft * std::expm1(cum[m]);
      // nodes r = t - s on the grid with spacing stride * dt
      double rhs = 0.0;
      const double h = static_cast<double>(stride) * dt;
      for (std::size_t j = 0; j <= m; j += stride) {
        double w = (j == 0 || j == m) ? 0.5 * h : h;
        rhs += w * vals[j] * std::exp(cum[m] - cum[j]);
      }
      rhs *= ft;
      diff[i] = lhs - rhs;
      lhs_abs[i] = std::abs(lhs);
    });
    double mean = std::accumulate(diff.begin(), diff.end(), 0.0) / static_cast<double>(count);
    double sq = 0.0;
    for (double d : diff) sq += (d - mean) * (d - mean);
    double se = std::sqrt(sq / static_cast<double>(count - 1) / static_cast<double>(count));
    double scale = std::accumulate(lhs_abs.begin(), lhs_abs.end(), 0.0) / static_cast<double>(count);
    if (p == 0 || std::abs(mean) > rep.residual) {
      rep.residual = std::abs(mean);
      rep.std_error = se;
      rep.resolved = se <= 0.01 * std::max(scale, 1e-12);
    }
  }
  return rep;
}

}  // namespace snsld
