#include "snsld/dynamics_probes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "snsld/error.hpp"
#include "snsld/parallel.hpp"

namespace snsld {

namespace {

double mean_of(const std::vector<double>& x, std::size_t lo, std::size_t hi) {
  double s = 0.0;
  for (std::size_t i = lo; i < hi; ++i) s += x[i];
  return s / static_cast<double>(hi - lo);
}

double se_of(const std::vector<double>& x, std::size_t lo, std::size_t hi, double mean) {
  const std::size_t n = hi - lo;
  if (n < 2) return 0.0;
  double s = 0.0;
  for (std::size_t i = lo; i < hi; ++i) s += (x[i] - mean) * (x[i] - mean);
  return std::sqrt(s / static_cast<double>(n - 1) / static_cast<double>(n));
}

double squared_h(const double* u, int n) {
  double s = 0.0;
  for (int j = 0; j < n; ++j) s += u[j] * u[j];
  return s;
}

double squared_u(const GalerkinModel& model, const double* u) {
  const auto& a = model.eigenvalues();
  double s = 0.0;
  for (int j = 0; j < model.n_modes(); ++j) s += a[j] * u[j] * u[j];
  return s;
}

// v <- coupled update given the already advanced u.
void couple_leading(const GalerkinModel& model, int level, double penalty, double dt, const double* u_old,
                    const double* v_old, const double* u_new, double* v_new) {
  const auto& a = model.eigenvalues();
  for (int j = 0; j < level; ++j) v_new[j] = u_new[j] + std::exp(-(a[j] + penalty) * dt) * (v_old[j] - u_old[j]);
}

}  // namespace

CoupledPair coupled_step(const GalerkinModel& model, const CoupledPair& pair, double dt,
                         const Eigen::VectorXd& increments) {
  const int n = model.n_modes();
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (pair.u.size() != n || pair.v.size() != n || increments.size() != n)
    throw DimensionMismatch("coupled pair does not match the model dimension");
  if (pair.level < 0 || pair.level > n) throw DimensionMismatch("coupling level outside [0, n_modes]");
  ExponentialEuler scheme(model, dt);
  CoupledPair out = pair;
  std::vector<double> scratch(n);
  bool ok = scheme.advance(out.u.data(), increments.data(), scratch.data());
  ok = scheme.advance(out.v.data(), increments.data(), scratch.data()) && ok;
  couple_leading(model, pair.level, pair.penalty, dt, pair.u.data(), pair.v.data(), out.u.data(), out.v.data());
  if (!ok || !out.v.allFinite()) throw NonFiniteState(1, "non-finite coefficient in coupled step");
  return out;
}

DecayReport foias_decay_check(const GalerkinModel& model, const State& u0, const State& u0_prime, int level,
                              double penalty, double horizon, double dt, std::uint64_t seed, double slack_constant) {
  const int n = model.n_modes();
  if (u0.size() != n || u0_prime.size() != n) throw DimensionMismatch("initial states do not match the model");
  if (level < 0 || level > n) throw DimensionMismatch("coupling level outside [0, n_modes]");
  if (!(penalty >= 0.0)) throw ConfigError("penalty rate must be non-negative");
  DecayReport rep;
  rep.distance = model.norm_h(u0 - u0_prime);
  if (rep.distance > 1.0 + 1e-12) throw ConfigError("initial distance must not exceed 1");
  rep.level = level;
  rep.penalty = penalty;
  rep.dt = dt;
  rep.slack = slack_constant * dt;
  const std::size_t steps = grid_index(horizon, dt);

  ExponentialEuler scheme(model, dt);
  NormalStream rng(seed);
  std::vector<double> u(u0.data(), u0.data() + n), v(u0_prime.data(), u0_prime.data() + n);
  std::vector<double> un(n), vn(n), xi(n), scratch(n);
  rep.passed = true;
  for (std::size_t i = 0;; ++i) {
    double t = static_cast<double>(i) * dt;
    double gap = 0.0;
    for (int j = 0; j < level; ++j) gap += (u[j] - v[j]) * (u[j] - v[j]);
    gap = std::sqrt(gap);
    double bound = std::exp(-penalty * t) * rep.distance;
    rep.times.push_back(t);
    rep.projected_gap.push_back(gap);
    rep.bound.push_back(bound);
    if (bound > 0.0) rep.worst_ratio = std::max(rep.worst_ratio, gap / bound);
    if (gap > bound * (1.0 + rep.slack) * (1.0 + 1e-12) + 1e-300 && rep.passed) {
      rep.passed = false;
      rep.failing_time = t;
    }
    if (i == steps) break;
    for (int j = 0; j < n; ++j) xi[j] = rng();
    un = u;
    vn = v;
    bool ok = scheme.advance(un.data(), xi.data(), scratch.data());
    ok = scheme.advance(vn.data(), xi.data(), scratch.data()) && ok;
    couple_leading(model, level, penalty, dt, u.data(), v.data(), un.data(), vn.data());
    if (!ok) throw NonFiniteState(i + 1, "non-finite coefficient in coupled run");
    u.swap(un);
    v.swap(vn);
  }
  return rep;
}

double WeightFunction::operator()(const State& u) const {
  return std::pow(u.squaredNorm(), m) + 1.0;
}

double WeightFunction::on_window(const Trajectory& traj, std::size_t first, std::size_t last) const {
  if (last >= traj.size() || first > last) throw GridMismatch("window outside the trajectory");
  double top = 0.0;
  for (std::size_t i = first; i <= last; ++i) top = std::max(top, squared_h(traj.row(i), traj.n_modes()));
  return std::pow(top, m) + 1.0;
}

std::optional<double> hitting_time(const GalerkinModel& model, const State& u0, double radius, double horizon,
                                   double dt, std::uint64_t seed, double window) {
  if (!(radius > 0.0)) throw ConfigError("radius must be positive");
  const std::size_t steps = grid_index(horizon, dt);
  const std::size_t need = window > 0.0 ? grid_index(window, dt) + 1 : 1;
  const int n = model.n_modes();
  const double r2 = radius * radius;
  std::optional<double> hit;
  std::size_t run_start = 0, run = 0;
  if (need == 1 && squared_h(u0.data(), n) <= r2) return 0.0;
  integrate(model, u0, steps, dt, seed, [&](std::size_t i, const double* u, const double*) {
    if (squared_h(u, n) <= r2) {
      if (run == 0) run_start = i;
      ++run;
      if (run >= need) {
        hit = static_cast<double>(run_start) * dt;
        return false;
      }
    } else {
      run = 0;
    }
    return true;
  });
  return hit;
}

RecurrenceReport recurrence_moment(const GalerkinModel& model, const State& u0, double kappa, double radius,
                                   std::size_t count, double horizon, double dt, std::uint64_t master_seed) {
  if (count < 100) throw ConfigError("recurrence_moment needs at least 100 paths");
  std::vector<double> tau(count, 0.0);
  std::vector<char> timeout(count, 0);
  parallel_for(count, [&](std::size_t i) {
    auto t = hitting_time(model, u0, radius, horizon, dt, member_seed(master_seed, i));
    if (t) {
      tau[i] = *t;
    } else {
      timeout[i] = 1;
    }
  });
  RecurrenceReport rep;
  rep.seed = master_seed;
  rep.dt = dt;
  rep.count = count;
  std::vector<double> all, first, second;
  for (std::size_t i = 0; i < count; ++i) {
    if (timeout[i]) continue;
    double v = std::exp(kappa * tau[i]);
    all.push_back(v);
    (i < count / 2 ? first : second).push_back(v);
  }
  rep.timeout_fraction = static_cast<double>(count - all.size()) / static_cast<double>(count);
  if (all.empty()) return rep;
  rep.estimate = mean_of(all, 0, all.size());
  rep.std_error = se_of(all, 0, all.size(), rep.estimate);
  double sa = 0.0, sb = 0.0;
  if (!first.empty()) {
    rep.half_a = mean_of(first, 0, first.size());
    sa = se_of(first, 0, first.size(), rep.half_a);
  }
  if (!second.empty()) {
    rep.half_b = mean_of(second, 0, second.size());
    sb = se_of(second, 0, second.size(), rep.half_b);
  }
  rep.half_error = std::hypot(sa, sb);
  rep.stable = std::abs(rep.half_a - rep.half_b) <= 3.0 * rep.half_error + 1e-12 * rep.estimate &&
               rep.timeout_fraction < 0.01;
  return rep;
}

void fit_exponential_decay(const std::vector<double>& t, const std::vector<double>& y, double& rate, double& amplitude,
                           double& offset) {
  if (t.size() != y.size() || t.size() < 3) throw ConfigError("decay fit needs at least 3 points");
  const std::size_t k = t.size();
  auto solve = [&](double r, double& a, double& c) {
    double s11 = 0, s12 = 0, s22 = static_cast<double>(k), b1 = 0, b2 = 0;
    for (std::size_t i = 0; i < k; ++i) {
      double e = std::exp(-r * t[i]);
      s11 += e * e;
      s12 += e;
      b1 += e * y[i];
      b2 += y[i];
    }
    double det = s11 * s22 - s12 * s12;
    if (std::abs(det) < 1e-300) {
      a = 0.0;
      c = b2 / s22;
    } else {
      a = (b1 * s22 - s12 * b2) / det;
      c = (s11 * b2 - s12 * b1) / det;
    }
    double sse = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      double d = y[i] - a * std::exp(-r * t[i]) - c;
      sse += d * d;
    }
    return sse;
  };
  double a = 0, c = 0;
  double best_r = 1e-3, best = std::numeric_limits<double>::infinity();
  const int grid = 241;
  std::vector<double> rs(grid);
  for (int i = 0; i < grid; ++i) rs[i] = std::pow(10.0, -3.0 + 6.0 * i / (grid - 1));
  int bi = 0;
  for (int i = 0; i < grid; ++i) {
    double s = solve(rs[i], a, c);
    if (s < best) {
      best = s;
      best_r = rs[i];
      bi = i;
    }
  }
  double lo = rs[std::max(bi - 1, 0)], hi = rs[std::min(bi + 1, grid - 1)];
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = solve(x1, a, c), f2 = solve(x2, a, c);
  for (int it = 0; it < 100; ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = solve(x1, a, c);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = solve(x2, a, c);
    }
  }
  double r = f1 < f2 ? x1 : x2;
  if (std::min(f1, f2) > best) r = best_r;
  solve(r, amplitude, offset);
  rate = r;
}

MomentTable moment_probe(const GalerkinModel& model, int m, const std::vector<double>& t_grid, std::size_t count,
                         std::uint64_t master_seed, const State& u0, double dt, double window) {
  if (count < 1000) throw ConfigError("moment_probe needs at least 1000 paths");
  if (m < 1) throw ConfigError("moment exponent must be positive");
  if (t_grid.size() < 3) throw ConfigError("moment_probe needs at least 3 times");
  std::vector<std::size_t> idx;
  for (double t : t_grid) idx.push_back(grid_index(t, dt));
  const std::size_t w = window > 0.0 ? grid_index(window, dt) : 0;
  const std::size_t steps = *std::max_element(idx.begin(), idx.end()) + w;
  const int n = model.n_modes();
  const std::size_t k = t_grid.size();
  std::vector<double> point(count * k), sup(count * k);
  parallel_for(count, [&](std::size_t i) {
    std::vector<double> e(steps + 1);
    integrate(model, u0, steps, dt, member_seed(master_seed, i), [&](std::size_t s, const double* u, const double*) {
      e[s] = squared_h(u, n);
      return true;
    });
    for (std::size_t j = 0; j < k; ++j) {
      point[i * k + j] = std::pow(e[idx[j]], m);
      double top = *std::max_element(e.begin() + static_cast<long>(idx[j]), e.begin() + static_cast<long>(idx[j] + w + 1));
      sup[i * k + j] = std::pow(top, m);
    }
  });
  MomentTable tab;
  tab.m = m;
  tab.window = window;
  tab.seed = master_seed;
  tab.dt = dt;
  tab.count = count;
  std::vector<double> ys;
  for (std::size_t j = 0; j < k; ++j) {
    std::vector<double> col(count), scol(count);
    for (std::size_t i = 0; i < count; ++i) {
      col[i] = point[i * k + j];
      scol[i] = sup[i * k + j];
    }
    MomentRow row;
    row.t = t_grid[j];
    row.moment = mean_of(col, 0, count);
    row.std_error = se_of(col, 0, count, row.moment);
    row.sup_moment = mean_of(scol, 0, count);
    tab.rows.push_back(row);
    ys.push_back(row.moment);
  }
  fit_exponential_decay(t_grid, ys, tab.decay_rate, tab.amplitude, tab.offset);
  tab.required_rate = m * model.eigenvalues()[0] * 0.8;
  tab.decay_ok = tab.decay_rate >= tab.required_rate;
  return tab;
}

ExpMomentTable exp_moment_probe(const GalerkinModel& model, const std::vector<double>& kappa_list, double t,
                                std::size_t count, std::uint64_t master_seed, const State& u0, double dt,
                                std::vector<double> rho) {
  if (kappa_list.empty()) throw ConfigError("kappa list is empty");
  for (std::size_t i = 1; i < kappa_list.size(); ++i) {
    if (!(kappa_list[i] > kappa_list[i - 1])) throw ConfigError("kappa list must be increasing");
  }
  if (count < 2) throw ConfigError("exp_moment_probe needs at least 2 paths");
  const std::size_t steps = grid_index(t, dt);
  if (steps == 0) throw ConfigError("exp_moment_probe needs t > 0");
  const int n = model.n_modes();
  ExpMomentTable tab;
  tab.t = t;
  tab.seed = master_seed;
  tab.dt = dt;
  tab.count = count;
  tab.k_constant = model.noise_b0() + std::pow(model.norm_dual(model.forcing()), 2);
  const double e0 = u0.squaredNorm();
  std::vector<double> energy(count), excess(count);
  parallel_for(count, [&](std::size_t i) {
    double integral = 0.0, prev = 0.0, top = -std::numeric_limits<double>::infinity();
    integrate(model, u0, steps, dt, member_seed(master_seed, i), [&](std::size_t s, const double* u, const double*) {
      double cur = squared_u(model, u);
      if (s > 0) integral += 0.5 * dt * (prev + cur);
      prev = cur;
      double e = squared_h(u, n) + integral;
      top = std::max(top, e - tab.k_constant * static_cast<double>(s) * dt);
      if (s == steps) energy[i] = e;
      return true;
    });
    excess[i] = top - e0;
  });
  const double nn = static_cast<double>(count);
  for (double kappa : kappa_list) {
    ExpMomentRow row;
    row.kappa = kappa;
    double top = -std::numeric_limits<double>::infinity();
    for (double e : energy) top = std::max(top, kappa * e);
    double s1 = 0.0, s2 = 0.0;
    for (double e : energy) {
      double w = std::exp(kappa * e - top);
      s1 += w;
      s2 += w * w;
    }
    row.log_moment = (top + std::log(s1 / nn)) / t;
    row.effective_fraction = s1 * s1 / s2 / nn;
    row.stable = row.effective_fraction >= 0.1;
    if (!row.stable && !tab.destabilizing_kappa) tab.destabilizing_kappa = kappa;
    tab.rows.push_back(row);
  }
  if (rho.empty()) {
    double hi = *std::max_element(excess.begin(), excess.end());
    const int pts = 8;
    for (int i = 0; i < pts; ++i) rho.push_back(hi > 0.0 ? hi * i / pts : 0.0);
    rho.erase(std::unique(rho.begin(), rho.end()), rho.end());
  }
  tab.rho = rho;
  for (double r : rho) {
    std::size_t hits = std::count_if(excess.begin(), excess.end(), [&](double x) { return x >= r; });
    tab.exceedance.push_back(static_cast<double>(hits) / nn);
  }
  tab.exceedance_monotone = true;
  for (std::size_t i = 1; i < tab.exceedance.size(); ++i) {
    if (tab.rho[i] >= tab.rho[i - 1] && tab.exceedance[i] > tab.exceedance[i - 1]) tab.exceedance_monotone = false;
  }
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    if (tab.exceedance[i] > 0.0) {
      xs.push_back(rho[i]);
      ys.push_back(-std::log(tab.exceedance[i]));
    }
  }
  if (xs.size() >= 2) {
    double mx = mean_of(xs, 0, xs.size()), my = mean_of(ys, 0, ys.size()), sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxx += (xs[i] - mx) * (xs[i] - mx);
      sxy += (xs[i] - mx) * (ys[i] - my);
    }
    tab.fitted_gamma = sxx > 0.0 ? sxy / sxx : 0.0;
  }
  return tab;
}

DoublyLogTable doubly_log_probe(const GalerkinModel& model, double t, double window, std::size_t count,
                                std::uint64_t master_seed, const std::vector<State>& u0_list, double dt) {
  if (count < 1000) throw ConfigError("doubly_log_probe needs at least 1000 paths");
  if (u0_list.empty()) throw ConfigError("doubly_log_probe needs initial states");
  const std::size_t first = grid_index(t, dt);
  const std::size_t steps = first + grid_index(window, dt);
  DoublyLogTable tab;
  tab.t = t;
  tab.window = window;
  tab.seed = master_seed;
  tab.dt = dt;
  tab.count = count;
  tab.margin = std::numeric_limits<double>::infinity();
  for (const State& u0 : u0_list) {
    std::vector<double> stat(count);
    parallel_for(count, [&](std::size_t i) {
      double top = 0.0;
      integrate(model, u0, steps, dt, member_seed(master_seed, i), [&](std::size_t s, const double* u, const double*) {
        if (s >= first) top = std::max(top, squared_u(model, u));
        return true;
      });
      stat[i] = std::log1p(std::log1p(t * top));
    });
    DoublyLogRow row;
    row.initial_energy = u0.squaredNorm();
    row.statistic = mean_of(stat, 0, count);
    row.std_error = se_of(stat, 0, count, row.statistic);
    tab.margin = std::min(tab.margin, row.initial_energy + 1.0 + t - row.statistic);
    tab.rows.push_back(row);
  }
  const std::size_t k = tab.rows.size();
  double mx = 0, my = 0;
  for (const auto& r : tab.rows) {
    mx += r.initial_energy;
    my += r.statistic;
  }
  mx /= static_cast<double>(k);
  my /= static_cast<double>(k);
  double sxx = 0, sxy = 0;
  for (const auto& r : tab.rows) {
    sxx += (r.initial_energy - mx) * (r.initial_energy - mx);
    sxy += (r.initial_energy - mx) * (r.statistic - my);
  }
  tab.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  tab.intercept = my - tab.slope * mx;
  tab.dominated = tab.margin > 0.0;
  return tab;
}

}  // namespace snsld
