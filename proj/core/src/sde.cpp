#include "snsld/sde.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "snsld/error.hpp"
#include "snsld/parallel.hpp"

namespace snsld {

std::size_t grid_index(double t, double dt) {
  if (!(dt > 0.0)) throw GridMismatch("time step must be positive");
  if (!(t >= 0.0)) throw GridMismatch("time must be non-negative");
  const double ratio = t / dt;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio))
    throw GridMismatch("time " + std::to_string(t) + " is not a multiple of dt = " + std::to_string(dt));
  return static_cast<std::size_t>(rounded);
}

Trajectory::Trajectory(double dt, int n_modes, std::uint64_t seed, std::uint64_t model_id)
    : dt_(dt), n_(n_modes), seed_(seed), model_id_(model_id) {
  if (!(dt > 0.0)) throw GridMismatch("trajectory time step must be positive");
  if (n_modes <= 0) throw DimensionMismatch("trajectory needs at least one mode");
}

void Trajectory::push_back(const double* coeffs) { data_.insert(data_.end(), coeffs, coeffs + n_); }

void Trajectory::push_back(const State& u) {
  if (u.size() != n_) throw DimensionMismatch("state dimension does not match trajectory");
  push_back(u.data());
}

ExponentialEuler::ExponentialEuler(const GalerkinModel& model, double dt) : model_(&model), dt_(dt) {
  if (!(dt > 0.0)) throw GridMismatch("time step must be positive");
  const int n = model.n_modes();
  decay_.resize(n);
  noise_scale_.resize(n);
  for (int j = 0; j < n; ++j) {
    const double a = model.eigenvalues()[j];
    decay_[j] = std::exp(-a * dt);
    // -expm1 keeps the variance accurate when a * dt is tiny.
    noise_scale_[j] = model.noise_amps()[j] * std::sqrt(-std::expm1(-2.0 * a * dt) / (2.0 * a));
  }
}

void ExponentialEuler::drift_part(const double* u, double* out) const noexcept {
  const int n = model_->n_modes();
  model_->nonlinearity_into(u, out);
  const double* h = model_->forcing().data();
  for (int j = 0; j < n; ++j) out[j] = decay_[j] * (u[j] + dt_ * (h[j] - out[j]));
}

bool ExponentialEuler::advance(double* u, const double* xi, double* scratch) const noexcept {
  const int n = model_->n_modes();
  drift_part(u, scratch);
  bool finite = true;
  for (int j = 0; j < n; ++j) {
    u[j] = scratch[j] + noise_scale_[j] * xi[j];
    finite = finite && std::isfinite(u[j]);
  }
  return finite;
}

State step(const GalerkinModel& model, const State& u, double dt, const Eigen::VectorXd& gaussian_increments) {
  const int n = model.n_modes();
  if (u.size() != n || gaussian_increments.size() != n)
    throw DimensionMismatch("step: state and increments must match the model dimension");
  ExponentialEuler scheme(model, dt);
  State out = u;
  std::vector<double> scratch(n);
  if (!scheme.advance(out.data(), gaussian_increments.data(), scratch.data()))
    throw NonFiniteState(1, "non-finite coefficient after exponential Euler step");
  return out;
}

void integrate(const GalerkinModel& model, const State& u0, std::size_t steps, double dt, std::uint64_t seed,
               const PathVisitor& visit) {
  const int n = model.n_modes();
  if (u0.size() != n) throw DimensionMismatch("initial state does not match the model dimension");
  ExponentialEuler scheme(model, dt);
  NormalStream rng(seed);
  std::vector<double> u(u0.data(), u0.data() + n), xi(n), scratch(n);
  for (std::size_t i = 0; i < steps; ++i) {
    for (int j = 0; j < n; ++j) xi[j] = rng();
    if (!visit(i, u.data(), xi.data())) return;
    if (!scheme.advance(u.data(), xi.data(), scratch.data()))
      throw NonFiniteState(i + 1, "non-finite coefficient after exponential Euler step");
  }
  visit(steps, u.data(), nullptr);
}

Trajectory simulate(const GalerkinModel& model, const State& u0, double horizon, double dt, std::uint64_t seed) {
  const std::size_t m = grid_index(horizon, dt);
  Trajectory traj(dt, model.n_modes(), seed, model.id());
  traj.reserve(m + 1);
  integrate(model, u0, m, dt, seed, [&](std::size_t, const double* u, const double*) {
    traj.push_back(u);
    return true;
  });
  return traj;
}

InitialSampler fixed_initial(State u0) {
  return [u0 = std::move(u0)](std::size_t, NormalStream&) { return u0; };
}

State draw_initial(const InitialSampler& sampler, std::uint64_t master_seed, std::size_t index) {
  NormalStream rng(split_seed(member_seed(master_seed, index), 1));
  return sampler(index, rng);
}

TrajectoryEnsemble ensemble(const GalerkinModel& model, const InitialSampler& initial, std::size_t count,
                            double horizon, double dt, std::uint64_t master_seed,
                            const std::vector<std::size_t>& order) {
  if (count == 0) throw Error("ensemble needs at least one trajectory");
  if (!order.empty() && order.size() != count) throw Error("execution order must list every member once");
  grid_index(horizon, dt);

  std::vector<std::optional<Trajectory>> slots(count);
  std::vector<std::optional<BlowUp>> errors(count);
  parallel_for(count, [&](std::size_t pos) {
    const std::size_t i = order.empty() ? pos : order[pos];
    try {
      slots[i] = simulate(model, draw_initial(initial, master_seed, i), horizon, dt, member_seed(master_seed, i));
    } catch (const NonFiniteState& e) {
      errors[i] = BlowUp{i, e.step(), e.what()};
    }
  });

  TrajectoryEnsemble out;
  out.master_seed = master_seed;
  out.dt = dt;
  out.horizon = horizon;
  out.model_id = model.id();
  for (std::size_t i = 0; i < count; ++i) {
    if (slots[i]) {
      out.indices.push_back(i);
      out.trajectories.push_back(std::move(*slots[i]));
    } else if (errors[i]) {
      out.failures.push_back(*errors[i]);
    }
  }
  return out;
}

namespace {

class EnergyAccumulator {
 public:
  EnergyAccumulator(const GalerkinModel& model, double dt, const std::vector<double>& noise_scale)
      : model_(model), dt_(dt), pending_(static_cast<std::size_t>(model.n_modes())) {
    for (double s : noise_scale) expected_qv_ += s * s;
  }

  // Consumes state n; `increment` is the noise added to reach state n + 1.
  void add(std::size_t n, std::size_t last, const double* u, const double* increment) {
    const int d = model_.n_modes();
    const auto& alpha = model_.eigenvalues();
    const auto& h = model_.forcing();
    double e = 0.0, diss = 0.0, work = 0.0;
    for (int j = 0; j < d; ++j) {
      e += u[j] * u[j];
      diss += alpha[j] * u[j] * u[j];
      work += u[j] * h[j];
    }
    const double w = (n == 0 || n == last) ? 0.5 * dt_ : dt_;
    if (last == 0) {
      terms_.initial_energy = e;
      terms_.final_energy = e;
      return;
    }
    if (n == 0) terms_.initial_energy = e;
    if (n == last) terms_.final_energy = e;
    terms_.dissipation += w * diss;
    terms_.work += w * work;
    if (has_pending_) {
      // u_n = D + xi with D known at step n - 1: <D, xi> and |xi|^2 - E|xi|^2
      // both have mean zero.
      double cross = 0.0, qv = 0.0;
      for (int j = 0; j < d; ++j) {
        cross += (u[j] - pending_[j]) * pending_[j];
        qv += pending_[j] * pending_[j];
      }
      terms_.martingale += 2.0 * cross;
      terms_.quadratic_variation += qv - expected_qv_;
      has_pending_ = false;
    }
    if (increment != nullptr && n < last) {
      std::copy(increment, increment + d, pending_.begin());
      has_pending_ = true;
    }
  }

  const EnergyBalance& terms() const noexcept { return terms_; }

 private:
  const GalerkinModel& model_;
  double dt_;
  double expected_qv_ = 0.0;
  std::vector<double> pending_;
  bool has_pending_ = false;
  EnergyBalance terms_;
};

EnergyResidual reduce_energy(const std::vector<EnergyBalance>& terms, double b0, double t) {
  const std::size_t m = terms.size();
  EnergyResidual r;
  r.paths = m;
  if (m == 0) return r;
  double lhs = 0.0, rhs = 0.0;
  std::vector<double> raw(m), corrected(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& e = terms[i];
    const double lhs_i = e.final_energy + 2.0 * e.dissipation;
    const double rhs_i = 2.0 * e.work + e.initial_energy + b0 * t;
    lhs += lhs_i;
    rhs += rhs_i;
    raw[i] = lhs_i - rhs_i;
    corrected[i] = raw[i] - e.martingale - e.quadratic_variation;
  }
  lhs /= static_cast<double>(m);
  rhs /= static_cast<double>(m);
  const double scale = std::max(std::abs(rhs), 1.0);
  auto mean_se = [&](const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(m);
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    const double se = m > 1 ? std::sqrt(var / static_cast<double>(m - 1) / static_cast<double>(m)) : 0.0;
    return std::pair{mean, se};
  };
  const auto [raw_mean, raw_se] = mean_se(raw);
  const auto [cor_mean, cor_se] = mean_se(corrected);
  r.residual = raw_mean / scale;
  r.standard_error = raw_se / scale;
  r.corrected_residual = cor_mean / scale;
  r.corrected_standard_error = cor_se / scale;
  return r;
}

}  // namespace

EnergyResidual energy_identity_residual(const GalerkinModel& model, const TrajectoryEnsemble& ens, double t) {
  if (ens.trajectories.empty()) throw Error("energy identity needs at least one trajectory");
  const std::size_t last = grid_index(t, ens.dt);
  const int n = model.n_modes();
  ExponentialEuler scheme(model, ens.dt);
  std::vector<EnergyBalance> terms(ens.trajectories.size());
  std::vector<double> drift(n), increment(n);
  for (std::size_t p = 0; p < ens.trajectories.size(); ++p) {
    const Trajectory& traj = ens.trajectories[p];
    if (traj.n_modes() != n) throw DimensionMismatch("ensemble and model dimensions differ");
    if (last > traj.steps()) throw GridMismatch("time lies beyond the ensemble horizon");
    EnergyAccumulator acc(model, ens.dt, scheme.noise_scale());
    for (std::size_t i = 0; i <= last; ++i) {
      const double* inc = nullptr;
      if (i < last) {
        // Noise increment recovered from consecutive states.
        scheme.drift_part(traj.row(i), drift.data());
        for (int j = 0; j < n; ++j) increment[j] = traj.row(i + 1)[j] - drift[j];
        inc = increment.data();
      }
      acc.add(i, last, traj.row(i), inc);
    }
    terms[p] = acc.terms();
  }
  return reduce_energy(terms, model.noise_b0(), t);
}

EnergyResidual energy_identity_mc(const GalerkinModel& model, const State& u0, std::size_t count, double t,
                                  double dt, std::uint64_t master_seed) {
  if (count == 0) throw Error("energy identity needs at least one path");
  const std::size_t last = grid_index(t, dt);
  ExponentialEuler scheme(model, dt);
  const auto& scale = scheme.noise_scale();
  std::vector<EnergyBalance> terms(count);
  parallel_for(count, [&](std::size_t p) {
    EnergyAccumulator acc(model, dt, scale);
    std::vector<double> increment(model.n_modes());
    integrate(model, u0, last, dt, member_seed(master_seed, p), [&](std::size_t i, const double* u, const double* xi) {
      const double* inc = nullptr;
      if (xi != nullptr) {
        for (std::size_t j = 0; j < increment.size(); ++j) increment[j] = scale[j] * xi[j];
        inc = increment.data();
      }
      acc.add(i, last, u, inc);
      return true;
    });
    terms[p] = acc.terms();
  });
  return reduce_energy(terms, model.noise_b0(), t);
}

}  // namespace snsld
