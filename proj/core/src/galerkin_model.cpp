#include "snsld/galerkin_model.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <tuple>

#include "snsld/error.hpp"
#include "snsld/hash.hpp"
#include "snsld/rng.hpp"

namespace snsld {

namespace {

constexpr double kCancellationTol = 1e-10;

std::vector<TensorEntry> symmetrize(const std::vector<TensorEntry>& raw) {
  std::map<std::tuple<int, int, int>, double> acc;
  for (const auto& e : raw) {
    acc[{e.i, e.j, e.k}] += 0.5 * e.value;
    acc[{e.j, e.i, e.k}] += 0.5 * e.value;
  }
  std::vector<TensorEntry> out;
  out.reserve(acc.size());
  for (const auto& [key, v] : acc) {
    if (v == 0.0) continue;
    out.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), v});
  }
  return out;
}

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

GalerkinModel GalerkinModel::assemble(std::vector<double> eigenvalues, std::vector<TensorEntry> tensor,
                                      std::vector<double> forcing, std::vector<double> noise_amps,
                                      std::vector<ModeLabel> index_map, bool allow_zero_noise) {
  const std::size_t n = eigenvalues.size();
  if (n == 0) throw SpectrumViolation("model must have at least one mode");
  if (forcing.size() != n || noise_amps.size() != n)
    throw DimensionMismatch("forcing and noise arrays must match the number of eigenvalues");
  if (!index_map.empty() && index_map.size() != n)
    throw DimensionMismatch("index map must be empty or have one label per mode");
  for (std::size_t j = 0; j < n; ++j) {
    if (!(eigenvalues[j] > 0.0) || !std::isfinite(eigenvalues[j]))
      throw SpectrumViolation("eigenvalue " + std::to_string(j) + " is not positive");
    if (j > 0 && eigenvalues[j] < eigenvalues[j - 1])
      throw SpectrumViolation("eigenvalues must be nondecreasing (index " + std::to_string(j) + ")");
    const bool noise_ok = allow_zero_noise ? noise_amps[j] >= 0.0 : noise_amps[j] > 0.0;
    if (!noise_ok || !std::isfinite(noise_amps[j]))
      throw NoiseViolation("noise amplitude " + std::to_string(j) + " must be positive");
    if (!std::isfinite(forcing[j])) throw DimensionMismatch("forcing must be finite");
  }
  const int ni = static_cast<int>(n);
  for (const auto& e : tensor) {
    if (e.i < 0 || e.j < 0 || e.k < 0 || e.i >= ni || e.j >= ni || e.k >= ni)
      throw DimensionMismatch("tensor entry index out of range");
    if (!std::isfinite(e.value)) throw DimensionMismatch("tensor entry is not finite");
  }

  GalerkinModel m;
  m.eigenvalues_ = to_eigen(eigenvalues);
  m.noise_ = to_eigen(noise_amps);
  m.forcing_ = to_eigen(forcing);
  m.tensor_ = symmetrize(tensor);
  m.index_map_ = std::move(index_map);
  m.b0_ = m.noise_.squaredNorm();
  m.b1_ = (m.eigenvalues_.array() * m.noise_.array().square()).sum();

  // Fold (i,j) and (j,i) into a single term so evaluation touches each pair once.
  std::map<std::tuple<int, int, int>, double> packed;
  for (const auto& e : m.tensor_) packed[{std::min(e.i, e.j), std::max(e.i, e.j), e.k}] += e.value;
  for (const auto& [key, v] : packed)
    m.packed_.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), v});
  std::stable_sort(m.packed_.begin(), m.packed_.end(),
                   [](const PackedTerm& a, const PackedTerm& b) { return a.k < b.k; });

  Fnv1a h;
  h.update_value(n);
  for (std::size_t j = 0; j < n; ++j) {
    h.update_value(m.eigenvalues_[j]);
    h.update_value(m.noise_[j]);
    h.update_value(m.forcing_[j]);
  }
  for (const auto& e : m.tensor_) {
    h.update_value(e.i);
    h.update_value(e.j);
    h.update_value(e.k);
    h.update_value(e.value);
  }
  m.id_ = h.digest();
  return m;
}

GalerkinModel GalerkinModel::build_unchecked(std::vector<double> eigenvalues, std::vector<TensorEntry> tensor,
                                             std::vector<double> forcing, std::vector<double> noise_amps,
                                             std::vector<ModeLabel> index_map) {
  return assemble(std::move(eigenvalues), std::move(tensor), std::move(forcing), std::move(noise_amps),
                  std::move(index_map));
}

GalerkinModel GalerkinModel::without_noise() const {
  std::vector<double> ev(eigenvalues_.data(), eigenvalues_.data() + eigenvalues_.size());
  std::vector<double> h(forcing_.data(), forcing_.data() + forcing_.size());
  std::vector<double> zero(ev.size(), 0.0);
  return assemble(std::move(ev), tensor_, std::move(h), std::move(zero), index_map_, true);
}

GalerkinModel GalerkinModel::build_custom(std::vector<double> eigenvalues, std::vector<TensorEntry> tensor,
                                          std::vector<double> forcing, std::vector<double> noise_amps,
                                          std::vector<ModeLabel> index_map, int probe_count) {
  GalerkinModel m = assemble(std::move(eigenvalues), std::move(tensor), std::move(forcing),
                             std::move(noise_amps), std::move(index_map));
  NormalStream rng(split_seed(m.id_, 0xcafe));
  const int n = m.n_modes();
  for (int p = 0; p < probe_count; ++p) {
    State u(n);
    for (int j = 0; j < n; ++j) u[j] = rng();
    // Single-mode probes catch diagonal defects that random states can mask.
    if (p < n) {
      u.setZero();
      u[p] = 1.0;
    }
    const double defect = cancellation_defect(m, u);
    if (!(defect <= kCancellationTol))
      throw CancellationViolation("tensor violates <B(u,u),u> = 0 (relative defect " +
                                  std::to_string(defect) + " on probe " + std::to_string(p) + ")");
  }
  return m;
}

void GalerkinModel::check_dim(const State& u) const {
  if (u.size() != eigenvalues_.size())
    throw DimensionMismatch("state has " + std::to_string(u.size()) + " coefficients, model has " +
                            std::to_string(eigenvalues_.size()) + " modes");
}

double GalerkinModel::norm_h(const State& u) const {
  check_dim(u);
  return std::sqrt(u.squaredNorm());
}

double GalerkinModel::squared_norm_u(const State& u) const {
  check_dim(u);
  double s = 0.0;
  for (Eigen::Index j = 0; j < u.size(); ++j) s += (eigenvalues_[j] * u[j]) * u[j];
  return s;
}

double GalerkinModel::norm_u(const State& u) const { return std::sqrt(squared_norm_u(u)); }

double GalerkinModel::norm_dual(const State& u) const {
  check_dim(u);
  return std::sqrt((u.array().square() / eigenvalues_.array()).sum());
}

State GalerkinModel::apply_stokes(const State& u) const {
  check_dim(u);
  return (eigenvalues_.array() * u.array()).matrix();
}

State GalerkinModel::apply_nonlinearity(const State& u) const {
  check_dim(u);
  State out(u.size());
  nonlinearity_into(u.data(), out.data());
  return out;
}

void GalerkinModel::nonlinearity_into(const double* u, double* out) const noexcept {
  std::fill(out, out + eigenvalues_.size(), 0.0);
  for (const auto& t : packed_) out[t.k] += t.coef * u[t.i] * u[t.j];
}

std::vector<ModeLabel> torus_modes(int max_wavenumber) {
  if (max_wavenumber < 1) throw SpectrumViolation("max_wavenumber must be at least 1");
  const int r2 = max_wavenumber * max_wavenumber;
  std::vector<ModeLabel> modes;
  for (int kx = 0; kx <= max_wavenumber; ++kx) {
    for (int ky = -max_wavenumber; ky <= max_wavenumber; ++ky) {
      const int q = kx * kx + ky * ky;
      if (q == 0 || q > r2) continue;
      if (kx == 0 && ky < 0) continue;  // {k, -k} represented once
      modes.push_back({kx, ky, false});
      modes.push_back({kx, ky, true});
    }
  }
  std::stable_sort(modes.begin(), modes.end(), [](const ModeLabel& a, const ModeLabel& b) {
    return std::tuple(a.wavenumber_squared(), a.kx, a.ky, a.sine) <
           std::tuple(b.wavenumber_squared(), b.kx, b.ky, b.sine);
  });
  return modes;
}

namespace {

using cplx = std::complex<double>;

// f(k.x) as sum over s in {+1,-1} of coef[s] * exp(i s k.x).
struct TrigExpansion {
  cplx plus, minus;
};

TrigExpansion expand(bool sine) {
  if (sine) return {cplx(0.0, -0.5), cplx(0.0, 0.5)};  // sin = (e^{ia} - e^{-ia}) / 2i
  return {cplx(0.5, 0.0), cplx(0.5, 0.0)};
}

// Derivative of the mode profile: cos' = -sin, sin' = cos.
TrigExpansion expand_derivative(bool sine) {
  if (sine) return expand(false);
  TrigExpansion s = expand(true);
  return {-s.plus, -s.minus};
}

// Mean over the torus of f(p.x) g(q.x) h(r.x).
double triple_mean(const ModeLabel& p, const TrigExpansion& f, const ModeLabel& q, const TrigExpansion& g,
                   const ModeLabel& r, const TrigExpansion& h) {
  cplx sum = 0.0;
  for (int s1 : {1, -1})
    for (int s2 : {1, -1})
      for (int s3 : {1, -1}) {
        if (s1 * p.kx + s2 * q.kx + s3 * r.kx != 0) continue;
        if (s1 * p.ky + s2 * q.ky + s3 * r.ky != 0) continue;
        sum += (s1 > 0 ? f.plus : f.minus) * (s2 > 0 ? g.plus : g.minus) * (s3 > 0 ? h.plus : h.minus);
      }
  return sum.real();
}

}  // namespace

std::vector<TensorEntry> torus_tensor(const std::vector<ModeLabel>& modes) {
  const int n = static_cast<int>(modes.size());
  std::vector<Eigen::Vector2d> dir(n);
  for (int a = 0; a < n; ++a) {
    const double norm = std::sqrt(static_cast<double>(modes[a].wavenumber_squared()));
    dir[a] = Eigen::Vector2d(-modes[a].ky, modes[a].kx) / norm;
  }
  const double scale = 2.0 * std::sqrt(2.0);
  std::vector<TensorEntry> out;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Eigen::Vector2d q(modes[j].kx, modes[j].ky);
      const double advect = dir[i].dot(q);
      if (advect == 0.0) continue;
      for (int k = 0; k < n; ++k) {
        const double align = dir[j].dot(dir[k]);
        if (align == 0.0) continue;
        const double mean = triple_mean(modes[i], expand(modes[i].sine), modes[j],
                                        expand_derivative(modes[j].sine), modes[k], expand(modes[k].sine));
        if (mean == 0.0) continue;
        out.push_back({i, j, k, scale * advect * align * mean});
      }
    }
  }
  return out;
}

GalerkinModel build_torus_model(int max_wavenumber, const TorusForcingSpec& forcing, const TorusNoiseSpec& noise) {
  auto modes = torus_modes(max_wavenumber);
  const std::size_t n = modes.size();
  std::vector<double> alpha(n), b(n), h(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) alpha[j] = modes[j].wavenumber_squared();
  if (!noise.explicit_amps.empty()) {
    if (noise.explicit_amps.size() != n)
      throw DimensionMismatch("explicit noise amplitudes must have one entry per mode (" + std::to_string(n) + ")");
    b = noise.explicit_amps;
  } else {
    for (std::size_t j = 0; j < n; ++j) b[j] = noise.amplitude * std::pow(alpha[j], -0.5 * noise.decay_exponent);
  }
  for (const auto& [idx, v] : forcing.entries) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= n) throw DimensionMismatch("forcing index out of range");
    h[idx] = v;
  }
  auto tensor = torus_tensor(modes);
  return GalerkinModel::build_custom(std::move(alpha), std::move(tensor), std::move(h), std::move(b),
                                     std::move(modes));
}

std::pair<State, State> project(const State& u, int level) {
  if (level < 0 || level > u.size())
    throw DimensionMismatch("projection level " + std::to_string(level) + " outside [0, " +
                            std::to_string(u.size()) + "]");
  State p = State::Zero(u.size());
  State q = State::Zero(u.size());
  p.head(level) = u.head(level);
  q.tail(u.size() - level) = u.tail(u.size() - level);
  return {std::move(p), std::move(q)};
}

double cancellation_defect(const GalerkinModel& model, const State& u) {
  const State b = model.apply_nonlinearity(u);
  const double un = std::sqrt(u.squaredNorm());
  if (un == 0.0) return 0.0;
  return std::abs(b.dot(u)) / (un * std::max(std::sqrt(b.squaredNorm()), 1.0));
}

}  // namespace snsld
