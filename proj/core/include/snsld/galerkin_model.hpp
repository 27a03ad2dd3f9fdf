#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace snsld {

/// Coordinates of a velocity field in the Stokes eigenbasis.
using State = Eigen::VectorXd;

/// One nonzero coefficient of the trilinear form: B(u,u)_k += value * u_i * u_j.
struct TensorEntry {
  int i = 0;
  int j = 0;
  int k = 0;
  double value = 0.0;

  friend bool operator==(const TensorEntry&, const TensorEntry&) = default;
};

/// Real torus basis function sqrt(2) * (k^perp/|k|) * {cos,sin}(k.x).
struct ModeLabel {
  int kx = 0;
  int ky = 0;
  bool sine = false;

  int wavenumber_squared() const noexcept { return kx * kx + ky * ky; }
  friend bool operator==(const ModeLabel&, const ModeLabel&) = default;
};

struct TorusNoiseSpec {
  double amplitude = 0.1;
  /// b_j = amplitude * alpha_j^(-decay_exponent / 2).
  double decay_exponent = 0.0;
  /// Overrides the parametric law when non-empty.
  std::vector<double> explicit_amps;
};

struct TorusForcingSpec {
  /// (mode index, coefficient) pairs; unlisted modes carry no forcing.
  std::vector<std::pair<int, double>> entries;
};

/// Spectral truncation of the forced, noisy Navier-Stokes system in the
/// eigenbasis of the Stokes operator (viscosity 1). Immutable after
/// construction.
class GalerkinModel {
 public:
  /// Validates every invariant: positive nondecreasing spectrum, positive
  /// noise, in-range tensor indices and the cancellation
  /// <B(u,u),u> = 0 on `probe_count` random states.
  static GalerkinModel build_custom(std::vector<double> eigenvalues, std::vector<TensorEntry> tensor,
                                    std::vector<double> forcing, std::vector<double> noise_amps,
                                    std::vector<ModeLabel> index_map = {}, int probe_count = 64);

  /// Skips the cancellation probe. Used by the verification suites to inject
  /// deliberately broken tensors.
  static GalerkinModel build_unchecked(std::vector<double> eigenvalues, std::vector<TensorEntry> tensor,
                                       std::vector<double> forcing, std::vector<double> noise_amps,
                                       std::vector<ModeLabel> index_map = {});

  /// Same dynamics with b = 0, for deterministic reference runs.
  GalerkinModel without_noise() const;

  int n_modes() const noexcept { return static_cast<int>(eigenvalues_.size()); }
  const Eigen::VectorXd& eigenvalues() const noexcept { return eigenvalues_; }
  const Eigen::VectorXd& noise_amps() const noexcept { return noise_; }
  const Eigen::VectorXd& forcing() const noexcept { return forcing_; }
  /// Symmetrized entries, sorted by (i, j, k).
  const std::vector<TensorEntry>& tensor() const noexcept { return tensor_; }
  const std::vector<ModeLabel>& index_map() const noexcept { return index_map_; }

  /// Sum of b_j^2.
  double noise_b0() const noexcept { return b0_; }
  /// Sum of alpha_j b_j^2.
  double noise_b1() const noexcept { return b1_; }

  double norm_h(const State& u) const;
  double norm_u(const State& u) const;
  /// sum_j (alpha_j u_j) u_j, accumulated in index order like <Lu, u>.
  double squared_norm_u(const State& u) const;
  double norm_dual(const State& u) const;

  State apply_stokes(const State& u) const;
  State apply_nonlinearity(const State& u) const;
  /// Allocation-free B(u,u); `out` must hold n_modes() values.
  void nonlinearity_into(const double* u, double* out) const noexcept;

  /// Content hash of the exported document; stable across runs.
  std::uint64_t id() const noexcept { return id_; }

 private:
  GalerkinModel() = default;
  static GalerkinModel assemble(std::vector<double> eigenvalues, std::vector<TensorEntry> tensor,
                                std::vector<double> forcing, std::vector<double> noise_amps,
                                std::vector<ModeLabel> index_map, bool allow_zero_noise = false);
  void check_dim(const State& u) const;

  struct PackedTerm {
    int i, j, k;
    double coef;
  };

  Eigen::VectorXd eigenvalues_, noise_, forcing_;
  std::vector<TensorEntry> tensor_;
  std::vector<PackedTerm> packed_;
  std::vector<ModeLabel> index_map_;
  double b0_ = 0.0, b1_ = 0.0;
  std::uint64_t id_ = 0;
};

/// Divergence-free real Fourier modes on the 2*pi-periodic square with
/// 0 < |k| <= max_wavenumber, ordered by |k|^2, then (kx, ky), cosine first.
std::vector<ModeLabel> torus_modes(int max_wavenumber);

/// Exact trilinear coefficients <(e_i . grad) e_j, e_k> for the given modes.
std::vector<TensorEntry> torus_tensor(const std::vector<ModeLabel>& modes);

GalerkinModel build_torus_model(int max_wavenumber, const TorusForcingSpec& forcing,
                                const TorusNoiseSpec& noise);

/// Orthogonal split u = P_N u + Q_N u.
std::pair<State, State> project(const State& u, int level);

/// Relative cancellation defect |<B(u,u),u>| / (|u| max(|B(u,u)|, 1)).
double cancellation_defect(const GalerkinModel& model, const State& u);

}  // namespace snsld
