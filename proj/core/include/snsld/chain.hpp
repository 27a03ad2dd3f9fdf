#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace snsld {

enum class Clocking { discrete, continuous };

/// Finite-state Markov chain: a row-stochastic matrix P (discrete clocking)
/// or a generator G with non-negative off-diagonal entries and zero row
/// sums (continuous clocking).
class FiniteChain {
 public:
  static FiniteChain discrete(Eigen::MatrixXd p, std::vector<std::string> labels = {});
  static FiniteChain continuous(Eigen::MatrixXd g, std::vector<std::string> labels = {});

  int size() const noexcept { return static_cast<int>(matrix_.rows()); }
  Clocking clocking() const noexcept { return clocking_; }
  const Eigen::MatrixXd& matrix() const noexcept { return matrix_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  /// Strong connectivity of the transition graph.
  bool irreducible() const;

  /// Markov semigroup: P^t (t a non-negative integer) or exp(tG).
  Eigen::MatrixXd semigroup(double t) const;
  /// Generator: P - I or G.
  Eigen::MatrixXd generator() const;

 private:
  FiniteChain(Clocking c, Eigen::MatrixXd m, std::vector<std::string> labels);
  Clocking clocking_;
  Eigen::MatrixXd matrix_;
  std::vector<std::string> labels_;
};

/// Feynman-Kac kernel of a chain: diag(e^V) P (discrete) or G + diag(V)
/// (continuous).
struct TiltedKernel {
  Clocking clocking = Clocking::discrete;
  Eigen::MatrixXd base;
  Eigen::VectorXd potential;
  Eigen::MatrixXd matrix;

  /// (diag(e^V) P)^t or exp(t (G + diag V)).
  Eigen::MatrixXd semigroup(double t) const;
};

TiltedKernel tilt(const FiniteChain& chain, const Eigen::VectorXd& potential);
/// Tilting a tilted kernel adds the potentials.
TiltedKernel tilt(const TiltedKernel& kernel, const Eigen::VectorXd& potential);

/// Principal eigen-triple. For continuous clocking `log_c` is the principal
/// eigenvalue of G + diag(V) and c = exp(log_c), the eigenvalue of the
/// time-one semigroup.
struct PFData {
  double c = 0.0;
  double log_c = 0.0;
  Eigen::VectorXd h;   // right eigenvector, <h, mu> = 1
  Eigen::VectorXd mu;  // left eigenvector, probability
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

/// Shifted power iteration followed by inverse-iteration polishing.
PFData pf_eigen(const TiltedKernel& kernel, double tol = 1e-12, int max_iter = 1000000);

/// All eigenvalues by dense QR (cross-check for pf_eigen).
Eigen::VectorXcd dense_spectrum(const Eigen::MatrixXd& m);

/// Unique invariant law of an irreducible chain.
Eigen::VectorXd stationary(const FiniteChain& chain);

/// Q(V) = log c_V.
double exact_pressure(const FiniteChain& chain, const Eigen::VectorXd& potential);

struct ChainRate {
  double value = 0.0;
  Eigen::VectorXd argmax;  // optimal V (Legendre) or log f (variational)
  int iterations = 0;
  double gradient_norm = 0.0;
  bool converged = false;
};

/// sup_V <V, lambda> - Q(V) by damped Newton ascent.
ChainRate exact_rate_legendre(const FiniteChain& chain, const Eigen::VectorXd& lambda, int budget = 2000);

/// sup_{f > 0} sum lambda log(f / P f) (discrete) or sum lambda (-G f / f)
/// (continuous), by Newton ascent in log f with f_0 = 1.
ChainRate exact_rate_variational(const FiniteChain& chain, const Eigen::VectorXd& lambda, int budget = 2000);

/// Variational integrand sum_x lambda_x (-L f / f)(x) for a given positive f.
double variational_objective(const FiniteChain& chain, const Eigen::VectorXd& lambda, const Eigen::VectorXd& f);

struct MetReport {
  std::vector<double> errors;  // e_t, t = 1..horizon
  std::vector<double> ratios;  // e_{t+1} / e_t where both exceed the noise floor
  double spectral_ratio = 0.0;
  double tail_ratio = 0.0;     // last reliable ratio
  bool decay_ok = false;       // tail_ratio <= spectral_ratio + 0.05
};

/// e_t = max |c^{-t} (P^V_t f) - <f, mu> h|.
MetReport met_convergence(const FiniteChain& chain, const Eigen::VectorXd& potential, const Eigen::VectorXd& f,
                          int horizon);

struct LdpRow {
  int k = 0;
  std::size_t hits = 0;
  std::size_t samples = 0;
  double frequency = 0.0;
  double empirical_rate = 0.0;  // -(1/k) log frequency; +inf without hits
  double rate_lo = 0.0;         // from a 95% Wilson interval on the frequency
  double rate_hi = 0.0;
  bool wide_interval = false;
};

struct LdpTable {
  Eigen::VectorXd center;
  double radius = 0.0;
  double inf_closed = 0.0;  // inf of I over the closed ball
  double inf_open = 0.0;    // inf of I over the open ball
  double slack = 0.0;
  std::uint64_t seed = 0;
  std::vector<LdpRow> rows;
  bool bracketed = false;   // largest-k rate within [inf_closed - slack, inf_open + slack]
};

/// Frequency of {zeta_k in B(center, radius)} (dual-Lipschitz ball under
/// the 0/1 metric) for a discrete chain started from `initial`.
LdpTable ldp_frequency(const FiniteChain& chain, const Eigen::VectorXd& center, double radius,
                       const std::vector<int>& k_list, std::size_t samples, std::uint64_t seed,
                       const Eigen::VectorXd& initial, double slack = 0.05);

/// inf of the rate over the dual-Lipschitz ball (two-state chains exactly,
/// larger chains on a simplex grid of step 1/40).
double rate_inf_over_ball(const FiniteChain& chain, const Eigen::VectorXd& center, double radius, bool open);

/// Dual-Lipschitz distance between probability vectors under the 0/1 metric.
double label_distance(const Eigen::VectorXd& p, const Eigen::VectorXd& q);

}  // namespace snsld
