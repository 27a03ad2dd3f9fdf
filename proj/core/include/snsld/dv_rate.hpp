#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "snsld/chain.hpp"
#include "snsld/empirical.hpp"
#include "snsld/feynman_kac.hpp"
#include "snsld/galerkin_model.hpp"

namespace snsld {

/// sum mu1 log(mu1 / mu2) with 0 log 0 = 0; +inf when mu1 charges a
/// mu2-null atom. On finite spaces this is the supremum over F of
/// <F, mu1> - log <e^F, mu2>.
double relative_entropy(const Eigen::VectorXd& mu1, const Eigen::VectorXd& mu2);
/// Atoms are matched by exact point equality.
double relative_entropy(const EmpiricalMeasure& mu1, const EmpiricalMeasure& mu2);

enum class RateMode { legendre, variational, exact_chain };

const char* to_string(RateMode mode);

struct RateEstimate {
  double value = 0.0;
  RateMode mode = RateMode::legendre;
  std::vector<double> argmax_params;
  std::size_t evaluations = 0;
  bool converged = false;
  std::vector<std::uint64_t> restart_seeds;
  std::vector<double> restart_values;
  std::string diagnostics;
};

struct SearchOptions {
  std::size_t budget = 20000;  // objective evaluations over all restarts
  int restarts = 8;
  std::uint64_t seed = 1;
  double initial_step = 1.0;
  double min_step = 1e-9;
  double start_scale = 1.0;  // spread of random restart points
};

/// Compass search with step doubling on success and halving on failure.
/// Restart 0 starts at x0; the others at x0 + start_scale * N(0, I).
RateEstimate pattern_search(const std::function<double(const Eigen::VectorXd&)>& objective, const Eigen::VectorXd& x0,
                            const SearchOptions& options);

/// sup over params of <V_params, lambda> - Q(V_params), by pattern search.
/// Both callables take the family parameters.
RateEstimate legendre_rate(const std::function<double(const Eigen::VectorXd&)>& pressure,
                           const std::function<double(const Eigen::VectorXd&)>& mean_under_lambda, int dimension,
                           const SearchOptions& options = {});

enum class ChainFamily { full, constants };

/// Chain version with the exact pressure. `full` searches all of R^n,
/// `constants` only V = c.
RateEstimate legendre_rate(const FiniteChain& chain, const Eigen::VectorXd& lambda, ChainFamily family = ChainFamily::full,
                           const SearchOptions& options = {});

/// Model version: V = sum_i w_i tanh(<P_N u, d_i> + o_i) with fixed
/// (d_i, o_i) from `shape`; the parameters are the weights w_i. The
/// pressure is pressure_mc on common random numbers.
struct ModelPressureSettings {
  std::vector<double> t_list{2.0, 3.0, 4.0};
  double dt = 0.01;
  std::size_t count = 200;
  std::uint64_t seed = 1;
  State u0;
};

RateEstimate legendre_rate(const GalerkinModel& model, const EmpiricalMeasure& lambda, const Potential& shape,
                           const ModelPressureSettings& settings, const SearchOptions& options = {});

struct QuadratureSpec {
  double horizon = 0.0;  // T_q; 0 picks 40 / alpha
  int panels = 40;
  int order = 10;
  double tail_tolerance = 1e-10;
};

struct ResolventResult {
  Eigen::VectorXd values;
  double tail_bound = 0.0;  // e^{-alpha T_q} sup|f| / alpha
  bool tail_flagged = false;
  double horizon = 0.0;
};

/// R_alpha f = int_0^inf e^{-alpha t} P_t f dt on the truncated horizon,
/// with P_t = exp(t L) and L the chain generator (P - I for discrete clocks).
ResolventResult resolvent(const FiniteChain& chain, const Eigen::VectorXd& f, double alpha, const QuadratureSpec& spec = {});

/// (alpha - L)^{-1} f.
Eigen::VectorXd resolvent_exact(const FiniteChain& chain, const Eigen::VectorXd& f, double alpha);

/// Positive test functions together with the finite-difference step used
/// for model generators.
struct GeneratorProbe {
  const FiniteChain* chain = nullptr;
  double dt_fd = 1e-4;
  std::vector<Eigen::VectorXd> domain_family;
};

/// L f: the generator matrix for chains.
Eigen::VectorXd generator_apply(const GeneratorProbe& probe, const Eigen::VectorXd& f);
/// (P_h f - f) / h with one Richardson step, h = probe.dt_fd.
Eigen::VectorXd generator_finite_difference(const GeneratorProbe& probe, const Eigen::VectorXd& f);
/// L R_alpha f = alpha R_alpha f - f.
Eigen::VectorXd generator_of_resolvent(const ResolventResult& r, const Eigen::VectorXd& f, double alpha);

/// Model generator by Richardson-refined finite differences of P_h f at
/// each probe state, f = exp(W).
struct ModelGeneratorProbe {
  const GalerkinModel* model = nullptr;
  double dt = 1e-3;
  double dt_fd = 0.02;
  std::size_t count = 1000;
  std::uint64_t seed = 1;
};

std::vector<double> generator_apply(const ModelGeneratorProbe& probe, const Potential& log_f,
                                    const std::vector<State>& states);

/// sup over positive f of sum lambda (-L f / f), by pattern search over
/// log f with f_0 = 1 (or over weights in front of the domain family when
/// it is non-empty: f = prod_i g_i^{theta_i}).
RateEstimate variational_rate(const Eigen::VectorXd& lambda, const GeneratorProbe& probe, const SearchOptions& options = {});

/// Model version over f = exp(W), W = sum_i theta_i tanh(...) with fixed
/// features from `shape`; lambda must be supported on states.
RateEstimate variational_rate(const EmpiricalMeasure& lambda, const ModelGeneratorProbe& probe, const Potential& shape,
                              const SearchOptions& options = {});

/// Donsker-Varadhan entropy of the stationary Q-chain against the P-chain
/// over t steps: t * sum_x pi_Q(x) KL(Q(x, .) | P(x, .)). Discrete clocks.
double dv_entropy(const FiniteChain& p, const FiniteChain& q, int t = 1);

/// Same quantity per unit time; shares the implementation of dv_entropy.
double level3_rate_markov(const FiniteChain& p, const FiniteChain& q);

/// Entropy of the next step given the last k states, computed from the
/// joint laws of stationary Q-paths of length k + 1. Equals
/// level3_rate_markov for every k when Q is Markov.
double past_conditioned_entropy(const FiniteChain& p, const FiniteChain& q, int k);

/// H(Q) - I(pi_Q); non-negative.
double contraction_gap(const FiniteChain& p, const FiniteChain& q);

/// Q*(x, y) = e^{V(x)} P(x, y) h(y) / (c h(x)) for the principal data of
/// the tilt by V.
Eigen::MatrixXd doob_transform(const FiniteChain& chain, const Eigen::VectorXd& v);

struct EqualityWitness {
  Eigen::MatrixXd kernel;
  Eigen::VectorXd stationary;
  double entropy = 0.0;
  double rate = 0.0;
  double gap = 0.0;
};

/// Doob transform of the optimally tilted kernel for lambda: its invariant
/// law is lambda and its entropy equals I(lambda).
EqualityWitness contraction_equality_witness(const FiniteChain& chain, const Eigen::VectorXd& lambda);

struct CutoffReport {
  double base = 0.0;                   // sum lambda (-L f / f)
  std::vector<double> alphas;
  std::vector<double> resolvent_values;  // sum lambda (-L R_a f / R_a f)
  std::vector<double> levels;            // cutoff levels N
  std::vector<std::vector<double>> cutoff_values;  // [alpha][N], f_N = (f ^ N) v 1/N
  bool alpha_limit_ok = false;  // |resolvent_values - base| nonincreasing in alpha
  bool cutoff_limit_ok = false; // cutoff values converge to the resolvent value
  bool lower_bound_ok = false;  // every ratio >= -alpha
};

CutoffReport resolvent_cutoff_pipeline(const FiniteChain& chain, const Eigen::VectorXd& f, const Eigen::VectorXd& lambda,
                                       const std::vector<double>& alphas, const std::vector<double>& levels);

}  // namespace snsld
