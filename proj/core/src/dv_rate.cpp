#include "snsld/dv_rate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "snsld/error.hpp"
#include "snsld/linalg.hpp"
#include "snsld/parallel.hpp"
#include "snsld/rng.hpp"

namespace snsld {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_discrete(const FiniteChain& c) {
  if (c.clocking() != Clocking::discrete) throw ConfigError("entropy computations need discrete-clock chains");
}

double row_kl(const Eigen::MatrixXd& q, const Eigen::MatrixXd& p, int x) {
  Eigen::VectorXd a = q.row(x).transpose(), b = p.row(x).transpose();
  return relative_entropy(a, b);
}

}  // namespace

double relative_entropy(const Eigen::VectorXd& mu1, const Eigen::VectorXd& mu2) {
  if (mu1.size() != mu2.size()) throw DimensionMismatch("measures live on different spaces");
  double s = 0.0;
  for (Eigen::Index i = 0; i < mu1.size(); ++i) {
    if (mu1(i) <= 0.0) continue;
    if (mu2(i) <= 0.0) return kInf;
    s += mu1(i) * std::log(mu1(i) / mu2(i));
  }
  return s;
}

double relative_entropy(const EmpiricalMeasure& mu1, const EmpiricalMeasure& mu2) {
  if (mu1.point_size() != mu2.point_size()) throw DimensionMismatch("measures live on different spaces");
  std::map<std::vector<double>, std::pair<double, double>> atoms;
  for (std::size_t i = 0; i < mu1.size(); ++i) {
    auto p = mu1.point(i);
    atoms[std::vector<double>(p.begin(), p.end())].first += mu1.weight(i);
  }
  for (std::size_t i = 0; i < mu2.size(); ++i) {
    auto p = mu2.point(i);
    atoms[std::vector<double>(p.begin(), p.end())].second += mu2.weight(i);
  }
  Eigen::VectorXd a(atoms.size()), b(atoms.size());
  Eigen::Index k = 0;
  for (const auto& [pt, w] : atoms) {
    a(k) = w.first;
    b(k) = w.second;
    ++k;
  }
  return relative_entropy(a, b);
}

const char* to_string(RateMode mode) {
  switch (mode) {
    case RateMode::legendre:
      return "legendre";
    case RateMode::variational:
      return "variational";
    case RateMode::exact_chain:
      return "exact_chain";
  }
  return "?";
}

RateEstimate pattern_search(const std::function<double(const Eigen::VectorXd&)>& objective, const Eigen::VectorXd& x0,
                            const SearchOptions& options) {
  RateEstimate best;
  best.value = -kInf;
  const int restarts = std::max(1, options.restarts);
  const std::size_t per_restart = std::max<std::size_t>(1, options.budget / static_cast<std::size_t>(restarts));
  const Eigen::Index d = x0.size();
  auto safe = [&](const Eigen::VectorXd& x) {
    double v = objective(x);
    return std::isfinite(v) ? v : -kInf;
  };
  bool any_converged = false;
  std::ostringstream diag;
  for (int r = 0; r < restarts; ++r) {
    std::uint64_t seed = split_seed(options.seed, static_cast<std::uint64_t>(r));
    best.restart_seeds.push_back(seed);
    Eigen::VectorXd x = x0;
    if (r > 0) {
      NormalStream rng(seed);
      for (Eigen::Index i = 0; i < d; ++i) x(i) += options.start_scale * rng();
    }
    double fx = safe(x);
    std::size_t evals = 1;
    double step = options.initial_step;
    while (step > options.min_step && evals < per_restart) {
      bool improved = false;
      for (Eigen::Index i = 0; i < d && evals < per_restart; ++i) {
        for (double sign : {1.0, -1.0}) {
          Eigen::VectorXd y = x;
          y(i) += sign * step;
          double fy = safe(y);
          ++evals;
          if (fy > fx) {
            x = y;
            fx = fy;
            improved = true;
            break;
          }
        }
      }
      step = improved ? std::min(2.0 * step, 1e3) : 0.5 * step;
    }
    bool converged = step <= options.min_step;
    any_converged = any_converged || converged;
    best.evaluations += evals;
    best.restart_values.push_back(fx);
    diag << "restart " << r << " value " << fx << " evals " << evals << (converged ? " converged" : " budget") << "; ";
    if (fx > best.value) {
      best.value = fx;
      best.argmax_params.assign(x.data(), x.data() + d);
      best.converged = converged;
    }
  }
  best.diagnostics = diag.str();
  return best;
}

RateEstimate legendre_rate(const std::function<double(const Eigen::VectorXd&)>& pressure,
                           const std::function<double(const Eigen::VectorXd&)>& mean_under_lambda, int dimension,
                           const SearchOptions& options) {
  auto objective = [&](const Eigen::VectorXd& p) { return mean_under_lambda(p) - pressure(p); };
  RateEstimate est = pattern_search(objective, Eigen::VectorXd::Zero(dimension), options);
  est.mode = RateMode::legendre;
  return est;
}

RateEstimate legendre_rate(const FiniteChain& chain, const Eigen::VectorXd& lambda, ChainFamily family,
                           const SearchOptions& options) {
  if (lambda.size() != chain.size()) throw DimensionMismatch("measure length differs from state count");
  const int n = chain.size();
  auto values = [&](const Eigen::VectorXd& p) -> Eigen::VectorXd {
    if (family == ChainFamily::constants) return Eigen::VectorXd::Constant(n, p(0));
    return p;
  };
  int dim = family == ChainFamily::constants ? 1 : n;
  return legendre_rate([&](const Eigen::VectorXd& p) { return exact_pressure(chain, values(p)); },
                       [&](const Eigen::VectorXd& p) { return values(p).dot(lambda); }, dim, options);
}

namespace {

Potential with_weights(const Potential& shape, const Eigen::VectorXd& w) {
  std::vector<TanhFeature> f = shape.features();
  for (std::size_t i = 0; i < f.size(); ++i) f[i].weight = w(static_cast<Eigen::Index>(i));
  if (shape.window() > 0.0) return Potential(shape.level(), 0.0, std::move(f), shape.window(), shape.dt());
  return Potential(shape.level(), 0.0, std::move(f));
}

}  // namespace

RateEstimate legendre_rate(const GalerkinModel& model, const EmpiricalMeasure& lambda, const Potential& shape,
                           const ModelPressureSettings& settings, const SearchOptions& options) {
  if (lambda.space() != SpaceKind::state) throw ConfigError("model Legendre rate needs a measure on states");
  State u0 = settings.u0.size() ? settings.u0 : State(State::Zero(model.n_modes()));
  const int n = model.n_modes();
  auto pressure = [&](const Eigen::VectorXd& w) {
    return pressure_mc(model, with_weights(shape, w), settings.t_list, settings.dt, settings.count, settings.seed,
                       fixed_initial(u0))
        .value;
  };
  auto mean = [&](const Eigen::VectorXd& w) {
    Potential v = with_weights(shape, w);
    return lambda.integrate([&](std::span<const double> x) { return v(x, n); });
  };
  return legendre_rate(pressure, mean, static_cast<int>(shape.features().size()), options);
}

ResolventResult resolvent(const FiniteChain& chain, const Eigen::VectorXd& f, double alpha, const QuadratureSpec& spec) {
  if (!(alpha > 0.0)) throw ConfigError("resolvent needs alpha > 0");
  if (f.size() != chain.size()) throw DimensionMismatch("function length differs from state count");
  ResolventResult r;
  r.horizon = spec.horizon > 0.0 ? spec.horizon : 40.0 / alpha;
  const Eigen::MatrixXd l = chain.generator();
  QuadratureRule q = composite_gauss_legendre(spec.panels, spec.order, 0.0, r.horizon);
  r.values = Eigen::VectorXd::Zero(chain.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    double t = q.nodes[i];
    r.values += q.weights[i] * std::exp(-alpha * t) * (expm(t * l) * f);
  }
  r.tail_bound = std::exp(-alpha * r.horizon) * f.cwiseAbs().maxCoeff() / alpha;
  r.tail_flagged = r.tail_bound > spec.tail_tolerance;
  return r;
}

Eigen::VectorXd resolvent_exact(const FiniteChain& chain, const Eigen::VectorXd& f, double alpha) {
  const int n = chain.size();
  Eigen::MatrixXd a = alpha * Eigen::MatrixXd::Identity(n, n) - chain.generator();
  return a.partialPivLu().solve(f);
}

Eigen::VectorXd generator_apply(const GeneratorProbe& probe, const Eigen::VectorXd& f) {
  if (!probe.chain) throw ConfigError("generator probe has no chain");
  if (f.size() != probe.chain->size()) throw DimensionMismatch("function length differs from state count");
  return probe.chain->generator() * f;
}

Eigen::VectorXd generator_finite_difference(const GeneratorProbe& probe, const Eigen::VectorXd& f) {
  if (!probe.chain) throw ConfigError("generator probe has no chain");
  const Eigen::MatrixXd l = probe.chain->generator();
  const double h = probe.dt_fd;
  Eigen::VectorXd d1 = (expm(h * l) * f - f) / h;
  Eigen::VectorXd d2 = (expm(0.5 * h * l) * f - f) / (0.5 * h);
  return 2.0 * d2 - d1;
}

Eigen::VectorXd generator_of_resolvent(const ResolventResult& r, const Eigen::VectorXd& f, double alpha) {
  return alpha * r.values - f;
}

std::vector<double> generator_apply(const ModelGeneratorProbe& probe, const Potential& log_f,
                                    const std::vector<State>& states) {
  if (!probe.model) throw ConfigError("generator probe has no model");
  const GalerkinModel& model = *probe.model;
  const int n = model.n_modes();
  const std::size_t full = grid_index(probe.dt_fd, probe.dt);
  if (full < 2 || full % 2 != 0) throw GridMismatch("dt_fd must be an even multiple of dt");
  const double h = probe.dt_fd;
  std::vector<double> out;
  for (std::size_t s = 0; s < states.size(); ++s) {
    const State& u = states[s];
    double f0 = std::exp(log_f(u));
    std::vector<double> half(probe.count), whole(probe.count);
    parallel_for(probe.count, [&](std::size_t i) {
      Trajectory tr = simulate(model, u, h, probe.dt, member_seed(probe.seed, i));
      half[i] = std::exp(log_f({tr.row(full / 2), static_cast<std::size_t>(n)}, n));
      whole[i] = std::exp(log_f({tr.row(full), static_cast<std::size_t>(n)}, n));
    });
    double mh = 0.0, mw = 0.0;
    for (std::size_t i = 0; i < probe.count; ++i) {
      mh += half[i];
      mw += whole[i];
    }
    mh /= static_cast<double>(probe.count);
    mw /= static_cast<double>(probe.count);
    double d1 = (mw - f0) / h, d2 = (mh - f0) / (0.5 * h);
    out.push_back(2.0 * d2 - d1);
  }
  return out;
}

RateEstimate variational_rate(const Eigen::VectorXd& lambda, const GeneratorProbe& probe, const SearchOptions& options) {
  if (!probe.chain) throw ConfigError("generator probe has no chain");
  const FiniteChain& chain = *probe.chain;
  const int n = chain.size();
  if (lambda.size() != n) throw DimensionMismatch("measure length differs from state count");
  for (const auto& g : probe.domain_family) {
    if (g.size() != n) throw DimensionMismatch("test function length differs from state count");
    if ((g.array() <= 0.0).any()) throw ConfigError("domain family functions must be strictly positive");
  }
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> build;
  int dim = 0;
  if (probe.domain_family.empty()) {
    dim = n - 1;
    build = [n](const Eigen::VectorXd& p) {
      Eigen::VectorXd f(n);
      f(0) = 1.0;
      for (int i = 1; i < n; ++i) f(i) = std::exp(p(i - 1));
      return f;
    };
  } else {
    dim = static_cast<int>(probe.domain_family.size());
    build = [&probe, n](const Eigen::VectorXd& p) {
      Eigen::VectorXd logf = Eigen::VectorXd::Zero(n);
      for (std::size_t i = 0; i < probe.domain_family.size(); ++i)
        logf += p(static_cast<Eigen::Index>(i)) * probe.domain_family[i].array().log().matrix();
      return Eigen::VectorXd(logf.array().exp().matrix());
    };
  }
  if (dim == 0) {
    RateEstimate est;
    est.mode = RateMode::variational;
    est.converged = true;
    return est;
  }
  auto objective = [&](const Eigen::VectorXd& p) { return variational_objective(chain, lambda, build(p)); };
  RateEstimate est = pattern_search(objective, Eigen::VectorXd::Zero(dim), options);
  est.mode = RateMode::variational;
  return est;
}

RateEstimate variational_rate(const EmpiricalMeasure& lambda, const ModelGeneratorProbe& probe, const Potential& shape,
                              const SearchOptions& options) {
  if (lambda.space() != SpaceKind::state) throw ConfigError("model variational rate needs a measure on states");
  std::vector<State> states;
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    auto p = lambda.point(i);
    states.emplace_back(Eigen::Map<const State>(p.data(), static_cast<Eigen::Index>(p.size())));
  }
  auto objective = [&](const Eigen::VectorXd& w) {
    Potential logf = with_weights(shape, w);
    std::vector<double> lf = generator_apply(probe, logf, states);
    double s = 0.0;
    for (std::size_t i = 0; i < states.size(); ++i) s += lambda.weight(i) * (-lf[i] / std::exp(logf(states[i])));
    return s / lambda.total_weight();
  };
  RateEstimate est = pattern_search(objective, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(shape.features().size())),
                                    options);
  est.mode = RateMode::variational;
  return est;
}

double dv_entropy(const FiniteChain& p, const FiniteChain& q, int t) {
  require_discrete(p);
  require_discrete(q);
  if (p.size() != q.size()) throw DimensionMismatch("kernels act on different state spaces");
  if (t < 1) throw ConfigError("entropy time must be a positive integer");
  Eigen::VectorXd pi = stationary(q);
  double h = 0.0;
  for (int x = 0; x < p.size(); ++x) {
    if (pi(x) <= 0.0) continue;
    double kl = row_kl(q.matrix(), p.matrix(), x);
    if (!std::isfinite(kl)) return kInf;
    h += pi(x) * kl;
  }
  return static_cast<double>(t) * h;
}

double level3_rate_markov(const FiniteChain& p, const FiniteChain& q) { return dv_entropy(p, q, 1); }

double past_conditioned_entropy(const FiniteChain& p, const FiniteChain& q, int k) {
  require_discrete(p);
  require_discrete(q);
  if (p.size() != q.size()) throw DimensionMismatch("kernels act on different state spaces");
  if (k < 1) throw ConfigError("past length must be positive");
  const int n = q.size();
  double paths = std::pow(static_cast<double>(n), k);
  if (paths > 4e6) throw ConfigError("past window too long to enumerate");
  Eigen::VectorXd pi = stationary(q);
  const Eigen::MatrixXd& qm = q.matrix();
  const Eigen::MatrixXd& pm = p.matrix();
  std::vector<int> path(k, 0);
  double total = 0.0;
  const long count = static_cast<long>(paths);
  for (long code = 0; code < count; ++code) {
    long c = code;
    for (int i = k - 1; i >= 0; --i) {
      path[i] = static_cast<int>(c % n);
      c /= n;
    }
    double joint = pi(path[0]);
    for (int i = 1; i < k; ++i) joint *= qm(path[i - 1], path[i]);
    if (joint <= 0.0) continue;
    const int last = path[k - 1];
    Eigen::VectorXd next(n);
    for (int y = 0; y < n; ++y) next(y) = joint * qm(last, y);
    Eigen::VectorXd cond = next / next.sum();
    Eigen::VectorXd ref = pm.row(last).transpose();
    double kl = relative_entropy(cond, ref);
    if (!std::isfinite(kl)) return kInf;
    total += joint * kl;
  }
  return total;
}

double contraction_gap(const FiniteChain& p, const FiniteChain& q) {
  double h = dv_entropy(p, q, 1);
  double i = exact_rate_legendre(p, stationary(q)).value;
  return h - i;
}

Eigen::MatrixXd doob_transform(const FiniteChain& chain, const Eigen::VectorXd& v) {
  require_discrete(chain);
  TiltedKernel k = tilt(chain, v);
  PFData pf = pf_eigen(k);
  const int n = chain.size();
  Eigen::MatrixXd out(n, n);
  for (int x = 0; x < n; ++x) {
    for (int y = 0; y < n; ++y) out(x, y) = k.matrix(x, y) * pf.h(y) / (pf.c * pf.h(x));
    out.row(x) /= out.row(x).sum();
  }
  return out;
}

EqualityWitness contraction_equality_witness(const FiniteChain& chain, const Eigen::VectorXd& lambda) {
  ChainRate r = exact_rate_legendre(chain, lambda);
  EqualityWitness w;
  w.kernel = doob_transform(chain, r.argmax);
  FiniteChain q = FiniteChain::discrete(w.kernel);
  w.stationary = stationary(q);
  w.entropy = dv_entropy(chain, q, 1);
  w.rate = r.value;
  w.gap = w.entropy - w.rate;
  return w;
}

CutoffReport resolvent_cutoff_pipeline(const FiniteChain& chain, const Eigen::VectorXd& f, const Eigen::VectorXd& lambda,
                                       const std::vector<double>& alphas, const std::vector<double>& levels) {
  if ((f.array() <= 0.0).any()) throw ConfigError("cutoff pipeline needs a strictly positive f");
  CutoffReport rep;
  rep.alphas = alphas;
  rep.levels = levels;
  auto ratio = [&](const Eigen::VectorXd& num, const Eigen::VectorXd& den) {
    double s = 0.0;
    for (Eigen::Index x = 0; x < lambda.size(); ++x) {
      if (lambda(x) > 0.0) s += lambda(x) * (-num(x) / den(x));
    }
    return s;
  };
  rep.base = ratio(chain.generator() * f, f);
  rep.lower_bound_ok = true;
  double prev = kInf;
  rep.alpha_limit_ok = true;
  rep.cutoff_limit_ok = true;
  for (double a : alphas) {
    ResolventResult r = resolvent(chain, f, a);
    double val = ratio(generator_of_resolvent(r, f, a), r.values);
    rep.resolvent_values.push_back(val);
    double err = std::abs(val - rep.base);
    if (err > prev + 1e-12) rep.alpha_limit_ok = false;
    prev = err;
    if (val < -a - 1e-10) rep.lower_bound_ok = false;
    std::vector<double> row;
    for (double nlevel : levels) {
      Eigen::VectorXd fn = f.cwiseMin(nlevel).cwiseMax(1.0 / nlevel);
      ResolventResult rn = resolvent(chain, fn, a);
      double v = ratio(generator_of_resolvent(rn, fn, a), rn.values);
      if (v < -a - 1e-10) rep.lower_bound_ok = false;
      row.push_back(v);
    }
    if (!row.empty() && std::abs(row.back() - val) > 1e-8) rep.cutoff_limit_ok = false;
    rep.cutoff_values.push_back(std::move(row));
  }
  return rep;
}

}  // namespace snsld
