#include "snsld/chain.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <queue>

#include <Eigen/Eigenvalues>

#include "snsld/error.hpp"
#include "snsld/linalg.hpp"
#include "snsld/parallel.hpp"
#include "snsld/rng.hpp"
#include "snsld/transport.hpp"

namespace snsld {

namespace {

constexpr double kRowTol = 1e-12;

void check_square(const Eigen::MatrixXd& m) {
  if (m.rows() == 0 || m.rows() != m.cols()) throw DimensionMismatch("chain matrix must be square and non-empty");
  if (!m.allFinite()) throw ConfigError("chain matrix has non-finite entries");
}

std::vector<std::string> default_labels(int n, std::vector<std::string> labels) {
  if (labels.empty()) {
    for (int i = 0; i < n; ++i) labels.push_back("s" + std::to_string(i));
  }
  if (static_cast<int>(labels.size()) != n) throw DimensionMismatch("label count differs from state count");
  return labels;
}

bool reaches_all(const Eigen::MatrixXd& m, bool transpose) {
  const int n = static_cast<int>(m.rows());
  std::vector<char> seen(n, 0);
  std::queue<int> q;
  q.push(0);
  seen[0] = 1;
  int count = 1;
  while (!q.empty()) {
    int x = q.front();
    q.pop();
    for (int y = 0; y < n; ++y) {
      double w = transpose ? m(y, x) : m(x, y);
      if (y != x && w > 0.0 && !seen[y]) {
        seen[y] = 1;
        ++count;
        q.push(y);
      }
    }
  }
  return count == n;
}

void require_irreducible(const FiniteChain& chain) {
  if (!chain.irreducible()) throw NotIrreducible("chain is not irreducible");
}

void check_potential(const FiniteChain& chain, const Eigen::VectorXd& v) {
  if (v.size() != chain.size()) throw DimensionMismatch("potential length differs from state count");
}

// Symmetric positive semidefinite solve with eigenvalue flooring.
Eigen::VectorXd floored_solve(const Eigen::MatrixXd& h, const Eigen::VectorXd& g) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (h + h.transpose()));
  const Eigen::VectorXd& ev = es.eigenvalues();
  double top = std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
  double floor = 1e-13 * top + 1e-300;
  Eigen::VectorXd coeff = es.eigenvectors().transpose() * g;
  for (Eigen::Index i = 0; i < coeff.size(); ++i) coeff(i) /= std::max(ev(i), floor);
  return es.eigenvectors() * coeff;
}

struct Local {
  double value = 0.0;
  Eigen::VectorXd grad;  // full length n
  Eigen::MatrixXd hess;  // full n x n, concave objective
};

// Newton ascent on a concave objective invariant under adding constants;
// coordinate 0 is pinned at zero.
template <class Eval>
ChainRate newton_ascent(int n, Eval&& eval, int budget) {
  ChainRate out;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  out.argmax = x;
  if (n == 1) {
    Local l = eval(x, false);
    out.value = l.value;
    out.converged = true;
    return out;
  }
  Local cur = eval(x, true);
  const double gtol = 1e-11;
  int it = 0;
  for (; it < budget; ++it) {
    Eigen::VectorXd g = cur.grad.tail(n - 1);
    out.gradient_norm = g.cwiseAbs().maxCoeff();
    if (out.gradient_norm <= gtol) break;
    Eigen::MatrixXd negh = -cur.hess.bottomRightCorner(n - 1, n - 1);
    Eigen::VectorXd p = floored_solve(negh, g);
    double cap = p.cwiseAbs().maxCoeff();
    if (!(cap <= 20.0)) p *= 20.0 / cap;
    if (!p.allFinite()) p = g;
    bool moved = false;
    for (int attempt = 0; attempt < 2 && !moved; ++attempt) {
      if (attempt == 1) {
        p = g;
        double c = p.cwiseAbs().maxCoeff();
        if (c > 1.0) p /= c;
      }
      double step = 1.0;
      for (int ls = 0; ls < 60; ++ls, step *= 0.5) {
        Eigen::VectorXd trial = x;
        trial.tail(n - 1) += step * p;
        Local next = eval(trial, false);
        if (std::isfinite(next.value) && next.value > cur.value) {
          x = trial;
          cur = eval(x, true);
          moved = true;
          break;
        }
      }
    }
    if (!moved) break;
  }
  out.gradient_norm = cur.grad.tail(n - 1).cwiseAbs().maxCoeff();
  out.value = cur.value;
  out.argmax = x;
  out.iterations = it;
  out.converged = out.gradient_norm <= 1e-8;
  return out;
}

Eigen::VectorXd check_lambda(const FiniteChain& chain, const Eigen::VectorXd& lambda) {
  if (lambda.size() != chain.size()) throw DimensionMismatch("measure length differs from state count");
  if ((lambda.array() < -1e-12).any() || std::abs(lambda.sum() - 1.0) > 1e-9)
    throw ConfigError("lambda must be a probability vector");
  return lambda.cwiseMax(0.0);
}

}  // namespace

FiniteChain::FiniteChain(Clocking c, Eigen::MatrixXd m, std::vector<std::string> labels)
    : clocking_(c), matrix_(std::move(m)), labels_(std::move(labels)) {}

FiniteChain FiniteChain::discrete(Eigen::MatrixXd p, std::vector<std::string> labels) {
  check_square(p);
  if ((p.array() < 0.0).any()) throw ConfigError("transition matrix has negative entries");
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    if (std::abs(p.row(i).sum() - 1.0) > kRowTol) throw ConfigError("transition matrix row does not sum to 1");
  }
  int n = static_cast<int>(p.rows());
  return FiniteChain(Clocking::discrete, std::move(p), default_labels(n, std::move(labels)));
}

FiniteChain FiniteChain::continuous(Eigen::MatrixXd g, std::vector<std::string> labels) {
  check_square(g);
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    for (Eigen::Index j = 0; j < g.cols(); ++j) {
      if (i != j && g(i, j) < 0.0) throw ConfigError("generator has negative off-diagonal entries");
    }
    double scale = std::max(1.0, std::abs(g(i, i)));
    if (std::abs(g.row(i).sum()) > kRowTol * scale) throw ConfigError("generator row does not sum to 0");
  }
  int n = static_cast<int>(g.rows());
  return FiniteChain(Clocking::continuous, std::move(g), default_labels(n, std::move(labels)));
}

bool FiniteChain::irreducible() const {
  if (size() == 1) return true;
  return reaches_all(matrix_, false) && reaches_all(matrix_, true);
}

Eigen::MatrixXd FiniteChain::semigroup(double t) const {
  if (clocking_ == Clocking::continuous) return expm(t * matrix_);
  double r = std::round(t);
  if (t < 0.0 || std::abs(t - r) > 1e-9) throw GridMismatch("discrete semigroup needs a non-negative integer time");
  Eigen::MatrixXd out = Eigen::MatrixXd::Identity(size(), size());
  for (long k = 0; k < static_cast<long>(r); ++k) out = out * matrix_;
  return out;
}

Eigen::MatrixXd FiniteChain::generator() const {
  if (clocking_ == Clocking::continuous) return matrix_;
  return matrix_ - Eigen::MatrixXd::Identity(size(), size());
}

Eigen::MatrixXd TiltedKernel::semigroup(double t) const {
  if (clocking == Clocking::continuous) return expm(t * matrix);
  double r = std::round(t);
  if (t < 0.0 || std::abs(t - r) > 1e-9) throw GridMismatch("discrete semigroup needs a non-negative integer time");
  Eigen::MatrixXd out = Eigen::MatrixXd::Identity(matrix.rows(), matrix.cols());
  for (long k = 0; k < static_cast<long>(r); ++k) out = out * matrix;
  return out;
}

TiltedKernel tilt(const FiniteChain& chain, const Eigen::VectorXd& potential) {
  check_potential(chain, potential);
  TiltedKernel k;
  k.clocking = chain.clocking();
  k.base = chain.matrix();
  k.potential = potential;
  if (k.clocking == Clocking::discrete) {
    k.matrix = potential.array().exp().matrix().asDiagonal() * chain.matrix();
  } else {
    k.matrix = chain.matrix();
    k.matrix.diagonal() += potential;
  }
  return k;
}

TiltedKernel tilt(const TiltedKernel& kernel, const Eigen::VectorXd& potential) {
  if (potential.size() != kernel.potential.size()) throw DimensionMismatch("potential length differs from state count");
  TiltedKernel k = kernel;
  k.potential += potential;
  if (k.clocking == Clocking::discrete) {
    k.matrix = potential.array().exp().matrix().asDiagonal() * kernel.matrix;
  } else {
    k.matrix.diagonal() += potential;
  }
  return k;
}

namespace {

// Principal eigenvector of a non-negative primitive matrix b.
Eigen::VectorXd principal_vector(const Eigen::MatrixXd& b, double tol, int max_iter, int& iters, double& rho) {
  const Eigen::Index n = b.rows();
  Eigen::VectorXd h = Eigen::VectorXd::Ones(n);
  rho = 0.0;
  for (iters = 0; iters < max_iter; ++iters) {
    Eigen::VectorXd y = b * h;
    double top = y.cwiseAbs().maxCoeff();
    if (!(top > 0.0)) break;
    rho = y.dot(h) / h.dot(h);
    double res = (y - rho * h).cwiseAbs().maxCoeff() / top;
    h = y / top;
    if (res < std::max(tol, 1e-7)) break;
  }
  // Inverse iteration with a shift just above the Perron root.
  double sigma = rho * (1.0 + 1e-9) + 1e-300;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(b - sigma * Eigen::MatrixXd::Identity(n, n));
  for (int k = 0; k < 4; ++k) {
    Eigen::VectorXd y = lu.solve(h);
    if (!y.allFinite()) break;
    double top = y.cwiseAbs().maxCoeff();
    if (!(top > 0.0)) break;
    y /= top;
    if (y.sum() < 0.0) y = -y;
    h = y;
  }
  h = h.cwiseAbs();
  return h / h.maxCoeff();
}

}  // namespace

PFData pf_eigen(const TiltedKernel& kernel, double tol, int max_iter) {
  const Eigen::MatrixXd& m = kernel.matrix;
  const Eigen::Index n = m.rows();
  if (n == 0) throw DimensionMismatch("empty kernel");
  if (!reaches_all(m, false) || !reaches_all(m, true)) {
    if (n > 1) throw NotIrreducible("tilted kernel is not irreducible");
  }
  double min_diag = m.diagonal().minCoeff();
  double shift = std::max(0.0, -min_diag) + 0.5 * m.cwiseAbs().maxCoeff();
  Eigen::MatrixXd b = m + shift * Eigen::MatrixXd::Identity(n, n);

  PFData out;
  int it_r = 0, it_l = 0;
  double rho_r = 0.0, rho_l = 0.0;
  Eigen::VectorXd h = principal_vector(b, tol, max_iter, it_r, rho_r);
  Eigen::VectorXd mu = principal_vector(b.transpose(), tol, max_iter, it_l, rho_l);
  mu /= mu.sum();
  double lam = mu.dot(m * h) / mu.dot(h);
  h /= h.dot(mu);

  out.iterations = std::max(it_r, it_l);
  double rr = (m * h - lam * h).cwiseAbs().maxCoeff() / h.cwiseAbs().maxCoeff();
  double rl = (m.transpose() * mu - lam * mu).cwiseAbs().maxCoeff() / mu.cwiseAbs().maxCoeff();
  out.residual = std::max(rr, rl);
  if (kernel.clocking == Clocking::discrete) {
    out.c = lam;
    out.log_c = std::log(lam);
  } else {
    out.log_c = lam;
    out.c = std::exp(lam);
  }
  out.h = h;
  out.mu = mu;
  double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  out.converged = out.residual <= std::max(100.0 * tol, 1e-10) * scale && (h.array() > 0.0).all() &&
                  (mu.array() >= 0.0).all();
  return out;
}

Eigen::VectorXcd dense_spectrum(const Eigen::MatrixXd& m) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
  return es.eigenvalues();
}

Eigen::VectorXd stationary(const FiniteChain& chain) {
  require_irreducible(chain);
  const int n = chain.size();
  Eigen::MatrixXd a = chain.generator().transpose();
  a.row(n - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs(n - 1) = 1.0;
  Eigen::VectorXd pi = a.fullPivLu().solve(rhs);
  pi = pi.cwiseMax(0.0);
  return pi / pi.sum();
}

double exact_pressure(const FiniteChain& chain, const Eigen::VectorXd& potential) {
  require_irreducible(chain);
  return pf_eigen(tilt(chain, potential)).log_c;
}

ChainRate exact_rate_legendre(const FiniteChain& chain, const Eigen::VectorXd& lambda_in, int budget) {
  require_irreducible(chain);
  Eigen::VectorXd lambda = check_lambda(chain, lambda_in);
  const int n = chain.size();
  auto grad_at = [&](const Eigen::VectorXd& v, double& value) {
    PFData pf = pf_eigen(tilt(chain, v));
    value = v.dot(lambda) - pf.log_c;
    return Eigen::VectorXd(lambda - pf.mu.cwiseProduct(pf.h));
  };
  auto eval = [&](const Eigen::VectorXd& v, bool second) {
    Local l;
    l.grad = grad_at(v, l.value);
    if (second) {
      const double eps = 1e-5;
      l.hess.resize(n, n);
      double dummy = 0.0;
      for (int j = 0; j < n; ++j) {
        Eigen::VectorXd vp = v, vm = v;
        vp(j) += eps;
        vm(j) -= eps;
        l.hess.col(j) = (grad_at(vp, dummy) - grad_at(vm, dummy)) / (2.0 * eps);
      }
      l.hess = 0.5 * (l.hess + l.hess.transpose()).eval();
    }
    return l;
  };
  return newton_ascent(n, eval, budget);
}

double variational_objective(const FiniteChain& chain, const Eigen::VectorXd& lambda, const Eigen::VectorXd& f) {
  if (f.size() != chain.size() || lambda.size() != chain.size()) throw DimensionMismatch("vector length differs from state count");
  if ((f.array() <= 0.0).any()) throw ConfigError("test function must be strictly positive");
  Eigen::VectorXd lf = chain.generator() * f;
  double total = 0.0;
  if (chain.clocking() == Clocking::discrete) {
    Eigen::VectorXd pf = chain.matrix() * f;
    for (int x = 0; x < chain.size(); ++x) {
      if (lambda(x) > 0.0) total += lambda(x) * std::log(f(x) / pf(x));
    }
  } else {
    for (int x = 0; x < chain.size(); ++x) {
      if (lambda(x) > 0.0) total += lambda(x) * (-lf(x) / f(x));
    }
  }
  return total;
}

ChainRate exact_rate_variational(const FiniteChain& chain, const Eigen::VectorXd& lambda_in, int budget) {
  require_irreducible(chain);
  Eigen::VectorXd lambda = check_lambda(chain, lambda_in);
  const int n = chain.size();
  const Eigen::MatrixXd& m = chain.matrix();
  const bool disc = chain.clocking() == Clocking::discrete;
  auto eval = [&](const Eigen::VectorXd& g, bool second) {
    Local l;
    l.value = 0.0;
    l.grad = Eigen::VectorXd::Zero(n);
    if (second) l.hess = Eigen::MatrixXd::Zero(n, n);
    if (disc) {
      l.grad = lambda;
      for (int x = 0; x < n; ++x) {
        if (lambda(x) == 0.0) continue;
        // log-sum-exp of log P(x,y) + g_y
        double top = -std::numeric_limits<double>::infinity();
        for (int y = 0; y < n; ++y) {
          if (m(x, y) > 0.0) top = std::max(top, std::log(m(x, y)) + g(y));
        }
        Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
        double s = 0.0;
        for (int y = 0; y < n; ++y) {
          if (m(x, y) > 0.0) {
            w(y) = std::exp(std::log(m(x, y)) + g(y) - top);
            s += w(y);
          }
        }
        w /= s;
        l.value += lambda(x) * (g(x) - top - std::log(s));
        l.grad -= lambda(x) * w;
        if (second) {
          l.hess -= lambda(x) * (Eigen::MatrixXd(w.asDiagonal()) - w * w.transpose());
        }
      }
    } else {
      for (int x = 0; x < n; ++x) {
        if (lambda(x) == 0.0) continue;
        l.value -= lambda(x) * m(x, x);
        for (int y = 0; y < n; ++y) {
          if (y == x || m(x, y) == 0.0) continue;
          double a = lambda(x) * m(x, y) * std::exp(g(y) - g(x));
          l.value -= a;
          l.grad(x) += a;
          l.grad(y) -= a;
          if (second) {
            l.hess(x, x) -= a;
            l.hess(y, y) -= a;
            l.hess(x, y) += a;
            l.hess(y, x) += a;
          }
        }
      }
    }
    return l;
  };
  ChainRate r = newton_ascent(n, eval, budget);
  r.argmax = r.argmax.array().exp().matrix();
  return r;
}

MetReport met_convergence(const FiniteChain& chain, const Eigen::VectorXd& potential, const Eigen::VectorXd& f,
                          int horizon) {
  require_irreducible(chain);
  if (f.size() != chain.size()) throw DimensionMismatch("function length differs from state count");
  TiltedKernel k = tilt(chain, potential);
  PFData pf = pf_eigen(k);
  Eigen::MatrixXd step = k.semigroup(1.0) / pf.c;
  Eigen::VectorXd limit = f.dot(pf.mu) * pf.h;
  MetReport rep;
  Eigen::VectorXd y = f;
  for (int t = 1; t <= horizon; ++t) {
    y = step * y;
    rep.errors.push_back((y - limit).cwiseAbs().maxCoeff());
  }
  Eigen::VectorXcd ev = dense_spectrum(k.matrix);
  if (chain.size() > 1) {
    if (k.clocking == Clocking::discrete) {
      std::vector<double> mod;
      for (Eigen::Index i = 0; i < ev.size(); ++i) mod.push_back(std::abs(ev(i)));
      std::sort(mod.rbegin(), mod.rend());
      rep.spectral_ratio = mod[1] / pf.c;
    } else {
      std::vector<double> re;
      for (Eigen::Index i = 0; i < ev.size(); ++i) re.push_back(ev(i).real());
      std::sort(re.rbegin(), re.rend());
      rep.spectral_ratio = std::exp(re[1] - pf.log_c);
    }
  }
  double floor = 1e-11 * std::max(1.0, limit.cwiseAbs().maxCoeff());
  for (std::size_t t = 0; t + 1 < rep.errors.size(); ++t) {
    if (rep.errors[t] > floor && rep.errors[t + 1] > floor) {
      rep.ratios.push_back(rep.errors[t + 1] / rep.errors[t]);
    }
  }
  rep.tail_ratio = rep.ratios.empty() ? 0.0 : rep.ratios.back();
  rep.decay_ok = rep.tail_ratio <= rep.spectral_ratio + 0.05;
  return rep;
}

double label_distance(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  if (p.size() != q.size()) throw DimensionMismatch("measure lengths differ");
  const Eigen::Index n = p.size();
  std::vector<double> supply(n), demand(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double d = p(i) - q(i);
    supply[i] = std::max(d, 0.0);
    demand[i] = std::max(-d, 0.0);
  }
  Eigen::MatrixXd dist = Eigen::MatrixXd::Ones(n, n) - Eigen::MatrixXd::Identity(n, n);
  return bounded_lipschitz_dual(supply, demand, dist);
}

double rate_inf_over_ball(const FiniteChain& chain, const Eigen::VectorXd& center, double radius, bool open) {
  const int n = chain.size();
  const double r = open ? radius * (1.0 - 1e-9) : radius * (1.0 + 1e-12) + 1e-15;
  auto rate = [&](const Eigen::VectorXd& lam) { return exact_rate_legendre(chain, lam).value; };
  if (n == 2) {
    auto point = [](double q) {
      Eigen::VectorXd v(2);
      v << 1.0 - q, q;
      return v;
    };
    const double qc = center(1);
    auto inside = [&](double q) { return label_distance(point(q), center) <= r; };
    auto edge = [&](double far) {
      if (inside(far)) return far;
      double lo = qc, hi = far;
      for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        (inside(mid) ? lo : hi) = mid;
      }
      return lo;
    };
    double a = edge(0.0), b = edge(1.0);
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double best = std::min(rate(point(a)), rate(point(b)));
    double x1 = b - g * (b - a), x2 = a + g * (b - a);
    double f1 = rate(point(x1)), f2 = rate(point(x2));
    for (int i = 0; i < 80 && b - a > 1e-12; ++i) {
      if (f1 < f2) {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - g * (b - a);
        f1 = rate(point(x1));
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + g * (b - a);
        f2 = rate(point(x2));
      }
    }
    return std::min({best, f1, f2});
  }
  const int steps = 40;
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> c(n, 0);
  // enumerate compositions of `steps` into n parts
  std::function<void(int, int)> rec = [&](int idx, int left) {
    if (idx == n - 1) {
      c[idx] = left;
      Eigen::VectorXd lam(n);
      for (int i = 0; i < n; ++i) lam(i) = static_cast<double>(c[i]) / steps;
      if (label_distance(lam, center) <= r) best = std::min(best, rate(lam));
      return;
    }
    for (int k = 0; k <= left; ++k) {
      c[idx] = k;
      rec(idx + 1, left - k);
    }
  };
  rec(0, steps);
  return best;
}

LdpTable ldp_frequency(const FiniteChain& chain, const Eigen::VectorXd& center, double radius,
                       const std::vector<int>& k_list, std::size_t samples, std::uint64_t seed,
                       const Eigen::VectorXd& initial, double slack) {
  if (chain.clocking() != Clocking::discrete) throw ConfigError("ldp_frequency needs a discrete-clock chain");
  require_irreducible(chain);
  const int n = chain.size();
  if (center.size() != n || initial.size() != n) throw DimensionMismatch("vector length differs from state count");
  if (k_list.empty() || samples == 0) throw ConfigError("ldp_frequency needs k values and samples");
  std::vector<int> ks = k_list;
  std::sort(ks.begin(), ks.end());
  const int kmax = ks.back();
  if (ks.front() <= 0) throw ConfigError("k values must be positive");

  Eigen::MatrixXd cum(n, n);
  for (int x = 0; x < n; ++x) {
    double s = 0.0;
    for (int y = 0; y < n; ++y) cum(x, y) = (s += chain.matrix()(x, y));
  }
  Eigen::VectorXd init_cum(n);
  {
    double s = 0.0;
    for (int x = 0; x < n; ++x) init_cum(x) = (s += initial(x) / initial.sum());
  }
  auto pick = [n](double u, auto&& row) {
    for (int y = 0; y < n - 1; ++y) {
      if (u < row(y)) return y;
    }
    return n - 1;
  };

  // counts[i * ks.size() + j] holds the occupation counts of sample i at k_j
  std::vector<std::vector<int>> counts(samples * ks.size());
  parallel_for(samples, [&](std::size_t i) {
    NormalStream rng(split_seed(seed, i));
    std::vector<int> occ(n, 0);
    int x = pick(rng.uniform(), [&](int y) { return init_cum(y); });
    std::size_t j = 0;
    for (int t = 1; t <= kmax; ++t) {
      ++occ[x];
      if (t == ks[j]) {
        counts[i * ks.size() + j] = occ;
        ++j;
      }
      if (t < kmax) x = pick(rng.uniform(), [&](int y) { return cum(x, y); });
    }
  });

  LdpTable table;
  table.center = center;
  table.radius = radius;
  table.seed = seed;
  table.slack = slack;
  const double r = radius * (1.0 + 1e-12) + 1e-15;
  for (std::size_t j = 0; j < ks.size(); ++j) {
    std::map<std::vector<int>, bool> memo;
    LdpRow row;
    row.k = ks[j];
    row.samples = samples;
    for (std::size_t i = 0; i < samples; ++i) {
      const std::vector<int>& occ = counts[i * ks.size() + j];
      auto it = memo.find(occ);
      if (it == memo.end()) {
        Eigen::VectorXd zeta(n);
        for (int x = 0; x < n; ++x) zeta(x) = static_cast<double>(occ[x]) / row.k;
        it = memo.emplace(occ, label_distance(zeta, center) <= r).first;
      }
      if (it->second) ++row.hits;
    }
    const double nn = static_cast<double>(samples);
    row.frequency = row.hits / nn;
    const double z = 1.959963984540054;
    double phat = row.frequency;
    double denom = 1.0 + z * z / nn;
    double mid = (phat + z * z / (2.0 * nn)) / denom;
    double half = z * std::sqrt(phat * (1.0 - phat) / nn + z * z / (4.0 * nn * nn)) / denom;
    double lo = std::max(mid - half, 0.0), hi = std::min(mid + half, 1.0);
    const double inf = std::numeric_limits<double>::infinity();
    row.empirical_rate = row.hits > 0 ? -std::log(phat) / row.k : inf;
    row.rate_lo = -std::log(hi) / row.k;
    row.rate_hi = lo > 0.0 ? -std::log(lo) / row.k : inf;
    row.wide_interval = row.hits < 10 || !(row.rate_hi - row.rate_lo <= slack);
    table.rows.push_back(row);
  }
  table.inf_closed = rate_inf_over_ball(chain, center, radius, false);
  table.inf_open = rate_inf_over_ball(chain, center, radius, true);
  const LdpRow& last = table.rows.back();
  table.bracketed = std::isfinite(last.empirical_rate) && last.empirical_rate >= table.inf_closed - slack &&
                    last.empirical_rate <= table.inf_open + slack;
  return table;
}

}  // namespace snsld
