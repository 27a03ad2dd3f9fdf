#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "snsld/chain.hpp"
#include "snsld/error.hpp"

using namespace snsld;

namespace {

double top_root_2x2(const Eigen::MatrixXd& m) {
  const double tr = m.trace(), det = m.determinant();
  return 0.5 * (tr + std::sqrt(tr * tr - 4.0 * det));
}

// (1/t) log 1' K^t 1 with renormalisation at every step.
double growth_rate(const Eigen::MatrixXd& k, int t) {
  Eigen::VectorXd v = Eigen::VectorXd::Ones(k.rows());
  double log_scale = 0.0;
  for (int s = 0; s < t; ++s) {
    v = k * v;
    const double top = v.maxCoeff();
    log_scale += std::log(top);
    v /= top;
  }
  return (log_scale + std::log(v.sum())) / t;
}

// Direct maximisation of sum_x lambda_x log(u_x / (P u)_x) over u = (1, e^s).
double rate_by_grid(const Eigen::MatrixXd& p, const Eigen::Vector2d& lambda) {
  double best = -1e300;
  for (int i = -40000; i <= 40000; ++i) {
    const double s = i * 5e-4;
    const Eigen::Vector2d u(1.0, std::exp(s));
    const Eigen::Vector2d pu = p * u;
    best = std::max(best, lambda[0] * std::log(u[0] / pu[0]) + lambda[1] * std::log(u[1] / pu[1]));
  }
  return best;
}

}  // namespace

TEST_CASE("principal eigenvalue of a tilted 2-state kernel matches the quadratic formula") {
  const auto chain = FiniteChain::discrete(fixtures::two_state());
  for (const auto& v : {Eigen::Vector2d(std::log(2.0), 0.0), Eigen::Vector2d(0.3, -1.2), Eigen::Vector2d(0.0, 0.0)}) {
    const auto k = tilt(chain, v);
    const auto pf = pf_eigen(k);
    CHECK(pf.converged);
    CHECK(pf.c == doctest::Approx(top_root_2x2(k.matrix)).epsilon(1e-13));
    CHECK(pf.log_c == doctest::Approx(std::log(pf.c)).epsilon(1e-15));
    CHECK((k.matrix * pf.h - pf.c * pf.h).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((k.matrix.transpose() * pf.mu - pf.c * pf.mu).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(pf.mu.sum() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(pf.h.dot(pf.mu) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK((pf.h.array() > 0.0).all());
  }
}

TEST_CASE("tilting by log 2 on both states doubles every row") {
  const auto chain = FiniteChain::discrete(fixtures::two_state());
  const auto pf = pf_eigen(tilt(chain, Eigen::Vector2d::Constant(std::log(2.0))));
  CHECK(pf.c == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(std::abs(pf.h[0] - pf.h[1]) <= 1e-14);
}

TEST_CASE("tilt by zero recovers the stationary law") {
  const auto chain = FiniteChain::discrete(fixtures::two_state());
  const auto pf = pf_eigen(tilt(chain, Eigen::Vector2d::Zero()));
  CHECK(pf.c == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(pf.mu[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-13));
  const auto pi = stationary(chain);
  CHECK((pi.transpose() * fixtures::two_state() - pi.transpose()).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("pressure is the long-time growth rate of the tilted semigroup") {
  NormalStream rng(31);
  for (int trial = 0; trial < 4; ++trial) {
    const auto chain = FiniteChain::discrete(fixtures::random_stochastic(4, rng));
    Eigen::VectorXd v(4);
    for (int i = 0; i < 4; ++i) v[i] = rng();
    CHECK(exact_pressure(chain, v) == doctest::Approx(growth_rate(tilt(chain, v).matrix, 4000)).epsilon(1e-3));
  }
}

TEST_CASE("continuous-time pressure is the top eigenvalue of G + diag(V)") {
  NormalStream rng(32);
  const auto chain = FiniteChain::continuous(fixtures::random_rates(3, rng));
  Eigen::VectorXd v(3);
  v << 0.5, -0.2, 1.0;
  Eigen::MatrixXd m = chain.matrix();
  m.diagonal() += v;
  const auto spec = dense_spectrum(m);
  double top = -1e300;
  for (Eigen::Index i = 0; i < spec.size(); ++i) top = std::max(top, spec[i].real());
  CHECK(exact_pressure(chain, v) == doctest::Approx(top).epsilon(1e-12));
  CHECK(exact_pressure(chain, Eigen::VectorXd::Zero(3)) == doctest::Approx(0.0).scale(1.0).epsilon(1e-13));
}

TEST_CASE("pressure is convex and shift covariant") {
  NormalStream rng(33);
  const auto chain = FiniteChain::discrete(fixtures::random_stochastic(3, rng));
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd a(3), b(3);
    for (int i = 0; i < 3; ++i) {
      a[i] = 2.0 * rng();
      b[i] = 2.0 * rng();
    }
    const double mid = exact_pressure(chain, 0.5 * (a + b));
    CHECK(mid <= 0.5 * (exact_pressure(chain, a) + exact_pressure(chain, b)) + 1e-12);
    CHECK(exact_pressure(chain, (a.array() + 0.7).matrix()) == doctest::Approx(exact_pressure(chain, a) + 0.7));
  }
}

TEST_CASE("level-2 rate of the 2-state chain agrees with direct maximisation") {
  const auto chain = FiniteChain::discrete(fixtures::two_state());
  for (double q : {0.1, 0.3, 0.5, 0.9}) {
    const Eigen::Vector2d lambda(1.0 - q, q);
    const double grid = rate_by_grid(fixtures::two_state(), lambda);
    CHECK(exact_rate_legendre(chain, lambda).value == doctest::Approx(grid).epsilon(1e-6));
    CHECK(exact_rate_variational(chain, lambda).value == doctest::Approx(grid).epsilon(1e-6));
  }
  CHECK(exact_rate_legendre(chain, Eigen::Vector2d(1.0, 0.0)).value == doctest::Approx(-std::log(0.9)).epsilon(1e-9));
}

TEST_CASE("rate vanishes only at the stationary law and is convex") {
  NormalStream rng(34);
  const auto chain = FiniteChain::continuous(fixtures::random_rates(3, rng));
  const auto pi = stationary(chain);
  CHECK(std::abs(exact_rate_legendre(chain, pi).value) <= 1e-10);
  Eigen::Vector3d a(0.6, 0.3, 0.1), b(0.1, 0.2, 0.7);
  const double ia = exact_rate_legendre(chain, a).value, ib = exact_rate_legendre(chain, b).value;
  CHECK(ia > 1e-4);
  CHECK(ib > 1e-4);
  CHECK(exact_rate_legendre(chain, 0.5 * (a + b)).value <= 0.5 * (ia + ib) + 1e-10);
}

TEST_CASE("MET error ratio approaches the spectral gap ratio") {
  const auto chain = FiniteChain::discrete(fixtures::two_state());
  const Eigen::Vector2d v(std::log(2.0), std::log(2.0));
  const auto rep = met_convergence(chain, v, Eigen::Vector2d(1.0, 0.0), 30);
  CHECK(rep.spectral_ratio == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(rep.tail_ratio == doctest::Approx(0.7).epsilon(1e-6));
  CHECK(rep.decay_ok);
  const auto flat = met_convergence(chain, v, Eigen::Vector2d(1.0, 1.0), 30);
  for (double e : flat.errors) CHECK(e <= 1e-14);
}

TEST_CASE("chain validation") {
  Eigen::MatrixXd bad(2, 2);
  bad << 0.5, 0.6, 0.2, 0.8;
  CHECK_THROWS_AS(FiniteChain::discrete(bad), ConfigError);
  Eigen::MatrixXd reducible(2, 2);
  reducible << 1.0, 0.0, 0.3, 0.7;
  const auto chain = FiniteChain::discrete(reducible);
  CHECK_FALSE(chain.irreducible());
  CHECK_THROWS_AS(stationary(chain), NotIrreducible);
  CHECK_THROWS_AS(pf_eigen(tilt(chain, Eigen::Vector2d::Zero())), NotIrreducible);
  CHECK_THROWS_AS(FiniteChain::discrete(fixtures::two_state()).semigroup(0.5), GridMismatch);
  CHECK_THROWS_AS(exact_rate_legendre(FiniteChain::discrete(fixtures::two_state()), Eigen::Vector2d(0.5, 0.6)),
                  ConfigError);
}

TEST_CASE("continuous semigroup satisfies the Chapman-Kolmogorov relation") {
  NormalStream rng(35);
  const auto chain = FiniteChain::continuous(fixtures::random_rates(4, rng));
  const Eigen::MatrixXd a = chain.semigroup(0.3) * chain.semigroup(0.9);
  CHECK((a - chain.semigroup(1.2)).cwiseAbs().maxCoeff() <= 1e-13);
  CHECK((chain.semigroup(2.0).rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-13);
}

TEST_CASE("LDP frequency of the degenerate ball matches the path probability") {
  const auto chain = FiniteChain::discrete(fixtures::two_state());
  const auto table = ldp_frequency(chain, Eigen::Vector2d(1.0, 0.0), 0.05, {10}, 20000, 3, Eigen::Vector2d(1.0, 0.0));
  const double p = std::pow(0.9, 9);
  const double se = std::sqrt(p * (1.0 - p) / 20000.0);
  CHECK(std::abs(table.rows[0].frequency - p) <= 4.0 * se);
  CHECK(table.inf_closed == doctest::Approx(table.inf_open).epsilon(1e-6));
  CHECK(table.inf_closed <= -std::log(0.9));
}

TEST_CASE("label distance between point masses") {
  CHECK(label_distance(Eigen::Vector2d(1.0, 0.0), Eigen::Vector2d(0.0, 1.0)) == doctest::Approx(2.0 / 3.0).epsilon(1e-7));
  CHECK(label_distance(Eigen::Vector2d(0.4, 0.6), Eigen::Vector2d(0.4, 0.6)) == 0.0);
}
