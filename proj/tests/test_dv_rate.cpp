#include <doctest.h>

#include <cmath>
#include <limits>

#include "fixtures.hpp"
#include "snsld/dv_rate.hpp"
#include "snsld/error.hpp"

using namespace snsld;

namespace {

double kl_rows(const Eigen::MatrixXd& q, const Eigen::MatrixXd& p, const Eigen::VectorXd& pi) {
  double s = 0.0;
  for (int x = 0; x < q.rows(); ++x)
    for (int y = 0; y < q.cols(); ++y)
      if (q(x, y) > 0.0) s += pi[x] * q(x, y) * std::log(q(x, y) / p(x, y));
  return s;
}

Eigen::MatrixXd uniform2() { return Eigen::MatrixXd::Constant(2, 2, 0.5); }

}  // namespace

TEST_CASE("relative entropy of probability vectors") {
  const Eigen::Vector3d a(0.2, 0.3, 0.5), b(0.4, 0.4, 0.2);
  const double expected = 0.2 * std::log(0.5) + 0.3 * std::log(0.75) + 0.5 * std::log(2.5);
  CHECK(relative_entropy(a, b) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(relative_entropy(a, a) == 0.0);
  CHECK(relative_entropy(Eigen::Vector2d(0.5, 0.5), Eigen::Vector2d(1.0, 0.0)) == std::numeric_limits<double>::infinity());
  CHECK(relative_entropy(Eigen::Vector2d(1.0, 0.0), Eigen::Vector2d(0.5, 0.5)) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("relative entropy of empirical measures matches atoms by point") {
  const auto a = EmpiricalMeasure::over_labels({0.2, 0.8});
  const auto b = EmpiricalMeasure::over_labels({0.5, 0.5});
  CHECK(relative_entropy(a, b) == doctest::Approx(relative_entropy(Eigen::Vector2d(0.2, 0.8), Eigen::Vector2d(0.5, 0.5))));
}

TEST_CASE("pattern search finds the maximiser of a concave quadratic") {
  const Eigen::Vector3d target(0.5, -1.25, 2.0);
  SearchOptions opts;
  opts.budget = 5000;
  opts.restarts = 2;
  const auto est = pattern_search([&](const Eigen::VectorXd& x) { return 3.0 - (x - target).squaredNorm(); },
                                  Eigen::VectorXd::Zero(3), opts);
  CHECK(est.value == doctest::Approx(3.0).epsilon(1e-8));
  REQUIRE(est.argmax_params.size() == 3);
  for (int i = 0; i < 3; ++i) CHECK(est.argmax_params[static_cast<std::size_t>(i)] == doctest::Approx(target[i]).epsilon(1e-4));
  CHECK(est.evaluations <= 5000);
  CHECK(est.restart_seeds.size() == 2);
}

TEST_CASE("searched Legendre rates bound the exact rate from below") {
  NormalStream rng(41);
  for (int trial = 0; trial < 3; ++trial) {
    const auto chain = FiniteChain::discrete(fixtures::random_stochastic(3, rng));
    const Eigen::Vector3d lambda(0.5, 0.3, 0.2);
    const double exact = exact_rate_legendre(chain, lambda).value;
    const auto full = legendre_rate(chain, lambda, ChainFamily::full);
    CHECK(full.value <= exact + 1e-9);
    CHECK(full.value == doctest::Approx(exact).epsilon(1e-5));
    const auto constants = legendre_rate(chain, lambda, ChainFamily::constants);
    CHECK(std::abs(constants.value) <= 1e-9);
  }
}

TEST_CASE("resolvent by quadrature matches the linear solve") {
  NormalStream rng(42);
  for (const auto& chain : {FiniteChain::discrete(fixtures::random_stochastic(4, rng)),
                            FiniteChain::continuous(fixtures::random_rates(4, rng))}) {
    const Eigen::Vector4d f(1.0, 0.5, 2.0, 1.5);
    for (double alpha : {0.5, 3.0, 50.0}) {
      const Eigen::MatrixXd a = alpha * Eigen::MatrixXd::Identity(4, 4) - chain.generator();
      const Eigen::VectorXd direct = a.partialPivLu().solve(f);
      const auto r = resolvent(chain, f, alpha);
      CHECK((r.values - direct).cwiseAbs().maxCoeff() <= 1e-10);
      CHECK((resolvent_exact(chain, f, alpha) - direct).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK_FALSE(r.tail_flagged);
      CHECK((generator_of_resolvent(r, f, alpha) - chain.generator() * r.values).cwiseAbs().maxCoeff() <= 1e-9);
    }
  }
}

TEST_CASE("generator finite differences converge to the generator") {
  NormalStream rng(43);
  const auto chain = FiniteChain::continuous(fixtures::random_rates(3, rng));
  GeneratorProbe probe;
  probe.chain = &chain;
  const Eigen::Vector3d f(1.0, -2.0, 0.5);
  CHECK((generator_apply(probe, f) - chain.matrix() * f).cwiseAbs().maxCoeff() == 0.0);
  CHECK((generator_finite_difference(probe, f) - chain.matrix() * f).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("variational rate search approaches the exact rate from below") {
  const auto chain = FiniteChain::discrete(fixtures::two_state());
  GeneratorProbe probe;
  probe.chain = &chain;
  const Eigen::Vector2d lambda(0.3, 0.7);
  const double exact = exact_rate_variational(chain, lambda).value;
  const auto est = variational_rate(lambda, probe);
  CHECK(est.value <= exact + 1e-9);
  CHECK(est.value == doctest::Approx(exact).epsilon(1e-6));
}

TEST_CASE("DV entropy of the fixture pair by direct summation") {
  const auto p = FiniteChain::discrete(fixtures::two_state());
  const auto q = FiniteChain::discrete(uniform2());
  const double expected = kl_rows(uniform2(), fixtures::two_state(), Eigen::Vector2d(0.5, 0.5));
  CHECK(dv_entropy(p, q, 1) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(expected == doctest::Approx(0.36698).epsilon(1e-4));
  CHECK(level3_rate_markov(p, q) == dv_entropy(p, q, 1));
  for (int t = 1; t <= 10; ++t) CHECK(dv_entropy(p, q, t) == t * dv_entropy(p, q, 1));
  CHECK(dv_entropy(p, p, 3) == 0.0);
  CHECK_THROWS(dv_entropy(p, FiniteChain::continuous(uniform2() - Eigen::MatrixXd::Identity(2, 2)), 1));
}

TEST_CASE("conditioning on a longer past does not change a Markov entropy") {
  NormalStream rng(44);
  const auto p = FiniteChain::discrete(fixtures::random_stochastic(3, rng));
  const auto q = FiniteChain::discrete(fixtures::random_stochastic(3, rng));
  const double h = level3_rate_markov(p, q);
  for (int k = 1; k <= 4; ++k) CHECK(past_conditioned_entropy(p, q, k) == doctest::Approx(h).epsilon(1e-12));
}

TEST_CASE("Doob transform is a stochastic matrix with invariant law h mu") {
  NormalStream rng(45);
  const auto chain = FiniteChain::discrete(fixtures::random_stochastic(4, rng));
  const Eigen::Vector4d v(0.2, -0.5, 1.0, 0.0);
  const Eigen::MatrixXd d = doob_transform(chain, v);
  CHECK((d.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-13);
  const auto pf = pf_eigen(tilt(chain, v));
  const Eigen::VectorXd inv = pf.h.cwiseProduct(pf.mu);
  CHECK((d.transpose() * inv - inv).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("contraction gap is non-negative and closes on the Doob witness") {
  NormalStream rng(46);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = FiniteChain::discrete(fixtures::random_stochastic(3, rng));
    const auto q = FiniteChain::discrete(fixtures::random_stochastic(3, rng));
    CHECK(contraction_gap(p, q) >= -1e-10);
  }
  const auto p = FiniteChain::discrete(fixtures::two_state());
  const auto w = contraction_equality_witness(p, Eigen::Vector2d(0.4, 0.6));
  CHECK(w.stationary[0] == doctest::Approx(0.4).epsilon(1e-10));
  CHECK(std::abs(w.gap) <= 1e-9);
  CHECK(w.rate == doctest::Approx(exact_rate_legendre(p, Eigen::Vector2d(0.4, 0.6)).value).epsilon(1e-9));
  CHECK(contraction_gap(p, FiniteChain::discrete(w.kernel)) == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
}

TEST_CASE("resolvent cutoff pipeline") {
  const auto chain = FiniteChain::discrete(fixtures::two_state());
  const auto rep = resolvent_cutoff_pipeline(chain, Eigen::Vector2d(1.0, 3.0), Eigen::Vector2d(0.4, 0.6),
                                             {1.0, 10.0, 100.0}, {1.0, 2.0, 10.0, 1000.0});
  CHECK(rep.alpha_limit_ok);
  CHECK(rep.cutoff_limit_ok);
  CHECK(rep.lower_bound_ok);
  CHECK(rep.resolvent_values.size() == 3);
}
