#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "snsld/error.hpp"
#include "snsld/feynman_kac.hpp"
#include "snsld/sde.hpp"

using namespace snsld;

namespace {

Trajectory line(std::size_t states, double dt, double slope) {
  Trajectory t(dt, 2);
  for (std::size_t i = 0; i < states; ++i) {
    State u(2);
    u << slope * static_cast<double>(i) * dt, 1.0;
    t.push_back(u);
  }
  return t;
}

}  // namespace

TEST_CASE("tanh potential evaluates its features on the projected state") {
  Potential v(2, 0.3, {{0.5, {1.0, -2.0}, 0.1}, {-0.25, {0.0, 1.0}, 0.0}});
  State u(3);
  u << 0.4, 0.2, 9.0;
  const double expected = 0.3 + 0.5 * std::tanh(0.4 - 0.4 + 0.1) - 0.25 * std::tanh(0.2);
  CHECK(v(u) == doctest::Approx(expected).epsilon(1e-15));
  CHECK(v.bound() == doctest::Approx(1.05));
  CHECK(v.shifted(-1.0)(u) == doctest::Approx(expected - 1.0).epsilon(1e-15));
  CHECK(v.shifted(-1.0).bound() == doctest::Approx(0.7 + 0.75));
  CHECK(std::abs(v(u)) <= v.bound());
  CHECK_THROWS_AS(Potential(2, 0.0, {{1.0, {1.0}, 0.0}}), DimensionMismatch);
  CHECK_THROWS_AS(Potential(-1, 0.0, {}), ConfigError);
}

TEST_CASE("trapezoid integral of a linear potential along a linear path is exact") {
  const auto traj = line(101, 0.01, 2.0);
  Potential v(1, 0.0, {});
  Potential lin(1, 0.5, {{1.0, {1.0}, 0.0}});
  CHECK(potential_integral(traj, Potential::constant(1.5), 1.0) == doctest::Approx(1.5).epsilon(1e-14));
  double exact = 0.0;
  for (int i = 0; i < 100; ++i) {
    exact += 0.5 * 0.01 * (std::tanh(2.0 * i * 0.01) + std::tanh(2.0 * (i + 1) * 0.01));
  }
  CHECK(potential_integral(traj, lin, 1.0) == doctest::Approx(0.5 + exact).epsilon(1e-13));
  CHECK(potential_integral(traj, lin, 0.0) == 0.0);
}

TEST_CASE("Feynman-Kac functional multiplies f(u_t) by the exponential weight") {
  const auto traj = line(51, 0.02, 1.0);
  const auto f = [](std::span<const double> x) { return 2.0 + x[0]; };
  CHECK(fk_functional(traj, Potential::constant(-0.4), f, 1.0) == doctest::Approx(3.0 * std::exp(-0.4)).epsilon(1e-14));
  CHECK_THROWS_AS(fk_functional(traj, Potential::constant(0.0), f, 2.0), GridMismatch);
}

TEST_CASE("constant potentials give exact semigroup values and pressures") {
  const auto model = fixtures::torus(1);
  const State u0 = State::Zero(model.n_modes());
  const auto est = fk_expectation(model, Potential::constant(0.7), [](std::span<const double>) { return 1.0; }, u0,
                                  0.5, 0.01, 16, 1);
  CHECK(est.mean == doctest::Approx(std::exp(0.35)).epsilon(1e-13));
  CHECK(est.std_error <= 1e-12);
  const auto q = pressure_mc(model, Potential::constant(-0.3), {1.0, 2.0, 3.0}, 0.01, 8, 2, fixed_initial(u0));
  CHECK(q.value == doctest::Approx(-0.3).epsilon(1e-14));
}

TEST_CASE("bounded potential keeps the model pressure inside [-sup|V|, sup|V|]") {
  const auto model = fixtures::torus(1);
  Potential v(2, 0.1, {{0.8, {1.0, 0.5}, 0.0}});
  const auto q = pressure_mc(model, v, {2.0, 3.0, 4.0}, 0.01, 200, 5, fixed_initial(State::Zero(model.n_modes())));
  CHECK(std::abs(q.value) <= v.bound());
  CHECK(q.count == 200);
  CHECK(q.blowups == 0);
}

TEST_CASE("chain pressure from jump paths agrees with the principal eigenvalue") {
  Eigen::MatrixXd g(2, 2);
  g << -0.5, 0.5, 1.0, -1.0;
  const auto chain = FiniteChain::continuous(g);
  const Eigen::Vector2d v(0.6, -0.2);
  const auto est = pressure_mc(chain, v, {10, 15, 20}, 10000, 9, Eigen::Vector2d(0.5, 0.5));
  CHECK(std::abs(est.value - exact_pressure(chain, v)) <= 4.0 * est.std_error + 1e-3);
  CHECK(est.std_error > 0.0);
}

TEST_CASE("jump path integrals are piecewise constant sums") {
  NormalStream rng(4);
  Eigen::MatrixXd g(2, 2);
  g << -1.0, 1.0, 2.0, -2.0;
  const auto chain = FiniteChain::continuous(g);
  const auto path = simulate_jump_path(chain, 0, 5.0, rng);
  CHECK(path.states.front() == 0);
  CHECK(path.times.front() == 0.0);
  const Eigen::Vector2d v(1.0, 1.0);
  CHECK(path.integral(v, 5.0) == doctest::Approx(5.0).epsilon(1e-14));
  const Eigen::Vector2d ind(1.0, 0.0);
  const double in_zero = path.integral(ind, 5.0);
  CHECK(in_zero >= 0.0);
  CHECK(in_zero <= 5.0);
  CHECK(in_zero + path.integral(Eigen::Vector2d(0.0, 1.0), 5.0) == doctest::Approx(5.0));
}

TEST_CASE("Duhamel identity on chains: Gauss-Legendre beats the trapezoid rule") {
  NormalStream rng(5);
  const auto chain = FiniteChain::continuous(fixtures::random_rates(3, rng));
  const Eigen::Vector3d v(0.3, -0.6, 1.0), f(1.0, 2.0, 0.5);
  const auto gl = duhamel_residual(chain, v, f, 2.0, 20, QuadratureKind::gauss_legendre);
  const auto tr = duhamel_residual(chain, v, f, 2.0, 20, QuadratureKind::trapezoid);
  CHECK(gl.residual <= 1e-10);
  CHECK(tr.residual > gl.residual);
  CHECK(tr.residual <= 1e-2);
  const auto disc = duhamel_residual(FiniteChain::discrete(fixtures::two_state()), Eigen::Vector2d(0.2, -0.1),
                                     Eigen::Vector2d(1.0, 3.0), 7.0);
  CHECK(disc.residual <= 1e-12);
}

TEST_CASE("Duhamel identity along model paths holds within Monte Carlo error") {
  const auto model = fixtures::torus(1);
  Potential v(2, 0.0, {{0.5, {1.0, 0.0}, 0.0}});
  const auto f = [](std::span<const double> x) { return std::cos(x[0]); };
  std::vector<State> probes{State::Zero(model.n_modes()), State::Ones(model.n_modes())};
  const auto rep = duhamel_residual(model, v, f, probes, 0.5, 0.01, 400, 3);
  CHECK(rep.residual <= 4.0 * rep.std_error + 1e-3);
}

TEST_CASE("window potentials read whole path segments") {
  Potential v = window_potential(0.0, {{1.0, {1.0, 1.0, 1.0}, 0.0}}, 1, 0.02, 0.01);
  CHECK(v.window_points() == 3);
  const auto traj = line(11, 0.01, 1.0);
  const std::vector<double> seg{traj.row(2), traj.row(2) + 6};
  CHECK(v(seg, 2) == doctest::Approx(std::tanh(0.02 + 0.03 + 0.04)).epsilon(1e-14));
  CHECK_THROWS_AS(potential_integral(traj, v, 0.1), GridMismatch);
  CHECK_NOTHROW(potential_integral(traj, v, 0.08));
}
