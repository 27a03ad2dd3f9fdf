#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "fixtures.hpp"
#include "snsld/empirical.hpp"
#include "snsld/error.hpp"
#include "snsld/sde.hpp"
#include "snsld/transport.hpp"

using namespace snsld;

namespace {

Trajectory ramp(std::size_t states, double dt = 0.1) {
  Trajectory t(dt, 1);
  for (std::size_t i = 0; i < states; ++i) {
    State u(1);
    u << static_cast<double>(i);
    t.push_back(u);
  }
  return t;
}

EmpiricalMeasure point_mass(double x) {
  EmpiricalMeasure mu(SpaceKind::state, 1, 1, 0.1);
  mu.add_atom(std::span<const double>(&x, 1), 1.0);
  return mu;
}

}  // namespace

TEST_CASE("occupation measure puts weight 1/m on the left-endpoint grid") {
  const auto traj = ramp(11);
  const auto mu = occupation_measure(traj, 0.5);
  REQUIRE(mu.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(mu.point(i)[0] == static_cast<double>(i));
    CHECK(mu.weight(i) == doctest::Approx(0.2));
  }
  CHECK(mu.integrate([](std::span<const double> x) { return x[0]; }) == doctest::Approx(2.0));
  CHECK(mu.total_weight() == doctest::Approx(1.0));
  CHECK_THROWS_AS(occupation_measure(traj, 0.0), GridMismatch);
  CHECK_THROWS_AS(occupation_measure(traj, 0.55), GridMismatch);
  CHECK_THROWS_AS(occupation_measure(traj, 2.0), GridMismatch);
}

TEST_CASE("integration is linear and bounded by the sup norm") {
  const auto model = fixtures::torus(1);
  const auto traj = simulate(model, State::Zero(model.n_modes()), 1.0, 0.01, 3);
  const auto mu = occupation_measure(traj, 1.0);
  auto f = [](std::span<const double> x) { return std::tanh(x[0] - x[1]); };
  auto g = [](std::span<const double> x) { return std::sin(x[2]); };
  const double lhs = mu.integrate([&](std::span<const double> x) { return 2.0 * f(x) - 3.0 * g(x); });
  CHECK(lhs == doctest::Approx(2.0 * mu.integrate(f) - 3.0 * mu.integrate(g)).epsilon(1e-13));
  CHECK(std::abs(mu.integrate(f)) <= 1.0);
}

TEST_CASE("window measures") {
  const auto traj = ramp(21);
  const auto fwd = windowed_empirical(traj, 0.3, 0.5);
  REQUIRE(fwd.size() == 5);
  CHECK(fwd.window_points() == 4);
  CHECK(fwd.point(2)[0] == 2.0);
  CHECK(fwd.point(2)[3] == 5.0);
  const auto back = windowed_empirical(traj, 0.3, 0.5, true);
  CHECK(back.point(1)[0] == 0.0);
  CHECK(back.point(1)[3] == 1.0);
  CHECK(back.point(4)[0] == 1.0);
  CHECK_THROWS_AS(windowed_empirical(traj, 1.0, 1.5), GridMismatch);
}

TEST_CASE("periodized measure of a window no longer than the period is every rotation") {
  const auto traj = ramp(6);
  const auto mu = periodized_empirical(traj, 0.5, 0.2);
  REQUIRE(mu.size() == 5);
  std::set<std::vector<double>> atoms;
  for (std::size_t i = 0; i < mu.size(); ++i) atoms.insert({mu.point(i).begin(), mu.point(i).end()});
  std::set<std::vector<double>> rotations;
  for (int s = 0; s < 5; ++s) {
    rotations.insert({static_cast<double>(s % 5), static_cast<double>((s + 1) % 5), static_cast<double>((s + 2) % 5)});
  }
  CHECK(atoms == rotations);
}

TEST_CASE("periodization at t = dt is a point mass at the constant window") {
  const auto traj = ramp(5);
  const auto mu = periodized_empirical(traj, 0.1, 0.3);
  REQUIRE(mu.size() == 1);
  for (std::size_t i = 0; i < mu.point_size(); ++i) CHECK(mu.point(0)[i] == 0.0);
}

TEST_CASE("periodized measure is invariant under every grid shift") {
  const auto model = fixtures::torus(1);
  const auto traj = simulate(model, State::Zero(model.n_modes()), 2.0, 0.05, 4);
  const auto per = periodize(traj, 1.5);
  const auto mu = periodized_empirical(per, 0.5);
  for (double s : {0.05, 0.4, 1.5, 2.0}) {
    const auto shifted = periodized_empirical(shift(per, s), 0.5);
    CHECK(dual_lipschitz(mu, shifted, {MetricKind::window_sup}) == 0.0);
  }
  const auto full = shift(per, 1.5);
  for (long long i = 0; i < 30; ++i) CHECK(full.at(i) == per.at(i));
  CHECK(per.at(-1) == per.at(29));
}

TEST_CASE("plain shift drops the first states") {
  const auto traj = ramp(10);
  const auto s = shift(traj, 0.3);
  CHECK(s.size() == 7);
  CHECK(s.state(0)[0] == 3.0);
  CHECK_THROWS_AS(shift(traj, 1.0), GridMismatch);
}

TEST_CASE("dual-Lipschitz distance between point masses is 2d / (2 + d)") {
  for (double d : {0.1, 0.5, 1.0, 3.0, 10.0}) {
    CHECK(dual_lipschitz(point_mass(0.0), point_mass(d), {}) == doctest::Approx(2.0 * d / (2.0 + d)).epsilon(1e-7));
  }
  CHECK(dual_lipschitz(point_mass(1.0), point_mass(1.0), {}) == 0.0);
}

TEST_CASE("dual-Lipschitz distance is a metric on random measures") {
  NormalStream rng(8);
  auto random_measure = [&](int atoms) {
    EmpiricalMeasure mu(SpaceKind::state, 2, 1, 0.1);
    for (int i = 0; i < atoms; ++i) {
      const double x[2] = {rng(), rng()};
      mu.add_atom(std::span<const double>(x, 2), 0.1 + rng.uniform());
    }
    return mu;
  };
  auto normalized = [](const EmpiricalMeasure& mu) {
    EmpiricalMeasure out(mu.space(), mu.n_modes(), 1, mu.dt());
    for (std::size_t i = 0; i < mu.size(); ++i) out.add_atom(mu.point(i), mu.weight(i) / mu.total_weight());
    return out;
  };
  for (int trial = 0; trial < 10; ++trial) {
    const auto a = normalized(random_measure(4));
    const auto b = normalized(random_measure(5));
    const auto c = normalized(random_measure(3));
    const double ab = dual_lipschitz(a, b, {}), ba = dual_lipschitz(b, a, {});
    CHECK(ab == doctest::Approx(ba).epsilon(1e-7));
    CHECK(ab <= dual_lipschitz(a, c, {}) + dual_lipschitz(c, b, {}) + 1e-7);
    CHECK(ab <= 2.0 + 1e-12);
    CHECK(ab >= 0.0);
  }
}

TEST_CASE("label measures use the discrete metric: distance is two thirds of the moved mass") {
  const auto p = EmpiricalMeasure::over_labels({0.5, 0.3, 0.2});
  const auto q = EmpiricalMeasure::over_labels({0.2, 0.3, 0.5});
  CHECK(dual_lipschitz(p, q, {MetricKind::discrete}) == doctest::Approx(0.3 * 2.0 / 3.0).epsilon(1e-7));
}

TEST_CASE("transport cost agrees with a hand-solved instance") {
  Eigen::MatrixXd cost(2, 2);
  cost << 1.0, 3.0, 2.0, 1.0;
  CHECK(transport_cost({0.5, 0.5}, {0.3, 0.7}, cost) == doctest::Approx(0.3 * 1.0 + 0.2 * 3.0 + 0.5 * 1.0));
}

TEST_CASE("exponential equivalence gap stays below 2 log 2 / t") {
  const auto model = fixtures::torus(1);
  const auto traj = simulate(model, State::Zero(model.n_modes()), 12.0, 0.05, 5);
  for (double t : {2.0, 5.0, 10.0}) {
    const auto g = exp_equiv_gap(traj, t, 1.0);
    CHECK(g.bound == doctest::Approx(2.0 * std::numbers::ln2 / t));
    CHECK(g.slack == doctest::Approx(0.1));
    CHECK(g.within);
  }
}

TEST_CASE("window metric weights unit intervals by 2^-m") {
  EmpiricalMeasure space(SpaceKind::window, 1, 21, 0.1);
  std::vector<double> x(21, 0.0), y(21, 0.0);
  y[5] = 0.4;
  y[15] = 3.0;
  const Metric m{MetricKind::window_weighted};
  CHECK(m(space, x, y) == doctest::Approx(0.5 * 0.4 + 0.25 * 1.0));
  CHECK(Metric{MetricKind::window_sup}(space, x, y) == 3.0);
}
