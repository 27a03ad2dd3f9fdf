#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "snsld/dynamics_probes.hpp"
#include "snsld/error.hpp"
#include "snsld/sde.hpp"

using namespace snsld;

TEST_CASE("coupled step contracts the leading difference at rate alpha + a") {
  const auto model = GalerkinModel::build_custom({1.0, 2.0, 3.0}, {}, {0.0, 0.0, 0.0}, {0.5, 0.5, 0.5});
  CoupledPair pair{State::Zero(3), State::Ones(3), 2, 4.0, 0};
  const Eigen::Vector3d xi(0.3, -0.2, 1.1);
  const auto next = coupled_step(model, pair, 0.1, xi);
  const State w = next.v - next.u;
  CHECK(w[0] == doctest::Approx(std::exp(-(1.0 + 4.0) * 0.1)).epsilon(1e-14));
  CHECK(w[1] == doctest::Approx(std::exp(-(2.0 + 4.0) * 0.1)).epsilon(1e-14));
  CHECK(w[2] == doctest::Approx(std::exp(-3.0 * 0.1)).epsilon(1e-14));
  CHECK(next.u == step(model, pair.u, 0.1, xi));
}

TEST_CASE("coupled copies of the same state stay together") {
  const auto model = fixtures::torus(2);
  NormalStream rng(51);
  const State u = fixtures::random_state(model.n_modes(), rng);
  CoupledPair pair{u, u, model.n_modes() / 2, 1.0, 0};
  for (int s = 0; s < 10; ++s) pair = coupled_step(model, pair, 0.01, fixtures::random_state(model.n_modes(), rng));
  CHECK(pair.u == pair.v);
}

TEST_CASE("Foias-Prodi decay check on the torus") {
  const auto model = fixtures::torus(2);
  NormalStream rng(52);
  State u0 = State::Zero(model.n_modes());
  u0[0] = 1.0;
  State dir = fixtures::random_state(model.n_modes(), rng);
  const State u1 = u0 + 0.1 * dir / dir.norm();
  for (int level : {1, 6, 12}) {
    for (double a : {1.0, 5.0}) {
      const auto rep = foias_decay_check(model, u0, u1, level, a, 1.0, 1e-3, 3);
      CHECK(rep.passed);
      CHECK(rep.distance == doctest::Approx(0.1));
      CHECK(rep.slack == doctest::Approx(0.01));
      CHECK(rep.times.size() == rep.bound.size());
      CHECK(rep.bound.back() == doctest::Approx(0.1 * std::exp(-a)).epsilon(1e-9));
      CHECK_FALSE(rep.failing_time.has_value());
    }
  }
  CHECK_THROWS_AS(foias_decay_check(model, u0, u0 + 2.0 * dir / dir.norm(), 1, 1.0, 1.0, 1e-3, 1), ConfigError);
}

TEST_CASE("without a pull the bound is attained at time zero") {
  const auto model = GalerkinModel::build_custom({1.0, 1.0}, {}, {0.0, 0.0}, {0.1, 0.1});
  const State u0 = State::Zero(2);
  State u1 = State::Zero(2);
  u1[0] = 0.1;
  const auto rep = foias_decay_check(model, u0, u1, 2, 3.0, 1.0, 1e-3, 1, 10.0);
  CHECK(rep.passed);
  const auto bad = foias_decay_check(model, u0, u1, 2, 0.0, 1.0, 1e-3, 1, 0.0);
  CHECK(bad.worst_ratio == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("weight function") {
  WeightFunction w{2};
  State u(2);
  u << 3.0, 4.0;
  CHECK(w(u) == doctest::Approx(626.0));
  Trajectory t(0.1, 2);
  t.push_back(State::Zero(2));
  t.push_back(u);
  t.push_back(State::Zero(2));
  CHECK(w.on_window(t, 0, 2) == doctest::Approx(626.0));
  CHECK(w.on_window(t, 2, 2) == doctest::Approx(1.0));
}

TEST_CASE("hitting time is zero inside the ball and empty when unreachable") {
  const auto model = fixtures::torus(1);
  CHECK(hitting_time(model, State::Zero(model.n_modes()), 0.5, 1.0, 0.01, 1).value() == 0.0);
  State far = State::Zero(model.n_modes());
  far[0] = 100.0;
  CHECK_FALSE(hitting_time(model, far, 1e-6, 0.5, 0.01, 1).has_value());
  const auto t = hitting_time(model, far, 20.0, 10.0, 0.01, 1);
  REQUIRE(t.has_value());
  CHECK(*t > 0.5);
}

TEST_CASE("second moment of the Ornstein-Uhlenbeck model against its closed form") {
  const auto model = GalerkinModel::build_custom({1.0, 3.0}, {}, {0.0, 0.0}, {1.0, 0.5});
  State u0(2);
  u0 << 2.0, -1.0;
  const auto table = moment_probe(model, 1, {0.0, 0.5, 1.0, 2.0}, 4000, 7, u0, 0.01);
  for (const auto& row : table.rows) {
    double exact = 0.0;
    const double a[2] = {1.0, 3.0}, b[2] = {1.0, 0.5};
    for (int j = 0; j < 2; ++j) {
      exact += std::exp(-2.0 * a[j] * row.t) * u0[j] * u0[j] + b[j] * b[j] * (1.0 - std::exp(-2.0 * a[j] * row.t)) / (2.0 * a[j]);
    }
    CHECK(std::abs(row.moment - exact) <= 4.0 * row.std_error + 1e-12);
  }
  CHECK(table.decay_rate > 0.0);
}

TEST_CASE("exponential fit recovers exact parameters") {
  std::vector<double> t, y;
  for (int i = 0; i <= 20; ++i) {
    t.push_back(0.25 * i);
    y.push_back(3.0 * std::exp(-1.7 * t.back()) + 0.4);
  }
  double r = 0.0, a = 0.0, c = 0.0;
  fit_exponential_decay(t, y, r, a, c);
  CHECK(r == doctest::Approx(1.7).epsilon(1e-6));
  CHECK(a == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(c == doctest::Approx(0.4).epsilon(1e-6));
}

TEST_CASE("exponential moments and the energy exceedance tail") {
  const auto model = fixtures::torus(1);
  double k = model.noise_b0();
  for (int j = 0; j < model.n_modes(); ++j) k += model.forcing()[j] * model.forcing()[j] / model.eigenvalues()[j];
  const auto table =
      exp_moment_probe(model, {0.01, 0.05, 0.1}, 1.0, 500, 3, State::Zero(model.n_modes()), 0.01, {0.0, 0.5, 1.0, 2.0});
  CHECK(table.k_constant == doctest::Approx(k));
  CHECK(table.rows.size() == 3);
  CHECK(table.exceedance_monotone);
  for (std::size_t i = 1; i < table.exceedance.size(); ++i) CHECK(table.exceedance[i] <= table.exceedance[i - 1]);
  CHECK(table.rows[0].log_moment <= table.rows[2].log_moment);
}

TEST_CASE("doubly logarithmic statistic is dominated by the initial energy") {
  const auto model = fixtures::torus(1);
  std::vector<State> starts;
  for (double r : {0.0, 1.0, 2.0}) starts.push_back(r * State::Ones(model.n_modes()));
  const auto table = doubly_log_probe(model, 1.0, 0.5, 1000, 4, starts, 0.01);
  CHECK(table.rows.size() == 3);
  CHECK(table.dominated);
  CHECK(table.margin > 0.0);
}

TEST_CASE("recurrence moment estimate is reproducible and split-stable") {
  const auto model = fixtures::torus(1);
  State u0 = State::Zero(model.n_modes());
  u0[0] = 3.0;
  const auto a = recurrence_moment(model, u0, 0.1, 2.0, 200, 10.0, 0.01, 5);
  const auto b = recurrence_moment(model, u0, 0.1, 2.0, 200, 10.0, 0.01, 5);
  CHECK(a.estimate == b.estimate);
  CHECK(a.estimate >= 1.0);
  CHECK(a.timeout_fraction == 0.0);
  CHECK(a.stable);
}
