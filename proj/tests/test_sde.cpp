#include <doctest.h>

#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "snsld/error.hpp"
#include "snsld/sde.hpp"

using namespace snsld;

TEST_CASE("one step matches the exponential Euler formula written out by hand") {
  std::vector<TensorEntry> tensor{{0, 1, 1, 0.7}, {1, 1, 0, -0.7}};
  const auto model = GalerkinModel::build_custom({1.0, 3.0}, tensor, {0.4, -0.2}, {0.3, 0.6});
  State u(2);
  u << 0.8, -1.1;
  Eigen::VectorXd xi(2);
  xi << 0.25, -1.5;
  const double dt = 0.05;
  const double b0 = -0.7 * u[1] * u[1];
  const double b1 = 0.7 * u[0] * u[1];
  const double b[2] = {b0, b1};
  const double h[2] = {0.4, -0.2}, a[2] = {1.0, 3.0}, s[2] = {0.3, 0.6};
  const State next = step(model, u, dt, xi);
  for (int j = 0; j < 2; ++j) {
    const double sd = s[j] * std::sqrt((1.0 - std::exp(-2.0 * a[j] * dt)) / (2.0 * a[j]));
    const double expected = std::exp(-a[j] * dt) * (u[j] + dt * (h[j] - b[j])) + sd * xi[j];
    CHECK(next[j] == doctest::Approx(expected).epsilon(1e-15));
  }
}

TEST_CASE("stochastic Stokes part is exact over any step size") {
  const auto model = GalerkinModel::build_custom({2.0}, {}, {0.0}, {1.0}).without_noise();
  State u(1);
  u << 3.0;
  for (double dt : {0.01, 0.5, 4.0}) {
    CHECK(step(model, u, dt, Eigen::VectorXd::Zero(1))[0] == doctest::Approx(3.0 * std::exp(-2.0 * dt)).epsilon(1e-15));
  }
}

TEST_CASE("grid indices") {
  CHECK(grid_index(1.0, 0.1) == 10);
  CHECK(grid_index(0.0, 0.1) == 0);
  CHECK(grid_index(0.3, 0.1) == 3);
  CHECK_THROWS_AS(grid_index(0.15, 0.1), GridMismatch);
  CHECK_THROWS_AS(grid_index(-0.1, 0.1), GridMismatch);
  CHECK_THROWS_AS(grid_index(1.0, 0.0), GridMismatch);
}

TEST_CASE("simulate is reproducible and seed dependent") {
  const auto model = fixtures::torus(2);
  const State u0 = State::Zero(model.n_modes());
  const auto a = simulate(model, u0, 0.5, 0.01, 11);
  const auto b = simulate(model, u0, 0.5, 0.01, 11);
  const auto c = simulate(model, u0, 0.5, 0.01, 12);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  CHECK(a.size() == 51);
  CHECK(a.horizon() == doctest::Approx(0.5));
  CHECK(a.state(0) == u0);
  CHECK(a.model_id() == model.id());
}

TEST_CASE("integrate streams the same path simulate stores") {
  const auto model = fixtures::torus(1);
  State u0 = State::Ones(model.n_modes());
  const auto traj = simulate(model, u0, 0.2, 0.01, 5);
  std::size_t visited = 0;
  integrate(model, u0, 20, 0.01, 5, [&](std::size_t i, const double* u, const double* xi) {
    for (int j = 0; j < model.n_modes(); ++j) CHECK(u[j] == traj.row(i)[j]);
    CHECK((xi == nullptr) == (i == 20));
    ++visited;
    return true;
  });
  CHECK(visited == 21);
}

TEST_CASE("ensemble members are independent of execution order") {
  const auto model = fixtures::torus(1);
  const auto init = fixed_initial(State::Zero(model.n_modes()));
  const auto a = ensemble(model, init, 6, 0.1, 0.01, 99);
  std::vector<std::size_t> order{5, 3, 1, 0, 2, 4};
  const auto b = ensemble(model, init, 6, 0.1, 0.01, 99, order);
  REQUIRE(a.trajectories.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(a.indices[i] == i);
    CHECK(a.trajectories[i] == b.trajectories[i]);
    CHECK(a.trajectories[i] ==
          simulate(model, State::Zero(model.n_modes()), 0.1, 0.01, member_seed(99, i)));
  }
  CHECK_THROWS(ensemble(model, init, 3, 0.1, 0.01, 1, {0, 1}));
}

TEST_CASE("blow-ups are recorded per member") {
  const auto model = GalerkinModel::build_unchecked({1.0}, {{0, 0, 0, -1.0}}, {0.0}, {0.1});
  State u0(1);
  u0 << 50.0;
  CHECK_THROWS_AS(simulate(model, u0, 10.0, 0.1, 1), NonFiniteState);
  const auto ens = ensemble(model, fixed_initial(u0), 3, 10.0, 0.1, 1);
  CHECK(ens.trajectories.empty());
  REQUIRE(ens.failures.size() == 3);
  CHECK(ens.failures[1].index == 1);
  CHECK(ens.failures[0].step > 0);
}

TEST_CASE("zero-tensor one-step law has the closed-form moments") {
  const auto model = GalerkinModel::build_custom({1.0, 5.0}, {}, {0.5, 0.0}, {0.8, 0.3});
  State u(2);
  u << 1.0, -2.0;
  const double dt = 0.2;
  const std::size_t n = 40000;
  NormalStream rng(21);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(2), sq = Eigen::VectorXd::Zero(2), xi(2);
  for (std::size_t i = 0; i < n; ++i) {
    xi << rng(), rng();
    const State v = step(model, u, dt, xi);
    sum += v;
    sq += v.cwiseProduct(v);
  }
  const double a[2] = {1.0, 5.0}, h[2] = {0.5, 0.0}, b[2] = {0.8, 0.3};
  for (int j = 0; j < 2; ++j) {
    const double mean = std::exp(-a[j] * dt) * (u[j] + dt * h[j]);
    const double var = b[j] * b[j] * (1.0 - std::exp(-2.0 * a[j] * dt)) / (2.0 * a[j]);
    const double m = sum[j] / n;
    const double v = sq[j] / n - m * m;
    CHECK(std::abs(m - mean) <= 4.0 * std::sqrt(var / n));
    CHECK(std::abs(v - var) <= 4.0 * var * std::sqrt(2.0 / n));
  }
}

TEST_CASE("energy residual over a stored ensemble agrees with the streaming estimator") {
  const auto model = fixtures::torus(1);
  State u0 = State::Zero(model.n_modes());
  u0[0] = 1.0;
  const auto ens = ensemble(model, fixed_initial(u0), 200, 0.5, 0.01, 17);
  const auto stored = energy_identity_residual(model, ens, 0.5);
  const auto streamed = energy_identity_mc(model, u0, 200, 0.5, 0.01, 17);
  CHECK(stored.paths == 200);
  CHECK(stored.residual == doctest::Approx(streamed.residual).epsilon(1e-12));
  CHECK(stored.corrected_residual == doctest::Approx(streamed.corrected_residual).epsilon(1e-12));
  CHECK(std::abs(stored.residual) <= 4.0 * stored.standard_error + 0.05);
  CHECK(stored.corrected_standard_error < stored.standard_error);
  CHECK_THROWS_AS(energy_identity_residual(model, ens, 1.0), GridMismatch);
}

TEST_CASE("deterministic energy residual is first order in dt") {
  const auto model = fixtures::torus(1);
  State u0 = State::Zero(model.n_modes());
  u0[0] = 1.0;
  u0[2] = -0.5;
  const auto coarse = energy_identity_mc(model, u0, 400, 1.0, 4e-3, 8);
  const auto fine = energy_identity_mc(model, u0, 400, 1.0, 2e-3, 8);
  const double ratio = coarse.corrected_residual / fine.corrected_residual;
  CHECK(ratio > 1.6);
  CHECK(ratio < 2.4);
}
