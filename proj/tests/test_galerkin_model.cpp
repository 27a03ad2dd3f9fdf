#include <doctest.h>

#include <cmath>
#include <set>

#include "fixtures.hpp"
#include "snsld/error.hpp"
#include "snsld/galerkin_model.hpp"

using namespace snsld;

TEST_CASE("torus truncation keeps half of the lattice disk, two modes per wavevector") {
  for (int k = 1; k <= 5; ++k) {
    int lattice = 0;
    for (int x = -k; x <= k; ++x) {
      for (int y = -k; y <= k; ++y) {
        if ((x != 0 || y != 0) && x * x + y * y <= k * k) ++lattice;
      }
    }
    const auto modes = torus_modes(k);
    CHECK(static_cast<int>(modes.size()) == lattice);
    std::set<std::tuple<int, int, bool>> seen;
    for (const auto& m : modes) {
      CHECK(seen.insert({m.kx, m.ky, m.sine}).second);
      CHECK(seen.count({-m.kx, -m.ky, m.sine}) == 0u);
    }
  }
}

TEST_CASE("torus eigenvalues are |k|^2 in nondecreasing order") {
  const auto model = fixtures::torus(3);
  REQUIRE(model.n_modes() == 28);
  for (int j = 0; j < model.n_modes(); ++j) {
    CHECK(model.eigenvalues()[j] == model.index_map()[j].wavenumber_squared());
    if (j > 0) CHECK(model.eigenvalues()[j] >= model.eigenvalues()[j - 1]);
  }
  CHECK(model.eigenvalues()[0] == 1.0);
}

TEST_CASE("nonlinearity conserves energy and enstrophy on the torus") {
  const auto model = fixtures::torus(4);
  NormalStream rng(3);
  for (int s = 0; s < 50; ++s) {
    const State u = fixtures::random_state(model.n_modes(), rng, 3.0);
    const State b = model.apply_nonlinearity(u);
    const double scale = u.norm() * std::max(b.norm(), 1.0);
    CHECK(std::abs(b.dot(u)) <= 1e-12 * scale);
    CHECK(cancellation_defect(model, u) <= 1e-12);
    CHECK(std::abs(b.dot(model.apply_stokes(u))) <= 1e-11 * scale * 16.0);
  }
}

TEST_CASE("nonlinearity is a quadratic form") {
  const auto model = fixtures::torus(2);
  NormalStream rng(4);
  const State u = fixtures::random_state(model.n_modes(), rng);
  const State b1 = model.apply_nonlinearity(u);
  const State b2 = model.apply_nonlinearity(2.5 * u);
  CHECK((b2 - 6.25 * b1).cwiseAbs().maxCoeff() <= 1e-12 * b2.cwiseAbs().maxCoeff());
  std::vector<double> out(static_cast<std::size_t>(model.n_modes()));
  model.nonlinearity_into(u.data(), out.data());
  for (int j = 0; j < model.n_modes(); ++j) CHECK(out[static_cast<std::size_t>(j)] == b1[j]);
}

TEST_CASE("custom tensors violating cancellation are rejected") {
  std::vector<TensorEntry> bad{{0, 0, 1, 1.0}};
  CHECK_THROWS_AS(GalerkinModel::build_custom({1.0, 2.0}, bad, {0.0, 0.0}, {1.0, 1.0}), CancellationViolation);
  std::vector<TensorEntry> good{{0, 0, 1, 1.0}, {1, 0, 0, -1.0}};
  CHECK_NOTHROW(GalerkinModel::build_custom({1.0, 2.0}, good, {0.0, 0.0}, {1.0, 1.0}));
  CHECK_NOTHROW(GalerkinModel::build_unchecked({1.0, 2.0}, bad, {0.0, 0.0}, {1.0, 1.0}));
}

TEST_CASE("structural validation") {
  CHECK_THROWS_AS(GalerkinModel::build_custom({0.0, 1.0}, {}, {0.0, 0.0}, {1.0, 1.0}), SpectrumViolation);
  CHECK_THROWS_AS(GalerkinModel::build_custom({2.0, 1.0}, {}, {0.0, 0.0}, {1.0, 1.0}), SpectrumViolation);
  CHECK_THROWS_AS(GalerkinModel::build_custom({1.0, 2.0}, {}, {0.0, 0.0}, {1.0, 0.0}), NoiseViolation);
  CHECK_THROWS_AS(GalerkinModel::build_custom({1.0, 2.0}, {}, {0.0}, {1.0, 1.0}), DimensionMismatch);
  CHECK_THROWS_AS(GalerkinModel::build_custom({1.0, 2.0}, {{0, 0, 5, 1.0}}, {0.0, 0.0}, {1.0, 1.0}),
                  DimensionMismatch);
  const auto model = fixtures::torus(1);
  CHECK_THROWS_AS(model.norm_h(State::Zero(3)), DimensionMismatch);
  CHECK_THROWS_AS(build_torus_model(0, {}, {}), SpectrumViolation);
}

TEST_CASE("norms follow their spectral definitions") {
  const auto model = fixtures::torus(2);
  NormalStream rng(5);
  const State u = fixtures::random_state(model.n_modes(), rng);
  double h = 0.0, one = 0.0, dual = 0.0;
  for (int j = 0; j < model.n_modes(); ++j) {
    const double a = model.eigenvalues()[j];
    h += u[j] * u[j];
    one += a * u[j] * u[j];
    dual += u[j] * u[j] / a;
  }
  CHECK(model.norm_h(u) == doctest::Approx(std::sqrt(h)).epsilon(1e-14));
  CHECK(model.norm_u(u) == doctest::Approx(std::sqrt(one)).epsilon(1e-14));
  CHECK(model.norm_dual(u) == doctest::Approx(std::sqrt(dual)).epsilon(1e-14));
  CHECK(model.norm_u(u) >= model.norm_h(u));
  CHECK(model.norm_u(u) * model.norm_u(u) == doctest::Approx(model.squared_norm_u(u)).epsilon(1e-15));
}

TEST_CASE("projections split a state exactly") {
  NormalStream rng(6);
  const State u = fixtures::random_state(7, rng);
  for (int level = 0; level <= 7; ++level) {
    const auto [p, q] = project(u, level);
    for (int j = 0; j < 7; ++j) {
      CHECK(p[j] == (j < level ? u[j] : 0.0));
      CHECK(q[j] == (j < level ? 0.0 : u[j]));
    }
  }
  CHECK_THROWS_AS(project(u, 8), DimensionMismatch);
  CHECK_THROWS_AS(project(u, -1), DimensionMismatch);
}

TEST_CASE("noise constants and model identity") {
  const auto model = fixtures::torus(2, 0.5);
  double b0 = 0.0;
  for (int j = 0; j < model.n_modes(); ++j) b0 += model.noise_amps()[j] * model.noise_amps()[j];
  CHECK(model.noise_b0() == doctest::Approx(b0));
  CHECK(model.id() == fixtures::torus(2, 0.5).id());
  CHECK(model.id() != fixtures::torus(2, 0.4).id());
  const auto quiet = model.without_noise();
  CHECK(quiet.noise_amps().cwiseAbs().maxCoeff() == 0.0);
  CHECK(quiet.eigenvalues() == model.eigenvalues());
}

TEST_CASE("decaying noise spectrum") {
  TorusNoiseSpec n;
  n.amplitude = 1.0;
  n.decay_exponent = 2.0;
  const auto model = build_torus_model(2, {}, n);
  for (int j = 0; j < model.n_modes(); ++j) {
    CHECK(model.noise_amps()[j] == doctest::Approx(std::pow(model.eigenvalues()[j], -1.0)));
  }
}
