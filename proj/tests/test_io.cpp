#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <limits>

#include "fixtures.hpp"
#include "snsld/empirical.hpp"
#include "snsld/error.hpp"
#include "snsld/io.hpp"
#include "snsld/sde.hpp"

using namespace snsld;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("snsld-io-" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("doubles round-trip through their text form") {
  NormalStream rng(61);
  for (int i = 0; i < 1000; ++i) {
    const double x = rng() * std::pow(10.0, 40.0 * rng.uniform() - 20.0);
    CHECK(std::stod(format_double(x)) == x);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
}

TEST_CASE("model documents round-trip bit-exactly") {
  const auto model = fixtures::torus(2);
  const auto doc = model_document(model);
  const auto back = parse_model(doc);
  CHECK(model_document(back) == doc);
  CHECK(back.id() == model.id());
  CHECK(back.tensor() == model.tensor());
  CHECK(back.index_map() == model.index_map());
}

TEST_CASE("model documents are revalidated on load") {
  const auto broken = GalerkinModel::build_unchecked({1.0, 2.0}, {{0, 0, 1, 1.0}}, {0.0, 0.0}, {1.0, 1.0});
  const auto doc = model_document(broken);
  CHECK_THROWS_AS(parse_model(doc), CancellationViolation);
  CHECK_NOTHROW(parse_model(doc, false));
  CHECK_THROWS_AS(parse_model("{not json"), ConfigError);
}

TEST_CASE("trajectories round-trip through the binary format") {
  const auto dir = scratch("traj");
  const auto model = fixtures::torus(1);
  const auto traj = simulate(model, State::Ones(model.n_modes()), 0.3, 0.01, 77);
  save_trajectory(dir / "a.traj", traj);
  const auto back = load_trajectory(dir / "a.traj");
  CHECK(back == traj);
  CHECK(back.seed() == 77);
  CHECK(back.model_id() == model.id());
  write_text(dir / "bad.traj", "SNSLDTRJ garbage");
  CHECK_THROWS(load_trajectory(dir / "bad.traj"));
  CHECK_THROWS(load_trajectory(dir / "missing.traj"));
}

TEST_CASE("ensembles persist with an index and survive a reload") {
  const auto dir = scratch("ens");
  const auto model = fixtures::torus(1);
  const auto ens = ensemble(model, fixed_initial(State::Zero(model.n_modes())), 3, 0.1, 0.01, 5);
  const auto index = save_ensemble(dir, ens);
  const auto back = load_ensemble(index);
  REQUIRE(back.trajectories.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(back.trajectories[i] == ens.trajectories[i]);
  CHECK(back.master_seed == 5);
  CHECK(back.indices == ens.indices);
}

TEST_CASE("chains, potentials and measures round-trip") {
  const auto chain = FiniteChain::discrete(fixtures::two_state(), {"calm", "storm"});
  const auto c2 = parse_chain(chain_document(chain));
  CHECK(c2.matrix() == chain.matrix());
  CHECK(c2.labels() == chain.labels());
  CHECK(c2.clocking() == Clocking::discrete);

  Potential v(2, 0.25, {{0.5, {1.0, -1.0}, 0.2}});
  CHECK(parse_potential(potential_document(v)) == v);

  const auto model = fixtures::torus(1);
  const auto traj = simulate(model, State::Zero(model.n_modes()), 1.0, 0.1, 2);
  const auto mu = windowed_empirical(traj, 0.2, 0.5);
  const auto doc = measure_document(mu);
  CHECK(doc.find("Skorokhod") != std::string::npos);
  const auto back = parse_measure(doc);
  CHECK(back.points() == mu.points());
  CHECK(back.weights() == mu.weights());
  CHECK(back.window_points() == mu.window_points());
}

TEST_CASE("tables carry metadata and full-precision values") {
  Table t;
  t.meta = {{"seed", "7"}, {"note", "plain"}};
  t.columns = {"t", "value"};
  t.rows = {{0.1, 1.0 / 3.0}, {0.2, -2.5e-300}};
  const auto back = parse_table(t.to_string());
  CHECK(back.meta_value("seed") == "7");
  CHECK(back.columns == t.columns);
  CHECK(back.rows == t.rows);
}

TEST_CASE("file hashes change with content") {
  const auto dir = scratch("hash");
  write_text(dir / "a", "alpha");
  write_text(dir / "b", "alpha");
  write_text(dir / "c", "alphb");
  CHECK(hash_file(dir / "a") == hash_file(dir / "b"));
  CHECK(hash_file(dir / "a") != hash_file(dir / "c"));
  CHECK(hash_file(dir / "a").size() == 16);
}
