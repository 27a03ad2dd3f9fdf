#include <doctest.h>

#include <unistd.h>

#include <cstdlib>
#include <fstream>

#include "snsld/error.hpp"
#include "snsld/io.hpp"
#include "snsld/runner.hpp"

using namespace snsld;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("snsld-runner-" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

const char* kOracle = R"({
  "kind": "oracle",
  "name": "fixture",
  "master_seed": 3,
  "chain": {"clocking": "discrete", "n_states": 2, "rows": [[0.9, 0.1], [0.2, 0.8]]},
  "params": {"potential": [0.6931471805599453, 0.6931471805599453]}
})";

const char* kEntropy = R"({
  "kind": "entropy",
  "chain": {"clocking": "discrete", "n_states": 2, "rows": [[0.9, 0.1], [0.2, 0.8]]},
  "params": {"q": [[0.5, 0.5], [0.5, 0.5]], "lambda": [0.3, 0.7]}
})";

}  // namespace

TEST_CASE("configs are normalised with every default echoed") {
  const auto cfg = parse_config(kOracle);
  CHECK(cfg.kind == "oracle");
  CHECK(cfg.name == "fixture");
  CHECK(cfg.master_seed == 3);
  CHECK(cfg.document.find("\"met_horizon\"") != std::string::npos);
  CHECK(parse_config(cfg.document).document == cfg.document);
  CHECK(parse_config(cfg.document).hash == cfg.hash);
  CHECK(cfg.hash.size() == 16);
}

TEST_CASE("validation reports every violated field") {
  try {
    parse_config(R"({"kind": "couple", "model": {"torus": {"max_wavenumber": 0}},
                     "params": {"dt": -1, "horizonn": 2}})");
    FAIL("expected a configuration error");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("max_wavenumber") != std::string::npos);
    CHECK(msg.find("dt") != std::string::npos);
    CHECK(msg.find("horizonn") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config(R"({"kind": "teleport"})"), ConfigError);
  CHECK_THROWS_AS(parse_config("[1, 2"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"kind": "rate"})"), ConfigError);
}

TEST_CASE("oracle run writes its artifacts and a consistent record") {
  const auto dir = scratch("oracle");
  const auto rec = run(parse_config(kOracle), dir);
  CHECK(rec.passed());
  CHECK(fs::exists(dir / "pfdata.json"));
  CHECK(fs::exists(dir / "config.json"));
  CHECK(fs::exists(dir / "record.json"));
  const auto pf = read_text(dir / "pfdata.json");
  CHECK(pf.find("\"c\": 2") != std::string::npos);
  const auto rep = inspect(dir);
  CHECK(rep.consistent());
  CHECK(rep.record.config_hash == rec.config_hash);
  CHECK(rep.record.artifacts.size() == rec.artifacts.size());
}

TEST_CASE("reruns produce byte-identical artifacts") {
  const auto a = run(parse_config(kEntropy), scratch("entropy-a"));
  const auto b = run(parse_config(kEntropy), scratch("entropy-b"));
  REQUIRE(a.artifacts.size() == b.artifacts.size());
  for (std::size_t i = 0; i < a.artifacts.size(); ++i) {
    CHECK(a.artifacts[i].file == b.artifacts[i].file);
    CHECK(a.artifacts[i].hash == b.artifacts[i].hash);
  }
  const auto again = run(parse_config(kEntropy), a.output_dir);
  CHECK(again.artifacts.size() == a.artifacts.size());
  CHECK(inspect(a.output_dir).consistent());
}

TEST_CASE("inspect detects modified and missing artifacts") {
  const auto dir = scratch("tamper");
  run(parse_config(kEntropy), dir);
  {
    std::ofstream f(dir / "entropy.tsv", std::ios::app);
    f << "# tampered\n";
  }
  fs::remove(dir / "contraction.tsv");
  const auto rep = inspect(dir);
  CHECK_FALSE(rep.consistent());
  CHECK(rep.mismatched == std::vector<std::string>{"entropy.tsv"});
  CHECK(rep.missing == std::vector<std::string>{"contraction.tsv"});
}

TEST_CASE("output root comes from the environment") {
  const auto root = scratch("root");
  ::setenv(kOutputRootVariable, root.c_str(), 1);
  CHECK(default_output_root() == root);
  const auto rec = run(parse_config(kOracle));
  CHECK(rec.output_dir == root / "fixture");
  CHECK(fs::exists(root / "fixture" / "record.json"));
  ::unsetenv(kOutputRootVariable);
  CHECK(default_output_root() == fs::path("runs"));
}

TEST_CASE("runs that throw are quarantined under failed/") {
  const auto dir = scratch("failing");
  const auto cfg = parse_config(R"({"kind": "couple",
    "model": {"torus": {"max_wavenumber": 2}},
    "params": {"u0": [1e150, -1e150, 1e150, 1e150, 1e150, -1e150, 1e150, 1e150, 1e150, -1e150, 1e150, 1e150],
               "dt": 0.1, "horizon": 1.0}})");
  CHECK_THROWS(run(cfg, dir));
  CHECK_FALSE(fs::exists(dir / "record.json"));
  REQUIRE(fs::exists(dir / "failed"));
  bool has_error = false;
  for (const auto& e : fs::directory_iterator(dir / "failed")) has_error = has_error || fs::exists(e.path() / "error.txt");
  CHECK(has_error);
}

TEST_CASE("each experiment kind runs from a small config") {
  const char* configs[] = {
      R"({"kind": "simulate", "model": {"torus": {"max_wavenumber": 1}},
          "params": {"horizon": 0.1, "dt": 0.01, "count": 4}})",
      R"({"kind": "pressure", "chain": {"clocking": "continuous", "n_states": 2, "rows": [[-0.1, 0.1], [0.2, -0.2]]},
          "params": {"potential": [0.6931471805599453, 0.0], "count": 2000}})",
      R"({"kind": "rate", "chain": {"clocking": "discrete", "n_states": 2, "rows": [[0.9, 0.1], [0.2, 0.8]]},
          "params": {"lambda": [0.3, 0.7], "search_budget": 2000, "restarts": 2}})",
      R"({"kind": "couple", "model": {"torus": {"max_wavenumber": 1}}, "params": {"horizon": 0.2}})",
      R"({"kind": "probes", "model": {"torus": {"max_wavenumber": 1}},
          "params": {"count": 1000, "moment": {"t_grid": [0.0, 0.5, 1.0]},
                     "recurrence": {"count": 100, "horizon": 2.0, "radius": 2.0}}})",
  };
  int i = 0;
  for (const char* text : configs) {
    const auto cfg = parse_config(text);
    INFO(cfg.kind);
    const auto rec = run(cfg, scratch("kind" + std::to_string(i++)));
    CHECK(rec.artifacts.size() >= 2);
    CHECK_FALSE(rec.assertions.empty());
    CHECK(inspect(rec.output_dir).consistent());
  }
}
