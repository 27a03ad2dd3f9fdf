#include <doctest.h>

#include <json.hpp>

#include "fixtures.hpp"
#include "snsld/error.hpp"
#include "snsld/verify.hpp"

using namespace snsld;

TEST_CASE("suites are registered and unknown names are rejected") {
  const auto& names = suite_names();
  CHECK(std::find(names.begin(), names.end(), "acceptance") != names.end());
  CHECK(suite_criteria("acceptance").size() == 14);
  CHECK_THROWS_AS(suite_criteria("nonexistent"), ConfigError);
  CHECK_THROWS_AS(suite_criteria(""), ConfigError);
}

TEST_CASE("algebraic suite passes on the torus model") {
  std::vector<std::string> seen;
  const auto results = run_suite("algebraic", {}, [&](const CriterionResult& r) { seen.push_back(r.name); });
  CHECK(seen == suite_criteria("algebraic"));
  for (const auto& r : results) {
    INFO(r.name << ": " << r.measured);
    CHECK(r.passed);
  }
  const auto doc = nlohmann::json::parse(results_document(results));
  CHECK(doc.size() == results.size());
  CHECK(doc[0]["criterion"] == "cancellation");
  CHECK(doc[0]["measured"].get<std::string>().find("max_defect=") != std::string::npos);
}

TEST_CASE("an injected tensor defect fails exactly the cancellation criteria") {
  const auto good = fixtures::torus(3);
  auto tensor = good.tensor();
  tensor[tensor.size() / 2].value *= 1.01;
  std::vector<double> eig(good.eigenvalues().data(), good.eigenvalues().data() + good.n_modes());
  std::vector<double> h(good.forcing().data(), good.forcing().data() + good.n_modes());
  std::vector<double> b(good.noise_amps().data(), good.noise_amps().data() + good.n_modes());
  VerifyOptions options;
  options.model = std::make_shared<const GalerkinModel>(GalerkinModel::build_unchecked(eig, tensor, h, b, good.index_map()));
  for (const auto& r : run_suite("algebraic", options)) {
    INFO(r.name << ": " << r.measured);
    CHECK(r.passed == (r.name.rfind("cancellation", 0) != 0));
  }
}

TEST_CASE("oracle criteria are reproducible") {
  VerifyOptions options;
  const auto a = run_suite("oracle", options);
  const auto b = run_suite("oracle", options);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].measured == b[i].measured);
}
