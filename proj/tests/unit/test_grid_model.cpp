#include <sstream>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"

using namespace swingid;
using namespace swingid::test;
using Catch::Approx;

namespace {

nlohmann::json two_bus_doc() {
  return nlohmann::json::parse(R"({
    "name": "two bus",
    "n_buses": 2,
    "generators": [1],
    "loads": [2],
    "susceptance": [[0, 1.0], [1.0, 0]],
    "p_mech": {"1": 0.5},
    "p_load": {"2": 0.5},
    "true_params": {"M": {"1": 1.0}, "D": {"1": 1.0, "2": 2.0}}
  })");
}

ErrorCode parse_code(const nlohmann::json& doc) {
  return thrown_code([&] { parse_case(doc.dump()); });
}

}  // namespace

TEST_CASE("System A fixture matches the published parameters", "[grid_model]") {
  const auto c = load_fixture("case4_sysA");
  const auto& m = c.model;
  REQUIRE(m.n_buses() == 4);
  REQUIRE(m.generator_buses().size() == 2);
  CHECK(c.params.M(BusId{0}) == 0.3);
  CHECK(c.params.M(BusId{1}) == 0.2);
  const double d[] = {0.15, 0.3, 0.25, 0.25};
  for (std::size_t i = 0; i < 4; ++i) CHECK(c.params.D(BusId{i}) == d[i]);
  CHECK(m.injection(BusId{0}) == 0.1);
  CHECK(m.injection(BusId{1}) == 0.2);
  CHECK(m.injection(BusId{2}) == 0.1);
  CHECK(m.injection(BusId{3}) == 0.2);
  CHECK(m.kind(BusId{2}) == BusKind::load);
}

TEST_CASE("Systems B and C fixtures", "[grid_model]") {
  const auto b = load_fixture("case4_sysB");
  CHECK(b.params.M(BusId{0}) == 0.02);
  CHECK(b.params.M(BusId{1}) == 0.03);
  CHECK(b.params.D(BusId{3}) == 0.04);
  const auto c = load_fixture("case4_sysC");
  CHECK(c.params.M(BusId{0}) == 5.2);
  CHECK(c.params.D(BusId{2}) == 10.5);
}

TEST_CASE("39-bus fixture", "[grid_model]") {
  const auto c = load_fixture("case39");
  const auto& gens = c.model.generator_buses();
  REQUIRE(gens.size() == 10);
  REQUIRE(c.model.load_buses().size() == 29);
  CHECK(c.params.M(gens[0]) == 2.3186);
  for (std::size_t k = 1; k <= 7; ++k) CHECK(c.params.M(gens[k]) == 2.6419);
  CHECK(c.params.M(gens[8]) == 2.4862);
  CHECK(c.params.M(gens[9]) == 2.4862);
  for (const auto g : gens) CHECK(c.params.D(g) == 2.0);
  for (const auto l : c.model.load_buses()) CHECK(c.params.D(l) == 0.1);
}

TEST_CASE("6-bus fixture", "[grid_model]") {
  const auto c = load_fixture("case6ww");
  REQUIRE(c.model.generator_buses().size() == 3);
  CHECK(c.params.M(BusId{2}) == 0.16);
  CHECK(c.params.D(BusId{1}) == 0.68);
  CHECK(c.model.susceptance().isApprox(c.model.susceptance().transpose()));
}

TEST_CASE("valid two-bus case parses", "[grid_model]") {
  const auto c = parse_case(two_bus_doc().dump());
  CHECK(c.model.name() == "two bus");
  CHECK(c.params.D(BusId{1}) == 2.0);
}

TEST_CASE("asymmetric susceptance is rejected", "[grid_model]") {
  auto doc = two_bus_doc();
  doc["susceptance"][0][1] = 1.5;
  CHECK(parse_code(doc) == ErrorCode::invalid_case);
}

TEST_CASE("case validation errors", "[grid_model]") {
  SECTION("nonzero diagonal") {
    auto doc = two_bus_doc();
    doc["susceptance"][0][0] = 0.2;
    CHECK(parse_code(doc) == ErrorCode::invalid_case);
  }
  SECTION("disconnected graph") {
    auto doc = two_bus_doc();
    doc["susceptance"] = {{0, 0}, {0, 0}};
    CHECK(parse_code(doc) == ErrorCode::invalid_case);
  }
  SECTION("nonpositive inertia") {
    auto doc = two_bus_doc();
    doc["true_params"]["M"]["1"] = 0.0;
    CHECK(parse_code(doc) == ErrorCode::invalid_case);
  }
  SECTION("negative damping") {
    auto doc = two_bus_doc();
    doc["true_params"]["D"]["2"] = -1.0;
    CHECK(parse_code(doc) == ErrorCode::invalid_case);
  }
  SECTION("overlapping generator and load sets") {
    auto doc = two_bus_doc();
    doc["loads"] = {1, 2};
    CHECK(parse_code(doc) == ErrorCode::invalid_case);
  }
  SECTION("bus not covered") {
    auto doc = two_bus_doc();
    doc["loads"] = nlohmann::json::array();
    CHECK(parse_code(doc) == ErrorCode::invalid_case);
  }
  SECTION("inertia on a load bus") {
    auto doc = two_bus_doc();
    doc["true_params"]["M"]["2"] = 1.0;
    CHECK(parse_code(doc) == ErrorCode::invalid_case);
  }
  SECTION("missing key") {
    auto doc = two_bus_doc();
    doc.erase("p_mech");
    CHECK(parse_code(doc) == ErrorCode::parse);
  }
  SECTION("malformed text") {
    CHECK(thrown_code([] { parse_case("{ not json"); }) == ErrorCode::parse);
  }
  SECTION("missing file") {
    CHECK(thrown_code([] { load_case("/nonexistent/case.json"); }) == ErrorCode::io);
  }
}

TEST_CASE("case JSON round-trips", "[grid_model]") {
  for (const char* name : {"case4_sysA", "case4_sysB", "case4_sysC", "case6ww", "case39"}) {
    const auto c = load_fixture(name);
    CHECK(parse_case(emit_case(c)) == c);
  }
}

TEST_CASE("neighbors", "[grid_model]") {
  SECTION("complete graph") {
    const auto c = load_fixture("case4_sysA");
    const auto n = neighbors(c.model, BusId{0});
    REQUIRE(n.size() == 3);
    CHECK(n[0] == BusId{1});
    CHECK(n[1] == BusId{2});
    CHECK(n[2] == BusId{3});
  }
  SECTION("ring") {
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(4, 4);
    for (int i = 0; i < 4; ++i) {
      const int j = (i + 1) % 4;
      b(i, j) = b(j, i) = 1.0;
    }
    const GridModel ring(b, {BusId{0}}, {BusId{1}, BusId{2}, BusId{3}}, {0.1, 0.1, 0.0, 0.0});
    const auto n = neighbors(ring, BusId{2});
    REQUIRE(n.size() == 2);
    CHECK(n[0] == BusId{1});
    CHECK(n[1] == BusId{3});
  }
  SECTION("out of range") {
    const auto c = load_fixture("case4_sysA");
    CHECK(thrown_code([&] { neighbors(c.model, BusId{4}); }) == ErrorCode::precondition);
  }
}
