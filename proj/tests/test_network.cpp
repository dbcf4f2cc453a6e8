#include <doctest.h>

#include "bwshare/errors.hpp"
#include "bwshare/network.hpp"
#include "test_util.hpp"

using namespace bwshare;

namespace {

Topology linear_topology() {
    Topology topo;
    topo.incidence.resize(2, 3);
    topo.incidence << 1, 0, 1,
                      0, 1, 1;
    topo.capacities = Eigen::Vector2d::Ones();
    topo.resource_names = {"link1", "link2"};
    topo.route_names = {"a", "b", "ab"};
    return topo;
}

}  // namespace

TEST_CASE("valid linear topology passes validation") {
    CHECK(validate(linear_topology()).ok());
}

TEST_CASE("empty route is rejected") {
    Topology topo = linear_topology();
    topo.incidence.col(1).setZero();
    const auto report = validate(topo);
    CHECK_FALSE(report.ok());
    CHECK(report.to_string().find("route") != std::string::npos);
}

TEST_CASE("non 0/1 incidence entries are rejected") {
    Topology topo = linear_topology();
    topo.incidence(0, 0) = 2.0;
    CHECK_FALSE(validate(topo).ok());
}

TEST_CASE("rank-deficient incidence is rejected") {
    Topology topo;
    topo.incidence.resize(2, 2);
    topo.incidence << 1, 1,
                      1, 1;
    topo.capacities = Eigen::Vector2d::Ones();
    topo.resource_names = {"r1", "r2"};
    topo.route_names = {"a", "b"};
    CHECK_FALSE(validate(topo).ok());
}

TEST_CASE("nonpositive capacity is rejected") {
    Topology topo = linear_topology();
    topo.capacities(0) = 0.0;
    CHECK_FALSE(validate(topo).ok());
}

TEST_CASE("nonpositive traffic parameters are rejected") {
    const Topology topo = linear_topology();
    TrafficParams traffic;
    traffic.arrival_rates = Eigen::Vector3d(0.5, 0.5, 0.2);
    traffic.service_rates = Eigen::Vector3d::Ones();
    traffic.weights = Eigen::Vector3d::Ones();
    traffic.alpha = 1.0;
    CHECK(validate(topo, traffic).ok());

    TrafficParams bad = traffic;
    bad.arrival_rates(0) = 0.0;
    CHECK_FALSE(validate(topo, bad).ok());
    bad = traffic;
    bad.service_rates(2) = -1.0;
    CHECK_FALSE(validate(topo, bad).ok());
    bad = traffic;
    bad.weights(1) = 0.0;
    CHECK_FALSE(validate(topo, bad).ok());
    bad = traffic;
    bad.alpha = 0.0;
    CHECK_FALSE(validate(topo, bad).ok());
    bad = traffic;
    bad.arrival_rates = Eigen::Vector2d(0.5, 0.5);
    CHECK_FALSE(validate(topo, bad).ok());
}

TEST_CASE("loads and critical set of the critical linear network") {
    const NetworkModel model = testutil::linear_network(0.4);
    CHECK(model.loads.isApprox(Eigen::Vector3d(0.6, 0.6, 0.4)));
    REQUIRE(model.critical_set.size() == 2);
    CHECK(model.critical_set[0] == 0);
    CHECK(model.critical_set[1] == 1);
    CHECK_FALSE(model.subcritical());
    const Eigen::VectorXd ratios = load_ratios(model);
    CHECK(ratios(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ratios(1) == doctest::Approx(1.0).epsilon(1e-12));

    Eigen::MatrixXd expected(2, 3);
    expected << 1, 0, 1,
                0, 1, 1;
    CHECK(model.critical_incidence() == expected);
}

TEST_CASE("subcritical model has an empty critical set") {
    const NetworkModel model = testutil::linear_network(0.4, 1.0, 0.7);
    CHECK(model.subcritical());
    CHECK(load_ratios(model).maxCoeff() == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("overloaded model is rejected at construction") {
    TrafficParams traffic;
    traffic.arrival_rates = Eigen::Vector3d(0.7, 0.7, 0.4);
    traffic.service_rates = Eigen::Vector3d::Ones();
    traffic.weights = Eigen::Vector3d::Ones();
    traffic.alpha = 1.0;
    CHECK_THROWS_AS(make_model(linear_topology(), traffic), ConfigError);
}

TEST_CASE("json config round trip") {
    const std::string text = R"({
      "resources": [
        {"name": "l1", "capacity": 2.0},
        {"name": "l2", "capacity": 1.0}
      ],
      "routes": [
        {"name": "a", "resources": ["l1"], "nu": 0.5, "mu": 1.0, "kappa": 2.0},
        {"name": "b", "resources": ["l1", "l2"], "nu": 0.25, "mu": 0.5, "kappa": 1.0}
      ],
      "alpha": 2.0
    })";
    const NetworkModel model = parse_network(text);
    CHECK(model.resource_count() == 2);
    CHECK(model.route_count() == 2);
    CHECK(model.topology.capacities(0) == 2.0);
    CHECK(model.topology.incidence(0, 1) == 1.0);
    CHECK(model.topology.incidence(1, 0) == 0.0);
    CHECK(model.traffic.alpha == 2.0);
    CHECK(model.traffic.weights(0) == 2.0);
    CHECK(model.loads(1) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(model.topology.route_names[1] == "b");
}

TEST_CASE("json config errors are ConfigError with context") {
    CHECK_THROWS_AS(parse_network("not json"), ConfigError);
    CHECK_THROWS_AS(parse_network("{}"), ConfigError);
    CHECK_THROWS_AS(parse_network(R"({
      "resources": [{"name": "l", "capacity": 1.0}],
      "routes": [{"name": "a", "resources": ["missing"], "nu": 0.5, "mu": 1.0, "kappa": 1.0}],
      "alpha": 1.0
    })"), ConfigError);
    CHECK_THROWS_AS(parse_network(R"({
      "resources": [{"name": "l", "capacity": 1.0}],
      "routes": [{"name": "a", "resources": ["l"], "nu": "x", "mu": 1.0, "kappa": 1.0}],
      "alpha": 1.0
    })"), ConfigError);
}

TEST_CASE("config files used by the CLI examples load") {
    const char* dir = std::getenv("BWSHARE_CONFIG_DIR");
    REQUIRE(dir != nullptr);
    const NetworkModel linear = load_network(std::string(dir) + "/linear2.json");
    CHECK(linear.critical_count() == 2);
    const NetworkModel mm1 = load_network(std::string(dir) + "/single_link.json");
    CHECK(mm1.route_count() == 1);
    CHECK(mm1.subcritical());
}

TEST_CASE("random model generator produces valid models") {
    bwshare::RngStream rng(99);
    for (int k = 0; k < 50; ++k) {
        const NetworkModel model = testutil::random_model(rng);
        CHECK(validate(model.topology, model.traffic).ok());
        CHECK(load_ratios(model).maxCoeff() <= 1.0 + 1e-12);
    }
}
