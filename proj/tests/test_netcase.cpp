#include "doctest.h"

#include <cstdio>
#include <fstream>

#include "adlearn/errors.hpp"
#include "adlearn/netcase.hpp"

using namespace adl;

namespace {

std::string case_path(const char* name) { return std::string(ADLEARN_CASE_DIR) + "/" + name; }

SystemCase two_bus() {
    SystemCase sc;
    sc.buses = {{1, "", 0.0, {}}, {2, "", 1.0, {}}};
    sc.generators = {{1, 1, 5, 1, 5, 5, 1, 1, 1}};
    sc.lines = {{1, 1, 2, 0.1, 1.0}};
    sc.zones = {{1, ""}};
    sc.penalties = {64, 24};
    return sc;
}

SystemCase triangle() {
    SystemCase sc = two_bus();
    sc.buses.push_back({3, "", 0.0, {}});
    sc.lines = {{1, 1, 2, 0.1, 1.0}, {2, 1, 3, 0.1, 1.0}, {3, 2, 3, 0.1, 1.0}};
    return sc;
}

// KCL residual of B*inj at every bus
double kcl_residual(const SystemCase& sc, const PtdfMatrix& p, const Eigen::VectorXd& inj) {
    const Eigen::VectorXd f = p.B * inj;
    Eigen::VectorXd net = Eigen::VectorXd::Zero(sc.num_buses());
    for (Index l = 0; l < sc.num_lines(); ++l) {
        net(sc.bus_index(sc.lines[static_cast<std::size_t>(l)].from)) += f(l);
        net(sc.bus_index(sc.lines[static_cast<std::size_t>(l)].to)) -= f(l);
    }
    return (net - inj).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("shipped single-bus case") {
    const auto sc = parse_case(case_path("singlebus.json"));
    CHECK(sc.num_buses() == 1);
    CHECK(sc.num_generators() == 4);
    CHECK(sc.num_zones() == 1);
    CHECK(sc.num_lines() == 0);
    CHECK(sc.capacity() == Eigen::Vector4d(5, 5, 2.5, 2.5));
    CHECK(sc.cost() == Eigen::Vector4d(1, 2, 4, 8));
    CHECK(sc.bus_demand()(0) == 6.0);
    const double max_cost = sc.cost().maxCoeff();
    CHECK(sc.penalties.load_shed == 8 * max_cost);
    CHECK(sc.penalties.spill == 3 * max_cost);
    CHECK(sc.penalties.load_shed == 64.0);
    CHECK(sc.penalties.spill == 24.0);
}

TEST_CASE("shipped 24-bus case dimensions") {
    const auto sc = parse_case(case_path("ieee24.json"));
    CHECK(sc.num_buses() == 24);
    CHECK(sc.num_lines() == 38);
    CHECK(sc.num_generators() == 33);
    CHECK(sc.num_zones() == 4);
    int loads = 0;
    for (const auto& b : sc.buses) loads += b.demand > 0 ? 1 : 0;
    CHECK(loads == 17);
    CHECK(sc.penalties.load_shed == doctest::Approx(8 * sc.cost().maxCoeff()));
    CHECK(sc.penalties.spill == doctest::Approx(3 * sc.cost().maxCoeff()));
}

TEST_CASE("generator on an unknown bus is named in the error") {
    auto j = case_to_json(two_bus());
    j["generators"][0]["bus"] = 99;
    j["generators"][0]["id"] = 7;
    try {
        case_from_json(j);
        FAIL("expected an error");
    } catch (const InvariantError& e) {
        CHECK(std::string(e.what()).find("generator 7") != std::string::npos);
    }
}

TEST_CASE("schema errors carry the field path") {
    auto j = case_to_json(two_bus());
    j["lines"][0].erase("reactance");
    try {
        case_from_json(j);
        FAIL("expected an error");
    } catch (const SchemaError& e) {
        CHECK(std::string(e.what()) == "$.lines[0].reactance: missing");
    }
}

TEST_CASE("penalty ordering is enforced") {
    auto sc = two_bus();
    sc.penalties = {20, 24};
    CHECK_THROWS_AS(sc.validate(), InvariantError);
    CHECK_NOTHROW(sc.validate(PenaltyRule::ShedAboveCost));
    sc.penalties = {0.5, 0.1};
    CHECK_THROWS_AS(sc.validate(PenaltyRule::ShedAboveCost), InvariantError);
}

TEST_CASE("case transforms on a single generator") {
    SystemCase sc = two_bus();
    sc.generators[0] = {1, 1, 5.0, 2.0, 5.0, 5.0, 2.0, 2.0, 1};
    const auto t = apply_case_transforms(sc, 0.75, 1.0, 0.30, 0.30);
    CHECK(t.generators[0].rbar_up == doctest::Approx(1.5));
    CHECK(t.generators[0].rbar_dn == doctest::Approx(1.5));
    CHECK(t.generators[0].p_up == doctest::Approx(0.6));
    CHECK(t.generators[0].p_dn == doctest::Approx(0.6));
    CHECK(t.lines[0].limit == doctest::Approx(0.75));
    CHECK(apply_case_transforms(sc, 1.0, 1.0, 1.0, 1.0) == sc);
    CHECK_THROWS_AS(apply_case_transforms(sc, 0.0, 1.0, 1.0, 1.0), InvariantError);
    CHECK_THROWS_AS(apply_case_transforms(sc, 11.0, 1.0, 1.0, 1.0), InvariantError);
}

TEST_CASE("24-bus demand factor is recorded") {
    const auto sc = parse_case(case_path("ieee24.json"));
    const auto t = apply_case_transforms(sc, 0.75, 0.9, 0.3, 0.3);
    CHECK(t.demand_scale == doctest::Approx(0.9));
    CHECK(t.bus_demand().sum() == doctest::Approx(0.9 * 28.5));
}

TEST_CASE("tilde overrides default to actual values") {
    auto sc = two_bus();
    CHECK(sc.tilde_cost() == sc.cost());
    CHECK(sc.tilde_load_shed() == 64.0);
    sc.tilde.cost = Eigen::VectorXd::Constant(1, 3.0);
    sc.tilde.spill = 10.0;
    CHECK(sc.tilde_cost()(0) == 3.0);
    CHECK(sc.tilde_spill() == 10.0);
    sc.tilde.limit = Eigen::VectorXd::Constant(2, 1.0);
    CHECK_THROWS_AS(sc.validate(), InvariantError);
}

TEST_CASE("parse serialize parse is the identity") {
    for (const char* name : {"singlebus.json", "ieee24.json"}) {
        auto sc = parse_case(case_path(name));
        sc.tilde.p_up = sc.p_up() * 0.5;
        sc.tilde.load_shed = sc.penalties.load_shed * 2;
        sc = apply_case_transforms(sc, 0.75, 0.9, 0.3, 0.3);
        const std::string tmp = "roundtrip_" + std::string(name);
        save_case(sc, tmp);
        const auto back = parse_case(tmp);
        CHECK(back == sc);
        std::remove(tmp.c_str());
    }
}

TEST_CASE("incidence maps") {
    const auto sc = parse_case(case_path("ieee24.json"));
    const auto m = incidence_maps(sc);
    CHECK((m.M.colwise().sum().array() == 1.0).all());
    CHECK((m.N.colwise().sum().array() <= 1.0).all());
    CHECK(m.M.rows() == 24);
    CHECK(m.N.rows() == 4);
}

TEST_CASE("ptdf of a single line") {
    const auto p = compute_ptdf(two_bus(), 1);
    REQUIRE(p.B.rows() == 1);
    CHECK(p.B(0, 0) == 0.0);
    CHECK(p.B(0, 1) == doctest::Approx(-1.0));
}

TEST_CASE("ptdf of an equal-reactance triangle") {
    const auto p = compute_ptdf(triangle(), 1);
    CHECK(p.B.col(0).isZero());
    CHECK(p.B(0, 1) == doctest::Approx(-2.0 / 3.0));
    CHECK(p.B(1, 1) == doctest::Approx(-1.0 / 3.0));
    CHECK(p.B(2, 1) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("ptdf of a network without lines") {
    const auto sc = parse_case(case_path("singlebus.json"));
    const auto p = compute_ptdf(sc);
    CHECK(p.B.rows() == 0);
    CHECK(p.B.cols() == 1);
}

TEST_CASE("disconnected networks are rejected") {
    auto sc = triangle();
    sc.lines = {{1, 1, 2, 0.1, 1.0}};
    CHECK_THROWS_AS(compute_ptdf(sc), NetworkError);
}

TEST_CASE("ptdf conserves flow for balanced injections") {
    const auto sc = parse_case(case_path("ieee24.json"));
    const auto p = compute_ptdf(sc);
    const auto q = compute_ptdf(sc, 13);
    CHECK(p.B.col(sc.bus_index(p.slack)).isZero());
    // uniform injection balanced at the slack
    Eigen::VectorXd inj = Eigen::VectorXd::Ones(24);
    inj(sc.bus_index(p.slack)) -= 24.0;
    CHECK(kcl_residual(sc, p, inj) < 1e-9);
    Eigen::VectorXd r = Eigen::VectorXd::LinSpaced(24, -3.0, 4.0);
    r(5) -= r.sum();
    CHECK(kcl_residual(sc, p, r) < 1e-9);
    CHECK((p.B * r - q.B * r).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("bus zones are inferred when absent") {
    auto sc = triangle();
    sc.zones = {{1, ""}, {2, ""}};
    sc.generators = {{1, 3, 5, 1, 5, 5, 1, 1, 2}};
    const auto z = sc.bus_zone_indices();
    CHECK(z[2] == 1);
    CHECK(z[0] == 1);
    sc.buses[0].zone = 1;
    CHECK(sc.bus_zone_indices()[0] == 0);
}
