#include "doctest.h"

#include "adlearn/errors.hpp"
#include "adlearn/forecast.hpp"

using namespace adl;

namespace {

SystemCase single_bus() { return parse_case(std::string(ADLEARN_CASE_DIR) + "/singlebus.json"); }

Dataset ar_data(std::uint64_t seed, Index T, bool exo = false) {
    auto c = ArProcessConfig::from_case(single_bus(), 0.4, 0.9, seed);
    if (exo) c.exogenous = ExogenousVarianceConfig{};
    return generate(c, T);
}

Eigen::RowVectorXd row(std::initializer_list<double> v) {
    Eigen::RowVectorXd r(static_cast<Index>(v.size()));
    Index i = 0;
    for (double x : v) r(i++) = x;
    return r;
}

}  // namespace

TEST_CASE("spec layout for the single-bus AR(1) model") {
    const auto sc = single_bus();
    const auto ds = ar_data(1, 20);
    const auto spec = ForecastSpec::ar1(sc, ds, Variant::OptOpt);
    CHECK(spec.size() == 4);
    CHECK(spec.num_trainable() == 4);
    CHECK(ForecastSpec::ar1(sc, ds, Variant::LsEx).num_trainable() == 0);
    CHECK(ForecastSpec::ar1(sc, ds, Variant::LsOpt).trainable_positions() == std::vector<Index>{2, 3});
    CHECK(ForecastSpec::ar1(sc, ds, Variant::OptEx).trainable_positions() == std::vector<Index>{0, 1});
    CHECK_THROWS_AS(ForecastSpec::ar1(sc, ds, Variant::OptOpt, {"E"}), DimensionError);
    CHECK(parse_variant("opt-ex") == Variant::OptEx);
    CHECK_THROWS_AS(parse_variant("opt"), ConfigError);
}

TEST_CASE("predict at the population fixed point") {
    const auto spec = ForecastSpec::ar1(single_bus(), ar_data(1, 20), Variant::OptOpt);
    const Eigen::Vector4d theta(0.6, 0.9, 1.0, 1.0);
    const auto f = predict(spec, theta, row({6.0}));
    CHECK(f.demand(0) == doctest::Approx(6.0));
    CHECK(f.reserve_up(0) == 1.0);
    CHECK(f.reserve_dn(0) == 1.0);
}

TEST_CASE("reserves are clamped and demand is not") {
    const auto spec = ForecastSpec::ar1(single_bus(), ar_data(1, 20), Variant::OptOpt);
    const Eigen::Vector4d theta(-10.0, 0.0, -1.0, -2.0);
    const auto f = predict(spec, theta, row({6.0}));
    CHECK(f.reserve_up(0) == 0.0);
    CHECK(f.reserve_dn(0) == 0.0);
    CHECK(f.demand(0) == -10.0);
    CHECK(predict_raw(spec, theta, row({6.0})).reserve_up(0) == -1.0);
}

TEST_CASE("feature-driven reserve evaluates affinely") {
    const auto ds = ar_data(1, 20, true);
    const auto spec = ForecastSpec::ar1(single_bus(), ds, Variant::OptOpt, {"E"});
    REQUIRE(spec.size() == 6);
    Eigen::VectorXd theta(6);
    theta << 0.6, 0.9, 0.5, 2.0, 0.0, 1.0;
    const auto f = predict(spec, theta, row({6.0, 1.0}));
    CHECK(f.reserve_up(0) == doctest::Approx(2.5));
    CHECK(f.reserve_dn(0) == doctest::Approx(1.0));
}

TEST_CASE("predict rejects mismatched theta") {
    const auto spec = ForecastSpec::ar1(single_bus(), ar_data(1, 20), Variant::OptOpt);
    CHECK_THROWS_AS(predict(spec, Eigen::VectorXd::Zero(3), row({6.0})), DimensionError);
}

TEST_CASE("demand block is affine in theta") {
    const auto spec = ForecastSpec::ar1(single_bus(), ar_data(1, 20), Variant::OptOpt);
    const Eigen::Vector4d a(0.3, -0.2, 1.0, 2.0), b(-1.7, 1.4, 0.5, 0.25);
    const auto x = row({4.2});
    const auto fa = predict_raw(spec, a, x), fb = predict_raw(spec, b, x), fab = predict_raw(spec, a + b, x);
    CHECK(std::abs(fa.demand(0) + fb.demand(0) - fab.demand(0)) < 1e-12);
}

TEST_CASE("pack and unpack are inverse") {
    const auto sc = parse_case(std::string(ADLEARN_CASE_DIR) + "/ieee24.json");
    auto c = ArProcessConfig::from_case(sc, 0.4, 0.9, 2);
    c.exogenous = ExogenousVarianceConfig{};
    const auto ds = generate(c, 10);
    const auto spec = ForecastSpec::ar1(sc, ds, Variant::OptOpt, {"E"});
    CHECK(spec.size() == 17 * 2 + 8 * 2);
    const Eigen::VectorXd theta = Eigen::VectorXd::LinSpaced(spec.size(), -3.0, 7.0);
    CHECK(pack(spec, unpack(spec, theta)) == theta);
    CHECK(theta_from_json(spec, theta_to_json(spec, theta)) == theta);
    auto blocks = unpack(spec, theta);
    blocks.erase("Rup_1");
    CHECK_THROWS_AS(pack(spec, blocks), DimensionError);
}

TEST_CASE("least squares recovers an exact linear relation") {
    Dataset ds;
    ds.bus_ids = {1};
    ds.feature_names = {"lag1_1"};
    ds.features.resize(30, 1);
    ds.demand.resize(30, 1);
    for (Index t = 0; t < 30; ++t) {
        ds.features(t, 0) = 0.37 * static_cast<double>(t);
        ds.demand(t, 0) = 2.0 + 0.5 * ds.features(t, 0);
    }
    const auto spec = ForecastSpec::ar1(single_bus(), ds, Variant::LsEx);
    const auto fit = fit_least_squares(spec, ds);
    CHECK(std::abs(fit.theta(0) - 2.0) < 1e-10);
    CHECK(std::abs(fit.theta(1) - 0.5) < 1e-10);
    CHECK(fit.residual_std(0) < 1e-10);
}

TEST_CASE("least squares on AR(1) samples") {
    const auto sc = single_bus();
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    const int reps = 20;
    for (int s = 0; s < reps; ++s) {
        const auto ds = ar_data(100 + static_cast<std::uint64_t>(s), 1000);
        const auto spec = ForecastSpec::ar1(sc, ds, Variant::LsEx);
        const auto fit = fit_least_squares(spec, ds);
        mean += fit.theta.head(2) / reps;
        // normal equations: residuals orthogonal to the regressors
        const Eigen::VectorXd r = ds.demand.col(0).array() - fit.theta(0) - fit.theta(1) * ds.features.col(0).array();
        CHECK(std::abs(r.sum()) < 1e-8);
        CHECK(std::abs(r.dot(ds.features.col(0))) < 1e-8);
    }
    CHECK(std::abs(mean(0) - 0.6) <= 0.1);
    CHECK(std::abs(mean(1) - 0.9) <= 0.1);
}

TEST_CASE("collinear regressors raise a rank error") {
    const auto ds = ar_data(1, 50);
    auto spec = ForecastSpec::ar1(single_bus(), ds, Variant::LsEx);
    spec.blocks[0].features = {kConst, kConst};
    spec.bind(ds.feature_names);
    CHECK_THROWS_AS(fit_least_squares(spec, ds), RankError);
}

TEST_CASE("exogenous reserve rule") {
    const auto one = exogenous_reserve_rule(Eigen::VectorXd::Constant(1, 1.0), {0}, 1, 1.96);
    CHECK(one.up(0) == doctest::Approx(1.96));
    CHECK(one.dn(0) == doctest::Approx(1.96));
    CHECK(exogenous_reserve_rule(Eigen::VectorXd::Zero(1), {0}, 1).up(0) == 0.0);
    const auto two = exogenous_reserve_rule(Eigen::Vector2d(3, 4), {0, 0}, 1, 1.96);
    CHECK(two.up(0) == doctest::Approx(9.8));
    CHECK_THROWS_AS(exogenous_reserve_rule(Eigen::VectorXd::Zero(1), {0}, 1, 0.0), InvariantError);
}

TEST_CASE("open-loop theta pairs LS demand with 1.96 sigma reserves") {
    const auto sc = single_bus();
    const auto ds = ar_data(4, 200);
    const auto spec = ForecastSpec::ar1(sc, ds, Variant::LsEx);
    const auto fit = fit_least_squares(spec, ds);
    const auto theta = open_loop_theta(spec, ds, sc);
    CHECK(theta.head(2) == fit.theta.head(2));
    CHECK(theta(2) == doctest::Approx(1.96 * fit.residual_std(0)));
    CHECK(theta(3) == theta(2));
}
