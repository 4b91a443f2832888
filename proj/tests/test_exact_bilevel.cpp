#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <random>

#include "adlearn/errors.hpp"
#include "adlearn/exact_bilevel.hpp"
#include "adlearn/lp/mps.hpp"
#include "adlearn/lp/simplex.hpp"

using namespace adl;

namespace {

SystemCase single_bus_case() {
    return apply_case_transforms(parse_case(std::string(ADLEARN_CASE_DIR) + "/singlebus.json"), 0.75, 1.0, 0.3,
                                  0.3);
}

Dataset sample(const SystemCase& sc, std::uint64_t seed, Index T) {
    return generate(ArProcessConfig::from_case(sc, 0.4, 0.9, seed), T);
}

ThetaBox around(const Eigen::VectorXd& c, double r) {
    return {c.array() - r, c.array() + r};
}

struct Instance {
    SystemCase sc = single_bus_case();
    DispatchModel model{sc};
    Dataset ds;
    ForecastSpec spec;
    Eigen::VectorXd ls;

    // the open-loop fit uses a longer history than the instance itself
    Instance(std::uint64_t seed, Index T, Variant v) {
        const Dataset history = sample(sc, seed, std::max<Index>(T, 50));
        ds = history.slice(0, T);
        spec = ForecastSpec::ar1(sc, history, v);
        ls = open_loop_theta(spec, history, sc);
    }
};

}  // namespace

TEST_CASE("complementarity pair count") {
    Instance in(1, 1, Variant::OptOpt);
    const BilevelData data(in.model, in.spec, in.ds, std::nullopt, in.ls);
    CHECK(data.pairs_per_sample() == 32);
    CHECK(build_kkt(data).pairs.size() == 32);
    Instance in3(1, 3, Variant::LsOpt);
    const BilevelData d3(in3.model, in3.spec, in3.ds, std::nullopt, in3.ls);
    CHECK(d3.dim() == 2);
    CHECK(build_kkt(d3).pairs.size() == 96);
}

TEST_CASE("exact data rejects empty or oversized problems") {
    Instance in(1, 5, Variant::LsEx);
    CHECK_THROWS_AS(BilevelData(in.model, in.spec, in.ds), ConfigError);
    Instance big(1, 200, Variant::OptOpt);
    CHECK_THROWS_AS(BilevelData(big.model, big.spec, big.ds), ConfigError);
}

TEST_CASE("forecast map matches the forecast model") {
    Instance in(2, 6, Variant::OptOpt);
    const BilevelData data(in.model, in.spec, in.ds, std::nullopt, in.ls);
    const Eigen::Vector4d theta(0.5, 0.8, 1.2, 0.7);
    const auto cols = in.spec.columns();
    for (Index t = 0; t < data.samples(); ++t) {
        const Eigen::VectorXd p = data.forecast(t, data.trainable_part(theta));
        const auto f = predict_raw(in.spec, theta, in.ds.features.row(t));
        CHECK((p.head(1) - f.demand).norm() < 1e-12);
        CHECK(std::abs(p(1) - f.reserve_up(0)) < 1e-12);
        CHECK(std::abs(p(2) - f.reserve_dn(0)) < 1e-12);
    }
    CHECK(data.full_theta(data.trainable_part(theta)) == theta);
}

TEST_CASE("KKT point of a theta satisfies the single-level rows") {
    Instance in(3, 4, Variant::OptOpt);
    const BilevelData data(in.model, in.spec, in.ds, std::nullopt, in.ls);
    const auto inst = build_kkt(data);
    for (const Eigen::VectorXd& theta : {in.ls, Eigen::VectorXd(Eigen::Vector4d(0.7, 0.85, 0.4, 1.5))}) {
        const Eigen::VectorXd x = kkt_point(inst, data, data.trainable_part(theta));
        CHECK(inst.max_violation(x) <= 1e-7);
        double comp = 0;
        for (const auto& pr : inst.pairs) comp = std::max(comp, std::abs(inst.slack(pr, x) * x(pr.dual)));
        CHECK(comp <= 1e-7);
        // the instance objective at the KKT point is the pipeline cost
        const double obj = inst.lp.objective.dot(x) + inst.lp.objective_offset;
        CHECK(obj == doctest::Approx(cost(theta, in.model, in.spec, in.ds)).epsilon(1e-7));
    }
}

TEST_CASE("root relaxation bounds the trained cost") {
    Instance in(4, 5, Variant::OptOpt);
    const BilevelData data(in.model, in.spec, in.ds, std::nullopt, in.ls);
    const auto inst = build_kkt(data);
    const auto root = lp::solve(inst.lp);
    REQUIRE(root.optimal());
    TrainConfig c;
    c.max_iterations = 300;
    const auto r = train(c, in.model, in.spec, in.ds);
    CHECK(root.objective <= r.cost + 1e-9);
}

TEST_CASE("pair and region searches agree on tiny instances") {
    for (Index T : {1, 2}) {
        Instance in(5, T, Variant::LsOpt);
        const BilevelData data(in.model, in.spec, in.ds, around(in.ls.tail(2), 2.0), in.ls);
        ExactOptions opt;
        opt.gap_tol = 1e-9;
        opt.time_limit = 120;
        const auto pair = solve_bnb(build_kkt(data), data, opt);
        const auto region = solve_region_bnb(data, opt);
        CHECK(pair.status == ExactStatus::Optimal);
        CHECK(region.status == ExactStatus::Optimal);
        CHECK(std::isfinite(pair.objective));
        CHECK(pair.objective == doctest::Approx(region.objective).epsilon(1e-6));
        CHECK(cost(region.theta, in.model, in.spec, in.ds) == doctest::Approx(region.objective).epsilon(1e-9));
    }
}

TEST_CASE("region search is no worse than a fine grid") {
    Instance in(6, 2, Variant::LsOpt);
    const Eigen::VectorXd c = in.ls.tail(2);
    const BilevelData data(in.model, in.spec, in.ds, around(c, 1.0), in.ls);
    ExactOptions opt;
    opt.gap_tol = 1e-9;
    const auto r = solve_region_bnb(data, opt);
    REQUIRE(r.status == ExactStatus::Optimal);
    double best = 1e300;
    Eigen::VectorXd theta = in.ls;
    for (int i = 0; i <= 100; ++i)
        for (int j = 0; j <= 100; ++j) {
            theta(2) = c(0) - 1.0 + 0.02 * i;
            theta(3) = c(1) - 1.0 + 0.02 * j;
            best = std::min(best, cost(theta, in.model, in.spec, in.ds));
        }
    CHECK(r.objective <= best + 1e-9);
    CHECK(best - r.objective <= 0.05);
}

TEST_CASE("root bounds never exceed the optimum") {
    Instance in(7, 3, Variant::LsOpt);
    const BilevelData data(in.model, in.spec, in.ds, around(in.ls.tail(2), 1.0), in.ls);
    ExactOptions opt;
    opt.gap_tol = 1e-9;
    opt.record_bounds = true;
    const auto region = solve_region_bnb(data, opt);
    const auto pair = solve_bnb(build_kkt(data), data, opt);
    REQUIRE(region.status == ExactStatus::Optimal);
    REQUIRE(!region.bounds.empty());
    REQUIRE(!pair.bounds.empty());
    CHECK(region.bounds.front().second <= region.objective + 1e-9);
    CHECK(pair.bounds.front().second <= region.objective + 1e-9);
    // a pair-level child relaxation is the parent relaxation with more fixings
    for (const auto& [parent, bound] : pair.bounds) CHECK(bound >= parent - 1e-7);
    CHECK(region.bound <= region.objective + 1e-9);
}

TEST_CASE("enumerated regions cover sampled forecasts") {
    Instance in(8, 4, Variant::OptOpt);
    const BilevelData data(in.model, in.spec, in.ds, around(in.ls, 0.5), in.ls);
    const Eigen::Vector3d lo(2.0, 0.0, 0.0), hi(12.0, 3.0, 3.0);
    const auto regions = enumerate_regions(data, lo, hi);
    REQUIRE(!regions.empty());
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    lp::SimplexSolver<double> solver;
    for (int k = 0; k < 200; ++k) {
        Eigen::Vector3d p;
        for (int i = 0; i < 3; ++i) p(i) = lo(i) + (hi(i) - lo(i)) * u(rng);
        const auto sol = solver.solve(data.planning_at(p), data.model().planning_perturbation());
        REQUIRE(sol.optimal());
        const CriticalRegion here = critical_region(data, sol);
        const auto it = std::find_if(regions.begin(), regions.end(),
                                     [&](const CriticalRegion& R) { return R.same_basis(here); });
        REQUIRE(it != regions.end());
        CHECK((it->G * p - it->h).maxCoeff() <= 1e-7);
        CHECK((it->Z * p + it->z0 - sol.x).cwiseAbs().maxCoeff() <= 1e-7);
    }
}

TEST_CASE("big-M constants bound every KKT point in the box") {
    Instance in(9, 2, Variant::OptOpt);
    const BilevelData data(in.model, in.spec, in.ds, around(in.ls, 0.5), in.ls);
    const auto inst = build_kkt(data);
    const auto bounds = derive_bigm(inst, data, BigMPolicy::FromBounds);
    const auto regions = derive_bigm(inst, data, BigMPolicy::FromRegions);
    CHECK(regions.slack.allFinite());
    CHECK(regions.dual.allFinite());
    // region constants carry a 10% margin
    CHECK((regions.slack.array() <= 1.1 * bounds.slack.array() + 1e-6).all());
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (int k = 0; k < 30; ++k) {
        Eigen::VectorXd s = data.trainable_part(in.ls);
        for (Index i = 0; i < s.size(); ++i) s(i) += u(rng);
        if ((data.base_rows() * s - data.base_rhs()).maxCoeff() > 0) continue;
        const Eigen::VectorXd x = kkt_point(inst, data, s);
        for (std::size_t j = 0; j < inst.pairs.size(); ++j) {
            const auto& pr = inst.pairs[j];
            const double slack = inst.slack(pr, x), dual = std::abs(x(pr.dual));
            CHECK(slack <= bounds.slack(static_cast<Index>(j)) + 1e-7);  // may be infinite
            CHECK(slack <= regions.slack(static_cast<Index>(j)) + 1e-7);
            CHECK(dual <= regions.dual(static_cast<Index>(j)) + 1e-7);
        }
    }
}

TEST_CASE("big-M export needs finite constants and round-trips") {
    Instance in(10, 1, Variant::OptOpt);
    const BilevelData data(in.model, in.spec, in.ds, around(in.ls, 0.5), in.ls);
    const auto inst = build_kkt(data);
    const auto path = (std::filesystem::temp_directory_path() / "adlearn_bigm.mps").string();
    // interval propagation leaves shed and spill unbounded, and duals need a cap
    CHECK_THROWS_AS(export_bigm_mps(inst, derive_bigm(inst, data, BigMPolicy::FromBounds), path), BigMError);
    CHECK_THROWS_AS(export_bigm_mps(inst, derive_bigm(inst, data, BigMPolicy::FromBounds, 1e4), path), BigMError);
    const auto m = derive_bigm(inst, data, BigMPolicy::FromRegions);
    std::vector<std::uint8_t> binary;
    const Lp milp = bigm_milp(inst, m, &binary);
    export_bigm_mps(inst, m, path);
    const auto back = lp::read_mps_file(path);
    std::filesystem::remove(path);
    CHECK(back.lp.rows() == milp.rows());
    CHECK(back.lp.cols() == milp.cols());
    CHECK(back.integer == binary);
    CHECK(std::count(binary.begin(), binary.end(), 1) == static_cast<long>(inst.pairs.size()));
    const auto a = lp::solve(milp), b = lp::solve(back.lp);
    REQUIRE(a.optimal());
    REQUIRE(b.optimal());
    CHECK(a.objective == doctest::Approx(b.objective).epsilon(1e-6));
}

TEST_CASE("region search starts from the heuristic") {
    Instance in(11, 4, Variant::OptOpt);
    TrainConfig tc;
    tc.max_iterations = 200;
    const auto heur = train(tc, in.model, in.spec, in.ds);
    const double r0 = std::max(0.5, (heur.theta - in.ls).cwiseAbs().maxCoeff() + 0.1);
    const BilevelData data(in.model, in.spec, in.ds, around(in.ls, r0), in.ls);
    ExactOptions opt;
    opt.time_limit = 20;
    opt.starts = {heur.theta};
    const auto r = solve_region_bnb(data, opt);
    CHECK(r.objective <= heur.cost + 1e-6);
    CHECK(cost(r.theta, in.model, in.spec, in.ds) == doctest::Approx(r.objective).epsilon(1e-9));
    // the incumbent is a genuine bilevel point
    const auto inst = build_kkt(data);
    const Eigen::VectorXd x = kkt_point(inst, data, data.trainable_part(r.theta));
    double comp = 0;
    for (const auto& pr : inst.pairs) comp = std::max(comp, std::abs(inst.slack(pr, x) * x(pr.dual)));
    CHECK(comp <= 1e-7);
    CHECK(inst.max_violation(x) <= 1e-7);
}
