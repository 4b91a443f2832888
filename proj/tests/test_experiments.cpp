#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "adlearn/errors.hpp"
#include "adlearn/experiments.hpp"

using namespace adl;
using nlohmann::json;

namespace {

ExperimentConfig small_config() {
    ExperimentConfig c;
    c.system.path = std::string(ADLEARN_CASE_DIR) + "/singlebus.json";
    c.T = {20, 40};
    c.seeds = {3};
    c.train.max_iterations = 40;
    c.eval_T = 200;
    return c;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "adlearn_test_experiments";
    std::filesystem::create_directories(dir);
    return (dir / name).string();
}

}  // namespace

TEST_CASE("config round-trips through json") {
    const ExperimentConfig c = small_config();
    const ExperimentConfig back = ExperimentConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());
    CHECK(back.hash() == c.hash());
    ExperimentConfig other = c;
    other.seeds = {4};
    CHECK(other.hash() != c.hash());
}

TEST_CASE("config errors are reported as ConfigError") {
    CHECK_THROWS_AS(ExperimentConfig::from_json(json{{"tee", 5}}), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(json{{"exact", {{"gapp", 1}}}}), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(json{{"variants", {"opt-max"}}}), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(json{{"train", {{"init", "random"}}}}), ConfigError);
    ExperimentConfig c = small_config();
    c.T = {1};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config();
    c.reserve_features = {"X"};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config();
    c.deficit_costs = {0.0};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK_NOTHROW(small_config().validate());
}

TEST_CASE("training data of a seed share a prefix") {
    const ExperimentConfig c = small_config();
    const SystemCase sc = c.system.load();
    const Dataset a = training_data(c, sc, 3, 20), b = training_data(c, sc, 3, 40);
    CHECK(a.length() == 20);
    CHECK(b.length() == 40);
    CHECK(a.demand == b.demand.topRows(20));
    CHECK(a.features == b.features.topRows(20));
    const Dataset e = evaluation_data(c, sc);
    CHECK(e.length() == 200);
    CHECK(e.demand.row(0) != a.demand.row(0));
}

TEST_CASE("repeated training writes identical csv") {
    const ExperimentConfig c = small_config();
    const SystemCase sc = c.system.load();
    const std::string p1 = scratch("train1.csv"), p2 = scratch("train2.csv");
    write_train_csv(run_training(c, sc), p1);
    write_train_csv(run_training(c, sc), p2);
    CHECK(!slurp(p1).empty());
    CHECK(slurp(p1) == slurp(p2));
}

TEST_CASE("evaluation reports the mean error of the forecasts") {
    ExperimentConfig c = small_config();
    c.T = {40};
    c.variants = {Variant::LsEx};
    const SystemCase sc = c.system.load();
    const DispatchModel model(sc);
    const auto runs = run_training(c, sc);
    REQUIRE(runs.size() == 1);
    const Dataset eval = evaluation_data(c, sc);
    const EvalRow r = evaluate_run(runs[0], model, eval, 1);
    CHECK(r.errors.size() == eval.length());
    CHECK(r.error_mean == doctest::Approx(r.errors.mean()));
    CHECK(r.eval_cost == doctest::Approx(cost(runs[0].result.theta, model, runs[0].spec, eval)).epsilon(1e-12));
}

TEST_CASE("a one-point grid is the pipeline cost") {
    ExperimentConfig c = small_config();
    c.T = {20};
    c.variants = {Variant::LsOpt};
    c.grid.x = {"Rup_1", 0, 1.25, 1.25};
    c.grid.y = {"Rdn_1", 0, 0.5, 0.5};
    const SystemCase sc = c.system.load();
    const auto pts = run_grid(c, sc);
    REQUIRE(pts.size() == 1);
    const DispatchModel model(sc);
    const Dataset ds = training_data(c, sc, 3, 20);
    const ForecastSpec spec = make_spec(c, sc, ds, Variant::LsOpt);
    Eigen::VectorXd theta = open_loop_theta(spec, ds, sc, c.train.z);
    theta(c.grid.x.position(spec)) = 1.25;
    theta(c.grid.y.position(spec)) = 0.5;
    CHECK(pts[0].cost == doctest::Approx(cost(theta, model, spec, ds)).epsilon(1e-12));
    c.grid.y = c.grid.x;
    CHECK_THROWS_AS(run_grid(c, sc), ConfigError);
}

TEST_CASE("exact box holds the heuristic theta") {
    ExperimentConfig c = small_config();
    const SystemCase sc = c.system.load();
    const DispatchModel model(sc);
    const Dataset ds = training_data(c, sc, 3, 5);
    const ForecastSpec spec = make_spec(c, sc, ds, Variant::OptOpt);
    const Eigen::VectorXd ls = open_loop_theta(spec, ds, sc);
    const BilevelData data(model, spec, ds, std::nullopt, ls);
    Eigen::VectorXd far = ls;
    far(0) += 3.0;
    const ThetaBox box = exact_box(data, ls, far, 1.0);
    CHECK(box.hi(0) == doctest::Approx(ls(0) + 3.05));
    CHECK(box.lo(0) == doctest::Approx(ls(0) - 1.0));
    CHECK(box.hi(1) == doctest::Approx(ls(1) + 1.0));
}

TEST_CASE("sidecar records hash and command") {
    const ExperimentConfig c = small_config();
    const std::string p = scratch("side.csv");
    write_sidecar(p, c, "train", {{"seconds", {1.5}}});
    const json j = json::parse(slurp(p + ".json"));
    CHECK(j.at("config_hash") == c.hash());
    CHECK(j.at("command") == "train");
    CHECK(j.at("seconds")[0] == 1.5);
    CHECK(j.at("config") == c.to_json());
}
