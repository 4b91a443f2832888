#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "adlearn/datagen.hpp"
#include "adlearn/dispatch.hpp"
#include "adlearn/exact_bilevel.hpp"
#include "adlearn/forecast.hpp"
#include "adlearn/netcase.hpp"
#include "adlearn/trainer.hpp"
#include "json.hpp"

namespace adl {

struct CaseSettings {
    std::string path = "cases/singlebus.json";
    double flow_factor = 0.75;
    double demand_factor = 1.0;
    double reserve_cap_frac = 0.3;
    double reserve_price_frac = 0.3;
    std::optional<double> load_shed;

    SystemCase load() const;
};

struct ProcessSettings {
    double cv = 0.4;
    double phi1 = 0.9;
    bool heteroscedastic = false;
    ExogenousVarianceConfig exogenous;

    ArProcessConfig config(const SystemCase& sc, std::uint64_t seed) const;
};

/// A theta coordinate named `block:index`, e.g. `Rup_1:0`.
struct ThetaAxis {
    std::string block;
    std::size_t index = 0;
    double lo = 0.0;
    double hi = 0.0;

    Index position(const ForecastSpec& spec) const;
};

struct GridSettings {
    ThetaAxis x{"Rup_1", 0, 0.0, 3.0};
    ThetaAxis y{"Rdn_1", 0, 0.0, 3.0};
    double resolution = 0.05;
};

struct ExactSettings {
    double gap = 1e-3;
    double time_limit = 600.0;
    /// Half-width of the theta box around the open-loop values.
    double radius = 1.0;
    std::string export_mps;
};

struct ExperimentConfig {
    CaseSettings system;
    ProcessSettings process;
    std::vector<Index> T{200};
    std::vector<std::uint64_t> seeds{1};
    std::vector<Variant> variants{Variant::LsEx, Variant::OptOpt};
    std::vector<std::string> reserve_features;
    std::string out = "out";
    int jobs = 1;
    Index eval_T = 10000;
    std::uint64_t eval_seed = 1000003;
    TrainConfig train;
    std::vector<double> deficit_costs{15.0, 40.0, 70.0, 100.0};
    GridSettings grid;
    ExactSettings exact;
    /// Train result files read by `evaluate` instead of training.
    std::vector<std::string> theta_files;

    static ExperimentConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    void validate() const;
    /// FNV-1a of the canonical JSON dump.
    std::string hash() const;
};

std::string git_revision();

/// Training data of one seed: the first T of the longest requested series.
Dataset training_data(const ExperimentConfig& c, const SystemCase& sc, std::uint64_t seed, Index T);
Dataset evaluation_data(const ExperimentConfig& c, const SystemCase& sc);
ForecastSpec make_spec(const ExperimentConfig& c, const SystemCase& sc, const Dataset& ds, Variant v);

struct TrainRun {
    Variant variant = Variant::LsEx;
    std::uint64_t seed = 0;
    Index T = 0;
    ForecastSpec spec;
    TrainResult result;
};

std::vector<TrainRun> run_training(const ExperimentConfig& c, const SystemCase& sc);

struct EvalRow {
    Variant variant = Variant::LsEx;
    std::uint64_t seed = 0;
    Index T = 0;
    double train_cost = 0.0;
    double eval_cost = 0.0;
    /// Realized minus forecast demand, summed over buses, averaged over samples.
    double error_mean = 0.0;
    double error_se = 0.0;
    Eigen::VectorXd errors;
};

EvalRow evaluate_run(const TrainRun& run, const DispatchModel& model, const Dataset& eval, int jobs);

struct SweepRow {
    double deficit_cost = 0.0;
    double steady_state = 0.0;
    double r_up = 0.0;
    double r_dn = 0.0;
    double ls_steady_state = 0.0;
    double ls_r_up = 0.0;
    double ls_r_dn = 0.0;
};

/// theta_D(const) / (1 - theta_D(lag1)) of the first demand block.
double steady_state_forecast(const ForecastSpec& spec, const Eigen::VectorXd& theta);
std::vector<SweepRow> run_deficit_sweep(const ExperimentConfig& c);

struct GridPoint {
    double x = 0.0;
    double y = 0.0;
    double cost = 0.0;
};

/// Cost over the x/y slice with every other coefficient at its open-loop value.
std::vector<GridPoint> run_grid(const ExperimentConfig& c, const SystemCase& sc);

struct ExactRow {
    std::uint64_t seed = 0;
    Index T = 0;
    double heuristic = 0.0;
    ExactResult exact;
    double ratio() const { return heuristic / exact.objective; }
};

/// Open-loop box of the given radius, widened to hold `include` with a margin.
ThetaBox exact_box(const BilevelData& data, const Eigen::VectorXd& ls, const Eigen::VectorXd& include, double radius);
ExactRow run_exact(const ExperimentConfig& c, const SystemCase& sc, std::uint64_t seed, Index T, Variant v);

void write_train_csv(const std::vector<TrainRun>& runs, const std::string& path);
void write_eval_csv(const std::vector<EvalRow>& rows, const std::string& path);
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);
void write_grid_csv(const std::vector<GridPoint>& pts, const std::string& path);
void write_exact_csv(const std::vector<ExactRow>& rows, const std::string& path);
/// `<csv>.json` with the config hash, git revision and command.
void write_sidecar(const std::string& csv_path, const ExperimentConfig& c, const std::string& command,
                   const nlohmann::json& extra = nlohmann::json::object());

}  // namespace adl
