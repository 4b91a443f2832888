#include "adlearn/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "adlearn/errors.hpp"

#ifndef ADLEARN_GIT_REV
#define ADLEARN_GIT_REV "unknown"
#endif

namespace adl {

using nlohmann::json;

namespace {

template <class T>
T field(const json& j, const char* key, const T& fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field '") + key + "': " + e.what());
    }
}

void reject_unknown(const json& j, const std::vector<std::string>& known, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw ConfigError(where + ": unknown field '" + it.key() + "'");
}

ThetaAxis axis_from_json(const json& j, const ThetaAxis& fallback, const std::string& where) {
    reject_unknown(j, {"coef", "lo", "hi"}, where);
    ThetaAxis a = fallback;
    if (j.contains("coef")) {
        const auto name = field<std::string>(j, "coef", "");
        const auto colon = name.rfind(':');
        if (colon == std::string::npos) throw ConfigError(where + ".coef must look like block:index");
        a.block = name.substr(0, colon);
        try {
            a.index = std::stoul(name.substr(colon + 1));
        } catch (const std::exception&) {
            throw ConfigError(where + ".coef has a bad index: " + name);
        }
    }
    a.lo = field(j, "lo", a.lo);
    a.hi = field(j, "hi", a.hi);
    return a;
}

json axis_to_json(const ThetaAxis& a) {
    return {{"coef", a.block + ":" + std::to_string(a.index)}, {"lo", a.lo}, {"hi", a.hi}};
}

Variant variant_from(const std::string& s) {
    try {
        return parse_variant(s);
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::ofstream open_csv(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    return out;
}

double mean(const Eigen::VectorXd& v) {
    return v.size() == 0 ? 0.0 : v.mean();
}

}  // namespace

SystemCase CaseSettings::load() const {
    SystemCase sc = apply_case_transforms(parse_case(path), flow_factor, demand_factor, reserve_cap_frac,
                                           reserve_price_frac);
    if (load_shed) sc.penalties.load_shed = *load_shed;
    return sc;
}

ArProcessConfig ProcessSettings::config(const SystemCase& sc, std::uint64_t seed) const {
    ArProcessConfig c = ArProcessConfig::from_case(sc, cv, phi1, seed);
    if (heteroscedastic) c.exogenous = exogenous;
    return c;
}

Index ThetaAxis::position(const ForecastSpec& spec) const {
    for (std::size_t k = 0; k < spec.blocks.size(); ++k) {
        const Block& b = spec.blocks[k];
        if (b.name != block) continue;
        if (index >= b.features.size())
            throw ConfigError("coefficient " + block + ":" + std::to_string(index) + " is out of range");
        return spec.offset(k) + static_cast<Index>(index);
    }
    throw ConfigError("no forecast block named " + block);
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    reject_unknown(j, {"case", "process", "T", "seeds", "variants", "reserve_features", "out", "jobs", "eval",
                       "train", "deficit_costs", "grid", "exact", "theta_files"},
                   "config");
    ExperimentConfig c;
    if (j.contains("case")) {
        const json& s = j["case"];
        if (s.is_string()) {
            c.system.path = s.get<std::string>();
        } else {
            reject_unknown(s, {"path", "flow_factor", "demand_factor", "reserve_cap_frac", "reserve_price_frac",
                               "load_shed"},
                           "case");
            c.system.path = field(s, "path", c.system.path);
            c.system.flow_factor = field(s, "flow_factor", c.system.flow_factor);
            c.system.demand_factor = field(s, "demand_factor", c.system.demand_factor);
            c.system.reserve_cap_frac = field(s, "reserve_cap_frac", c.system.reserve_cap_frac);
            c.system.reserve_price_frac = field(s, "reserve_price_frac", c.system.reserve_price_frac);
            if (s.contains("load_shed")) c.system.load_shed = field(s, "load_shed", 0.0);
        }
    }
    if (j.contains("process")) {
        const json& p = j["process"];
        reject_unknown(p, {"cv", "phi1", "heteroscedastic", "psi0", "psi1", "sigma_e"}, "process");
        c.process.cv = field(p, "cv", c.process.cv);
        c.process.phi1 = field(p, "phi1", c.process.phi1);
        c.process.heteroscedastic = field(p, "heteroscedastic", c.process.heteroscedastic);
        c.process.exogenous.psi0 = field(p, "psi0", c.process.exogenous.psi0);
        c.process.exogenous.psi1 = field(p, "psi1", c.process.exogenous.psi1);
        c.process.exogenous.sigma_e = field(p, "sigma_e", c.process.exogenous.sigma_e);
    }
    if (j.contains("T")) {
        c.T = j["T"].is_array() ? field<std::vector<Index>>(j, "T", {}) : std::vector<Index>{field<Index>(j, "T", 0)};
    }
    c.seeds = field(j, "seeds", c.seeds);
    if (j.contains("variants")) {
        c.variants.clear();
        for (const auto& v : field<std::vector<std::string>>(j, "variants", {})) c.variants.push_back(variant_from(v));
    }
    c.reserve_features = field(j, "reserve_features", c.reserve_features);
    c.out = field(j, "out", c.out);
    c.jobs = field(j, "jobs", c.jobs);
    if (j.contains("eval")) {
        const json& e = j["eval"];
        reject_unknown(e, {"T", "seed"}, "eval");
        c.eval_T = field(e, "T", c.eval_T);
        c.eval_seed = field(e, "seed", c.eval_seed);
    }
    if (j.contains("train")) {
        const json& t = j["train"];
        reject_unknown(t, {"init", "max_iterations", "time_limit", "min_decrease", "min_diameter", "theta_bound", "z"},
                       "train");
        const auto init = field<std::string>(t, "init", "ls");
        if (init == "ls") c.train.init = InitMode::LeastSquares;
        else if (init == "zeros") c.train.init = InitMode::Zeros;
        else throw ConfigError("train.init must be 'ls' or 'zeros', got '" + init + "'");
        c.train.max_iterations = field(t, "max_iterations", c.train.max_iterations);
        c.train.time_limit = field(t, "time_limit", c.train.time_limit);
        c.train.min_decrease = field(t, "min_decrease", c.train.min_decrease);
        c.train.min_diameter = field(t, "min_diameter", c.train.min_diameter);
        c.train.theta_bound = field(t, "theta_bound", c.train.theta_bound);
        c.train.z = field(t, "z", c.train.z);
    }
    c.deficit_costs = field(j, "deficit_costs", c.deficit_costs);
    if (j.contains("grid")) {
        const json& g = j["grid"];
        reject_unknown(g, {"x", "y", "resolution"}, "grid");
        if (g.contains("x")) c.grid.x = axis_from_json(g["x"], c.grid.x, "grid.x");
        if (g.contains("y")) c.grid.y = axis_from_json(g["y"], c.grid.y, "grid.y");
        c.grid.resolution = field(g, "resolution", c.grid.resolution);
    }
    if (j.contains("exact")) {
        const json& e = j["exact"];
        reject_unknown(e, {"gap", "time_limit", "radius", "export_mps"}, "exact");
        c.exact.gap = field(e, "gap", c.exact.gap);
        c.exact.time_limit = field(e, "time_limit", c.exact.time_limit);
        c.exact.radius = field(e, "radius", c.exact.radius);
        c.exact.export_mps = field(e, "export_mps", c.exact.export_mps);
    }
    c.theta_files = field(j, "theta_files", c.theta_files);
    return c;
}

json ExperimentConfig::to_json() const {
    json j;
    j["case"] = {{"path", system.path},
                 {"flow_factor", system.flow_factor},
                 {"demand_factor", system.demand_factor},
                 {"reserve_cap_frac", system.reserve_cap_frac},
                 {"reserve_price_frac", system.reserve_price_frac}};
    if (system.load_shed) j["case"]["load_shed"] = *system.load_shed;
    j["process"] = {{"cv", process.cv},
                    {"phi1", process.phi1},
                    {"heteroscedastic", process.heteroscedastic},
                    {"psi0", process.exogenous.psi0},
                    {"psi1", process.exogenous.psi1},
                    {"sigma_e", process.exogenous.sigma_e}};
    j["T"] = T;
    j["seeds"] = seeds;
    j["variants"] = json::array();
    for (Variant v : variants) j["variants"].push_back(to_string(v));
    j["reserve_features"] = reserve_features;
    j["out"] = out;
    j["jobs"] = jobs;
    j["eval"] = {{"T", eval_T}, {"seed", eval_seed}};
    j["train"] = {{"init", train.init == InitMode::Zeros ? "zeros" : "ls"},
                  {"max_iterations", train.max_iterations},
                  {"min_decrease", train.min_decrease},
                  {"min_diameter", train.min_diameter},
                  {"theta_bound", train.theta_bound},
                  {"z", train.z}};
    if (std::isfinite(train.time_limit)) j["train"]["time_limit"] = train.time_limit;
    j["deficit_costs"] = deficit_costs;
    j["grid"] = {{"x", axis_to_json(grid.x)}, {"y", axis_to_json(grid.y)}, {"resolution", grid.resolution}};
    j["exact"] = {{"gap", exact.gap}, {"time_limit", exact.time_limit}, {"radius", exact.radius}};
    if (!exact.export_mps.empty()) j["exact"]["export_mps"] = exact.export_mps;
    if (!theta_files.empty()) j["theta_files"] = theta_files;
    return j;
}

void ExperimentConfig::validate() const {
    if (T.empty()) throw ConfigError("T list is empty");
    for (Index t : T)
        if (t < 2) throw ConfigError("every T must be >= 2, got " + std::to_string(t));
    if (seeds.empty()) throw ConfigError("seed list is empty");
    if (variants.empty()) throw ConfigError("variant list is empty");
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
    if (eval_T < 2) throw ConfigError("eval.T must be >= 2");
    for (const auto& f : reserve_features)
        if (f != "E") throw ConfigError("unknown reserve feature '" + f + "' (only E is available)");
    if (deficit_costs.empty()) throw ConfigError("deficit_costs is empty");
    for (double d : deficit_costs)
        if (!(d > 0)) throw ConfigError("deficit costs must be positive");
    if (!(grid.resolution > 0)) throw ConfigError("grid.resolution must be positive");
    for (const auto* a : {&grid.x, &grid.y})
        if (!(a->lo <= a->hi)) throw ConfigError("grid axis " + a->block + " has lo > hi");
    if (!(exact.gap >= 0)) throw ConfigError("exact.gap must be >= 0");
    if (!(exact.time_limit > 0)) throw ConfigError("exact.time_limit must be positive");
    if (!(exact.radius > 0)) throw ConfigError("exact.radius must be positive");
    try {
        train.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
}

std::string ExperimentConfig::hash() const {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : to_json().dump()) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string git_revision() {
    return ADLEARN_GIT_REV;
}

Dataset training_data(const ExperimentConfig& c, const SystemCase& sc, std::uint64_t seed, Index T) {
    const Index longest = std::max(T, *std::max_element(c.T.begin(), c.T.end()));
    return generate(c.process.config(sc, seed), longest).slice(0, T);
}

Dataset evaluation_data(const ExperimentConfig& c, const SystemCase& sc) {
    return generate(c.process.config(sc, c.eval_seed), c.eval_T);
}

ForecastSpec make_spec(const ExperimentConfig& c, const SystemCase& sc, const Dataset& ds, Variant v) {
    return ForecastSpec::ar1(sc, ds, v, c.reserve_features);
}

std::vector<TrainRun> run_training(const ExperimentConfig& c, const SystemCase& sc) {
    const DispatchModel model(sc);
    std::vector<TrainRun> runs;
    for (std::uint64_t seed : c.seeds)
        for (Index T : c.T) {
            const Dataset ds = training_data(c, sc, seed, T);
            for (Variant v : c.variants) {
                TrainRun r;
                r.variant = v;
                r.seed = seed;
                r.T = T;
                r.spec = make_spec(c, sc, ds, v);
                TrainConfig tc = c.train;
                tc.jobs = c.jobs;
                tc.seed = seed;
                r.result = train(tc, model, r.spec, ds);
                runs.push_back(std::move(r));
            }
        }
    return runs;
}

EvalRow evaluate_run(const TrainRun& run, const DispatchModel& model, const Dataset& eval, int jobs) {
    ForecastSpec spec = run.spec;
    spec.bind(eval.feature_names);
    EvalRow row;
    row.variant = run.variant;
    row.seed = run.seed;
    row.T = run.T;
    row.train_cost = run.result.cost;
    CostEvaluator ev(model, spec, eval, jobs);
    row.eval_cost = ev(run.result.theta);
    const Index n = eval.length();
    row.errors.resize(n);
    for (Index t = 0; t < n; ++t) {
        const Forecast f = predict(spec, run.result.theta, eval.features.row(t));
        row.errors(t) = (bus_demand(model, eval, t) - f.demand).sum();
    }
    row.error_mean = mean(row.errors);
    if (n > 1) {
        const double var = (row.errors.array() - row.error_mean).square().sum() / static_cast<double>(n - 1);
        row.error_se = std::sqrt(var / static_cast<double>(n));
    }
    return row;
}

double steady_state_forecast(const ForecastSpec& spec, const Eigen::VectorXd& theta) {
    for (std::size_t k = 0; k < spec.blocks.size(); ++k) {
        const Block& b = spec.blocks[k];
        if (b.family != Family::Demand) continue;
        double c0 = 0.0, c1 = 0.0;
        for (std::size_t i = 0; i < b.features.size(); ++i) {
            const double v = theta(spec.offset(k) + static_cast<Index>(i));
            if (b.features[i] == kConst) c0 = v;
            else if (b.features[i].rfind("lag1", 0) == 0) c1 = v;
        }
        if (c1 == 1.0) throw InvariantError("steady state undefined for a unit-root forecast");
        return c0 / (1.0 - c1);
    }
    throw InvariantError("forecast has no demand block");
}

namespace {

// Mean zone-0 reserve forecasts over a dataset.
std::pair<double, double> mean_reserves(const ForecastSpec& spec, const Eigen::VectorXd& theta, const Dataset& ds) {
    double up = 0.0, dn = 0.0;
    for (Index t = 0; t < ds.length(); ++t) {
        const Forecast f = predict(spec, theta, ds.features.row(t));
        up += f.reserve_up(0);
        dn += f.reserve_dn(0);
    }
    return {up / static_cast<double>(ds.length()), dn / static_cast<double>(ds.length())};
}

}  // namespace

std::vector<SweepRow> run_deficit_sweep(const ExperimentConfig& c) {
    std::vector<SweepRow> rows;
    for (double cost : c.deficit_costs) {
        CaseSettings s = c.system;
        s.load_shed = cost;
        const SystemCase sc = s.load();
        const DispatchModel model(sc);
        const Dataset ds = training_data(c, sc, c.seeds.front(), c.T.front());
        const ForecastSpec spec = make_spec(c, sc, ds, Variant::OptOpt);
        TrainConfig tc = c.train;
        tc.jobs = c.jobs;
        tc.seed = c.seeds.front();
        const TrainResult r = train(tc, model, spec, ds);
        SweepRow row;
        row.deficit_cost = cost;
        row.steady_state = steady_state_forecast(spec, r.theta);
        std::tie(row.r_up, row.r_dn) = mean_reserves(spec, r.theta, ds);
        row.ls_steady_state = steady_state_forecast(spec, r.ls_theta);
        std::tie(row.ls_r_up, row.ls_r_dn) = mean_reserves(spec, r.ls_theta, ds);
        rows.push_back(row);
    }
    return rows;
}

std::vector<GridPoint> run_grid(const ExperimentConfig& c, const SystemCase& sc) {
    const DispatchModel model(sc);
    const Dataset ds = training_data(c, sc, c.seeds.front(), c.T.front());
    const ForecastSpec spec = make_spec(c, sc, ds, c.variants.front());
    Eigen::VectorXd theta = open_loop_theta(spec, ds, sc, c.train.z);
    const Index px = c.grid.x.position(spec), py = c.grid.y.position(spec);
    if (px == py) throw ConfigError("grid axes name the same coefficient");
    auto steps = [&](const ThetaAxis& a) {
        return static_cast<Index>(std::floor((a.hi - a.lo) / c.grid.resolution + 1e-9)) + 1;
    };
    CostEvaluator ev(model, spec, ds, c.jobs);
    std::vector<GridPoint> pts;
    const Index nx = steps(c.grid.x), ny = steps(c.grid.y);
    for (Index i = 0; i < nx; ++i)
        for (Index k = 0; k < ny; ++k) {
            GridPoint p;
            p.x = c.grid.x.lo + static_cast<double>(i) * c.grid.resolution;
            p.y = c.grid.y.lo + static_cast<double>(k) * c.grid.resolution;
            theta(px) = p.x;
            theta(py) = p.y;
            p.cost = ev(theta);
            pts.push_back(p);
        }
    return pts;
}

ThetaBox exact_box(const BilevelData& data, const Eigen::VectorXd& ls, const Eigen::VectorXd& include, double radius) {
    const Eigen::VectorXd c = data.trainable_part(ls), x = data.trainable_part(include);
    ThetaBox box{c.array() - radius, c.array() + radius};
    box.lo = box.lo.cwiseMin((x.array() - 0.05 * radius).matrix());
    box.hi = box.hi.cwiseMax((x.array() + 0.05 * radius).matrix());
    return box;
}

ExactRow run_exact(const ExperimentConfig& c, const SystemCase& sc, std::uint64_t seed, Index T, Variant v) {
    const DispatchModel model(sc);
    const Dataset ds = training_data(c, sc, seed, T);
    const ForecastSpec spec = make_spec(c, sc, ds, v);
    TrainConfig tc = c.train;
    tc.jobs = c.jobs;
    tc.seed = seed;
    const TrainResult heur = train(tc, model, spec, ds);
    const BilevelData probe(model, spec, ds, std::nullopt, heur.ls_theta);
    const BilevelData data(model, spec, ds, exact_box(probe, heur.ls_theta, heur.theta, c.exact.radius),
                           heur.ls_theta);
    ExactOptions opt;
    opt.gap_tol = c.exact.gap;
    opt.time_limit = c.exact.time_limit;
    opt.starts = {heur.theta};
    ExactRow row;
    row.seed = seed;
    row.T = T;
    row.heuristic = heur.cost;
    row.exact = solve_region_bnb(data, opt);
    if (!c.exact.export_mps.empty()) {
        const KktInstance inst = build_kkt(data);
        export_bigm_mps(inst, derive_bigm(inst, data, BigMPolicy::FromRegions), c.exact.export_mps);
    }
    return row;
}

void write_train_csv(const std::vector<TrainRun>& runs, const std::string& path) {
    auto out = open_csv(path);
    out << "variant,T,seed,cost,ls_cost,iterations,evaluations,termination\n";
    for (const auto& r : runs)
        out << to_string(r.variant) << ',' << r.T << ',' << r.seed << ',' << fmt(r.result.cost) << ','
            << fmt(r.result.ls_cost) << ',' << r.result.iterations << ',' << r.result.evaluations << ','
            << to_string(r.result.termination) << '\n';
}

void write_eval_csv(const std::vector<EvalRow>& rows, const std::string& path) {
    auto out = open_csv(path);
    out << "variant,T,seed,train_cost,eval_cost,error_mean,error_se\n";
    for (const auto& r : rows)
        out << to_string(r.variant) << ',' << r.T << ',' << r.seed << ',' << fmt(r.train_cost) << ','
            << fmt(r.eval_cost) << ',' << fmt(r.error_mean) << ',' << fmt(r.error_se) << '\n';
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
    auto out = open_csv(path);
    out << "deficit_cost,steady_state,r_up,r_dn,ls_steady_state,ls_r_up,ls_r_dn\n";
    for (const auto& r : rows)
        out << fmt(r.deficit_cost) << ',' << fmt(r.steady_state) << ',' << fmt(r.r_up) << ',' << fmt(r.r_dn) << ','
            << fmt(r.ls_steady_state) << ',' << fmt(r.ls_r_up) << ',' << fmt(r.ls_r_dn) << '\n';
}

void write_grid_csv(const std::vector<GridPoint>& pts, const std::string& path) {
    auto out = open_csv(path);
    out << "x,y,cost\n";
    for (const auto& p : pts) out << fmt(p.x) << ',' << fmt(p.y) << ',' << fmt(p.cost) << '\n';
}

void write_exact_csv(const std::vector<ExactRow>& rows, const std::string& path) {
    auto out = open_csv(path);
    out << "seed,T,heuristic,exact,bound,gap,nodes,status,ratio\n";
    for (const auto& r : rows)
        out << r.seed << ',' << r.T << ',' << fmt(r.heuristic) << ',' << fmt(r.exact.objective) << ','
            << fmt(r.exact.bound) << ',' << fmt(r.exact.gap) << ',' << r.exact.nodes << ','
            << to_string(r.exact.status) << ',' << fmt(r.ratio()) << '\n';
}

void write_sidecar(const std::string& csv_path, const ExperimentConfig& c, const std::string& command,
                   const json& extra) {
    json j = extra;
    j["config_hash"] = c.hash();
    j["git_revision"] = git_revision();
    j["command"] = command;
    j["config"] = c.to_json();
    std::ofstream out(csv_path + ".json");
    if (!out) throw IoError("cannot write " + csv_path + ".json");
    out << j.dump(2) << '\n';
}

}  // namespace adl
