#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "adlearn/errors.hpp"
#include "adlearn/experiments.hpp"

namespace fs = std::filesystem;
using namespace adl;
using nlohmann::json;

namespace {

constexpr int kConfigError = 2;
constexpr int kTimeout = 3;

std::string run_name(Variant v, Index T, std::uint64_t seed) {
    return to_string(v) + "_T" + std::to_string(T) + "_seed" + std::to_string(seed);
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            std::size_t used = 0;
            out.push_back(std::stoull(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("bad seed '" + item + "' in --seeds");
        }
    }
    return out;
}

void write_json(const json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(2) << '\n';
}

int cmd_generate(const ExperimentConfig& c) {
    const SystemCase sc = c.system.load();
    for (std::uint64_t seed : c.seeds)
        for (Index T : c.T) {
            const std::string path = c.out + "/data_T" + std::to_string(T) + "_seed" + std::to_string(seed) + ".csv";
            save_dataset(training_data(c, sc, seed, T), path);
            write_sidecar(path, c, "generate");
        }
    const std::string eval = c.out + "/eval_seed" + std::to_string(c.eval_seed) + ".csv";
    save_dataset(evaluation_data(c, sc), eval);
    write_sidecar(eval, c, "generate");
    return 0;
}

void save_runs(const ExperimentConfig& c, const std::vector<TrainRun>& runs, const std::string& command) {
    for (const auto& r : runs) {
        json j = train_result_to_json(r.spec, r.result);
        j["variant"] = to_string(r.variant);
        j["T"] = r.T;
        j["seed"] = r.seed;
        const std::string name = run_name(r.variant, r.T, r.seed);
        write_json(j, c.out + "/train_" + name + ".json");
        const std::string traj = c.out + "/trajectory_" + name + ".csv";
        write_trajectory_csv(r.result.trajectory, traj);
        write_sidecar(traj, c, command);
    }
    write_train_csv(runs, c.out + "/train.csv");
    json seconds = json::array();
    for (const auto& r : runs) seconds.push_back(r.result.seconds);
    write_sidecar(c.out + "/train.csv", c, command, {{"seconds", seconds}});
}

int cmd_train(const ExperimentConfig& c) {
    save_runs(c, run_training(c, c.system.load()), "train");
    return 0;
}

std::vector<TrainRun> load_runs(const ExperimentConfig& c, const SystemCase& sc) {
    std::vector<TrainRun> runs;
    for (const auto& path : c.theta_files) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot read theta file " + path);
        json j;
        try {
            j = json::parse(in);
            TrainRun r;
            r.variant = parse_variant(j.at("variant").get<std::string>());
            r.T = j.at("T").get<Index>();
            r.seed = j.at("seed").get<std::uint64_t>();
            r.spec = make_spec(c, sc, training_data(c, sc, r.seed, r.T), r.variant);
            r.result.theta = theta_from_json(r.spec, j.at("theta"));
            r.result.cost = j.at("cost").get<double>();
            runs.push_back(std::move(r));
        } catch (const json::exception& e) {
            throw ConfigError("theta file " + path + ": " + e.what());
        }
    }
    return runs;
}

int cmd_evaluate(const ExperimentConfig& c) {
    const SystemCase sc = c.system.load();
    const DispatchModel model(sc);
    std::vector<TrainRun> runs;
    if (c.theta_files.empty()) {
        runs = run_training(c, sc);
        save_runs(c, runs, "evaluate");
    } else {
        runs = load_runs(c, sc);
    }
    const Dataset eval = evaluation_data(c, sc);
    std::vector<EvalRow> rows;
    for (const auto& r : runs) {
        rows.push_back(evaluate_run(r, model, eval, c.jobs));
        const std::string path = c.out + "/errors_" + run_name(r.variant, r.T, r.seed) + ".csv";
        std::ofstream out(path);
        if (!out) throw IoError("cannot write " + path);
        out << "t,error\n";
        char buf[64];
        for (Index t = 0; t < rows.back().errors.size(); ++t) {
            std::snprintf(buf, sizeof buf, "%ld,%.17g\n", static_cast<long>(t), rows.back().errors(t));
            out << buf;
        }
        out.close();
        write_sidecar(path, c, "evaluate");
    }
    write_eval_csv(rows, c.out + "/evaluate.csv");
    write_sidecar(c.out + "/evaluate.csv", c, "evaluate");
    return 0;
}

int cmd_sweep(const ExperimentConfig& c) {
    const std::string path = c.out + "/sweep_deficit.csv";
    write_sweep_csv(run_deficit_sweep(c), path);
    write_sidecar(path, c, "sweep-deficit");
    return 0;
}

int cmd_grid(const ExperimentConfig& c) {
    const std::string path = c.out + "/grid.csv";
    write_grid_csv(run_grid(c, c.system.load()), path);
    write_sidecar(path, c, "grid-eval");
    return 0;
}

int cmd_exact(ExperimentConfig c) {
    const SystemCase sc = c.system.load();
    std::vector<ExactRow> rows;
    json seconds = json::array();
    bool timeout = false;
    const std::string mps = c.exact.export_mps;
    for (std::uint64_t seed : c.seeds)
        for (Index T : c.T) {
            // only the first instance is exported
            c.exact.export_mps = rows.empty() ? mps : "";
            rows.push_back(run_exact(c, sc, seed, T, c.variants.front()));
            const auto& r = rows.back();
            seconds.push_back(r.exact.seconds);
            timeout = timeout || r.exact.status == ExactStatus::Timeout;
            std::fprintf(stderr, "seed %llu T %ld: heuristic %.6f exact %.6f gap %.2e %s\n",
                         static_cast<unsigned long long>(seed), static_cast<long>(T), r.heuristic,
                         r.exact.objective, r.exact.gap, to_string(r.exact.status).c_str());
        }
    c.exact.export_mps = mps;
    const std::string path = c.out + "/exact.csv";
    write_exact_csv(rows, path);
    write_sidecar(path, c, "exact", {{"seconds", seconds}});
    return timeout ? kTimeout : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Application-driven learning of forecast parameters for energy and reserve dispatch"};
    app.require_subcommand(1);
    std::string config_path, out, seeds, variant, export_mps;
    int jobs = 0;
    const std::vector<std::string> names{"generate", "train", "evaluate", "sweep-deficit", "grid-eval", "exact"};
    for (const auto& name : names) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "JSON experiment config")->required();
        sub->add_option("--out", out, "output directory");
        sub->add_option("--seeds", seeds, "comma-separated seeds");
        sub->add_option("--variant", variant, "ls-ex, ls-opt, opt-ex or opt-opt");
        sub->add_option("--jobs", jobs, "worker threads");
        if (name == "exact") sub->add_option("--export-mps", export_mps, "write the big-M MILP of the first instance");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kConfigError;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        std::ifstream in(config_path);
        if (!in) throw ConfigError("cannot read config " + config_path);
        json j;
        try {
            j = json::parse(in);
        } catch (const json::exception& e) {
            throw ConfigError("config " + config_path + ": " + e.what());
        }
        ExperimentConfig c = ExperimentConfig::from_json(j);
        if (!out.empty()) c.out = out;
        if (!seeds.empty()) c.seeds = parse_seeds(seeds);
        if (!variant.empty()) c.variants = {parse_variant(variant)};
        if (jobs != 0) c.jobs = jobs;
        if (!export_mps.empty()) c.exact.export_mps = export_mps;
        c.validate();
        fs::create_directories(c.out);

        if (command == "generate") return cmd_generate(c);
        if (command == "train") return cmd_train(c);
        if (command == "evaluate") return cmd_evaluate(c);
        if (command == "sweep-deficit") return cmd_sweep(c);
        if (command == "grid-eval") return cmd_grid(c);
        return cmd_exact(c);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const SchemaError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
