#include "adlearn/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "adlearn/errors.hpp"

namespace adl {

WorkerPool::WorkerPool(int threads) {
    for (int id = 1; id < std::max(threads, 1); ++id) workers_.emplace_back([this, id] { loop(id); });
}

WorkerPool::~WorkerPool() {
    {
        std::lock_guard<std::mutex> lock(mu_);
        stop_ = true;
    }
    start_.notify_all();
    for (auto& w : workers_) w.join();
}

void WorkerPool::stride(int id, Index n, const std::function<void(Index)>& fn) {
    for (Index i = id; i < n; i += size()) fn(i);
}

void WorkerPool::loop(int id) {
    std::uint64_t seen = 0;
    for (;;) {
        const std::function<void(Index)>* job;
        Index n;
        {
            std::unique_lock<std::mutex> lock(mu_);
            start_.wait(lock, [&] { return stop_ || generation_ != seen; });
            if (stop_) return;
            seen = generation_;
            job = job_;
            n = n_;
        }
        std::exception_ptr err;
        try {
            stride(id, n, *job);
        } catch (...) {
            err = std::current_exception();
        }
        std::lock_guard<std::mutex> lock(mu_);
        if (err && !error_) error_ = err;
        if (--pending_ == 0) done_.notify_one();
    }
}

void WorkerPool::run(Index n, const std::function<void(Index)>& fn) {
    if (workers_.empty()) {
        stride(0, n, fn);
        return;
    }
    {
        std::lock_guard<std::mutex> lock(mu_);
        job_ = &fn;
        n_ = n;
        pending_ = static_cast<int>(workers_.size());
        error_ = nullptr;
        ++generation_;
    }
    start_.notify_all();
    std::exception_ptr err;
    try {
        stride(0, n, fn);
    } catch (...) {
        err = std::current_exception();
    }
    std::unique_lock<std::mutex> lock(mu_);
    done_.wait(lock, [&] { return pending_ == 0; });
    if (!err) err = error_;
    if (err) std::rethrow_exception(err);
}

CostEvaluator::CostEvaluator(const DispatchModel& model, const ForecastSpec& spec, const Dataset& ds, int jobs)
    : model_(model), spec_(spec), features_(ds.features) {
    if (spec_.num_buses != model.num_buses() || spec_.num_zones != model.num_zones())
        throw DimensionError("forecast spec does not match the dispatch model");
    spec_.bind(ds.feature_names);
    const Index T = ds.demand.rows();
    demand_.reserve(static_cast<std::size_t>(T));
    for (Index t = 0; t < T; ++t) demand_.push_back(bus_demand(model, ds, t));
    caches_.resize(static_cast<std::size_t>(T));
    costs_.assign(static_cast<std::size_t>(T), 0.0);
    pool_ = std::make_unique<WorkerPool>(jobs);
}

double CostEvaluator::operator()(const Eigen::VectorXd& theta) {
    if (theta.size() != spec_.size())
        throw DimensionError("theta has length " + std::to_string(theta.size()) + ", expected " +
                             std::to_string(spec_.size()));
    const std::function<void(Index)> one = [&](Index t) {
        const auto u = static_cast<std::size_t>(t);
        const Forecast f = predict(spec_, theta, features_.row(t));
        costs_[u] = evaluate_cost(model_, f, demand_[u], caches_[u]);
    };
    pool_->run(num_samples(), one);
    ++evaluations_;
    solves_ += 2 * costs_.size();
    if (costs_.empty()) return 0.0;
    double total = 0.0;
    for (double c : costs_) total += c;
    return total / static_cast<double>(costs_.size());
}

double cost(const Eigen::VectorXd& theta, const DispatchModel& model, const ForecastSpec& spec, const Dataset& ds,
            int jobs) {
    CostEvaluator f(model, spec, ds, jobs);
    return f(theta);
}

std::string to_string(Termination t) {
    switch (t) {
        case Termination::Converged: return "converged";
        case Termination::IterationLimit: return "iteration-limit";
        case Termination::TimeLimit: return "time-limit";
        case Termination::NothingToTrain: return "nothing-to-train";
    }
    return "unknown";
}

void TrainConfig::validate() const {
    if (!(nm.reflection > 0 && nm.expansion > 0 && nm.contraction > 0 && nm.shrink > 0))
        throw ConfigError("Nelder-Mead coefficients must be positive");
    if (!(nm.contraction < 1 && nm.shrink < 1 && nm.expansion > 1))
        throw ConfigError("Nelder-Mead needs contraction, shrink < 1 < expansion");
    if (!(min_decrease > 0) || !(min_diameter > 0) || max_iterations <= 0 || !(time_limit > 0) ||
        !(theta_bound > 0) || jobs <= 0)
        throw ConfigError("training limits must be positive");
    if (!(z > 0)) throw ConfigError("reserve z must be positive");
}

std::vector<Eigen::VectorXd> simplex_init(const Eigen::VectorXd& x0) {
    if (x0.size() < 1) throw DimensionError("simplex needs at least one dimension");
    std::vector<Eigen::VectorXd> v(static_cast<std::size_t>(x0.size()) + 1, x0);
    for (Index i = 0; i < x0.size(); ++i) v[static_cast<std::size_t>(i) + 1](i) += std::max(0.05 * std::abs(x0(i)), 0.01);
    return v;
}

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x0,
                             const TrainConfig& cfg) {
    cfg.validate();
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    const auto& k = cfg.nm;
    const Index n = x0.size();
    NelderMeadResult r;
    auto eval = [&](const Eigen::VectorXd& x) {
        ++r.evaluations;
        return f(x);
    };
    auto project = [&](Eigen::VectorXd x) { return Eigen::VectorXd(x.cwiseMax(-cfg.theta_bound).cwiseMin(cfg.theta_bound)); };

    std::vector<Eigen::VectorXd> x = simplex_init(project(x0));
    for (Index i = 0; i < n; ++i) {
        // a start on the box face steps inward instead
        auto& v = x[static_cast<std::size_t>(i) + 1];
        if (std::abs(v(i)) > cfg.theta_bound) v(i) = 2 * x[0](i) - v(i);
    }
    std::vector<double> fx;
    for (const auto& v : x) fx.push_back(eval(v));
    std::vector<std::size_t> order(x.size());

    auto sort_vertices = [&] {
        std::iota(order.begin(), order.end(), 0);
        // stable: earlier vertices win ties, so the best vertex only changes on strict improvement
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fx[a] < fx[b]; });
        std::vector<Eigen::VectorXd> xs;
        std::vector<double> fs;
        for (auto i : order) {
            xs.push_back(std::move(x[i]));
            fs.push_back(fx[i]);
        }
        x = std::move(xs);
        fx = std::move(fs);
    };
    auto diameter = [&] {
        double d = 0;
        for (std::size_t i = 1; i < x.size(); ++i) d = std::max(d, (x[i] - x[0]).cwiseAbs().maxCoeff());
        return d;
    };

    sort_vertices();
    r.trajectory.push_back(fx[0]);
    r.termination = Termination::IterationLimit;
    const std::size_t w = x.size() - 1;
    while (r.iterations < cfg.max_iterations) {
        if (std::chrono::duration<double>(clock::now() - t0).count() > cfg.time_limit) {
            r.termination = Termination::TimeLimit;
            break;
        }
        const double best_before = fx[0];
        Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
        for (std::size_t i = 0; i < w; ++i) c += x[i];
        c /= static_cast<double>(n);

        const Eigen::VectorXd xr = project(c + k.reflection * (c - x[w]));
        const double fr = eval(xr);
        bool shrink = false;
        if (fr < fx[0]) {
            const Eigen::VectorXd xe = project(c + k.expansion * (xr - c));
            const double fe = eval(xe);
            if (fe < fr) {
                x[w] = xe;
                fx[w] = fe;
            } else {
                x[w] = xr;
                fx[w] = fr;
            }
        } else if (fr < fx[w - 1]) {
            x[w] = xr;
            fx[w] = fr;
        } else if (fr < fx[w]) {
            const Eigen::VectorXd xc = project(c + k.contraction * (xr - c));
            const double fc = eval(xc);
            if (fc <= fr) {
                x[w] = xc;
                fx[w] = fc;
            } else {
                shrink = true;
            }
        } else {
            const Eigen::VectorXd xc = project(c + k.contraction * (x[w] - c));
            const double fc = eval(xc);
            if (fc < fx[w]) {
                x[w] = xc;
                fx[w] = fc;
            } else {
                shrink = true;
            }
        }
        if (shrink) {
            for (std::size_t i = 1; i < x.size(); ++i) {
                x[i] = project(x[0] + k.shrink * (x[i] - x[0]));
                fx[i] = eval(x[i]);
            }
        }
        sort_vertices();
        ++r.iterations;
        r.trajectory.push_back(fx[0]);
        if (best_before - fx[0] < cfg.min_decrease && diameter() < cfg.min_diameter) {
            r.termination = Termination::Converged;
            break;
        }
    }
    r.x = x[0];
    r.value = fx[0];
    return r;
}

Eigen::VectorXd initial_theta(const TrainConfig& cfg, const ForecastSpec& spec, const SystemCase& sc,
                              const Dataset& ds) {
    Eigen::VectorXd theta = open_loop_theta(spec, ds, sc, cfg.z);
    switch (cfg.init) {
        case InitMode::LeastSquares: break;
        case InitMode::Zeros:
            for (Index p : spec.trainable_positions()) theta(p) = 0.0;
            break;
        case InitMode::Given:
            if (cfg.theta0.size() != spec.size())
                throw DimensionError("initial theta has length " + std::to_string(cfg.theta0.size()) +
                                     ", expected " + std::to_string(spec.size()));
            for (Index p : spec.trainable_positions()) theta(p) = cfg.theta0(p);
            break;
    }
    return theta;
}

TrainResult train(const TrainConfig& cfg, const DispatchModel& model, const ForecastSpec& spec, const Dataset& ds) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    ForecastSpec bound = spec;
    bound.bind(ds.feature_names);
    CostEvaluator f(model, bound, ds, cfg.jobs);

    TrainResult r;
    r.ls_theta = open_loop_theta(bound, ds, model.system(), cfg.z);
    r.ls_cost = f(r.ls_theta);
    r.theta_init = initial_theta(cfg, bound, model.system(), ds);

    const std::vector<Index> pos = bound.trainable_positions();
    if (pos.empty()) {
        r.theta = r.theta_init;
        r.cost = f(r.theta);
        r.trajectory = {r.cost};
        r.termination = Termination::NothingToTrain;
    } else {
        Eigen::VectorXd sub(static_cast<Index>(pos.size()));
        for (std::size_t i = 0; i < pos.size(); ++i) sub(static_cast<Index>(i)) = r.theta_init(pos[i]);
        Eigen::VectorXd full = r.theta_init;
        auto expand = [&](const Eigen::VectorXd& s) {
            for (std::size_t i = 0; i < pos.size(); ++i) full(pos[i]) = s(static_cast<Index>(i));
            return full;
        };
        const auto nm = nelder_mead([&](const Eigen::VectorXd& s) { return f(expand(s)); }, sub, cfg);
        r.theta = expand(nm.x);
        r.cost = nm.value;
        r.trajectory = nm.trajectory;
        r.iterations = nm.iterations;
        r.termination = nm.termination;
    }
    r.evaluations = f.evaluations();
    r.solves = f.solves();
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

nlohmann::json train_result_to_json(const ForecastSpec& spec, const TrainResult& r) {
    nlohmann::json j;
    j["theta"] = theta_to_json(spec, r.theta);
    j["cost"] = r.cost;
    j["theta_init"] = theta_to_json(spec, r.theta_init);
    j["ls_theta"] = theta_to_json(spec, r.ls_theta);
    j["ls_cost"] = r.ls_cost;
    j["iterations"] = r.iterations;
    j["evaluations"] = r.evaluations;
    j["solves"] = r.solves;
    j["termination"] = to_string(r.termination);
    j["trajectory"] = r.trajectory;
    return j;
}

void write_trajectory_csv(const std::vector<double>& trajectory, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "iter,cost\n";
    char buf[64];
    for (std::size_t i = 0; i < trajectory.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, trajectory[i]);
        out << buf;
    }
}

}  // namespace adl
