#pragma once

#include <Eigen/Dense>

#include <condition_variable>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "adlearn/datagen.hpp"
#include "adlearn/dispatch.hpp"
#include "adlearn/forecast.hpp"
#include "json.hpp"

namespace adl {

/// Fixed set of worker threads running index-parallel loops.
class WorkerPool {
public:
    explicit WorkerPool(int threads = 1);
    ~WorkerPool();
    WorkerPool(const WorkerPool&) = delete;
    WorkerPool& operator=(const WorkerPool&) = delete;

    int size() const { return static_cast<int>(workers_.size()) + 1; }
    /// Calls fn(i) for i in [0, n); index i always runs on worker i % size().
    void run(Index n, const std::function<void(Index)>& fn);

private:
    std::vector<std::thread> workers_;
    std::mutex mu_;
    std::condition_variable start_, done_;
    const std::function<void(Index)>* job_ = nullptr;
    Index n_ = 0;
    std::uint64_t generation_ = 0;
    int pending_ = 0;
    bool stop_ = false;
    std::exception_ptr error_;

    void loop(int id);
    void stride(int id, Index n, const std::function<void(Index)>& fn);
};

/// Mean assessed cost over a dataset as a function of theta. Each sample keeps
/// its own solver state so repeated evaluations warm-start per observation.
class CostEvaluator {
public:
    CostEvaluator(const DispatchModel& model, const ForecastSpec& spec, const Dataset& ds, int jobs = 1);

    double operator()(const Eigen::VectorXd& theta);
    /// Per-sample costs of the last evaluation, in dataset order.
    const std::vector<double>& sample_costs() const { return costs_; }
    Index num_samples() const { return static_cast<Index>(demand_.size()); }
    std::size_t evaluations() const { return evaluations_; }
    std::size_t solves() const { return solves_; }
    const ForecastSpec& spec() const { return spec_; }

private:
    const DispatchModel& model_;
    ForecastSpec spec_;
    Eigen::MatrixXd features_;
    std::vector<Eigen::VectorXd> demand_;
    std::vector<SampleCache> caches_;
    std::vector<double> costs_;
    std::unique_ptr<WorkerPool> pool_;
    std::size_t evaluations_ = 0;
    std::size_t solves_ = 0;
};

double cost(const Eigen::VectorXd& theta, const DispatchModel& model, const ForecastSpec& spec, const Dataset& ds,
            int jobs = 1);

enum class InitMode { LeastSquares, Given, Zeros };

struct NelderMeadCoefficients {
    double reflection = 1.0;
    double expansion = 2.0;
    double contraction = 0.5;
    double shrink = 0.5;
};

enum class Termination { Converged, IterationLimit, TimeLimit, NothingToTrain };
std::string to_string(Termination t);

struct TrainConfig {
    InitMode init = InitMode::LeastSquares;
    /// Full theta used with InitMode::Given.
    Eigen::VectorXd theta0;
    double z = 1.96;
    NelderMeadCoefficients nm;
    double min_decrease = 1e-7;
    double min_diameter = 1e-6;
    int max_iterations = 5000;
    /// Seconds; infinity disables the limit.
    double time_limit = std::numeric_limits<double>::infinity();
    double theta_bound = 1e3;
    int jobs = 1;
    std::uint64_t seed = 0;

    void validate() const;
};

struct NelderMeadResult {
    Eigen::VectorXd x;
    double value = 0.0;
    /// Best value after each iteration; entry 0 is the initial best vertex.
    std::vector<double> trajectory;
    int iterations = 0;
    std::size_t evaluations = 0;
    Termination termination = Termination::Converged;
};

/// vertex 0 = x0, vertex i = x0 + max(0.05|x0_i|, 0.01) e_i.
std::vector<Eigen::VectorXd> simplex_init(const Eigen::VectorXd& x0);

/// Box-constrained Nelder-Mead; points are projected onto |x_i| <= theta_bound.
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x0,
                             const TrainConfig& config);

struct TrainResult {
    Eigen::VectorXd theta;
    double cost = 0.0;
    std::vector<double> trajectory;
    int iterations = 0;
    std::size_t evaluations = 0;
    std::size_t solves = 0;
    Termination termination = Termination::Converged;
    Eigen::VectorXd theta_init;
    Eigen::VectorXd ls_theta;
    double ls_cost = 0.0;
    double seconds = 0.0;
};

/// Starting theta: open-loop values, with trainable coefficients replaced per init mode.
Eigen::VectorXd initial_theta(const TrainConfig& config, const ForecastSpec& spec, const SystemCase& sc,
                              const Dataset& ds);

TrainResult train(const TrainConfig& config, const DispatchModel& model, const ForecastSpec& spec,
                  const Dataset& ds);

nlohmann::json train_result_to_json(const ForecastSpec& spec, const TrainResult& r);
/// Writes `iter,cost` rows.
void write_trajectory_csv(const std::vector<double>& trajectory, const std::string& path);

}  // namespace adl
