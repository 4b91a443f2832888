#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "adlearn/netcase.hpp"
#include "json.hpp"

namespace adl {

/// Standard normal draws from mt19937_64 via Box-Muller, so a seed gives the
/// same stream on every platform (std::normal_distribution is unspecified).
class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed) : engine_(seed) {}
    double next();
    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// AR(1) driver of the demand noise level: E_t = psi0 + psi1 E_{t-1} + N(0, sigma_e).
struct ExogenousVarianceConfig {
    double psi0 = 0.1;
    double psi1 = 0.9;
    double sigma_e = 0.2;
};

struct ArProcessConfig {
    std::vector<int> bus_ids;
    Eigen::VectorXd phi0;
    Eigen::VectorXd phi1;
    /// Innovation std per bus; ignored when `exogenous` is set (std = E_t then).
    Eigen::VectorXd sigma;
    std::uint64_t seed = 1;
    int burn_in = 200;
    bool truncate = true;
    std::optional<ExogenousVarianceConfig> exogenous;

    /// Per-bus AR(1) with long-run mean = case bus demand and the untruncated
    /// stationary coefficient of variation `cv`. Buses without demand are skipped.
    static ArProcessConfig from_case(const SystemCase& sc, double cv = 0.4, double phi1 = 0.9,
                                     std::uint64_t seed = 1);

    Index num_buses() const { return static_cast<Index>(bus_ids.size()); }
    void validate() const;
    nlohmann::json to_json() const;
};

/// Row t holds the realization D_t (per bus) and the features known when
/// forecasting it: lag1_<bus> = D_{t-1} and, in heteroscedastic mode, E = E_t.
struct Dataset {
    std::vector<int> bus_ids;
    Eigen::MatrixXd demand;
    std::vector<std::string> feature_names;
    Eigen::MatrixXd features;
    nlohmann::json provenance = nlohmann::json::object();

    Index length() const { return demand.rows(); }
    Index num_buses() const { return demand.cols(); }
    std::optional<Index> find_feature(const std::string& name) const;
    Index feature_index(const std::string& name) const;
    /// First `n` rows (or rows [begin, begin+n)).
    Dataset slice(Index begin, Index n) const;
    void validate() const;

    bool operator==(const Dataset& o) const;
};

Dataset generate(const ArProcessConfig& config, Index T);

/// CSV `t,bus_<id>...,feat_<name>...` plus `<path>.manifest.json`.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

std::string manifest_path(const std::string& csv_path);

}  // namespace adl
