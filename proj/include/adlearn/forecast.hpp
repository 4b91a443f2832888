#pragma once

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "adlearn/datagen.hpp"
#include "adlearn/netcase.hpp"
#include "json.hpp"

namespace adl {

enum class Family { Demand, ReserveUp, ReserveDown };

/// Coefficient name of the intercept.
inline constexpr const char* kConst = "const";

/// One affine model: target = sum_k coef_k * feature_k ("const" is the intercept).
struct Block {
    Family family = Family::Demand;
    /// Case bus index (Demand) or zone index (reserves).
    Index target = 0;
    std::string name;
    std::vector<std::string> features;
    bool trainable = true;
    /// Dataset demand column the block forecasts (Demand blocks only).
    Index observed = -1;
};

enum class Variant { LsEx, LsOpt, OptEx, OptOpt };

Variant parse_variant(const std::string& s);
std::string to_string(Variant v);
inline bool demand_trainable(Variant v) { return v == Variant::OptEx || v == Variant::OptOpt; }
inline bool reserve_trainable(Variant v) { return v == Variant::LsOpt || v == Variant::OptOpt; }

struct ForecastSpec {
    Index num_buses = 0;
    Index num_zones = 0;
    std::vector<Block> blocks;

    /// AR(1) demand model for every dataset bus; constant reserves per zone,
    /// or const + E_t when `reserve_features` contains "E".
    static ForecastSpec ar1(const SystemCase& sc, const Dataset& ds, Variant variant,
                            const std::vector<std::string>& reserve_features = {});

    Index size() const;
    Index offset(std::size_t block) const;
    /// Positions of trainable coefficients in theta.
    std::vector<Index> trainable_positions() const;
    Index num_trainable() const { return static_cast<Index>(trainable_positions().size()); }

    /// Resolves feature names against a dataset's columns; must be called before predict.
    void bind(const std::vector<std::string>& feature_names);
    bool bound() const { return !columns_.empty() || blocks.empty(); }
    const std::vector<std::vector<Index>>& columns() const { return columns_; }

private:
    // per block, per coefficient: dataset column or -1 for the intercept
    std::vector<std::vector<Index>> columns_;
};

struct Forecast {
    Eigen::VectorXd demand;
    Eigen::VectorXd reserve_up;
    Eigen::VectorXd reserve_dn;
};

/// Demand is passed through unclamped; reserves are clamped at zero.
Forecast predict(const ForecastSpec& spec, const Eigen::VectorXd& theta, const Eigen::Ref<const Eigen::RowVectorXd>& x);
/// Same as predict without the reserve clamp.
Forecast predict_raw(const ForecastSpec& spec, const Eigen::VectorXd& theta,
                     const Eigen::Ref<const Eigen::RowVectorXd>& x);

/// Named view of theta: block name -> coefficients.
using ThetaBlocks = std::map<std::string, std::vector<double>>;
ThetaBlocks unpack(const ForecastSpec& spec, const Eigen::VectorXd& theta);
Eigen::VectorXd pack(const ForecastSpec& spec, const ThetaBlocks& blocks);
nlohmann::json theta_to_json(const ForecastSpec& spec, const Eigen::VectorXd& theta);
Eigen::VectorXd theta_from_json(const ForecastSpec& spec, const nlohmann::json& j);

struct LsFit {
    /// Demand blocks fitted; reserve blocks left at zero.
    Eigen::VectorXd theta;
    /// Residual std per demand block (denominator T - k).
    Eigen::VectorXd residual_std;
    /// Case bus index of each residual_std entry.
    std::vector<Index> residual_bus;
};

LsFit fit_least_squares(const ForecastSpec& spec, const Dataset& ds);

struct ZonalReserves {
    Eigen::VectorXd up;
    Eigen::VectorXd dn;
};

/// R_up = R_dn = z * sqrt(sum of squared bus stds in the zone).
ZonalReserves exogenous_reserve_rule(const Eigen::VectorXd& bus_std, const std::vector<Index>& bus_zone,
                                     Index num_zones, double z = 1.96);

/// LS demand coefficients plus exogenous constant reserves: the open-loop estimate.
Eigen::VectorXd open_loop_theta(const ForecastSpec& spec, const Dataset& ds, const SystemCase& sc, double z = 1.96);

}  // namespace adl
