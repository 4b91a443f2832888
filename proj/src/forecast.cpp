#include "adlearn/forecast.hpp"

#include <cmath>

#include "adlearn/errors.hpp"

namespace adl {

Variant parse_variant(const std::string& s) {
    if (s == "ls-ex") return Variant::LsEx;
    if (s == "ls-opt") return Variant::LsOpt;
    if (s == "opt-ex") return Variant::OptEx;
    if (s == "opt-opt") return Variant::OptOpt;
    throw ConfigError("unknown variant '" + s + "' (expected ls-ex, ls-opt, opt-ex or opt-opt)");
}

std::string to_string(Variant v) {
    switch (v) {
        case Variant::LsEx: return "ls-ex";
        case Variant::LsOpt: return "ls-opt";
        case Variant::OptEx: return "opt-ex";
        case Variant::OptOpt: return "opt-opt";
    }
    return "?";
}

ForecastSpec ForecastSpec::ar1(const SystemCase& sc, const Dataset& ds, Variant variant,
                               const std::vector<std::string>& reserve_features) {
    ForecastSpec spec;
    spec.num_buses = sc.num_buses();
    spec.num_zones = sc.num_zones();
    for (std::size_t i = 0; i < ds.bus_ids.size(); ++i) {
        const int id = ds.bus_ids[i];
        Block b;
        b.observed = static_cast<Index>(i);
        b.family = Family::Demand;
        b.target = sc.bus_index(id);
        b.name = "D_" + std::to_string(id);
        b.features = {kConst, "lag1_" + std::to_string(id)};
        b.trainable = demand_trainable(variant);
        spec.blocks.push_back(b);
    }
    for (Family f : {Family::ReserveUp, Family::ReserveDown}) {
        for (Index z = 0; z < sc.num_zones(); ++z) {
            Block b;
            b.family = f;
            b.target = z;
            b.name = std::string(f == Family::ReserveUp ? "Rup_" : "Rdn_") +
                     std::to_string(sc.zones[static_cast<std::size_t>(z)].id);
            b.features = {kConst};
            for (const auto& feat : reserve_features)
                if (feat != kConst) b.features.push_back(feat);
            b.trainable = reserve_trainable(variant);
            spec.blocks.push_back(b);
        }
    }
    spec.bind(ds.feature_names);
    return spec;
}

Index ForecastSpec::size() const {
    Index n = 0;
    for (const auto& b : blocks) n += static_cast<Index>(b.features.size());
    return n;
}

Index ForecastSpec::offset(std::size_t block) const {
    Index n = 0;
    for (std::size_t k = 0; k < block; ++k) n += static_cast<Index>(blocks[k].features.size());
    return n;
}

std::vector<Index> ForecastSpec::trainable_positions() const {
    std::vector<Index> pos;
    Index at = 0;
    for (const auto& b : blocks) {
        for (std::size_t k = 0; k < b.features.size(); ++k, ++at)
            if (b.trainable) pos.push_back(at);
    }
    return pos;
}

void ForecastSpec::bind(const std::vector<std::string>& feature_names) {
    columns_.clear();
    for (const auto& b : blocks) {
        if (b.family == Family::Demand && (b.target < 0 || b.target >= num_buses))
            throw DimensionError("block " + b.name + " targets a bus outside the case");
        if (b.family != Family::Demand && (b.target < 0 || b.target >= num_zones))
            throw DimensionError("block " + b.name + " targets a zone outside the case");
        if (b.features.empty()) throw DimensionError("block " + b.name + " has no coefficients");
        std::vector<Index> cols;
        for (const auto& f : b.features) {
            if (f == kConst) {
                cols.push_back(-1);
                continue;
            }
            Index found = -1;
            for (std::size_t i = 0; i < feature_names.size(); ++i)
                if (feature_names[i] == f) found = static_cast<Index>(i);
            if (found < 0) throw DimensionError("block " + b.name + " uses feature '" + f + "' absent from the dataset");
            cols.push_back(found);
        }
        columns_.push_back(std::move(cols));
    }
}

Forecast predict_raw(const ForecastSpec& spec, const Eigen::VectorXd& theta,
                     const Eigen::Ref<const Eigen::RowVectorXd>& x) {
    if (theta.size() != spec.size())
        throw DimensionError("theta has length " + std::to_string(theta.size()) + ", spec expects " +
                             std::to_string(spec.size()));
    if (!spec.bound()) throw DimensionError("forecast spec is not bound to dataset features");
    Forecast f;
    f.demand = Eigen::VectorXd::Zero(spec.num_buses);
    f.reserve_up = Eigen::VectorXd::Zero(spec.num_zones);
    f.reserve_dn = Eigen::VectorXd::Zero(spec.num_zones);
    Index at = 0;
    for (std::size_t k = 0; k < spec.blocks.size(); ++k) {
        const auto& b = spec.blocks[k];
        const auto& cols = spec.columns()[k];
        double v = 0.0;
        for (std::size_t c = 0; c < cols.size(); ++c, ++at) {
            if (cols[c] >= x.size()) throw DimensionError("feature row is too short for block " + b.name);
            v += theta(at) * (cols[c] < 0 ? 1.0 : x(cols[c]));
        }
        switch (b.family) {
            case Family::Demand: f.demand(b.target) += v; break;
            case Family::ReserveUp: f.reserve_up(b.target) += v; break;
            case Family::ReserveDown: f.reserve_dn(b.target) += v; break;
        }
    }
    return f;
}

Forecast predict(const ForecastSpec& spec, const Eigen::VectorXd& theta, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
    Forecast f = predict_raw(spec, theta, x);
    f.reserve_up = f.reserve_up.cwiseMax(0.0);
    f.reserve_dn = f.reserve_dn.cwiseMax(0.0);
    return f;
}

ThetaBlocks unpack(const ForecastSpec& spec, const Eigen::VectorXd& theta) {
    if (theta.size() != spec.size()) throw DimensionError("theta length does not match spec");
    ThetaBlocks out;
    Index at = 0;
    for (const auto& b : spec.blocks) {
        auto& v = out[b.name];
        for (std::size_t k = 0; k < b.features.size(); ++k) v.push_back(theta(at++));
    }
    return out;
}

Eigen::VectorXd pack(const ForecastSpec& spec, const ThetaBlocks& blocks) {
    Eigen::VectorXd theta(spec.size());
    Index at = 0;
    for (const auto& b : spec.blocks) {
        auto it = blocks.find(b.name);
        if (it == blocks.end()) throw DimensionError("theta is missing block " + b.name);
        if (it->second.size() != b.features.size())
            throw DimensionError("block " + b.name + " expects " + std::to_string(b.features.size()) + " coefficients");
        for (double v : it->second) theta(at++) = v;
    }
    if (blocks.size() != spec.blocks.size()) throw DimensionError("theta has blocks unknown to the spec");
    return theta;
}

nlohmann::json theta_to_json(const ForecastSpec& spec, const Eigen::VectorXd& theta) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [name, v] : unpack(spec, theta)) j[name] = v;
    return j;
}

Eigen::VectorXd theta_from_json(const ForecastSpec& spec, const nlohmann::json& j) {
    if (!j.is_object()) throw SchemaError("theta: expected an object of coefficient arrays");
    ThetaBlocks b;
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!it.value().is_array()) throw SchemaError("theta." + it.key() + ": expected an array");
        b[it.key()] = it.value().get<std::vector<double>>();
    }
    return pack(spec, b);
}

LsFit fit_least_squares(const ForecastSpec& spec, const Dataset& ds) {
    LsFit fit;
    fit.theta = Eigen::VectorXd::Zero(spec.size());
    std::vector<double> stds;
    const Index T = ds.length();
    Index at = 0;
    for (std::size_t k = 0; k < spec.blocks.size(); ++k) {
        const auto& b = spec.blocks[k];
        const auto& cols = spec.columns().at(k);
        const auto p = static_cast<Index>(cols.size());
        if (b.family != Family::Demand) {
            at += p;
            continue;
        }
        const Index ycol = b.observed;
        if (ycol < 0 || ycol >= ds.num_buses()) throw DimensionError("dataset has no demand column for block " + b.name);
        if (T <= p) throw RankError("block " + b.name + ": T=" + std::to_string(T) + " does not exceed " +
                                    std::to_string(p) + " coefficients");
        Eigen::MatrixXd X(T, p);
        for (Index c = 0; c < p; ++c)
            X.col(c) = cols[static_cast<std::size_t>(c)] < 0 ? Eigen::VectorXd::Ones(T)
                                                              : Eigen::VectorXd(ds.features.col(cols[static_cast<std::size_t>(c)]));
        const Eigen::VectorXd y = ds.demand.col(ycol);
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
        qr.setThreshold(1e-10);
        if (qr.rank() < p)
            throw RankError("block " + b.name + ": regressors are collinear (rank " + std::to_string(qr.rank()) +
                            " < " + std::to_string(p) + ")");
        const Eigen::VectorXd beta = qr.solve(y);
        fit.theta.segment(at, p) = beta;
        const Eigen::VectorXd r = y - X * beta;
        stds.push_back(std::sqrt(r.squaredNorm() / static_cast<double>(T - p)));
        fit.residual_bus.push_back(b.target);
        at += p;
    }
    fit.residual_std = Eigen::Map<Eigen::VectorXd>(stds.data(), static_cast<Index>(stds.size()));
    return fit;
}

ZonalReserves exogenous_reserve_rule(const Eigen::VectorXd& bus_std, const std::vector<Index>& bus_zone,
                                     Index num_zones, double z) {
    if (!(z > 0)) throw InvariantError("reserve multiplier z must be > 0");
    if (static_cast<Index>(bus_zone.size()) != bus_std.size())
        throw DimensionError("one zone per bus std is required");
    if ((bus_std.array() < 0).any()) throw InvariantError("residual stds must be >= 0");
    Eigen::VectorXd var = Eigen::VectorXd::Zero(num_zones);
    for (Index b = 0; b < bus_std.size(); ++b) {
        const Index zz = bus_zone[static_cast<std::size_t>(b)];
        if (zz < 0 || zz >= num_zones) throw DimensionError("bus zone index out of range");
        var(zz) += bus_std(b) * bus_std(b);
    }
    ZonalReserves r;
    r.up = z * var.cwiseSqrt();
    r.dn = r.up;
    return r;
}

Eigen::VectorXd open_loop_theta(const ForecastSpec& spec, const Dataset& ds, const SystemCase& sc, double z) {
    const LsFit fit = fit_least_squares(spec, ds);
    const auto zone_of_bus = sc.bus_zone_indices();
    std::vector<Index> zones;
    for (Index b : fit.residual_bus) zones.push_back(zone_of_bus[static_cast<std::size_t>(b)]);
    const auto res = exogenous_reserve_rule(fit.residual_std, zones, spec.num_zones, z);
    Eigen::VectorXd theta = fit.theta;
    for (std::size_t k = 0; k < spec.blocks.size(); ++k) {
        const auto& b = spec.blocks[k];
        if (b.family == Family::Demand) continue;
        const Index at = spec.offset(k);
        theta.segment(at, static_cast<Index>(b.features.size())).setZero();
        for (std::size_t c = 0; c < b.features.size(); ++c)
            if (b.features[c] == kConst)
                theta(at + static_cast<Index>(c)) = b.family == Family::ReserveUp ? res.up(b.target) : res.dn(b.target);
    }
    return theta;
}

}  // namespace adl
