#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace adl {

using Index = Eigen::Index;

struct Bus {
    int id = 0;
    std::string name;
    /// Long-run mean demand (before demand_scale).
    double demand = 0.0;
    /// Zone used when aggregating bus forecast errors into zonal reserves.
    std::optional<int> zone;

    bool operator==(const Bus&) const = default;
};

struct Generator {
    int id = 0;
    int bus = 0;
    double capacity = 0.0;
    double cost = 0.0;
    double rbar_up = 0.0;
    double rbar_dn = 0.0;
    double p_up = 0.0;
    double p_dn = 0.0;
    std::optional<int> zone;

    bool operator==(const Generator&) const = default;
};

struct Line {
    int id = 0;
    int from = 0;
    int to = 0;
    double reactance = 1.0;
    double limit = 0.0;

    bool operator==(const Line&) const = default;
};

struct Zone {
    int id = 0;
    std::string name;

    bool operator==(const Zone&) const = default;
};

struct Penalties {
    double load_shed = 0.0;
    double spill = 0.0;

    bool operator==(const Penalties&) const = default;
};

/// Planning-side overrides. Unset entries fall back to the actual values.
struct TildeOverrides {
    std::optional<Eigen::VectorXd> cost;
    std::optional<Eigen::VectorXd> p_up;
    std::optional<Eigen::VectorXd> p_dn;
    std::optional<Eigen::VectorXd> capacity;
    std::optional<Eigen::VectorXd> limit;
    std::optional<double> load_shed;
    std::optional<double> spill;

    bool operator==(const TildeOverrides& o) const;
};

enum class PenaltyRule { Strict, ShedAboveCost };

struct SystemCase {
    std::string name;
    std::vector<Bus> buses;
    std::vector<Generator> generators;
    std::vector<Line> lines;
    std::vector<Zone> zones;
    Penalties penalties;
    TildeOverrides tilde;
    /// Multiplier on bus demands recorded by apply_case_transforms, consumed by datagen.
    double demand_scale = 1.0;

    Index num_buses() const { return static_cast<Index>(buses.size()); }
    Index num_generators() const { return static_cast<Index>(generators.size()); }
    Index num_lines() const { return static_cast<Index>(lines.size()); }
    Index num_zones() const { return static_cast<Index>(zones.size()); }

    /// Position of a bus/zone id; throws InvariantError if absent.
    Index bus_index(int id) const;
    Index zone_index(int id) const;
    std::optional<Index> find_bus(int id) const;
    std::optional<Index> find_zone(int id) const;

    Eigen::VectorXd capacity() const;
    Eigen::VectorXd cost() const;
    Eigen::VectorXd rbar_up() const;
    Eigen::VectorXd rbar_dn() const;
    Eigen::VectorXd p_up() const;
    Eigen::VectorXd p_dn() const;
    Eigen::VectorXd limit() const;

    Eigen::VectorXd tilde_capacity() const;
    Eigen::VectorXd tilde_cost() const;
    Eigen::VectorXd tilde_p_up() const;
    Eigen::VectorXd tilde_p_dn() const;
    Eigen::VectorXd tilde_limit() const;
    double tilde_load_shed() const { return tilde.load_shed.value_or(penalties.load_shed); }
    double tilde_spill() const { return tilde.spill.value_or(penalties.spill); }

    /// Mean demand per bus including demand_scale.
    Eigen::VectorXd bus_demand() const;
    /// Zone index per bus: explicit bus zone, else the zone of a generator at
    /// the bus, else the zone of the nearest bus that has one, else zone 0.
    std::vector<Index> bus_zone_indices() const;
    /// Zone index per generator, -1 when the generator is in no zone.
    std::vector<Index> generator_zone_indices() const;

    void validate(PenaltyRule rule = PenaltyRule::Strict) const;

    bool operator==(const SystemCase&) const = default;
};

/// M: bus x generator, N: zone x generator.
struct IncidenceMaps {
    Eigen::MatrixXd M;
    Eigen::MatrixXd N;
};

IncidenceMaps incidence_maps(const SystemCase& sc);

struct PtdfMatrix {
    /// line x bus; flows = B * injections for balanced injections.
    Eigen::MatrixXd B;
    int slack = 0;
};

/// Default slack is the lowest bus id.
PtdfMatrix compute_ptdf(const SystemCase& sc, std::optional<int> slack = std::nullopt);

SystemCase case_from_json(const nlohmann::json& j);
nlohmann::json case_to_json(const SystemCase& sc);
SystemCase parse_case(const std::string& path);
void save_case(const SystemCase& sc, const std::string& path);

/// F <- flow_factor*F, rbar <- reserve_cap_frac*rbar, p <- reserve_price_frac*p,
/// demand_scale <- demand_factor*demand_scale. Shipped cases store rbar = G and
/// p = c, so the fractions act on capacity and energy cost.
SystemCase apply_case_transforms(SystemCase sc, double flow_factor, double demand_factor,
                                  double reserve_cap_frac, double reserve_price_frac);

}  // namespace adl
