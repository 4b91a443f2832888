#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "adlearn/dispatch.hpp"
#include "adlearn/trainer.hpp"

namespace adl {

/// Box on the trainable coordinates of theta.
struct ThetaBox {
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
};

/// Affine description of the estimation problem shared by the exact solvers.
/// The forecast vector p = (D_hat per bus, R_up per zone, R_dn per zone) of
/// sample t is p_t = P[t] s + p0[t], where s holds the trainable coefficients.
class BilevelData {
public:
    BilevelData(const DispatchModel& model, const ForecastSpec& spec, const Dataset& ds,
                std::optional<ThetaBox> box = std::nullopt, std::optional<Eigen::VectorXd> fixed_theta = std::nullopt,
                double theta_bound = 1e3);

    const DispatchModel& model() const { return *model_; }
    const ForecastSpec& spec() const { return spec_; }
    const Dataset& dataset() const { return ds_; }
    Index samples() const { return T_; }
    Index dim() const { return static_cast<Index>(trainable_.size()); }
    Index forecast_dim() const { return q_; }
    const std::vector<Index>& trainable() const { return trainable_; }
    const ThetaBox& box() const { return box_; }

    Eigen::VectorXd full_theta(const Eigen::VectorXd& s) const;
    Eigen::VectorXd trainable_part(const Eigen::VectorXd& theta) const;
    Eigen::VectorXd forecast(Index t, const Eigen::VectorXd& s) const { return P_[static_cast<std::size_t>(t)] * s + p0_[static_cast<std::size_t>(t)]; }
    const Eigen::MatrixXd& P(Index t) const { return P_[static_cast<std::size_t>(t)]; }
    const Eigen::VectorXd& p0(Index t) const { return p0_[static_cast<std::size_t>(t)]; }
    const Eigen::VectorXd& realized(Index t) const { return demand_[static_cast<std::size_t>(t)]; }

    /// Planning LP with zero forecast; rhs(p) = b0 + E p.
    const Lp& planning() const { return planning_; }
    const Eigen::MatrixXd& E() const { return E_; }
    /// Planning objective including the anti-degeneracy offsets.
    const Eigen::VectorXd& planning_cost() const { return cost_; }
    Lp planning_at(const Eigen::VectorXd& p) const;
    /// Linear rows A s <= b that keep every reserve forecast nonnegative.
    const Eigen::MatrixXd& base_rows() const { return base_A_; }
    const Eigen::VectorXd& base_rhs() const { return base_b_; }

    /// Complementarity pairs per sample: inequality rows plus finite bounds.
    Index pairs_per_sample() const;

private:
    const DispatchModel* model_;
    ForecastSpec spec_;
    Dataset ds_;
    Index T_ = 0, q_ = 0;
    std::vector<Index> trainable_;
    Eigen::VectorXd theta_fixed_;
    ThetaBox box_;
    std::vector<Eigen::MatrixXd> P_;
    std::vector<Eigen::VectorXd> p0_;
    std::vector<Eigen::VectorXd> demand_;
    Lp planning_;
    Eigen::MatrixXd E_;
    Eigen::VectorXd cost_;
    Eigen::MatrixXd base_A_;
    Eigen::VectorXd base_b_;
};

/// Set of forecasts over which one planning basis stays optimal:
/// z(p) = Z p + z0 for all p with G p <= h.
struct CriticalRegion {
    std::vector<lp::VarStatus> col_status;
    std::vector<lp::VarStatus> row_status;
    Eigen::MatrixXd Z;
    Eigen::VectorXd z0;
    Eigen::MatrixXd G;
    Eigen::VectorXd h;
    /// Planning row duals and reduced costs (perturbed objective), constant on the region.
    Eigen::VectorXd duals;
    Eigen::VectorXd reduced_costs;

    bool same_basis(const CriticalRegion& o) const {
        return col_status == o.col_status && row_status == o.row_status;
    }
};

CriticalRegion critical_region(const BilevelData& data, const lp::LpSolution<double>& planning_solution);

/// Regions met by exploring across facets from the box centre; capped at max_regions.
std::vector<CriticalRegion> enumerate_regions(const BilevelData& data, const Eigen::VectorXd& p_lo,
                                              const Eigen::VectorXd& p_hi, std::size_t max_regions = 5000);

struct ComplementarityPair {
    enum class Kind { Row, Lower, Upper };
    Index t = 0;
    Kind kind = Kind::Row;
    /// Planning row (Row) or planning column (bounds).
    Index index = 0;
    /// Instance row holding the inequality (Row), otherwise -1.
    Index row = -1;
    /// Instance column of the bounded variable (bounds), otherwise -1.
    Index col = -1;
    Index dual = -1;
    double bound = 0.0;
    std::string name;
};

/// Single-level model: the second level replaced by primal feasibility,
/// stationarity and complementarity. `lp` holds everything except the
/// complementarity conditions, listed in `pairs`.
struct KktInstance {
    Lp lp;
    std::vector<ComplementarityPair> pairs;
    std::vector<Index> theta_cols;
    std::vector<Index> p_offset, z_offset, pi_offset, nu_offset, a_offset;
    /// Instance rows of the forecast equalities of each sample.
    std::vector<Index> forecast_row;

    /// Slack of a pair's inequality at x (>= 0 when feasible).
    double slack(const ComplementarityPair& pr, const Eigen::VectorXd& x) const;
    double max_violation(const Eigen::VectorXd& x) const;
};

KktInstance build_kkt(const BilevelData& data);

/// Full instance point for a theta: forecasts, optimal plans with their duals, and assessments.
Eigen::VectorXd kkt_point(const KktInstance& inst, const BilevelData& data, const Eigen::VectorXd& s);

enum class ExactStatus { Optimal, Timeout };
std::string to_string(ExactStatus s);

struct ExactOptions {
    double gap_tol = 1e-3;
    /// Seconds.
    double time_limit = 3600.0;
    std::size_t max_nodes = 2'000'000;
    /// Region search: while the widest scaled node side exceeds this and the
    /// picked sample has more than four candidate regions, bisect instead of
    /// cutting on a region facet.
    double bisect_width = 0.05;
    /// Record (parent bound, bound) for each evaluated node.
    bool record_bounds = false;
    /// Full thetas evaluated up front as incumbent candidates.
    std::vector<Eigen::VectorXd> starts;
};

struct ExactResult {
    /// Full theta of the incumbent.
    Eigen::VectorXd theta;
    double objective = std::numeric_limits<double>::infinity();
    double bound = -std::numeric_limits<double>::infinity();
    double gap = std::numeric_limits<double>::infinity();
    std::size_t nodes = 0;
    ExactStatus status = ExactStatus::Optimal;
    double seconds = 0.0;
    std::vector<std::pair<double, double>> bounds;
};

/// Per-pair branching state.
struct BnbNode {
    enum class State : std::uint8_t { Free, SlackZero, DualZero };
    std::vector<State> state;
    double bound = -std::numeric_limits<double>::infinity();
    int depth = 0;
};

/// Branch-and-bound over complementarity dichotomies with the plain LP relaxation.
ExactResult solve_bnb(const KktInstance& inst, const BilevelData& data, const ExactOptions& opt = {});

/// Branch-and-bound over theta polytopes and per-sample planning regions. A
/// sample confined to one region on a node enters an exact coupled LP; the
/// others contribute their per-region minimum over the node.
ExactResult solve_region_bnb(const BilevelData& data, const ExactOptions& opt = {});

enum class BigMPolicy { FromBounds, FromRegions };

struct BigMValues {
    Eigen::VectorXd slack;
    Eigen::VectorXd dual;
};

/// Per-pair big-M constants. FromBounds propagates variable bounds through the
/// rows (duals use `dual_cap` when given); FromRegions takes the largest slack
/// and dual over the enumerated planning regions reachable from the theta box.
/// Unbounded values are returned as infinity.
BigMValues derive_bigm(const KktInstance& inst, const BilevelData& data, BigMPolicy policy,
                       std::optional<double> dual_cap = std::nullopt);

/// Big-M MILP in fixed MPS format; binary b = 1 forces the slack to zero, b = 0 the dual.
/// Throws BigMError when a constant is unbounded.
Lp bigm_milp(const KktInstance& inst, const BigMValues& m, std::vector<std::uint8_t>* binary = nullptr);
void export_bigm_mps(const KktInstance& inst, const BigMValues& m, const std::string& path);

}  // namespace adl
