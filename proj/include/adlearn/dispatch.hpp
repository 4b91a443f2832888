#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "adlearn/forecast.hpp"
#include "adlearn/lp/simplex.hpp"
#include "adlearn/netcase.hpp"

namespace adl {

using Lp = lp::LinearProgram<double>;

struct DispatchOptions {
    /// Drop line-flow constraints from both LPs.
    bool copper_plate = false;
    /// Add per-bus balance rows; implied by system balance plus the PTDF flow rows.
    bool nodal_balance = false;
    /// Objective perturbation magnitude for planning LPs (0 disables it).
    double perturbation = 1e-7;
};

struct DispatchPlan {
    Eigen::VectorXd g;
    Eigen::VectorXd r_up;
    Eigen::VectorXd r_dn;
    Eigen::VectorXd shed;
    Eigen::VectorXd spill;
    /// Zonal reserve shortfall (slack of the requirement rows).
    Eigen::VectorXd short_up;
    Eigen::VectorXd short_dn;
    double objective = 0.0;
    lp::Basis basis;
};

struct AssessmentResult {
    Eigen::VectorXd g;
    Eigen::VectorXd shed;
    Eigen::VectorXd spill;
    Eigen::VectorXd flow;
    double energy_cost = 0.0;
    double reserve_cost = 0.0;
    double penalty_cost = 0.0;
    double cost = 0.0;
};

/// Column/row layout of the planning and assessment LPs for one case.
/// Immutable after construction and safe to share across threads.
class DispatchModel {
public:
    DispatchModel(SystemCase sc, DispatchOptions opt = {});

    const SystemCase& system() const { return sc_; }
    const DispatchOptions& options() const { return opt_; }
    Index num_generators() const { return ng_; }
    Index num_buses() const { return nb_; }
    Index num_zones() const { return nz_; }
    Index num_flows() const { return nf_; }
    const Eigen::MatrixXd& ptdf() const { return ptdf_.B; }

    lp::PerturbationPolicy planning_perturbation() const;

    // planning column blocks
    Index col_g(Index i) const { return i; }
    Index col_ru(Index i) const { return ng_ + i; }
    Index col_rd(Index i) const { return 2 * ng_ + i; }
    Index col_ls(Index b) const { return 3 * ng_ + b; }
    Index col_sp(Index b) const { return 3 * ng_ + nb_ + b; }
    Index col_su(Index z) const { return 3 * ng_ + 2 * nb_ + z; }
    Index col_sd(Index z) const { return 3 * ng_ + 2 * nb_ + nz_ + z; }
    Index col_f(Index l) const { return 3 * ng_ + 2 * nb_ + 2 * nz_ + l; }
    // planning row blocks
    Index row_balance() const { return 0; }
    Index row_flow(Index l) const { return 1 + l; }
    Index row_up(Index z) const { return 1 + nf_ + z; }
    Index row_dn(Index z) const { return 1 + nf_ + nz_ + z; }
    Index row_cap(Index i) const { return 1 + nf_ + 2 * nz_ + i; }
    Index row_floor(Index i) const { return 1 + nf_ + 2 * nz_ + ng_ + i; }
    Index row_nodal(Index b) const { return 1 + nf_ + 2 * nz_ + 2 * ng_ + b; }

    /// Planning template with zero forecasts; set_forecast fills the rhs.
    const Lp& planning_template() const { return planning_; }
    void set_forecast(Lp& planning, const Eigen::VectorXd& demand, const Eigen::VectorXd& r_up,
                      const Eigen::VectorXd& r_dn) const;
    Lp planning_lp(const Eigen::VectorXd& demand, const Eigen::VectorXd& r_up, const Eigen::VectorXd& r_dn) const;
    DispatchPlan read_plan(const lp::LpSolution<double>& sol) const;

    // assessment columns: g, ls, sp, f
    Index acol_g(Index i) const { return i; }
    Index acol_ls(Index b) const { return ng_ + b; }
    Index acol_sp(Index b) const { return ng_ + nb_ + b; }
    Index acol_f(Index l) const { return ng_ + 2 * nb_ + l; }

    const Lp& assessment_template() const { return assessment_; }
    void set_realization(Lp& assessment, const DispatchPlan& plan, const Eigen::VectorXd& demand) const;
    Lp assessment_lp(const DispatchPlan& plan, const Eigen::VectorXd& demand) const;
    AssessmentResult read_assessment(const lp::LpSolution<double>& sol, const DispatchPlan& plan) const;

    /// Reserve cost of a plan at actual prices.
    double reserve_cost(const DispatchPlan& plan) const;

private:
    SystemCase sc_;
    DispatchOptions opt_;
    Index ng_, nb_, nz_, nf_;
    PtdfMatrix ptdf_;
    Eigen::MatrixXd M_;
    Lp planning_;
    Lp assessment_;
    Eigen::VectorXd cost_, p_up_, p_dn_;

    void build_planning();
    void build_assessment();
};

DispatchPlan solve_planning(const DispatchModel& m, const Eigen::VectorXd& demand, const Eigen::VectorXd& r_up,
                            const Eigen::VectorXd& r_dn);
AssessmentResult solve_assessment(const DispatchModel& m, const DispatchPlan& plan, const Eigen::VectorXd& demand);

/// Cost with reserve bounds relaxed to [0, G] and no reserve charge.
double perfect_information_cost(const DispatchModel& m, const Eigen::VectorXd& demand);

/// Human-readable list of active bounds and rows in an assessment solution.
std::vector<std::string> binding_report(const DispatchModel& m, const AssessmentResult& a, const DispatchPlan& plan,
                                        double tol = 1e-7);

/// Per-sample solver state reused across theta evaluations.
struct SampleCache {
    lp::SimplexSolver<double> planning;
    lp::SimplexSolver<double> assessment;
    Lp planning_lp;
    Lp assessment_lp;
    bool ready = false;
};

struct SampleResult {
    double cost = 0.0;
    DispatchPlan plan;
    AssessmentResult assessment;
};

/// Forecast -> plan -> assessed cost for one observation.
SampleResult evaluate_sample(const DispatchModel& m, const ForecastSpec& spec, const Eigen::VectorXd& theta,
                             const Eigen::Ref<const Eigen::RowVectorXd>& x, const Eigen::VectorXd& demand,
                             SampleCache& cache);
/// Same, but returns only the cost and skips result extraction.
double evaluate_cost(const DispatchModel& m, const Forecast& f, const Eigen::VectorXd& demand, SampleCache& cache);

/// Demand row of a dataset scattered onto case buses.
Eigen::VectorXd bus_demand(const DispatchModel& m, const Dataset& ds, Index t);

}  // namespace adl
