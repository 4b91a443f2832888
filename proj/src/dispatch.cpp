#include "adlearn/dispatch.hpp"

#include <cmath>

#include "adlearn/errors.hpp"

namespace adl {

using lp::RowSense;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_len(const Eigen::VectorXd& v, Index n, const char* what) {
    if (v.size() != n)
        throw DimensionError(std::string(what) + " has length " + std::to_string(v.size()) + ", expected " +
                             std::to_string(n));
}

}  // namespace

DispatchModel::DispatchModel(SystemCase sc, DispatchOptions opt) : sc_(std::move(sc)), opt_(opt) {
    sc_.validate(PenaltyRule::ShedAboveCost);
    ng_ = sc_.num_generators();
    nb_ = sc_.num_buses();
    nz_ = sc_.num_zones();
    if (opt_.copper_plate) {
        if (opt_.nodal_balance) throw ConfigError("nodal_balance requires network constraints");
        nf_ = 0;
        ptdf_.B.resize(0, nb_);
    } else {
        ptdf_ = compute_ptdf(sc_);
        nf_ = sc_.num_lines();
    }
    M_ = incidence_maps(sc_).M;
    cost_ = sc_.cost();
    p_up_ = sc_.p_up();
    p_dn_ = sc_.p_dn();
    build_planning();
    build_assessment();
}

lp::PerturbationPolicy DispatchModel::planning_perturbation() const {
    return opt_.perturbation > 0 ? lp::PerturbationPolicy::deterministic(opt_.perturbation)
                                 : lp::PerturbationPolicy::none();
}

void DispatchModel::build_planning() {
    const Index ncols = 3 * ng_ + 2 * nb_ + 2 * nz_ + nf_;
    const Index nrows = 1 + nf_ + 2 * nz_ + 2 * ng_ + (opt_.nodal_balance ? nb_ : 0);
    Lp lp(nrows, ncols);
    const Eigen::VectorXd c = sc_.tilde_cost();
    const Eigen::VectorXd pu = sc_.tilde_p_up();
    const Eigen::VectorXd pd = sc_.tilde_p_dn();
    const Eigen::VectorXd G = sc_.tilde_capacity();
    const Eigen::VectorXd F = sc_.tilde_limit();
    const double ls = sc_.tilde_load_shed();
    const double sp = sc_.tilde_spill();
    const auto gz = sc_.generator_zone_indices();

    for (Index i = 0; i < ng_; ++i) {
        const auto& gen = sc_.generators[static_cast<std::size_t>(i)];
        const std::string id = std::to_string(gen.id);
        lp.set_col(col_g(i), c(i), 0.0, kInf, "g_" + id);
        lp.set_col(col_ru(i), pu(i), 0.0, gen.rbar_up, "ru_" + id);
        lp.set_col(col_rd(i), pd(i), 0.0, gen.rbar_dn, "rd_" + id);
    }
    for (Index b = 0; b < nb_; ++b) {
        const std::string id = std::to_string(sc_.buses[static_cast<std::size_t>(b)].id);
        lp.set_col(col_ls(b), ls, 0.0, kInf, "ls_" + id);
        lp.set_col(col_sp(b), sp, 0.0, kInf, "sp_" + id);
    }
    for (Index z = 0; z < nz_; ++z) {
        const std::string id = std::to_string(sc_.zones[static_cast<std::size_t>(z)].id);
        lp.set_col(col_su(z), ls, 0.0, kInf, "su_" + id);
        lp.set_col(col_sd(z), ls, 0.0, kInf, "sd_" + id);
    }
    for (Index l = 0; l < nf_; ++l)
        lp.set_col(col_f(l), 0.0, -F(l), F(l), "f_" + std::to_string(sc_.lines[static_cast<std::size_t>(l)].id));

    // system balance: sum g - sum sp + sum ls = sum D
    lp.set_row(row_balance(), RowSense::Equal, 0.0, "balance");
    for (Index i = 0; i < ng_; ++i) lp.matrix(row_balance(), col_g(i)) = 1.0;
    for (Index b = 0; b < nb_; ++b) {
        lp.matrix(row_balance(), col_sp(b)) = -1.0;
        lp.matrix(row_balance(), col_ls(b)) = 1.0;
    }
    // flows: f - B (M g - sp + ls) = -B D
    for (Index l = 0; l < nf_; ++l) {
        const Index r = row_flow(l);
        lp.set_row(r, RowSense::Equal, 0.0, "flow_" + std::to_string(sc_.lines[static_cast<std::size_t>(l)].id));
        lp.matrix(r, col_f(l)) = 1.0;
        const Eigen::RowVectorXd bl = ptdf_.B.row(l);
        const Eigen::RowVectorXd bg = bl * M_;
        for (Index i = 0; i < ng_; ++i) lp.matrix(r, col_g(i)) = -bg(i);
        for (Index b = 0; b < nb_; ++b) {
            lp.matrix(r, col_sp(b)) = bl(b);
            lp.matrix(r, col_ls(b)) = -bl(b);
        }
    }
    for (Index z = 0; z < nz_; ++z) {
        const std::string id = std::to_string(sc_.zones[static_cast<std::size_t>(z)].id);
        lp.set_row(row_up(z), RowSense::Equal, 0.0, "rup_" + id);
        lp.set_row(row_dn(z), RowSense::Equal, 0.0, "rdn_" + id);
        lp.matrix(row_up(z), col_su(z)) = 1.0;
        lp.matrix(row_dn(z), col_sd(z)) = 1.0;
    }
    for (Index i = 0; i < ng_; ++i) {
        const Index z = gz[static_cast<std::size_t>(i)];
        if (z >= 0) {
            lp.matrix(row_up(z), col_ru(i)) = 1.0;
            lp.matrix(row_dn(z), col_rd(i)) = 1.0;
        }
        const std::string id = std::to_string(sc_.generators[static_cast<std::size_t>(i)].id);
        lp.set_row(row_cap(i), RowSense::LessEqual, G(i), "cap_" + id);
        lp.matrix(row_cap(i), col_g(i)) = 1.0;
        lp.matrix(row_cap(i), col_ru(i)) = 1.0;
        lp.set_row(row_floor(i), RowSense::GreaterEqual, 0.0, "floor_" + id);
        lp.matrix(row_floor(i), col_g(i)) = 1.0;
        lp.matrix(row_floor(i), col_rd(i)) = -1.0;
    }
    if (opt_.nodal_balance) {
        for (Index b = 0; b < nb_; ++b) {
            const Index r = row_nodal(b);
            lp.set_row(r, RowSense::Equal, 0.0, "node_" + std::to_string(sc_.buses[static_cast<std::size_t>(b)].id));
            for (Index i = 0; i < ng_; ++i)
                if (M_(b, i) != 0.0) lp.matrix(r, col_g(i)) = 1.0;
            lp.matrix(r, col_sp(b)) = -1.0;
            lp.matrix(r, col_ls(b)) = 1.0;
        }
        for (Index l = 0; l < nf_; ++l) {
            const auto& ln = sc_.lines[static_cast<std::size_t>(l)];
            lp.matrix(row_nodal(sc_.bus_index(ln.from)), col_f(l)) -= 1.0;
            lp.matrix(row_nodal(sc_.bus_index(ln.to)), col_f(l)) += 1.0;
        }
    }
    planning_ = std::move(lp);
}

void DispatchModel::set_forecast(Lp& lp, const Eigen::VectorXd& demand, const Eigen::VectorXd& r_up,
                                 const Eigen::VectorXd& r_dn) const {
    check_len(demand, nb_, "demand forecast");
    check_len(r_up, nz_, "up-reserve forecast");
    check_len(r_dn, nz_, "down-reserve forecast");
    lp.rhs(row_balance()) = demand.sum();
    if (nf_ > 0) lp.rhs.segment(row_flow(0), nf_) = -(ptdf_.B * demand);
    for (Index z = 0; z < nz_; ++z) {
        lp.rhs(row_up(z)) = std::max(r_up(z), 0.0);
        lp.rhs(row_dn(z)) = std::max(r_dn(z), 0.0);
    }
    if (opt_.nodal_balance) lp.rhs.segment(row_nodal(0), nb_) = demand;
}

Lp DispatchModel::planning_lp(const Eigen::VectorXd& demand, const Eigen::VectorXd& r_up,
                              const Eigen::VectorXd& r_dn) const {
    Lp lp = planning_;
    set_forecast(lp, demand, r_up, r_dn);
    return lp;
}

DispatchPlan DispatchModel::read_plan(const lp::LpSolution<double>& sol) const {
    if (!sol.optimal()) throw InvariantError(std::string("planning LP is ") + lp::to_string(sol.status));
    DispatchPlan p;
    const auto& x = sol.x;
    p.g = x.segment(col_g(0), ng_).cwiseMax(0.0);
    p.r_up = x.segment(col_ru(0), ng_).cwiseMax(0.0);
    p.r_dn = x.segment(col_rd(0), ng_).cwiseMax(0.0);
    p.shed = x.segment(col_ls(0), nb_);
    p.spill = x.segment(col_sp(0), nb_);
    p.short_up = x.segment(col_su(0), nz_);
    p.short_dn = x.segment(col_sd(0), nz_);
    p.objective = sol.objective;
    p.basis = sol.basis;
    return p;
}

void DispatchModel::build_assessment() {
    const Index ncols = ng_ + 2 * nb_ + nf_;
    const Index nrows = 1 + nf_ + (opt_.nodal_balance ? nb_ : 0);
    Lp lp(nrows, ncols);
    const Eigen::VectorXd F = sc_.limit();
    for (Index i = 0; i < ng_; ++i)
        lp.set_col(acol_g(i), cost_(i), 0.0, 0.0, "g_" + std::to_string(sc_.generators[static_cast<std::size_t>(i)].id));
    for (Index b = 0; b < nb_; ++b) {
        const std::string id = std::to_string(sc_.buses[static_cast<std::size_t>(b)].id);
        lp.set_col(acol_ls(b), sc_.penalties.load_shed, 0.0, kInf, "ls_" + id);
        lp.set_col(acol_sp(b), sc_.penalties.spill, 0.0, kInf, "sp_" + id);
    }
    for (Index l = 0; l < nf_; ++l)
        lp.set_col(acol_f(l), 0.0, -F(l), F(l), "f_" + std::to_string(sc_.lines[static_cast<std::size_t>(l)].id));
    lp.set_row(0, RowSense::Equal, 0.0, "balance");
    for (Index i = 0; i < ng_; ++i) lp.matrix(0, acol_g(i)) = 1.0;
    for (Index b = 0; b < nb_; ++b) {
        lp.matrix(0, acol_sp(b)) = -1.0;
        lp.matrix(0, acol_ls(b)) = 1.0;
    }
    for (Index l = 0; l < nf_; ++l) {
        const Index r = 1 + l;
        lp.set_row(r, RowSense::Equal, 0.0, "flow_" + std::to_string(sc_.lines[static_cast<std::size_t>(l)].id));
        lp.matrix(r, acol_f(l)) = 1.0;
        const Eigen::RowVectorXd bl = ptdf_.B.row(l);
        const Eigen::RowVectorXd bg = bl * M_;
        for (Index i = 0; i < ng_; ++i) lp.matrix(r, acol_g(i)) = -bg(i);
        for (Index b = 0; b < nb_; ++b) {
            lp.matrix(r, acol_sp(b)) = bl(b);
            lp.matrix(r, acol_ls(b)) = -bl(b);
        }
    }
    if (opt_.nodal_balance) {
        for (Index b = 0; b < nb_; ++b) {
            const Index r = 1 + nf_ + b;
            lp.set_row(r, RowSense::Equal, 0.0, "node_" + std::to_string(sc_.buses[static_cast<std::size_t>(b)].id));
            for (Index i = 0; i < ng_; ++i)
                if (M_(b, i) != 0.0) lp.matrix(r, acol_g(i)) = 1.0;
            lp.matrix(r, acol_sp(b)) = -1.0;
            lp.matrix(r, acol_ls(b)) = 1.0;
        }
        for (Index l = 0; l < nf_; ++l) {
            const auto& ln = sc_.lines[static_cast<std::size_t>(l)];
            lp.matrix(1 + nf_ + sc_.bus_index(ln.from), acol_f(l)) -= 1.0;
            lp.matrix(1 + nf_ + sc_.bus_index(ln.to), acol_f(l)) += 1.0;
        }
    }
    assessment_ = std::move(lp);
}

double DispatchModel::reserve_cost(const DispatchPlan& plan) const {
    return p_up_.dot(plan.r_up) + p_dn_.dot(plan.r_dn);
}

void DispatchModel::set_realization(Lp& lp, const DispatchPlan& plan, const Eigen::VectorXd& demand) const {
    check_len(demand, nb_, "realized demand");
    check_len(plan.g, ng_, "plan generation");
    for (Index i = 0; i < ng_; ++i) {
        lp.lower(acol_g(i)) = std::max(0.0, plan.g(i) - plan.r_dn(i));
        lp.upper(acol_g(i)) = plan.g(i) + plan.r_up(i);
    }
    lp.rhs(0) = demand.sum();
    if (nf_ > 0) lp.rhs.segment(1, nf_) = -(ptdf_.B * demand);
    if (opt_.nodal_balance) lp.rhs.segment(1 + nf_, nb_) = demand;
    lp.objective_offset = reserve_cost(plan);
}

Lp DispatchModel::assessment_lp(const DispatchPlan& plan, const Eigen::VectorXd& demand) const {
    Lp lp = assessment_;
    set_realization(lp, plan, demand);
    return lp;
}

AssessmentResult DispatchModel::read_assessment(const lp::LpSolution<double>& sol, const DispatchPlan& plan) const {
    if (!sol.optimal()) throw InvariantError(std::string("assessment LP is ") + lp::to_string(sol.status));
    AssessmentResult a;
    a.g = sol.x.segment(acol_g(0), ng_);
    a.shed = sol.x.segment(acol_ls(0), nb_);
    a.spill = sol.x.segment(acol_sp(0), nb_);
    a.flow = sol.x.segment(acol_f(0), nf_);
    a.energy_cost = cost_.dot(a.g);
    a.reserve_cost = reserve_cost(plan);
    a.penalty_cost = sc_.penalties.load_shed * a.shed.sum() + sc_.penalties.spill * a.spill.sum();
    a.cost = sol.objective;
    return a;
}

DispatchPlan solve_planning(const DispatchModel& m, const Eigen::VectorXd& demand, const Eigen::VectorXd& r_up,
                            const Eigen::VectorXd& r_dn) {
    const auto sol = lp::solve(m.planning_lp(demand, r_up, r_dn), nullptr, m.planning_perturbation());
    return m.read_plan(sol);
}

AssessmentResult solve_assessment(const DispatchModel& m, const DispatchPlan& plan, const Eigen::VectorXd& demand) {
    return m.read_assessment(lp::solve(m.assessment_lp(plan, demand)), plan);
}

double perfect_information_cost(const DispatchModel& m, const Eigen::VectorXd& demand) {
    DispatchPlan open;
    const Eigen::VectorXd G = m.system().capacity();
    open.g = Eigen::VectorXd::Zero(m.num_generators());
    open.r_up = G;
    open.r_dn = Eigen::VectorXd::Zero(m.num_generators());
    Lp lp = m.assessment_lp(open, demand);
    lp.objective_offset = 0.0;
    const auto sol = lp::solve(lp);
    if (!sol.optimal()) throw InvariantError("perfect-information LP is not optimal");
    return sol.objective;
}

std::vector<std::string> binding_report(const DispatchModel& m, const AssessmentResult& a, const DispatchPlan& plan,
                                        double tol) {
    std::vector<std::string> out;
    const auto& sc = m.system();
    for (Index i = 0; i < m.num_generators(); ++i) {
        const std::string id = std::to_string(sc.generators[static_cast<std::size_t>(i)].id);
        const double hi = plan.g(i) + plan.r_up(i);
        const double lo = std::max(0.0, plan.g(i) - plan.r_dn(i));
        if (hi - lo <= tol) continue;
        if (a.g(i) >= hi - tol) out.push_back("g_" + id + " at upper " + std::to_string(hi));
        else if (a.g(i) <= lo + tol) out.push_back("g_" + id + " at lower " + std::to_string(lo));
    }
    for (Index b = 0; b < m.num_buses(); ++b) {
        const std::string id = std::to_string(sc.buses[static_cast<std::size_t>(b)].id);
        if (a.shed(b) > tol) out.push_back("shed at bus " + id);
        if (a.spill(b) > tol) out.push_back("spill at bus " + id);
    }
    for (Index l = 0; l < m.num_flows(); ++l) {
        const double F = sc.lines[static_cast<std::size_t>(l)].limit;
        if (std::abs(a.flow(l)) >= F - tol)
            out.push_back("line " + std::to_string(sc.lines[static_cast<std::size_t>(l)].id) + " at limit");
    }
    return out;
}

namespace {

const lp::LpSolution<double>& checked(const lp::LpSolution<double>& s, const char* what) {
    if (!s.optimal()) throw InvariantError(std::string(what) + " LP is " + lp::to_string(s.status));
    return s;
}

}  // namespace

double evaluate_cost(const DispatchModel& m, const Forecast& f, const Eigen::VectorXd& demand, SampleCache& cache) {
    if (!cache.ready) {
        cache.planning_lp = m.planning_template();
        cache.assessment_lp = m.assessment_template();
        cache.ready = true;
    }
    m.set_forecast(cache.planning_lp, f.demand, f.reserve_up, f.reserve_dn);
    const auto ps = cache.planning.solve(cache.planning_lp, m.planning_perturbation());
    const DispatchPlan plan = m.read_plan(checked(ps, "planning"));
    m.set_realization(cache.assessment_lp, plan, demand);
    const auto as = cache.assessment.solve(cache.assessment_lp);
    return checked(as, "assessment").objective;
}

SampleResult evaluate_sample(const DispatchModel& m, const ForecastSpec& spec, const Eigen::VectorXd& theta,
                             const Eigen::Ref<const Eigen::RowVectorXd>& x, const Eigen::VectorXd& demand,
                             SampleCache& cache) {
    const Forecast f = predict(spec, theta, x);
    if (!cache.ready) {
        cache.planning_lp = m.planning_template();
        cache.assessment_lp = m.assessment_template();
        cache.ready = true;
    }
    m.set_forecast(cache.planning_lp, f.demand, f.reserve_up, f.reserve_dn);
    SampleResult r;
    r.plan = m.read_plan(cache.planning.solve(cache.planning_lp, m.planning_perturbation()));
    m.set_realization(cache.assessment_lp, r.plan, demand);
    r.assessment = m.read_assessment(cache.assessment.solve(cache.assessment_lp), r.plan);
    r.cost = r.assessment.cost;
    return r;
}

Eigen::VectorXd bus_demand(const DispatchModel& m, const Dataset& ds, Index t) {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(m.num_buses());
    for (std::size_t k = 0; k < ds.bus_ids.size(); ++k)
        d(m.system().bus_index(ds.bus_ids[k])) = ds.demand(t, static_cast<Index>(k));
    return d;
}

}  // namespace adl
