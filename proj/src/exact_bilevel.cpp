#include "adlearn/exact_bilevel.hpp"

#include <cmath>
#include <deque>
#include <set>

#include "adlearn/errors.hpp"

namespace adl {

using lp::RowSense;
using lp::VarStatus;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr Index kMaxInstancePairs = 5000;

Eigen::VectorXd stack_forecast(const Forecast& f) {
    Eigen::VectorXd p(f.demand.size() + f.reserve_up.size() + f.reserve_dn.size());
    p << f.demand, f.reserve_up, f.reserve_dn;
    return p;
}

}  // namespace

BilevelData::BilevelData(const DispatchModel& model, const ForecastSpec& spec, const Dataset& ds,
                         std::optional<ThetaBox> box, std::optional<Eigen::VectorXd> fixed_theta, double theta_bound)
    : model_(&model), spec_(spec), ds_(ds) {
    spec_.bind(ds_.feature_names);
    T_ = ds_.length();
    const Index nb = model.num_buses();
    const Index nz = model.num_zones();
    q_ = nb + 2 * nz;
    trainable_ = spec_.trainable_positions();
    if (trainable_.empty()) throw ConfigError("exact estimation needs at least one trainable coefficient");
    if (T_ < 1) throw ConfigError("exact estimation needs at least one sample");
    if (T_ * pairs_per_sample() > kMaxInstancePairs)
        throw ConfigError("instance has " + std::to_string(T_ * pairs_per_sample()) +
                          " complementarity pairs; the exact method is limited to " +
                          std::to_string(kMaxInstancePairs));

    theta_fixed_ = fixed_theta ? *fixed_theta : open_loop_theta(spec_, ds_, model.system());
    if (theta_fixed_.size() != spec_.size()) throw DimensionError("fixed theta does not match the forecast spec");
    const Index d = dim();
    if (box) {
        if (box->lo.size() != d || box->hi.size() != d) throw DimensionError("theta box does not match trainable count");
        if ((box->lo.array() > box->hi.array()).any()) throw ConfigError("theta box has lo > hi");
        box_ = *box;
    } else {
        box_ = {Eigen::VectorXd::Constant(d, -theta_bound), Eigen::VectorXd::Constant(d, theta_bound)};
    }

    const Index N = spec_.size();
    Eigen::VectorXd base = theta_fixed_;
    for (Index j : trainable_) base(j) = 0.0;
    for (Index t = 0; t < T_; ++t) {
        Eigen::MatrixXd X(q_, N);
        for (Index j = 0; j < N; ++j) {
            const Eigen::VectorXd e = Eigen::VectorXd::Unit(N, j);
            X.col(j) = stack_forecast(predict_raw(spec_, e, ds_.features.row(t)));
        }
        Eigen::MatrixXd P(q_, d);
        for (Index i = 0; i < d; ++i) P.col(i) = X.col(trainable_[static_cast<std::size_t>(i)]);
        P_.push_back(std::move(P));
        p0_.push_back(X * base);
        demand_.push_back(bus_demand(model, ds_, t));
    }

    planning_ = model.planning_template();
    model.set_forecast(planning_, Eigen::VectorXd::Zero(nb), Eigen::VectorXd::Zero(nz), Eigen::VectorXd::Zero(nz));
    E_.resize(planning_.rows(), q_);
    for (Index j = 0; j < q_; ++j) {
        Lp tmp = planning_;
        const Eigen::VectorXd e = Eigen::VectorXd::Unit(q_, j);
        model.set_forecast(tmp, e.head(nb), e.segment(nb, nz), e.tail(nz));
        E_.col(j) = tmp.rhs - planning_.rhs;
    }
    const auto pert = model.planning_perturbation();
    cost_ = planning_.objective;
    for (Index j = 0; j < cost_.size(); ++j) cost_(j) += pert.offset(j, cost_.size());

    std::vector<std::vector<double>> rows;
    std::set<std::vector<double>> seen;
    for (Index t = 0; t < T_; ++t) {
        for (Index k = nb; k < q_; ++k) {
            const Eigen::RowVectorXd a = -P_[static_cast<std::size_t>(t)].row(k);
            const double b = p0_[static_cast<std::size_t>(t)](k);
            if (a.cwiseAbs().maxCoeff() <= 1e-14) {
                if (b < -1e-12) throw ConfigError("a fixed reserve forecast is negative");
                continue;
            }
            std::vector<double> key(a.data(), a.data() + d);
            key.push_back(b);
            if (seen.insert(key).second) rows.push_back(std::move(key));
        }
    }
    base_A_.resize(static_cast<Index>(rows.size()), d);
    base_b_.resize(static_cast<Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (Index i = 0; i < d; ++i) base_A_(static_cast<Index>(r), i) = rows[r][static_cast<std::size_t>(i)];
        base_b_(static_cast<Index>(r)) = rows[r].back();
    }
}

Index BilevelData::pairs_per_sample() const {
    const Lp& lp = model_->planning_template();
    Index n = 0;
    for (auto s : lp.senses) n += s != RowSense::Equal;
    for (Index j = 0; j < lp.cols(); ++j) n += std::isfinite(lp.lower(j)) + std::isfinite(lp.upper(j));
    return n;
}

Eigen::VectorXd BilevelData::full_theta(const Eigen::VectorXd& s) const {
    if (s.size() != dim()) throw DimensionError("trainable vector has the wrong length");
    Eigen::VectorXd theta = theta_fixed_;
    for (Index i = 0; i < dim(); ++i) theta(trainable_[static_cast<std::size_t>(i)]) = s(i);
    return theta;
}

Eigen::VectorXd BilevelData::trainable_part(const Eigen::VectorXd& theta) const {
    Eigen::VectorXd s(dim());
    for (Index i = 0; i < dim(); ++i) s(i) = theta(trainable_[static_cast<std::size_t>(i)]);
    return s;
}

Lp BilevelData::planning_at(const Eigen::VectorXd& p) const {
    Lp lp = planning_;
    lp.rhs += E_ * p;
    return lp;
}

CriticalRegion critical_region(const BilevelData& data, const lp::LpSolution<double>& sol) {
    if (!sol.optimal()) throw InvariantError("critical region of a non-optimal planning solution");
    const Lp& lp = data.planning();
    const Index m = lp.rows();
    const Index n = lp.cols();
    const Index q = data.forecast_dim();
    CriticalRegion R;
    R.col_status = sol.col_status;
    R.row_status = sol.row_status;
    R.duals = sol.duals;
    R.reduced_costs = sol.reduced_costs;

    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(m, m);
    Eigen::VectorXd xn = Eigen::VectorXd::Zero(n);
    // basis column k -> (original column, or -1 - row for a row column)
    std::vector<Index> owner;
    for (Index j = 0; j < n; ++j) {
        switch (sol.col_status[static_cast<std::size_t>(j)]) {
            case VarStatus::Basic:
                if (static_cast<Index>(owner.size()) >= m) throw InvariantError("basis has too many columns");
                B.col(static_cast<Index>(owner.size())) = lp.matrix.col(j);
                owner.push_back(j);
                break;
            case VarStatus::AtLower: xn(j) = lp.lower(j); break;
            case VarStatus::AtUpper: xn(j) = lp.upper(j); break;
            default: break;
        }
    }
    for (Index i = 0; i < m; ++i) {
        const auto st = sol.row_status[static_cast<std::size_t>(i)];
        if (st != VarStatus::Basic && st != VarStatus::Redundant) continue;
        if (static_cast<Index>(owner.size()) >= m) throw InvariantError("basis has too many columns");
        const double sign = st == VarStatus::Basic && lp.senses[static_cast<std::size_t>(i)] == RowSense::GreaterEqual ? -1.0 : 1.0;
        B(i, static_cast<Index>(owner.size())) = sign;
        owner.push_back(-1 - i);
    }
    if (static_cast<Index>(owner.size()) != m) throw InvariantError("basis size does not match the row count");

    Eigen::FullPivLU<Eigen::MatrixXd> lu(B);
    if (!lu.isInvertible()) throw InvariantError("singular planning basis");
    const Eigen::MatrixXd W = lu.solve(data.E());
    const Eigen::VectorXd w0 = lu.solve(Eigen::VectorXd(lp.rhs - lp.matrix * xn));

    R.Z = Eigen::MatrixXd::Zero(n, q);
    R.z0 = xn;
    std::vector<Eigen::RowVectorXd> g;
    std::vector<double> h;
    // parallel duplicates keep the tighter side so every facet appears once
    auto add = [&](const Eigen::RowVectorXd& a, double b) {
        const double norm = a.norm();
        if (norm <= 1e-12) return;
        const Eigen::RowVectorXd u = a / norm;
        for (std::size_t r = 0; r < g.size(); ++r) {
            if ((g[r] - u).cwiseAbs().maxCoeff() > 1e-10) continue;
            h[r] = std::min(h[r], b / norm);
            return;
        }
        g.push_back(u);
        h.push_back(b / norm);
    };
    for (Index k = 0; k < m; ++k) {
        const Index o = owner[static_cast<std::size_t>(k)];
        const Eigen::RowVectorXd wk = W.row(k);
        if (o >= 0) {
            R.Z.row(o) = wk;
            R.z0(o) = w0(k);
            if (std::isfinite(lp.lower(o))) add(-wk, w0(k) - lp.lower(o));
            if (std::isfinite(lp.upper(o))) add(wk, lp.upper(o) - w0(k));
        } else if (sol.row_status[static_cast<std::size_t>(-1 - o)] == VarStatus::Basic) {
            add(-wk, w0(k));
        } else {
            add(wk, -w0(k));
            add(-wk, w0(k));
        }
    }
    R.G.resize(static_cast<Index>(g.size()), q);
    R.h.resize(static_cast<Index>(h.size()));
    for (std::size_t r = 0; r < g.size(); ++r) {
        R.G.row(static_cast<Index>(r)) = g[r];
        R.h(static_cast<Index>(r)) = h[r];
    }
    return R;
}

namespace {

std::string basis_key(const CriticalRegion& R) {
    std::string k;
    for (auto s : R.col_status) k.push_back(static_cast<char>('a' + static_cast<int>(s)));
    k.push_back('|');
    for (auto s : R.row_status) k.push_back(static_cast<char>('a' + static_cast<int>(s)));
    return k;
}

// Point on facet i of {G p <= h} inside the box, as far from the other facets as possible.
std::optional<std::pair<Eigen::VectorXd, double>> facet_point(const CriticalRegion& R, Index i,
                                                              const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    const Index q = lo.size();
    const Index rows = R.G.rows() + 2 * q;
    Lp lp(rows, q + 1);
    for (Index j = 0; j < q; ++j) lp.set_col(j, 0.0, -kInf, kInf);
    lp.set_col(q, -1.0, 0.0, 1.0);
    Index r = 0;
    for (Index k = 0; k < R.G.rows(); ++k, ++r) {
        lp.matrix.row(r).head(q) = R.G.row(k);
        if (k == i) {
            lp.set_row(r, RowSense::Equal, R.h(k));
        } else {
            lp.matrix(r, q) = 1.0;
            lp.set_row(r, RowSense::LessEqual, R.h(k));
        }
    }
    for (Index j = 0; j < q; ++j) {
        lp.matrix(r, j) = 1.0;
        lp.set_row(r++, RowSense::LessEqual, hi(j));
        lp.matrix(r, j) = -1.0;
        lp.set_row(r++, RowSense::LessEqual, -lo(j));
    }
    const auto sol = lp::solve(lp);
    if (!sol.optimal() || sol.x(q) <= 1e-9) return std::nullopt;
    return std::make_pair(Eigen::VectorXd(sol.x.head(q)), sol.x(q));
}

}  // namespace

std::vector<CriticalRegion> enumerate_regions(const BilevelData& data, const Eigen::VectorXd& p_lo,
                                              const Eigen::VectorXd& p_hi, std::size_t max_regions) {
    const Index q = data.forecast_dim();
    if (p_lo.size() != q || p_hi.size() != q) throw DimensionError("forecast box has the wrong length");
    std::vector<CriticalRegion> out;
    std::set<std::string> seen;
    std::deque<Eigen::VectorXd> queue{0.5 * (p_lo + p_hi)};
    lp::SimplexSolver<double> solver;
    const auto pert = data.model().planning_perturbation();
    const double scale = 1.0 + std::max(p_lo.cwiseAbs().maxCoeff(), p_hi.cwiseAbs().maxCoeff());
    while (!queue.empty() && out.size() < max_regions) {
        const Eigen::VectorXd p = queue.front();
        queue.pop_front();
        const auto sol = solver.solve(data.planning_at(p), pert);
        if (!sol.optimal()) continue;
        CriticalRegion R = critical_region(data, sol);
        if (!seen.insert(basis_key(R)).second) continue;
        for (Index i = 0; i < R.G.rows(); ++i) {
            const auto f = facet_point(R, i, p_lo, p_hi);
            if (!f) continue;
            const double step = std::min(0.5 * f->second, 1e-6 * scale);
            const Eigen::VectorXd next = f->first + step * R.G.row(i).transpose();
            if ((next.array() < p_lo.array()).any() || (next.array() > p_hi.array()).any()) continue;
            queue.push_back(next);
        }
        out.push_back(std::move(R));
    }
    return out;
}

double KktInstance::slack(const ComplementarityPair& pr, const Eigen::VectorXd& x) const {
    switch (pr.kind) {
        case ComplementarityPair::Kind::Row: {
            const double act = lp.matrix.row(pr.row).dot(x) - lp.rhs(pr.row);
            return lp.senses[static_cast<std::size_t>(pr.row)] == RowSense::LessEqual ? -act : act;
        }
        case ComplementarityPair::Kind::Lower: return x(pr.col) - pr.bound;
        case ComplementarityPair::Kind::Upper: return pr.bound - x(pr.col);
    }
    return 0.0;
}

double KktInstance::max_violation(const Eigen::VectorXd& x) const {
    double worst = 0.0;
    for (const auto& pr : pairs) worst = std::max(worst, std::abs(slack(pr, x) * x(pr.dual)));
    return worst;
}

KktInstance build_kkt(const BilevelData& data) {
    const DispatchModel& model = data.model();
    const Lp& pl = data.planning();
    const Lp& at = model.assessment_template();
    const Index T = data.samples(), d = data.dim(), q = data.forecast_dim();
    const Index n = pl.cols(), m = pl.rows(), na = at.cols(), ma = at.rows();
    const Index ng = model.num_generators(), nb = model.num_buses();

    std::vector<Index> lower_cols, upper_cols;
    for (Index j = 0; j < n; ++j) {
        if (std::isfinite(pl.lower(j))) lower_cols.push_back(j);
        if (std::isfinite(pl.upper(j))) upper_cols.push_back(j);
    }
    const Index nl = static_cast<Index>(lower_cols.size()), nu = static_cast<Index>(upper_cols.size());
    const Index per_col = q + n + m + nl + nu + na;
    const Index per_row = q + m + n + ma + 2 * ng;

    KktInstance inst;
    Lp& lp = inst.lp;
    lp = Lp(T * per_row, d + T * per_col);
    for (Index i = 0; i < d; ++i) {
        inst.theta_cols.push_back(i);
        lp.set_col(i, 0.0, data.box().lo(i), data.box().hi(i), "theta_" + std::to_string(i));
    }
    const Eigen::VectorXd pu = model.system().p_up();
    const Eigen::VectorXd pd = model.system().p_dn();

    for (Index t = 0; t < T; ++t) {
        const std::string tag = "_" + std::to_string(t);
        const Index c0 = d + t * per_col;
        const Index P = c0, Z = P + q, PI = Z + n, NL = PI + m, NU = NL + nl, A = NU + nu;
        const Index r0 = t * per_row;
        const Index RF = r0, RP = RF + q, RS = RP + m, RA = RS + n, RL = RA + ma;
        inst.p_offset.push_back(P);
        inst.z_offset.push_back(Z);
        inst.pi_offset.push_back(PI);
        inst.nu_offset.push_back(NL);
        inst.a_offset.push_back(A);
        inst.forecast_row.push_back(RF);

        for (Index k = 0; k < q; ++k) {
            lp.set_col(P + k, 0.0, k < nb ? -kInf : 0.0, kInf, "p" + std::to_string(k) + tag);
            lp.set_row(RF + k, RowSense::Equal, data.p0(t)(k), "fc" + std::to_string(k) + tag);
            lp.matrix(RF + k, P + k) = 1.0;
            lp.matrix.block(RF + k, 0, 1, d) = -data.P(t).row(k);
        }
        for (Index j = 0; j < n; ++j)
            lp.set_col(Z + j, 0.0, pl.lower(j), pl.upper(j), pl.col_label(j) + tag);
        for (Index r = 0; r < m; ++r) {
            const auto sense = pl.senses[static_cast<std::size_t>(r)];
            lp.set_col(PI + r, 0.0, sense == RowSense::Equal ? -kInf : 0.0, kInf, "pi_" + pl.row_label(r) + tag);
            lp.set_row(RP + r, sense, pl.rhs(r), pl.row_label(r) + tag);
            lp.matrix.block(RP + r, Z, 1, n) = pl.matrix.row(r);
            lp.matrix.block(RP + r, P, 1, q) = -data.E().row(r);
        }
        for (Index j = 0; j < n; ++j) {
            lp.set_row(RS + j, RowSense::Equal, data.planning_cost()(j), "stat_" + pl.col_label(j) + tag);
            for (Index r = 0; r < m; ++r) {
                const double s = pl.senses[static_cast<std::size_t>(r)] == RowSense::LessEqual ? -1.0 : 1.0;
                lp.matrix(RS + j, PI + r) = s * pl.matrix(r, j);
            }
        }
        for (Index k = 0; k < nl; ++k) {
            const Index j = lower_cols[static_cast<std::size_t>(k)];
            lp.set_col(NL + k, 0.0, 0.0, kInf, "nul_" + pl.col_label(j) + tag);
            lp.matrix(RS + j, NL + k) = 1.0;
        }
        for (Index k = 0; k < nu; ++k) {
            const Index j = upper_cols[static_cast<std::size_t>(k)];
            lp.set_col(NU + k, 0.0, 0.0, kInf, "nuu_" + pl.col_label(j) + tag);
            lp.matrix(RS + j, NU + k) = -1.0;
        }

        // assessment block with rhs for the realized demand; plan bounds become link rows
        Lp a = at;
        DispatchPlan zero;
        zero.g = zero.r_up = zero.r_dn = Eigen::VectorXd::Zero(ng);
        model.set_realization(a, zero, data.realized(t));
        for (Index j = 0; j < na; ++j) {
            const bool gen = j < ng;
            lp.set_col(A + j, a.objective(j) / static_cast<double>(T), gen ? 0.0 : a.lower(j), gen ? kInf : a.upper(j),
                       "a_" + a.col_label(j) + tag);
        }
        for (Index r = 0; r < ma; ++r) {
            lp.set_row(RA + r, a.senses[static_cast<std::size_t>(r)], a.rhs(r), "a_" + a.row_label(r) + tag);
            lp.matrix.block(RA + r, A, 1, na) = a.matrix.row(r);
        }
        for (Index i = 0; i < ng; ++i) {
            const Index up = RL + 2 * i, dn = up + 1;
            lp.set_row(up, RowSense::LessEqual, 0.0, "link_up_" + std::to_string(i) + tag);
            lp.matrix(up, A + model.acol_g(i)) = 1.0;
            lp.matrix(up, Z + model.col_g(i)) = -1.0;
            lp.matrix(up, Z + model.col_ru(i)) = -1.0;
            lp.set_row(dn, RowSense::GreaterEqual, 0.0, "link_dn_" + std::to_string(i) + tag);
            lp.matrix(dn, A + model.acol_g(i)) = 1.0;
            lp.matrix(dn, Z + model.col_g(i)) = -1.0;
            lp.matrix(dn, Z + model.col_rd(i)) = 1.0;
            lp.objective(Z + model.col_ru(i)) += pu(i) / static_cast<double>(T);
            lp.objective(Z + model.col_rd(i)) += pd(i) / static_cast<double>(T);
        }

        using K = ComplementarityPair::Kind;
        for (Index r = 0; r < m; ++r) {
            if (pl.senses[static_cast<std::size_t>(r)] == RowSense::Equal) continue;
            inst.pairs.push_back({t, K::Row, r, RP + r, -1, PI + r, 0.0, pl.row_label(r) + tag});
        }
        for (Index k = 0; k < nl; ++k) {
            const Index j = lower_cols[static_cast<std::size_t>(k)];
            inst.pairs.push_back({t, K::Lower, j, -1, Z + j, NL + k, pl.lower(j), pl.col_label(j) + "_lo" + tag});
        }
        for (Index k = 0; k < nu; ++k) {
            const Index j = upper_cols[static_cast<std::size_t>(k)];
            inst.pairs.push_back({t, K::Upper, j, -1, Z + j, NU + k, pl.upper(j), pl.col_label(j) + "_up" + tag});
        }
    }
    return inst;
}

Eigen::VectorXd kkt_point(const KktInstance& inst, const BilevelData& data, const Eigen::VectorXd& s) {
    const DispatchModel& model = data.model();
    const Lp& pl = data.planning();
    const Index n = pl.cols(), m = pl.rows(), q = data.forecast_dim();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(inst.lp.cols());
    for (Index i = 0; i < data.dim(); ++i) x(inst.theta_cols[static_cast<std::size_t>(i)]) = s(i);
    lp::SimplexSolver<double> solver;
    for (Index t = 0; t < data.samples(); ++t) {
        const auto u = static_cast<std::size_t>(t);
        const Eigen::VectorXd p = data.forecast(t, s);
        x.segment(inst.p_offset[u], q) = p;
        const auto sol = solver.solve(data.planning_at(p), model.planning_perturbation());
        if (!sol.optimal()) throw InvariantError("planning LP is not optimal at the given theta");
        x.segment(inst.z_offset[u], n) = sol.x;
        for (Index r = 0; r < m; ++r)
            x(inst.pi_offset[u] + r) =
                pl.senses[static_cast<std::size_t>(r)] == RowSense::LessEqual ? -sol.duals(r) : sol.duals(r);
        Index k = 0;
        for (Index j = 0; j < n; ++j)
            if (std::isfinite(pl.lower(j))) x(inst.nu_offset[u] + k++) = std::max(sol.reduced_costs(j), 0.0);
        for (Index j = 0; j < n; ++j)
            if (std::isfinite(pl.upper(j))) x(inst.nu_offset[u] + k++) = std::max(-sol.reduced_costs(j), 0.0);
        DispatchPlan plan;
        plan.g = sol.x.segment(model.col_g(0), model.num_generators());
        plan.r_up = sol.x.segment(model.col_ru(0), model.num_generators());
        plan.r_dn = sol.x.segment(model.col_rd(0), model.num_generators());
        const auto as = lp::solve(model.assessment_lp(plan, data.realized(t)));
        if (!as.optimal()) throw InvariantError("assessment LP is not optimal");
        x.segment(inst.a_offset[u], as.x.size()) = as.x;
    }
    return x;
}

std::string to_string(ExactStatus s) { return s == ExactStatus::Optimal ? "optimal" : "timeout"; }

}  // namespace adl
