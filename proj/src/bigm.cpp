#include <cmath>

#include "adlearn/errors.hpp"
#include "adlearn/exact_bilevel.hpp"
#include "adlearn/lp/mps.hpp"

namespace adl {

using lp::RowSense;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Interval {
    double lo = 0.0, hi = 0.0;
};

Interval dot_range(const Eigen::RowVectorXd& a, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    Interval r;
    for (Index j = 0; j < a.size(); ++j) {
        if (a(j) == 0.0) continue;
        const double x1 = a(j) > 0 ? lo(j) : hi(j), x2 = a(j) > 0 ? hi(j) : lo(j);
        r.lo += a(j) * x1;
        r.hi += a(j) * x2;
    }
    return r;
}

// Forecast bounds over the theta box, reserves clipped at zero, as a union over samples.
void forecast_box(const BilevelData& data, Eigen::VectorXd& lo, Eigen::VectorXd& hi) {
    const Index q = data.forecast_dim(), nb = data.model().num_buses();
    lo = Eigen::VectorXd::Constant(q, kInf);
    hi = Eigen::VectorXd::Constant(q, -kInf);
    for (Index t = 0; t < data.samples(); ++t)
        for (Index k = 0; k < q; ++k) {
            const Interval r = dot_range(data.P(t).row(k), data.box().lo, data.box().hi);
            lo(k) = std::min(lo(k), r.lo + data.p0(t)(k));
            hi(k) = std::max(hi(k), r.hi + data.p0(t)(k));
        }
    for (Index k = nb; k < q; ++k) {
        lo(k) = std::max(lo(k), 0.0);
        hi(k) = std::max(hi(k), 0.0);
    }
}

// Tightens planning column bounds by propagating the rows over the forecast box.
void propagate(const Lp& pl, const Eigen::MatrixXd& E, const Eigen::VectorXd& plo, const Eigen::VectorXd& phi,
               Eigen::VectorXd& zlo, Eigen::VectorXd& zhi) {
    const Index n = pl.cols();
    for (int pass = 0; pass < 20; ++pass) {
        bool changed = false;
        for (Index r = 0; r < pl.rows(); ++r) {
            const Interval b = dot_range(E.row(r), plo, phi);
            const double rlo = pl.rhs(r) + b.lo, rhi = pl.rhs(r) + b.hi;
            const auto sense = pl.senses[static_cast<std::size_t>(r)];
            for (Index j = 0; j < n; ++j) {
                const double a = pl.matrix(r, j);
                if (a == 0.0) continue;
                Eigen::RowVectorXd rest = pl.matrix.row(r);
                rest(j) = 0.0;
                const Interval o = dot_range(rest, zlo, zhi);
                // a z_j <= rhi - o.lo for <= and =, a z_j >= rlo - o.hi for >= and =
                auto apply = [&](double bound, bool upper_side) {
                    if (!std::isfinite(bound)) return;
                    const double v = bound / a;
                    const bool upper = upper_side == (a > 0);
                    if (upper && v < zhi(j) - 1e-9) {
                        zhi(j) = std::max(v, zlo(j));
                        changed = true;
                    } else if (!upper && v > zlo(j) + 1e-9) {
                        zlo(j) = std::min(v, zhi(j));
                        changed = true;
                    }
                };
                if (sense != RowSense::GreaterEqual) apply(rhi - o.lo, true);
                if (sense != RowSense::LessEqual) apply(rlo - o.hi, false);
            }
        }
        if (!changed) break;
    }
}

double affine_max(const CriticalRegion& R, const Eigen::RowVectorXd& a, double c, const Eigen::VectorXd& plo,
                  const Eigen::VectorXd& phi) {
    const Index q = plo.size();
    Lp lp(R.G.rows(), q);
    for (Index k = 0; k < q; ++k) lp.set_col(k, -a(k), plo(k), phi(k));
    lp.matrix = R.G;
    lp.rhs = R.h;
    const auto sol = lp::solve(lp);
    if (sol.status == lp::Status::Unbounded) return kInf;
    if (!sol.optimal()) return -kInf;
    return -sol.objective + c;
}

}  // namespace

BigMValues derive_bigm(const KktInstance& inst, const BilevelData& data, BigMPolicy policy,
                       std::optional<double> dual_cap) {
    using K = ComplementarityPair::Kind;
    const Lp& pl = data.planning();
    const std::size_t np = inst.pairs.size();
    BigMValues out;
    out.slack = Eigen::VectorXd::Constant(static_cast<Index>(np), kInf);
    out.dual = Eigen::VectorXd::Constant(static_cast<Index>(np), dual_cap ? *dual_cap : kInf);

    Eigen::VectorXd plo, phi;
    forecast_box(data, plo, phi);

    if (policy == BigMPolicy::FromBounds) {
        Eigen::VectorXd zlo = pl.lower, zhi = pl.upper;
        propagate(pl, data.E(), plo, phi, zlo, zhi);
        for (std::size_t k = 0; k < np; ++k) {
            const auto& pr = inst.pairs[k];
            double m = kInf;
            if (pr.kind == K::Row) {
                const Interval act = dot_range(pl.matrix.row(pr.index), zlo, zhi);
                const Interval ep = dot_range(data.E().row(pr.index), plo, phi);
                if (pl.senses[static_cast<std::size_t>(pr.index)] == RowSense::LessEqual)
                    m = pl.rhs(pr.index) + ep.hi - act.lo;
                else
                    m = act.hi - pl.rhs(pr.index) - ep.lo;
            } else if (pr.kind == K::Lower) {
                m = zhi(pr.index) - pr.bound;
            } else {
                m = pr.bound - zlo(pr.index);
            }
            out.slack(static_cast<Index>(k)) = std::max(m, 0.0);
        }
        return out;
    }

    const auto regions = enumerate_regions(data, plo, phi);
    const Index n = pl.cols();
    std::vector<Index> lower_pos(static_cast<std::size_t>(n), -1), upper_pos(static_cast<std::size_t>(n), -1);
    for (std::size_t k = 0; k < np; ++k) {
        out.slack(static_cast<Index>(k)) = 0.0;
        if (!dual_cap) out.dual(static_cast<Index>(k)) = 0.0;
    }
    for (const auto& R : regions) {
        for (std::size_t k = 0; k < np; ++k) {
            const auto& pr = inst.pairs[k];
            Eigen::RowVectorXd a;
            double c = 0.0, dual = 0.0;
            if (pr.kind == K::Row) {
                const Index r = pr.index;
                const double sgn = pl.senses[static_cast<std::size_t>(r)] == RowSense::LessEqual ? -1.0 : 1.0;
                a = sgn * (pl.matrix.row(r) * R.Z - data.E().row(r));
                c = sgn * (pl.matrix.row(r).dot(R.z0) - pl.rhs(r));
                dual = sgn < 0 ? -R.duals(r) : R.duals(r);
            } else if (pr.kind == K::Lower) {
                a = R.Z.row(pr.index);
                c = R.z0(pr.index) - pr.bound;
                dual = R.reduced_costs(pr.index);
            } else {
                a = -R.Z.row(pr.index);
                c = pr.bound - R.z0(pr.index);
                dual = -R.reduced_costs(pr.index);
            }
            const Index i = static_cast<Index>(k);
            out.slack(i) = std::max(out.slack(i), affine_max(R, a, c, plo, phi));
            if (!dual_cap) out.dual(i) = std::max(out.dual(i), dual);
        }
    }
    for (Index i = 0; i < out.slack.size(); ++i) {
        out.slack(i) = 1.1 * out.slack(i) + 1e-6;
        if (!dual_cap) out.dual(i) = 1.1 * out.dual(i) + 1e-6;
    }
    return out;
}

Lp bigm_milp(const KktInstance& inst, const BigMValues& m, std::vector<std::uint8_t>* binary) {
    using K = ComplementarityPair::Kind;
    const Lp& base = inst.lp;
    const Index np = static_cast<Index>(inst.pairs.size());
    if (m.slack.size() != np || m.dual.size() != np)
        throw DimensionError("big-M vectors have " + std::to_string(m.slack.size()) + " entries for " +
                             std::to_string(np) + " pairs");
    const Index n0 = base.cols(), r0 = base.rows();
    Lp lp(r0 + 2 * np, n0 + np);
    lp.matrix.topLeftCorner(r0, n0) = base.matrix;
    lp.rhs.head(r0) = base.rhs;
    lp.objective.head(n0) = base.objective;
    lp.lower.head(n0) = base.lower;
    lp.upper.head(n0) = base.upper;
    lp.objective_offset = base.objective_offset;
    for (Index r = 0; r < r0; ++r) lp.set_row(r, base.senses[static_cast<std::size_t>(r)], base.rhs(r), base.row_label(r));
    for (Index j = 0; j < n0; ++j) lp.col_names[static_cast<std::size_t>(j)] = base.col_label(j);

    for (Index k = 0; k < np; ++k) {
        const auto& pr = inst.pairs[static_cast<std::size_t>(k)];
        const double ms = m.slack(k), md = m.dual(k);
        if (!std::isfinite(ms) || !std::isfinite(md))
            throw BigMError("no finite big-M for pair " + pr.name + " (" + (std::isfinite(ms) ? "dual" : "slack") +
                            " is unbounded); tighten the variable bounds or use the region policy");
        const Index b = n0 + k, rs = r0 + 2 * k, rd = rs + 1;
        lp.set_col(b, 0.0, 0.0, 1.0, "b_" + pr.name);
        lp.set_row(rs, RowSense::LessEqual, 0.0, "ms_" + pr.name);
        lp.set_row(rd, RowSense::LessEqual, 0.0, "md_" + pr.name);
        lp.matrix(rs, b) = ms;
        switch (pr.kind) {
            case K::Row: {
                const bool le = base.senses[static_cast<std::size_t>(pr.row)] == RowSense::LessEqual;
                const double sgn = le ? -1.0 : 1.0;
                lp.matrix.block(rs, 0, 1, n0) = sgn * base.matrix.row(pr.row);
                lp.rhs(rs) = ms + sgn * base.rhs(pr.row);
                break;
            }
            case K::Lower:
                lp.matrix(rs, pr.col) = 1.0;
                lp.rhs(rs) = ms + pr.bound;
                break;
            case K::Upper:
                lp.matrix(rs, pr.col) = -1.0;
                lp.rhs(rs) = ms - pr.bound;
                break;
        }
        lp.matrix(rd, pr.dual) = 1.0;
        lp.matrix(rd, b) = -md;
    }
    if (binary != nullptr) {
        binary->assign(static_cast<std::size_t>(n0 + np), 0);
        for (Index k = 0; k < np; ++k) (*binary)[static_cast<std::size_t>(n0 + k)] = 1;
    }
    return lp;
}

void export_bigm_mps(const KktInstance& inst, const BigMValues& m, const std::string& path) {
    std::vector<std::uint8_t> binary;
    const Lp lp = bigm_milp(inst, m, &binary);
    lp::write_mps_file(path, lp, "ADLEXACT", binary);
}

}  // namespace adl
