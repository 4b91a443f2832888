#pragma once

// Single-bus references for the dispatch LPs, written without the simplex code.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <vector>

namespace oracle {

struct Unit {
    double G, c, rbar_up, rbar_dn, p_up, p_dn;
};

struct SingleBus {
    std::vector<Unit> units;
    double shed, spill;
};

// Vertices of {g + ru <= G, g - rd >= 0, 0 <= ru <= rbu, 0 <= rd <= rbd, g >= 0}.
inline std::vector<Eigen::Vector3d> unit_vertices(const Unit& u) {
    std::vector<Eigen::RowVector3d> a;
    std::vector<double> b;
    auto add = [&](double x, double y, double z, double r) {
        a.emplace_back(x, y, z);
        b.push_back(r);
    };
    // rows as a.x <= b
    add(1, 1, 0, u.G);
    add(-1, 0, 1, 0);
    add(0, -1, 0, 0);
    add(0, 1, 0, u.rbar_up);
    add(0, 0, -1, 0);
    add(0, 0, 1, u.rbar_dn);
    add(-1, 0, 0, 0);
    std::vector<Eigen::Vector3d> out;
    const int n = static_cast<int>(a.size());
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            for (int k = j + 1; k < n; ++k) {
                Eigen::Matrix3d m;
                m << a[i], a[j], a[k];
                Eigen::FullPivLU<Eigen::Matrix3d> lu(m);
                if (!lu.isInvertible()) continue;
                const Eigen::Vector3d x = lu.solve(Eigen::Vector3d(b[i], b[j], b[k]));
                bool ok = true;
                for (int r = 0; r < n && ok; ++r) ok = a[r].dot(x) <= b[r] + 1e-12;
                if (!ok) continue;
                bool dup = false;
                for (const auto& v : out) dup = dup || (v - x).norm() < 1e-12;
                if (!dup) out.push_back(x);
            }
    return out;
}

// Lagrangian dual of the single-bus planning LP in (lambda, mu_up, mu_dn):
// its maximum over the breakpoint arrangement equals the primal optimum.
class PlanningDual {
public:
    explicit PlanningDual(const SingleBus& sb, double mu_floor = -1000.0) : sb_(sb) {
        for (const auto& u : sb.units) verts_.push_back(unit_vertices(u));
        // planes n.(lambda, mu_up, mu_dn) = d
        auto plane = [&](Eigen::Vector3d nrm, double d) {
            const double s = nrm.norm();
            if (s < 1e-12) return;
            nrm /= s;
            d /= s;
            for (std::size_t k = 0; k < normals_.size(); ++k)
                if (((normals_[k] - nrm).norm() < 1e-12 && std::abs(offsets_[k] - d) < 1e-12) ||
                    ((normals_[k] + nrm).norm() < 1e-12 && std::abs(offsets_[k] + d) < 1e-12))
                    return;
            normals_.push_back(nrm);
            offsets_.push_back(d);
        };
        for (std::size_t i = 0; i < sb.units.size(); ++i) {
            const auto& u = sb.units[i];
            const auto& V = verts_[i];
            for (std::size_t p = 0; p < V.size(); ++p)
                for (std::size_t q = p + 1; q < V.size(); ++q) {
                    // (c - l) dg + (pu - mu) dru + (pd - md) drd = 0
                    const Eigen::Vector3d dv = V[p] - V[q];
                    plane(Eigen::Vector3d(dv(0), dv(1), dv(2)), u.c * dv(0) + u.p_up * dv(1) + u.p_dn * dv(2));
                }
        }
        plane(Eigen::Vector3d(1, 0, 0), sb.shed);
        plane(Eigen::Vector3d(1, 0, 0), -sb.spill);
        plane(Eigen::Vector3d(0, 1, 0), sb.shed);
        plane(Eigen::Vector3d(0, 0, 1), sb.shed);
        plane(Eigen::Vector3d(0, 1, 0), mu_floor);
        plane(Eigen::Vector3d(0, 0, 1), mu_floor);
        lo_ = Eigen::Vector3d(-sb.spill, mu_floor, mu_floor);
        hi_ = Eigen::Vector3d(sb.shed, sb.shed, sb.shed);
    }

    double value(const Eigen::Vector3d& y, double D, double Ru, double Rd) const {
        double q = y(0) * D + y(1) * Ru + y(2) * Rd;
        for (std::size_t i = 0; i < verts_.size(); ++i) {
            const auto& u = sb_.units[i];
            double best = INFINITY;
            for (const auto& v : verts_[i])
                best = std::min(best, (u.c - y(0)) * v(0) + (u.p_up - y(1)) * v(1) + (u.p_dn - y(2)) * v(2));
            q += best;
        }
        return q;  // slack terms vanish inside the box
    }

    double optimum(double D, double Ru, double Rd) const {
        double best = -INFINITY;
        const std::size_t n = normals_.size();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                for (std::size_t k = j + 1; k < n; ++k) {
                    Eigen::Matrix3d m;
                    m << normals_[i].transpose(), normals_[j].transpose(), normals_[k].transpose();
                    Eigen::FullPivLU<Eigen::Matrix3d> lu(m);
                    if (!lu.isInvertible()) continue;
                    const Eigen::Vector3d y = lu.solve(Eigen::Vector3d(offsets_[i], offsets_[j], offsets_[k]));
                    if (((y - lo_).array() < -1e-9).any() || ((y - hi_).array() > 1e-9).any()) continue;
                    best = std::max(best, value(y, D, Ru, Rd));
                }
        return best;
    }

private:
    SingleBus sb_;
    std::vector<std::vector<Eigen::Vector3d>> verts_;
    std::vector<Eigen::Vector3d> normals_;
    std::vector<double> offsets_;
    Eigen::Vector3d lo_, hi_;
};

// Merit-order redispatch within [lo, hi] against realized demand D.
inline double assessment_cost(const SingleBus& sb, const std::vector<double>& lo, const std::vector<double>& hi,
                              double D, double reserve_cost) {
    const std::size_t n = sb.units.size();
    std::vector<double> g = lo;
    double total = std::accumulate(lo.begin(), lo.end(), 0.0);
    double cost = reserve_cost;
    if (total >= D) {
        cost += sb.spill * (total - D);
    } else {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return sb.units[a].c < sb.units[b].c; });
        double need = D - total;
        for (auto i : order) {
            const double add = std::min(need, hi[i] - lo[i]);
            g[i] += add;
            need -= add;
        }
        cost += sb.shed * need;
    }
    for (std::size_t i = 0; i < n; ++i) cost += sb.units[i].c * g[i];
    return cost;
}

}  // namespace oracle
