#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <queue>

#include "adlearn/errors.hpp"
#include "adlearn/exact_bilevel.hpp"

namespace adl {

using lp::RowSense;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kComplementarityTol = 1e-7;

struct QueueItem {
    double key;
    std::size_t id;
    bool operator>(const QueueItem& o) const { return key > o.key || (key == o.key && id > o.id); }
};
using MinQueue = std::priority_queue<QueueItem, std::vector<QueueItem>, std::greater<>>;

class Stopwatch {
public:
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

private:
    std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

bool pruned(double bound, double incumbent, double gap_tol) {
    return bound >= incumbent - gap_tol * std::abs(incumbent);
}

double relative_gap(double ub, double lb) {
    if (!std::isfinite(ub)) return kInf;
    return std::max(0.0, (ub - lb) / std::max(std::abs(ub), 1e-12));
}

// Incumbent bookkeeping shared by both searches: candidates are scored through
// the same forecast -> plan -> assessment pipeline the heuristic trainer uses.
class Incumbent {
public:
    explicit Incumbent(const BilevelData& data)
        : data_(data), eval_(data.model(), data.spec(), data.dataset()) {}

    double offer(const Eigen::VectorXd& s) {
        const double c = eval_(data_.full_theta(s));
        if (c < value) {
            value = c;
            best = s;
        }
        return c;
    }
    const std::vector<double>& sample_costs() const { return eval_.sample_costs(); }

    double value = kInf;
    Eigen::VectorXd best;

private:
    const BilevelData& data_;
    CostEvaluator eval_;
};

// Projects a trainable vector into the box and onto nonnegative reserve forecasts.
Eigen::VectorXd admissible(const BilevelData& data, Eigen::VectorXd s) {
    s = s.cwiseMax(data.box().lo).cwiseMin(data.box().hi);
    const auto& A = data.base_rows();
    const auto& b = data.base_rhs();
    for (int pass = 0; pass < 50; ++pass) {
        bool ok = true;
        for (Index r = 0; r < A.rows(); ++r) {
            const double v = A.row(r).dot(s) - b(r);
            if (v <= 1e-12) continue;
            ok = false;
            s -= (v / A.row(r).squaredNorm()) * A.row(r).transpose();
        }
        s = s.cwiseMax(data.box().lo).cwiseMin(data.box().hi);
        if (ok) break;
    }
    return s;
}

void seed(Incumbent& inc, const BilevelData& data, const ExactOptions& opt) {
    inc.offer(admissible(data, data.trainable_part(data.full_theta(Eigen::VectorXd::Zero(data.dim())))));
    for (const auto& theta : opt.starts) inc.offer(admissible(data, data.trainable_part(theta)));
}

void finish(ExactResult& r, const BilevelData& data, const Incumbent& inc, double open_bound, const Stopwatch& sw) {
    r.objective = inc.value;
    r.theta = data.full_theta(inc.best);
    r.bound = std::min(open_bound, inc.value);
    r.gap = relative_gap(r.objective, r.bound);
    r.seconds = sw.seconds();
}

}  // namespace

ExactResult solve_bnb(const KktInstance& inst, const BilevelData& data, const ExactOptions& opt) {
    Stopwatch sw;
    ExactResult res;
    Incumbent inc(data);
    seed(inc, data, opt);

    std::vector<BnbNode> store;
    BnbNode root;
    root.state.assign(inst.pairs.size(), BnbNode::State::Free);
    store.push_back(root);
    MinQueue queue;
    queue.push({-kInf, 0});
    double open_bound = kInf;

    while (!queue.empty()) {
        const QueueItem top = queue.top();
        if (pruned(top.key, inc.value, opt.gap_tol)) {
            open_bound = top.key;
            break;
        }
        if (sw.seconds() > opt.time_limit || res.nodes >= opt.max_nodes) {
            res.status = ExactStatus::Timeout;
            open_bound = top.key;
            break;
        }
        queue.pop();
        BnbNode node = std::move(store[top.id]);
        ++res.nodes;

        Lp lp = inst.lp;
        for (std::size_t k = 0; k < inst.pairs.size(); ++k) {
            const auto& pr = inst.pairs[k];
            switch (node.state[k]) {
                case BnbNode::State::Free: break;
                case BnbNode::State::DualZero: lp.upper(pr.dual) = 0.0; break;
                case BnbNode::State::SlackZero:
                    if (pr.kind == ComplementarityPair::Kind::Row) {
                        lp.senses[static_cast<std::size_t>(pr.row)] = RowSense::Equal;
                    } else {
                        lp.lower(pr.col) = lp.upper(pr.col) = pr.bound;
                    }
                    break;
            }
        }
        const auto sol = lp::solve(lp);
        if (!sol.optimal()) continue;
        if (opt.record_bounds) res.bounds.emplace_back(node.bound, sol.objective);
        const double bound = std::max(sol.objective, node.bound);

        Eigen::VectorXd s(data.dim());
        for (Index i = 0; i < data.dim(); ++i) s(i) = sol.x(inst.theta_cols[static_cast<std::size_t>(i)]);
        inc.offer(s);
        if (pruned(bound, inc.value, opt.gap_tol)) continue;

        std::size_t pick = inst.pairs.size();
        double worst = kComplementarityTol;
        for (std::size_t k = 0; k < inst.pairs.size(); ++k) {
            if (node.state[k] != BnbNode::State::Free) continue;
            const double v = std::abs(inst.slack(inst.pairs[k], sol.x) * sol.x(inst.pairs[k].dual));
            if (v > worst) {
                worst = v;
                pick = k;
            }
        }
        if (pick == inst.pairs.size()) continue;  // complementary: the relaxation point is bilevel feasible

        for (auto st : {BnbNode::State::SlackZero, BnbNode::State::DualZero}) {
            BnbNode child;
            child.state = node.state;
            child.state[pick] = st;
            child.bound = bound;
            child.depth = node.depth + 1;
            store.push_back(std::move(child));
            queue.push({bound, store.size() - 1});
        }
    }
    if (queue.empty()) open_bound = kInf;
    finish(res, data, inc, open_bound, sw);
    return res;
}

namespace {

// Polytope {lo <= s <= hi, A s <= b} with the candidate planning regions of each sample.
struct SearchNode {
    Eigen::VectorXd lo, hi;
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    std::vector<std::vector<int>> regions;
    double bound = -kInf;
    int depth = 0;
};

// Region data in forecast space: plan z = Z p + z0 on {G p <= h}.
struct RegionModel {
    const CriticalRegion* region = nullptr;
    Eigen::VectorXd p_lo, p_hi;
    Eigen::RowVectorXd reserve_cost;
    double reserve_cost0 = 0.0;
    Eigen::MatrixXd up, dn;  // g + r_up and g - r_dn as affine maps of p
    Eigen::VectorXd up0, dn0;
};

struct SampleBound {
    double value = kInf;
    std::vector<int> feasible;
};

void shrink_rows(Lp& lp, Index rows) {
    lp.matrix.conservativeResize(rows, Eigen::NoChange);
    lp.rhs.conservativeResize(rows);
    lp.senses.resize(static_cast<std::size_t>(rows));
    lp.row_names.resize(static_cast<std::size_t>(rows));
}

class RegionSearch {
public:
    RegionSearch(const BilevelData& data, const ExactOptions& opt) : data_(data), opt_(opt), inc_(data) {
        const DispatchModel& m = data.model();
        ng_ = m.num_generators();
        T_ = data.samples();
        d_ = data.dim();
        q_ = data.forecast_dim();
        for (Index t = 0; t < T_; ++t) {
            Lp a = m.assessment_template();
            DispatchPlan zero;
            zero.g = zero.r_up = zero.r_dn = Eigen::VectorXd::Zero(ng_);
            m.set_realization(a, zero, data.realized(t));
            assess_.push_back(std::move(a));
        }
        scale_ = Eigen::VectorXd::Zero(d_);
        for (Index t = 0; t < T_; ++t) scale_ = scale_.cwiseMax(data.P(t).cwiseAbs().colwise().maxCoeff().transpose());
        scale_ = scale_.cwiseMax(1e-12);
        build_regions();
    }

    ExactResult run();

private:
    const BilevelData& data_;
    const ExactOptions& opt_;
    Incumbent inc_;
    std::vector<Lp> assess_;
    std::vector<CriticalRegion> regions_;
    std::vector<RegionModel> models_;
    std::map<std::string, int> index_;
    Eigen::VectorXd scale_;
    Index ng_ = 0, T_ = 0, d_ = 0, q_ = 0;

    void build_regions();
    int region_of(Index t, const Eigen::VectorXd& s) const;
    std::pair<Eigen::VectorXd, Eigen::VectorXd> image(Index t, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) const;
    Index add_node_rows(Lp& lp, const SearchNode& node) const;
    Index add_sample_block(Lp& lp, Index row, Index col, Index t, int k, const SearchNode& node) const;
    SampleBound sample_bound(Index t, const SearchNode& node) const;
    std::optional<std::pair<double, Eigen::VectorXd>> coupled(const SearchNode& node,
                                                              const std::vector<int>& single) const;
    bool tighten(SearchNode& node) const;
    std::pair<Eigen::RowVectorXd, double> facet_cut(Index t, int k, const SearchNode& node, const Eigen::VectorXd& s) const;
};

std::string region_key(const std::vector<lp::VarStatus>& cols, const std::vector<lp::VarStatus>& rows) {
    std::string k;
    for (auto v : cols) k.push_back(static_cast<char>('a' + static_cast<int>(v)));
    k.push_back('|');
    for (auto v : rows) k.push_back(static_cast<char>('a' + static_cast<int>(v)));
    return k;
}

void RegionSearch::build_regions() {
    const DispatchModel& m = data_.model();
    Eigen::VectorXd lo = Eigen::VectorXd::Constant(q_, kInf), hi = Eigen::VectorXd::Constant(q_, -kInf);
    for (Index t = 0; t < T_; ++t) {
        const auto [a, b] = image(t, data_.box().lo, data_.box().hi);
        lo = lo.cwiseMin(a);
        hi = hi.cwiseMax(b);
    }
    const Index nb = m.num_buses();
    lo.tail(q_ - nb) = lo.tail(q_ - nb).cwiseMax(0.0);
    hi.tail(q_ - nb) = hi.tail(q_ - nb).cwiseMax(0.0);
    const Eigen::VectorXd pad = 1e-6 * (Eigen::VectorXd::Ones(q_) + lo.cwiseAbs().cwiseMax(hi.cwiseAbs()));
    lo -= pad;
    hi += pad;
    regions_ = enumerate_regions(data_, lo, hi);

    const Eigen::VectorXd pu = m.system().p_up(), pd = m.system().p_dn();
    lp::SimplexSolver<double> solver;
    for (std::size_t k = 0; k < regions_.size(); ++k) {
        const auto& R = regions_[k];
        index_.emplace(region_key(R.col_status, R.row_status), static_cast<int>(k));
        RegionModel rm;
        rm.region = &R;
        rm.reserve_cost = Eigen::RowVectorXd::Zero(q_);
        rm.up.resize(ng_, q_);
        rm.dn.resize(ng_, q_);
        rm.up0.resize(ng_);
        rm.dn0.resize(ng_);
        for (Index i = 0; i < ng_; ++i) {
            const Index g = m.col_g(i), ru = m.col_ru(i), rd = m.col_rd(i);
            rm.reserve_cost += pu(i) * R.Z.row(ru) + pd(i) * R.Z.row(rd);
            rm.reserve_cost0 += pu(i) * R.z0(ru) + pd(i) * R.z0(rd);
            rm.up.row(i) = R.Z.row(g) + R.Z.row(ru);
            rm.up0(i) = R.z0(g) + R.z0(ru);
            rm.dn.row(i) = R.Z.row(g) - R.Z.row(rd);
            rm.dn0(i) = R.z0(g) - R.z0(rd);
        }
        // bounding box of the region inside the forecast box
        rm.p_lo = lo;
        rm.p_hi = hi;
        Lp box(R.G.rows(), q_);
        for (Index j = 0; j < q_; ++j) box.set_col(j, 0.0, lo(j), hi(j));
        box.matrix = R.G;
        box.rhs = R.h;
        for (Index j = 0; j < q_; ++j) {
            for (double dir : {1.0, -1.0}) {
                box.objective.setZero();
                box.objective(j) = dir;
                const auto sol = solver.solve(box);
                if (!sol.optimal()) continue;
                if (dir > 0) rm.p_lo(j) = sol.x(j);
                else rm.p_hi(j) = sol.x(j);
            }
        }
        models_.push_back(std::move(rm));
    }
}

int RegionSearch::region_of(Index t, const Eigen::VectorXd& s) const {
    Eigen::VectorXd p = data_.forecast(t, s);
    const Index nb = data_.model().num_buses();
    p.tail(q_ - nb) = p.tail(q_ - nb).cwiseMax(0.0);
    lp::SimplexSolver<double> solver;
    const auto sol = solver.solve(data_.planning_at(p), data_.model().planning_perturbation());
    if (!sol.optimal()) return -1;
    const auto it = index_.find(region_key(sol.col_status, sol.row_status));
    return it == index_.end() ? -1 : it->second;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> RegionSearch::image(Index t, const Eigen::VectorXd& lo,
                                                                 const Eigen::VectorXd& hi) const {
    const Eigen::MatrixXd& P = data_.P(t);
    const Eigen::VectorXd c = 0.5 * (lo + hi), w = 0.5 * (hi - lo);
    const Eigen::VectorXd mid = P * c + data_.p0(t), rad = P.cwiseAbs() * w;
    return {mid - rad, mid + rad};
}

// Theta columns with the node box, then the base rows and the node cuts.
Index RegionSearch::add_node_rows(Lp& lp, const SearchNode& node) const {
    const auto& BA = data_.base_rows();
    for (Index i = 0; i < d_; ++i) lp.set_col(i, 0.0, node.lo(i), node.hi(i));
    Index row = 0;
    for (Index r = 0; r < BA.rows(); ++r, ++row) {
        lp.matrix.block(row, 0, 1, d_) = BA.row(r);
        lp.set_row(row, RowSense::LessEqual, data_.base_rhs()(r));
    }
    for (Index r = 0; r < node.A.rows(); ++r, ++row) {
        lp.matrix.block(row, 0, 1, d_) = node.A.row(r);
        lp.set_row(row, RowSense::LessEqual, node.b(r));
    }
    return row;
}

// Appends the exact cost block of sample t under region k: assessment columns
// and rows, link rows to the affine plan, the region rows not implied by the
// node box, and the reserve cost on theta.
Index RegionSearch::add_sample_block(Lp& lp, Index row, Index col, Index t, int k, const SearchNode& node) const {
    const DispatchModel& m = data_.model();
    const RegionModel& rm = models_[static_cast<std::size_t>(k)];
    const Lp& a = assess_[static_cast<std::size_t>(t)];
    const Eigen::MatrixXd& P = data_.P(t);
    const Eigen::VectorXd& p0 = data_.p0(t);
    const double w = 1.0 / static_cast<double>(T_);
    const Index na = a.cols();
    for (Index j = 0; j < na; ++j)
        lp.set_col(col + j, w * a.objective(j), j < ng_ ? 0.0 : a.lower(j), j < ng_ ? kInf : a.upper(j));
    for (Index r = 0; r < a.rows(); ++r, ++row) {
        lp.set_row(row, a.senses[static_cast<std::size_t>(r)], a.rhs(r));
        lp.matrix.block(row, col, 1, na) = a.matrix.row(r);
    }
    for (Index i = 0; i < ng_; ++i) {
        lp.set_row(row, RowSense::LessEqual, rm.up.row(i).dot(p0) + rm.up0(i));
        lp.matrix(row, col + m.acol_g(i)) = 1.0;
        lp.matrix.block(row++, 0, 1, d_) = -rm.up.row(i) * P;
        lp.set_row(row, RowSense::GreaterEqual, rm.dn.row(i).dot(p0) + rm.dn0(i));
        lp.matrix(row, col + m.acol_g(i)) = 1.0;
        lp.matrix.block(row++, 0, 1, d_) = -rm.dn.row(i) * P;
    }
    lp.objective.head(d_) += w * (rm.reserve_cost * P).transpose();
    lp.objective_offset += w * (rm.reserve_cost.dot(p0) + rm.reserve_cost0);
    const Eigen::MatrixXd G = rm.region->G * P;
    const Eigen::VectorXd h = rm.region->h - rm.region->G * p0;
    const Eigen::VectorXd c = 0.5 * (node.lo + node.hi), rad = 0.5 * (node.hi - node.lo);
    for (Index r = 0; r < G.rows(); ++r) {
        if (G.row(r).dot(c) + G.row(r).cwiseAbs().dot(rad) <= h(r)) continue;
        lp.set_row(row, RowSense::LessEqual, h(r));
        lp.matrix.block(row++, 0, 1, d_) = G.row(r);
    }
    return row;
}

SampleBound RegionSearch::sample_bound(Index t, const SearchNode& node) const {
    const auto [plo, phi] = image(t, node.lo, node.hi);
    const Lp& a = assess_[static_cast<std::size_t>(t)];
    SampleBound out;
    for (int k : node.regions[static_cast<std::size_t>(t)]) {
        const RegionModel& rm = models_[static_cast<std::size_t>(k)];
        if ((rm.p_lo.array() > phi.array() + 1e-9).any() || (rm.p_hi.array() < plo.array() - 1e-9).any()) continue;
        Lp lp(data_.base_rows().rows() + node.A.rows() + a.rows() + 2 * ng_ + rm.region->G.rows(), d_ + a.cols());
        const Index row = add_node_rows(lp, node);
        shrink_rows(lp, add_sample_block(lp, row, d_, t, k, node));
        const auto sol = lp::solve(lp);
        if (!sol.optimal()) continue;
        out.feasible.push_back(k);
        out.value = std::min(out.value, sol.objective * static_cast<double>(T_));
    }
    return out;
}

// Minimum over the node of the exact cost of the samples confined to one region.
std::optional<std::pair<double, Eigen::VectorXd>> RegionSearch::coupled(const SearchNode& node,
                                                                         const std::vector<int>& single) const {
    Index rows = data_.base_rows().rows() + node.A.rows(), cols = d_;
    for (Index t = 0; t < T_; ++t) {
        const auto u = static_cast<std::size_t>(t);
        const int k = single[u];
        if (k < 0) continue;
        rows += assess_[u].rows() + 2 * ng_ + models_[static_cast<std::size_t>(k)].region->G.rows();
        cols += assess_[u].cols();
    }
    Lp lp(rows, cols);
    Index row = add_node_rows(lp, node), col = d_;
    for (Index t = 0; t < T_; ++t) {
        const auto u = static_cast<std::size_t>(t);
        if (single[u] < 0) continue;
        row = add_sample_block(lp, row, col, t, single[u], node);
        col += assess_[u].cols();
    }
    shrink_rows(lp, row);
    const auto sol = lp::solve(lp);
    if (!sol.optimal()) return std::nullopt;
    return std::make_pair(sol.objective, Eigen::VectorXd(sol.x.head(d_)));
}

// Shrinks the box to the bounding box of the node polytope; false when empty.
bool RegionSearch::tighten(SearchNode& node) const {
    Lp lp(data_.base_rows().rows() + node.A.rows(), d_);
    add_node_rows(lp, node);
    lp::SimplexSolver<double> solver;
    for (Index i = 0; i < d_; ++i) {
        for (double dir : {1.0, -1.0}) {
            lp.objective.setZero();
            lp.objective(i) = dir;
            const auto sol = solver.solve(lp);
            if (!sol.optimal()) return false;
            if (dir > 0) node.lo(i) = std::max(node.lo(i), sol.x(i));
            else node.hi(i) = std::min(node.hi(i), sol.x(i));
        }
        if (node.lo(i) > node.hi(i)) node.hi(i) = node.lo(i);
    }
    return true;
}

// Facet of region k (for sample t) that splits the node polytope, nearest to s first.
std::pair<Eigen::RowVectorXd, double> RegionSearch::facet_cut(Index t, int k, const SearchNode& node,
                                                              const Eigen::VectorXd& s) const {
    const auto& R = regions_[static_cast<std::size_t>(k)];
    const Eigen::MatrixXd G = R.G * data_.P(t);
    const Eigen::VectorXd h = R.h - R.G * data_.p0(t);
    const Eigen::VectorXd c = 0.5 * (node.lo + node.hi), rad = 0.5 * (node.hi - node.lo);
    std::vector<std::pair<double, Index>> order;
    for (Index r = 0; r < G.rows(); ++r) {
        const double n = G.row(r).norm();
        if (n <= 1e-12) continue;
        const double hi = G.row(r).dot(c) + G.row(r).cwiseAbs().dot(rad), lo = G.row(r).dot(c) - G.row(r).cwiseAbs().dot(rad);
        if (hi <= h(r) + 1e-9 * n || lo >= h(r) - 1e-9 * n) continue;
        order.emplace_back(std::abs(h(r) - G.row(r).dot(s)) / n, r);
    }
    std::sort(order.begin(), order.end());
    Lp lp(data_.base_rows().rows() + node.A.rows(), d_);
    add_node_rows(lp, node);
    lp::SimplexSolver<double> solver;
    for (std::size_t i = 0; i < order.size() && i < 6; ++i) {
        const Index r = order[i].second;
        const double tol = 1e-7 * (1.0 + std::abs(h(r)));
        lp.objective = G.row(r).transpose();
        const auto lo = solver.solve(lp);
        if (!lo.optimal() || lo.objective >= h(r) - tol) continue;
        lp.objective = -G.row(r).transpose();
        const auto hi = solver.solve(lp);
        if (!hi.optimal() || -hi.objective <= h(r) + tol) continue;
        return {G.row(r), h(r)};
    }
    return {Eigen::RowVectorXd(), 0.0};
}

ExactResult RegionSearch::run() {
    Stopwatch sw;
    ExactResult res;
    seed(inc_, data_, opt_);

    std::vector<SearchNode> store;
    SearchNode root;
    root.lo = data_.box().lo;
    root.hi = data_.box().hi;
    root.A.resize(0, d_);
    root.b.resize(0);
    std::vector<int> all(regions_.size());
    for (std::size_t k = 0; k < all.size(); ++k) all[k] = static_cast<int>(k);
    root.regions.assign(static_cast<std::size_t>(T_), all);
    if (!tighten(root)) throw ConfigError("theta box admits no nonnegative reserve forecast");
    store.push_back(std::move(root));
    MinQueue queue;
    queue.push({-kInf, 0});
    double open_bound = kInf, stuck_bound = kInf;
    const double invT = 1.0 / static_cast<double>(T_);

    while (!queue.empty()) {
        const QueueItem top = queue.top();
        if (pruned(top.key, inc_.value, opt_.gap_tol)) {
            open_bound = top.key;
            break;
        }
        if (sw.seconds() > opt_.time_limit || res.nodes >= opt_.max_nodes) {
            res.status = ExactStatus::Timeout;
            open_bound = top.key;
            break;
        }
        queue.pop();
        SearchNode node = std::move(store[top.id]);
        ++res.nodes;

        // per-sample minima over the node; samples already confined to one region are skipped
        std::vector<int> single(static_cast<std::size_t>(T_), -1);
        std::vector<double> lb(static_cast<std::size_t>(T_), 0.0);
        double loose = 0.0;
        bool empty = false;
        for (Index t = 0; t < T_; ++t) {
            const auto u = static_cast<std::size_t>(t);
            if (node.regions[u].size() == 1) {
                single[u] = node.regions[u].front();
                continue;
            }
            SampleBound sb = sample_bound(t, node);
            if (sb.feasible.empty()) {
                empty = true;
                break;
            }
            lb[u] = sb.value;
            node.regions[u] = std::move(sb.feasible);
            if (node.regions[u].size() == 1) single[u] = node.regions[u].front();
            else loose += lb[u];
        }
        if (empty) continue;

        auto cp = coupled(node, single);
        if (!cp) continue;
        double bound = std::max(cp->first + loose * invT, node.bound);
        if (opt_.record_bounds) res.bounds.emplace_back(node.bound, cp->first + loose * invT);
        const Eigen::VectorXd s = cp->second;
        inc_.offer(s);
        if (pruned(bound, inc_.value, opt_.gap_tol)) continue;

        // loosest sample at the relaxed optimum
        Index pick = -1;
        double worst = 0.0;
        for (Index t = 0; t < T_; ++t) {
            const auto u = static_cast<std::size_t>(t);
            if (single[u] >= 0) continue;
            const double g = inc_.sample_costs()[u] - lb[u];
            if (pick < 0 || g > worst) {
                worst = g;
                pick = t;
            }
        }
        if (pick < 0) continue;  // every sample is exact on this node

        std::vector<SearchNode> children;
        const Eigen::VectorXd width = (node.hi - node.lo).cwiseProduct(scale_);
        Index dim;
        const double widest = width.maxCoeff(&dim);
        const bool few = node.regions[static_cast<std::size_t>(pick)].size() <= 4;
        const int k = widest > opt_.bisect_width && !few ? -1 : region_of(pick, s);
        const auto [row, rhs] = k >= 0 ? facet_cut(pick, k, node, s) : std::pair<Eigen::RowVectorXd, double>{};
        if (row.size() > 0) {
            for (double sign : {1.0, -1.0}) {
                SearchNode c = node;
                c.A.conservativeResize(node.A.rows() + 1, d_);
                c.b.conservativeResize(node.b.size() + 1);
                c.A.row(node.A.rows()) = sign * row;
                c.b(node.b.size()) = sign * rhs;
                children.push_back(std::move(c));
            }
        } else {
            if (widest <= 1e-9) {
                stuck_bound = std::min(stuck_bound, bound);
                continue;
            }
            const double mid = 0.5 * (node.lo(dim) + node.hi(dim));
            SearchNode left = node, right = node;
            left.hi(dim) = mid;
            right.lo(dim) = mid;
            children.push_back(std::move(left));
            children.push_back(std::move(right));
        }
        for (auto& c : children) {
            if (!tighten(c)) continue;
            c.bound = bound;
            c.depth = node.depth + 1;
            store.push_back(std::move(c));
            queue.push({bound, store.size() - 1});
        }
    }
    if (queue.empty()) open_bound = kInf;
    finish(res, data_, inc_, std::min(open_bound, stuck_bound), sw);
    return res;
}

}  // namespace

ExactResult solve_region_bnb(const BilevelData& data, const ExactOptions& opt) {
    RegionSearch search(data, opt);
    return search.run();
}

}  // namespace adl
