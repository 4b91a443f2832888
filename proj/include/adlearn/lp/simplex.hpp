#pragma once

// Dense bounded-variable two-phase primal simplex.
//
// The LP is mapped to an internal standard form  A' y = b',  0 <= y <= u'
// with one slack per inequality row and one artificial per row. Artificial
// columns are kept for the whole solve: their tableau block is B^-1, which
// gives the row duals and lets a cached tableau be re-used when only the
// right-hand side or the bounds change.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "adlearn/errors.hpp"
#include "adlearn/lp/linear_program.hpp"

namespace adl::lp {

struct Tolerances {
    double feasibility = 1e-7;
    double pivot = 1e-9;
    double complementarity = 1e-6;
    double optimality = 1e-9;
};

/// Deterministic column-indexed objective offsets: c_j += eps * (j+1)/(n+1).
struct PerturbationPolicy {
    enum class Mode : std::uint8_t { None, Deterministic };

    Mode mode = Mode::None;
    double magnitude = 1e-7;

    static PerturbationPolicy none() { return {}; }
    static PerturbationPolicy deterministic(double eps = 1e-7) {
        if (!(eps >= 0.0)) throw MalformedLpError("perturbation magnitude must be >= 0");
        return {Mode::Deterministic, eps};
    }

    double offset(Index j, Index n) const {
        if (mode == Mode::None) return 0.0;
        return magnitude * static_cast<double>(j + 1) / static_cast<double>(n + 1);
    }

    bool operator==(const PerturbationPolicy& o) const {
        return mode == o.mode && (mode == Mode::None || magnitude == o.magnitude);
    }
};

/// Basis over the solver's internal standard form. Only meaningful for LPs with
/// the same shape (rows, columns, senses, bound finiteness) as the one that produced it.
struct Basis {
    std::vector<int> basic;
    std::vector<std::uint8_t> at_upper;

    bool empty() const { return basic.empty(); }
    bool operator==(const Basis&) const = default;
};

/// Status of an original column or row in the final basis.
enum class VarStatus : std::uint8_t {
    AtLower,
    AtUpper,
    Basic,
    /// Nonbasic free column (value 0).
    FreeZero,
    /// Row whose slack is nonbasic (inequality at its rhs) or equality row.
    Active,
    /// Row whose artificial stayed basic at zero (linearly dependent row).
    Redundant,
};

template <typename Scalar>
struct LpSolution {
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    Status status = Status::Infeasible;
    Vector x;
    /// Row duals of the objective actually optimized (perturbed when a policy is active).
    /// Sign convention for minimization: >= rows have dual >= 0, <= rows dual <= 0.
    Vector duals;
    Vector reduced_costs;
    /// Value of the unperturbed objective (plus offset) at x.
    Scalar objective{0};
    Basis basis;
    std::vector<VarStatus> col_status;
    std::vector<VarStatus> row_status;
    int iterations = 0;
    bool warm_started = false;
    Scalar primal_residual{0};

    bool optimal() const { return status == Status::Optimal; }
};

template <typename Scalar>
class SimplexSolver {
public:
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
    using Problem = LinearProgram<Scalar>;
    using Solution = LpSolution<Scalar>;

    explicit SimplexSolver(Tolerances tol = {}, int max_iterations = 0)
        : tol_(tol), max_iterations_(max_iterations) {}

    /// Solves lp. When the previous call on this solver had the same matrix,
    /// objective, senses and bound pattern, its final tableau is re-used as the
    /// starting basis if still primal feasible. An explicit warm basis, when
    /// supplied, takes precedence over the cache.
    Solution solve(const Problem& lp, const PerturbationPolicy& perturb = {},
                   const Basis* warm = nullptr) {
        lp.validate();
        pivots_ = 0;
        bool warm_used = false;
        const bool same_structure = cache_valid_ && structure_matches(lp, perturb);
        if (same_structure) {
            update_bounds_and_rhs(lp);
        } else {
            build_internal(lp, perturb);
        }

        if (warm != nullptr && !warm->empty()) {
            warm_used = try_basis(*warm);
        } else if (same_structure && last_optimal_) {
            if (pivots_since_refactor_ > kRefactorInterval) {
                warm_used = refactor(basis_) && recompute_beta_feasible();
            } else {
                warm_used = recompute_beta_feasible();
            }
        }

        Status status;
        if (warm_used) {
            status = run_phase(cost_);
        } else {
            // row signs may be stale for the new rhs
            if (same_structure) build_internal(lp, perturb);
            status = cold_solve();
        }
        if (status == Status::Optimal && !residual_ok(lp)) {
            // accumulated round-off: rebuild the tableau from the basis and polish
            if (refactor(basis_)) status = run_phase(cost_);
        }
        cache_valid_ = true;
        last_optimal_ = status == Status::Optimal;
        return extract(lp, status, warm_used);
    }

    /// Drops the cached tableau so the next solve starts cold.
    void reset() {
        cache_valid_ = false;
        last_optimal_ = false;
    }

    const Tolerances& tolerances() const { return tol_; }

private:
    enum class Kind : std::uint8_t { Shift, Reflect, FreePos, FreeNeg };
    enum State : std::uint8_t { kBasic = 0, kLower = 1, kUpper = 2 };

    static constexpr int kBlandAfter = 50;
    static constexpr int kRefactorInterval = 64;

    struct ColMap {
        Index original;
        Kind kind;
    };

    Tolerances tol_;
    int max_iterations_;

    // cached problem signature
    bool cache_valid_ = false;
    bool last_optimal_ = false;
    Matrix sig_matrix_;
    Vector sig_objective_;
    std::vector<RowSense> sig_senses_;
    std::vector<std::uint8_t> sig_bound_pattern_;
    PerturbationPolicy sig_perturb_;

    // internal standard form
    Index m_ = 0;
    Index n_orig_ = 0;
    Index n_struct_ = 0;
    Index n_slack_ = 0;
    Index n_total_ = 0;
    std::vector<ColMap> cols_;
    std::vector<Index> first_internal_;
    Matrix a_int_;
    Vector rhs_int_;
    Vector rowsign_;
    Vector cost_;
    Vector ub_;
    Vector shift_;

    // simplex state
    Matrix tab_;
    Vector beta_;
    Vector dj_;
    std::vector<int> basis_;
    std::vector<std::uint8_t> state_;
    int pivots_ = 0;
    int pivots_since_refactor_ = 0;

    Index art(Index row) const { return n_struct_ + n_slack_ + row; }
    bool is_artificial(Index k) const { return k >= n_struct_ + n_slack_; }

    static std::vector<std::uint8_t> bound_pattern(const Problem& lp) {
        std::vector<std::uint8_t> p(static_cast<std::size_t>(lp.cols()));
        for (Index j = 0; j < lp.cols(); ++j)
            p[static_cast<std::size_t>(j)] = static_cast<std::uint8_t>(
                (std::isfinite(lp.lower(j)) ? 1 : 0) | (std::isfinite(lp.upper(j)) ? 2 : 0));
        return p;
    }

    bool structure_matches(const Problem& lp, const PerturbationPolicy& perturb) const {
        return perturb == sig_perturb_ && lp.rows() == sig_matrix_.rows() &&
               lp.cols() == sig_matrix_.cols() && lp.senses == sig_senses_ &&
               lp.objective == sig_objective_ && bound_pattern(lp) == sig_bound_pattern_ &&
               lp.matrix == sig_matrix_;
    }

    void build_internal(const Problem& lp, const PerturbationPolicy& perturb) {
        sig_matrix_ = lp.matrix;
        sig_objective_ = lp.objective;
        sig_senses_ = lp.senses;
        sig_bound_pattern_ = bound_pattern(lp);
        sig_perturb_ = perturb;
        last_optimal_ = false;
        pivots_since_refactor_ = 0;

        m_ = lp.rows();
        n_orig_ = lp.cols();
        cols_.clear();
        first_internal_.assign(static_cast<std::size_t>(n_orig_), 0);
        for (Index j = 0; j < n_orig_; ++j) {
            first_internal_[static_cast<std::size_t>(j)] = static_cast<Index>(cols_.size());
            if (std::isfinite(lp.lower(j))) {
                cols_.push_back({j, Kind::Shift});
            } else if (std::isfinite(lp.upper(j))) {
                cols_.push_back({j, Kind::Reflect});
            } else {
                cols_.push_back({j, Kind::FreePos});
                cols_.push_back({j, Kind::FreeNeg});
            }
        }
        n_struct_ = static_cast<Index>(cols_.size());
        n_slack_ = static_cast<Index>(
            std::count_if(lp.senses.begin(), lp.senses.end(),
                          [](RowSense s) { return s != RowSense::Equal; }));
        n_total_ = n_struct_ + n_slack_ + m_;

        a_int_.setZero(m_, n_total_);
        cost_.setZero(n_total_);
        ub_.setConstant(n_total_, infinity<Scalar>());
        for (Index k = 0; k < n_struct_; ++k) {
            const auto& cm = cols_[static_cast<std::size_t>(k)];
            const Scalar c = lp.objective(cm.original) +
                             static_cast<Scalar>(perturb.offset(cm.original, n_orig_));
            const bool negate = cm.kind == Kind::Reflect || cm.kind == Kind::FreeNeg;
            a_int_.col(k) = negate ? Vector(-lp.matrix.col(cm.original))
                                   : Vector(lp.matrix.col(cm.original));
            cost_(k) = negate ? -c : c;
        }
        Index s = n_struct_;
        for (Index i = 0; i < m_; ++i) {
            const auto sense = lp.senses[static_cast<std::size_t>(i)];
            if (sense == RowSense::Equal) continue;
            a_int_(i, s++) = sense == RowSense::LessEqual ? Scalar(1) : Scalar(-1);
        }
        rowsign_.setOnes(m_);
        update_bounds_and_rhs(lp);
        for (Index i = 0; i < m_; ++i) {
            if (rhs_int_(i) < 0) {
                rowsign_(i) = -1;
                a_int_.row(i) *= Scalar(-1);
                rhs_int_(i) = -rhs_int_(i);
            }
        }
        for (Index i = 0; i < m_; ++i) a_int_(i, art(i)) = 1;
        cache_valid_ = false;
    }

    void update_bounds_and_rhs(const Problem& lp) {
        shift_.setZero(n_orig_);
        for (Index k = 0; k < n_struct_; ++k) {
            const auto& cm = cols_[static_cast<std::size_t>(k)];
            const Index j = cm.original;
            switch (cm.kind) {
                case Kind::Shift:
                    shift_(j) = lp.lower(j);
                    ub_(k) = std::isfinite(lp.upper(j)) ? lp.upper(j) - lp.lower(j)
                                                        : infinity<Scalar>();
                    break;
                case Kind::Reflect:
                    shift_(j) = lp.upper(j);
                    ub_(k) = infinity<Scalar>();
                    break;
                default:
                    ub_(k) = infinity<Scalar>();
                    break;
            }
        }
        rhs_int_ = rowsign_.cwiseProduct(lp.rhs - lp.matrix * shift_);
    }

    Vector effective_rhs() const {
        Vector r = rhs_int_;
        for (Index k = 0; k < n_total_; ++k)
            if (state_[static_cast<std::size_t>(k)] == kUpper) r -= a_int_.col(k) * ub_(k);
        return r;
    }

    // Warm starts accept only round-off level violations: phase 2 never repairs
    // an infeasible basic value, it would leak into the reported objective.
    bool beta_feasible() const {
        for (Index i = 0; i < m_; ++i) {
            const Index k = basis_[static_cast<std::size_t>(i)];
            const Scalar slack = Scalar(1e-11) * (Scalar(1) + std::abs(beta_(i)));
            if (beta_(i) < -slack) return false;
            if (std::isfinite(ub_(k)) && beta_(i) > ub_(k) + slack) return false;
        }
        return true;
    }

    // Cached tableau path: only rhs/bounds changed, so beta = B^-1 (b' - N x_N).
    bool recompute_beta_feasible() {
        for (Index k = 0; k < n_total_; ++k) {
            auto& st = state_[static_cast<std::size_t>(k)];
            if (st == kUpper && !std::isfinite(ub_(k))) st = kLower;
        }
        beta_ = tab_.rightCols(m_) * effective_rhs();
        return beta_feasible();
    }

    bool refactor(const std::vector<int>& basic) {
        if (static_cast<Index>(basic.size()) != m_) return false;
        Matrix bmat(m_, m_);
        for (Index i = 0; i < m_; ++i) bmat.col(i) = a_int_.col(basic[static_cast<std::size_t>(i)]);
        Eigen::FullPivLU<Matrix> lu(bmat);
        lu.setThreshold(1e-11);
        if (m_ > 0 && !lu.isInvertible()) return false;
        basis_ = basic;
        if (m_ > 0) {
            tab_ = lu.solve(a_int_);
            beta_ = lu.solve(effective_rhs());
        } else {
            tab_.resize(0, n_total_);
            beta_.resize(0);
        }
        for (Index i = 0; i < m_; ++i) state_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(i)])] = kBasic;
        pivots_since_refactor_ = 0;
        return true;
    }

    bool try_basis(const Basis& warm) {
        if (static_cast<Index>(warm.basic.size()) != m_ ||
            static_cast<Index>(warm.at_upper.size()) != n_total_)
            return false;
        std::vector<std::uint8_t> seen(static_cast<std::size_t>(n_total_), 0);
        for (int k : warm.basic) {
            if (k < 0 || k >= n_total_ || seen[static_cast<std::size_t>(k)]) return false;
            seen[static_cast<std::size_t>(k)] = 1;
        }
        state_.assign(static_cast<std::size_t>(n_total_), kLower);
        for (Index k = 0; k < n_total_; ++k)
            if (warm.at_upper[static_cast<std::size_t>(k)] && std::isfinite(ub_(k)))
                state_[static_cast<std::size_t>(k)] = kUpper;
        for (Index i = 0; i < m_; ++i) ub_(art(i)) = 0;
        if (!refactor(warm.basic)) return false;
        if (!beta_feasible()) return false;
        compute_reduced_costs(cost_);
        return true;
    }

    void compute_reduced_costs(const Vector& c) {
        Vector cb(m_);
        for (Index i = 0; i < m_; ++i) cb(i) = c(basis_[static_cast<std::size_t>(i)]);
        dj_ = c - tab_.transpose() * cb;
    }

    Status cold_solve() {
        tab_ = a_int_;
        beta_ = rhs_int_;
        basis_.assign(static_cast<std::size_t>(m_), 0);
        state_.assign(static_cast<std::size_t>(n_total_), kLower);
        pivots_since_refactor_ = 0;

        bool need_phase1 = false;
        Index s = n_struct_;
        for (Index i = 0; i < m_; ++i) {
            const auto sense = sig_senses_[static_cast<std::size_t>(i)];
            Index pick = art(i);
            if (sense != RowSense::Equal) {
                if (a_int_(i, s) == Scalar(1)) pick = s;
                ++s;
            }
            basis_[static_cast<std::size_t>(i)] = static_cast<int>(pick);
            state_[static_cast<std::size_t>(pick)] = kBasic;
            ub_(art(i)) = pick == art(i) ? infinity<Scalar>() : Scalar(0);
            if (pick == art(i)) need_phase1 = true;
        }

        if (need_phase1) {
            Vector c1 = Vector::Zero(n_total_);
            for (Index i = 0; i < m_; ++i) c1(art(i)) = 1;
            run_phase(c1);
            Scalar infeas = 0;
            for (Index i = 0; i < m_; ++i)
                if (is_artificial(basis_[static_cast<std::size_t>(i)])) infeas += std::max(beta_(i), Scalar(0));
            const Scalar scale = Scalar(1) + (m_ > 0 ? rhs_int_.cwiseAbs().maxCoeff() : Scalar(0));
            for (Index i = 0; i < m_; ++i) ub_(art(i)) = 0;
            if (infeas > tol_.feasibility * scale) return Status::Infeasible;
            drive_out_artificials();
        }
        return run_phase(cost_);
    }

    void drive_out_artificials() {
        for (Index r = 0; r < m_; ++r) {
            if (!is_artificial(basis_[static_cast<std::size_t>(r)])) continue;
            Index best = -1;
            Scalar best_abs = 1e-7;
            for (Index k = 0; k < n_struct_ + n_slack_; ++k) {
                if (state_[static_cast<std::size_t>(k)] == kBasic) continue;
                const Scalar a = std::abs(tab_(r, k));
                if (a > best_abs) {
                    best_abs = a;
                    best = k;
                }
            }
            if (best < 0) continue;  // redundant row; artificial stays basic at zero
            const Scalar value = state_[static_cast<std::size_t>(best)] == kUpper ? ub_(best) : Scalar(0);
            // degenerate exchange: x_B shifts by (beta_r - value)/a * col
            const Scalar step = (beta_(r) - value) / tab_(r, best);
            beta_ -= step * tab_.col(best);
            const Index leaving = basis_[static_cast<std::size_t>(r)];
            pivot(r, best);
            beta_(r) = value + step;
            state_[static_cast<std::size_t>(leaving)] = kLower;
            state_[static_cast<std::size_t>(best)] = kBasic;
            basis_[static_cast<std::size_t>(r)] = static_cast<int>(best);
        }
    }

    void pivot(Index r, Index j) {
        const Scalar p = tab_(r, j);
        RowVector prow = tab_.row(r) / p;
        Vector pcol = tab_.col(j);
        pcol(r) = 0;
        tab_.noalias() -= pcol * prow;
        tab_.row(r) = prow;
        if (dj_.size() == n_total_) dj_ -= dj_(j) * prow.transpose();
        ++pivots_;
        ++pivots_since_refactor_;
    }

    int iteration_cap() const {
        if (max_iterations_ > 0) return max_iterations_;
        return static_cast<int>(std::max<Index>(2000, 50 * (m_ + n_total_)));
    }

    Status run_phase(const Vector& c) {
        compute_reduced_costs(c);
        int degenerate = 0;
        bool bland = false;
        const int cap = iteration_cap();
        for (int iter = 0;; ++iter) {
            if (iter > cap)
                throw IterationLimitError("simplex exceeded " + std::to_string(cap) + " pivots");
            if (pivots_since_refactor_ >= kRefactorInterval && refactor(basis_)) compute_reduced_costs(c);

            // pricing
            Index enter = -1;
            Scalar best = 0;
            for (Index k = 0; k < n_total_; ++k) {
                const auto st = state_[static_cast<std::size_t>(k)];
                if (st == kBasic || ub_(k) <= 0) continue;
                Scalar viol = 0;
                if (st == kLower && dj_(k) < -tol_.optimality) viol = -dj_(k);
                else if (st == kUpper && dj_(k) > tol_.optimality) viol = dj_(k);
                if (viol <= 0) continue;
                if (bland) {
                    enter = k;
                    break;
                }
                if (viol > best) {
                    best = viol;
                    enter = k;
                }
            }
            if (enter < 0) return Status::Optimal;

            const Scalar dir = state_[static_cast<std::size_t>(enter)] == kLower ? Scalar(1) : Scalar(-1);
            Scalar theta = ub_(enter);
            Index leave = -1;
            bool leave_to_upper = false;
            Scalar leave_abs = 0;
            for (Index i = 0; i < m_; ++i) {
                const Scalar a = dir * tab_(i, enter);
                const Index k = basis_[static_cast<std::size_t>(i)];
                Scalar lim;
                bool to_upper;
                if (a > tol_.pivot) {
                    lim = std::max(beta_(i), Scalar(0)) / a;
                    to_upper = false;
                } else if (a < -tol_.pivot && std::isfinite(ub_(k))) {
                    lim = std::max(ub_(k) - beta_(i), Scalar(0)) / (-a);
                    to_upper = true;
                } else {
                    continue;
                }
                const Scalar tie = std::isfinite(theta) ? Scalar(1e-12) * (Scalar(1) + std::abs(theta)) : Scalar(0);
                bool take = !std::isfinite(theta) || lim < theta - tie;
                if (!take && std::abs(lim - theta) <= tie && leave >= 0) {
                    take = bland ? k < basis_[static_cast<std::size_t>(leave)] : std::abs(a) > leave_abs;
                }
                if (take) {
                    theta = lim;
                    leave = i;
                    leave_to_upper = to_upper;
                    leave_abs = std::abs(a);
                }
            }
            if (!std::isfinite(theta)) return Status::Unbounded;

            if (theta <= tol_.feasibility) {
                if (++degenerate > kBlandAfter) bland = true;
            } else {
                degenerate = 0;
            }

            if (theta > 0) beta_ -= (dir * theta) * tab_.col(enter);
            if (leave < 0) {
                state_[static_cast<std::size_t>(enter)] =
                    state_[static_cast<std::size_t>(enter)] == kLower ? kUpper : kLower;
                continue;
            }
            const Scalar entering_value =
                state_[static_cast<std::size_t>(enter)] == kLower ? theta : ub_(enter) - theta;
            const Index leaving = basis_[static_cast<std::size_t>(leave)];
            pivot(leave, enter);
            beta_(leave) = entering_value;
            state_[static_cast<std::size_t>(leaving)] = leave_to_upper ? kUpper : kLower;
            state_[static_cast<std::size_t>(enter)] = kBasic;
            basis_[static_cast<std::size_t>(leave)] = static_cast<int>(enter);
        }
    }

    Vector internal_values() const {
        Vector y = Vector::Zero(n_total_);
        for (Index k = 0; k < n_total_; ++k)
            if (state_[static_cast<std::size_t>(k)] == kUpper) y(k) = ub_(k);
        for (Index i = 0; i < m_; ++i) y(basis_[static_cast<std::size_t>(i)]) = beta_(i);
        return y;
    }

    Vector original_values(const Vector& y) const {
        Vector x = shift_;
        for (Index k = 0; k < n_struct_; ++k) {
            const auto& cm = cols_[static_cast<std::size_t>(k)];
            switch (cm.kind) {
                case Kind::Shift: x(cm.original) += y(k); break;
                case Kind::Reflect: x(cm.original) -= y(k); break;
                case Kind::FreePos: x(cm.original) += y(k); break;
                case Kind::FreeNeg: x(cm.original) -= y(k); break;
            }
        }
        return x;
    }

    static Scalar residual(const Problem& lp, const Vector& x) {
        Scalar worst = 0;
        if (lp.rows() > 0) {
            const Vector ax = lp.matrix * x;
            for (Index i = 0; i < lp.rows(); ++i) {
                const Scalar d = ax(i) - lp.rhs(i);
                switch (lp.senses[static_cast<std::size_t>(i)]) {
                    case RowSense::LessEqual: worst = std::max(worst, d); break;
                    case RowSense::GreaterEqual: worst = std::max(worst, -d); break;
                    case RowSense::Equal: worst = std::max(worst, std::abs(d)); break;
                }
            }
        }
        for (Index j = 0; j < lp.cols(); ++j) {
            worst = std::max(worst, lp.lower(j) - x(j));
            worst = std::max(worst, x(j) - lp.upper(j));
        }
        return worst;
    }

    bool residual_ok(const Problem& lp) const {
        const Scalar scale = Scalar(1) + (lp.rows() > 0 ? lp.rhs.cwiseAbs().maxCoeff() : Scalar(0));
        return residual(lp, original_values(internal_values())) <= tol_.feasibility * scale;
    }

    Solution extract(const Problem& lp, Status status, bool warm_used) const {
        Solution sol;
        sol.status = status;
        sol.iterations = pivots_;
        sol.warm_started = warm_used;
        if (status != Status::Optimal) return sol;

        sol.x = original_values(internal_values());
        sol.objective = lp.objective.dot(sol.x) + lp.objective_offset;
        sol.primal_residual = residual(lp, sol.x);

        Vector cb(m_);
        for (Index i = 0; i < m_; ++i) cb(i) = cost_(basis_[static_cast<std::size_t>(i)]);
        const Vector pi_int = tab_.rightCols(m_).transpose() * cb;
        sol.duals = rowsign_.cwiseProduct(pi_int);
        Vector c_used(n_orig_);
        for (Index j = 0; j < n_orig_; ++j) {
            const auto& cm = cols_[static_cast<std::size_t>(first_internal_[static_cast<std::size_t>(j)])];
            const Scalar c = cost_(first_internal_[static_cast<std::size_t>(j)]);
            c_used(j) = cm.kind == Kind::Reflect ? -c : c;
        }
        sol.reduced_costs = c_used - lp.matrix.transpose() * sol.duals;

        sol.col_status.assign(static_cast<std::size_t>(n_orig_), VarStatus::FreeZero);
        for (Index k = 0; k < n_struct_; ++k) {
            const auto& cm = cols_[static_cast<std::size_t>(k)];
            const auto st = state_[static_cast<std::size_t>(k)];
            auto& out = sol.col_status[static_cast<std::size_t>(cm.original)];
            if (st == kBasic) {
                out = VarStatus::Basic;
            } else if (cm.kind == Kind::Shift) {
                out = st == kUpper ? VarStatus::AtUpper : VarStatus::AtLower;
            } else if (cm.kind == Kind::Reflect) {
                out = VarStatus::AtUpper;
            }
        }
        sol.row_status.assign(static_cast<std::size_t>(m_), VarStatus::Active);
        for (Index i = 0, sk = n_struct_; i < m_; ++i) {
            if (state_[static_cast<std::size_t>(art(i))] == kBasic) sol.row_status[static_cast<std::size_t>(i)] = VarStatus::Redundant;
            if (lp.senses[static_cast<std::size_t>(i)] == RowSense::Equal) continue;
            if (state_[static_cast<std::size_t>(sk)] == kBasic) sol.row_status[static_cast<std::size_t>(i)] = VarStatus::Basic;
            ++sk;
        }

        sol.basis.basic = basis_;
        sol.basis.at_upper.assign(static_cast<std::size_t>(n_total_), 0);
        for (Index k = 0; k < n_total_; ++k)
            if (state_[static_cast<std::size_t>(k)] == kUpper) sol.basis.at_upper[static_cast<std::size_t>(k)] = 1;
        return sol;
    }
};

/// One-shot solve with an optional warm basis.
template <typename Scalar>
LpSolution<Scalar> solve(const LinearProgram<Scalar>& lp, const Basis* warm = nullptr,
                         const PerturbationPolicy& perturb = {}, const Tolerances& tol = {}) {
    SimplexSolver<Scalar> solver(tol);
    return solver.solve(lp, perturb, warm);
}

/// Row duals and reduced costs of an optimal solution.
template <typename Scalar>
struct DualValues {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> row_duals;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> reduced_costs;
};

template <typename Scalar>
DualValues<Scalar> extract_duals(const LpSolution<Scalar>& sol) {
    if (sol.status != Status::Optimal)
        throw Error(std::string("duals requested for a ") + to_string(sol.status) + " solution");
    return {sol.duals, sol.reduced_costs};
}

extern template class SimplexSolver<double>;

}  // namespace adl::lp
