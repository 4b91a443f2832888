#pragma once

// Brute-force references for small LPs, independent of the simplex code.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "adlearn/lp/linear_program.hpp"

namespace oracle {

using adl::lp::LinearProgram;
using adl::lp::RowSense;

struct VertexResult {
    bool feasible = false;
    double objective = std::numeric_limits<double>::infinity();
    Eigen::VectorXd x;
};

inline bool satisfies(const LinearProgram<double>& lp, const Eigen::VectorXd& x, double tol) {
    for (Eigen::Index j = 0; j < lp.cols(); ++j)
        if (x(j) < lp.lower(j) - tol || x(j) > lp.upper(j) + tol) return false;
    const Eigen::VectorXd ax = lp.matrix * x;
    for (Eigen::Index i = 0; i < lp.rows(); ++i) {
        const double d = ax(i) - lp.rhs(i);
        const auto s = lp.senses[static_cast<std::size_t>(i)];
        if (s == RowSense::LessEqual && d > tol) return false;
        if (s == RowSense::GreaterEqual && d < -tol) return false;
        if (s == RowSense::Equal && std::abs(d) > tol) return false;
    }
    return true;
}

// Every vertex of a bounded polyhedron fixes each variable at a bound or
// leaves it free, with as many active rows as free variables.
inline VertexResult enumerate_vertices(const LinearProgram<double>& lp, double tol = 1e-9) {
    const int n = static_cast<int>(lp.cols());
    const int m = static_cast<int>(lp.rows());
    VertexResult best;
    std::vector<int> state(static_cast<std::size_t>(n), 0);  // 0 lower, 1 upper, 2 free
    int total = 1;
    for (int j = 0; j < n; ++j) total *= 3;
    for (int code = 0; code < total; ++code) {
        int c = code;
        std::vector<int> free;
        Eigen::VectorXd x(n);
        for (int j = 0; j < n; ++j) {
            state[static_cast<std::size_t>(j)] = c % 3;
            c /= 3;
            if (state[static_cast<std::size_t>(j)] == 2) free.push_back(j);
            else x(j) = state[static_cast<std::size_t>(j)] == 0 ? lp.lower(j) : lp.upper(j);
        }
        const int k = static_cast<int>(free.size());
        if (k > m) continue;
        std::vector<int> rows(static_cast<std::size_t>(k));
        // iterate over k-subsets of rows
        std::vector<int> pick(static_cast<std::size_t>(m), 0);
        std::fill(pick.end() - k, pick.end(), 1);
        do {
            int r = 0;
            for (int i = 0; i < m; ++i)
                if (pick[static_cast<std::size_t>(i)]) rows[static_cast<std::size_t>(r++)] = i;
            Eigen::VectorXd xx = x;
            if (k > 0) {
                Eigen::MatrixXd a(k, k);
                Eigen::VectorXd b(k);
                for (int ii = 0; ii < k; ++ii) {
                    const int i = rows[static_cast<std::size_t>(ii)];
                    double rhs = lp.rhs(i);
                    for (int j = 0; j < n; ++j)
                        if (state[static_cast<std::size_t>(j)] != 2) rhs -= lp.matrix(i, j) * x(j);
                    b(ii) = rhs;
                    for (int jj = 0; jj < k; ++jj) a(ii, jj) = lp.matrix(i, free[static_cast<std::size_t>(jj)]);
                }
                Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
                if (!lu.isInvertible()) continue;
                const Eigen::VectorXd y = lu.solve(b);
                for (int jj = 0; jj < k; ++jj) xx(free[static_cast<std::size_t>(jj)]) = y(jj);
            }
            if (!satisfies(lp, xx, tol * (1.0 + lp.rhs.cwiseAbs().maxCoeff()))) continue;
            const double obj = lp.objective.dot(xx) + lp.objective_offset;
            if (obj < best.objective) {
                best.objective = obj;
                best.x = xx;
                best.feasible = true;
            }
        } while (std::next_permutation(pick.begin(), pick.end()));
    }
    return best;
}

/// Random LP with a bounded box. Roughly 3 in 4 instances are built around a
/// known interior point; the rest get arbitrary right-hand sides.
inline LinearProgram<double> random_lp(std::mt19937_64& rng, int rows, int cols) {
    std::uniform_real_distribution<double> coef(-5.0, 5.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    LinearProgram<double> lp(rows, cols);
    for (int j = 0; j < cols; ++j) {
        const double lo = std::floor(coef(rng) * 0.6);
        const double hi = lo + 0.5 + 4.0 * unit(rng);
        lp.set_col(j, coef(rng), lo, hi);
    }
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) lp.matrix(i, j) = unit(rng) < 0.25 ? 0.0 : coef(rng);
    const bool anchored = unit(rng) < 0.75;
    Eigen::VectorXd x0(cols);
    for (int j = 0; j < cols; ++j) x0(j) = lp.lower(j) + unit(rng) * (lp.upper(j) - lp.lower(j));
    const Eigen::VectorXd ax = lp.matrix * x0;
    for (int i = 0; i < rows; ++i) {
        const double u = unit(rng);
        const RowSense s = u < 0.4 ? RowSense::LessEqual : (u < 0.8 ? RowSense::GreaterEqual : RowSense::Equal);
        double b;
        if (anchored) {
            const double slack = 2.0 * unit(rng);
            b = s == RowSense::LessEqual ? ax(i) + slack : (s == RowSense::GreaterEqual ? ax(i) - slack : ax(i));
        } else {
            b = 10.0 * coef(rng);
        }
        lp.set_row(i, s, b);
    }
    return lp;
}

}  // namespace oracle
