#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "adlearn/errors.hpp"

namespace adl::lp {

using Index = Eigen::Index;

enum class RowSense : std::uint8_t { LessEqual, Equal, GreaterEqual };

enum class Status : std::uint8_t { Optimal, Infeasible, Unbounded };

inline const char* to_string(Status s) {
    switch (s) {
        case Status::Optimal: return "optimal";
        case Status::Infeasible: return "infeasible";
        case Status::Unbounded: return "unbounded";
    }
    return "?";
}

template <typename Scalar>
constexpr Scalar infinity() {
    return std::numeric_limits<Scalar>::infinity();
}

/// Dense LP: minimize c'x + offset  s.t.  A x (<=|=|>=) b,  lower <= x <= upper.
template <typename Scalar>
struct LinearProgram {
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    Vector objective;
    Matrix matrix;
    std::vector<RowSense> senses;
    Vector rhs;
    Vector lower;
    Vector upper;
    Scalar objective_offset{0};
    std::vector<std::string> row_names;
    std::vector<std::string> col_names;

    LinearProgram() = default;

    /// Allocates an all-zero problem; columns default to [0, +inf).
    LinearProgram(Index rows, Index cols)
        : objective(Vector::Zero(cols)),
          matrix(Matrix::Zero(rows, cols)),
          senses(static_cast<std::size_t>(rows), RowSense::LessEqual),
          rhs(Vector::Zero(rows)),
          lower(Vector::Zero(cols)),
          upper(Vector::Constant(cols, infinity<Scalar>())),
          row_names(static_cast<std::size_t>(rows)),
          col_names(static_cast<std::size_t>(cols)) {}

    Index rows() const { return matrix.rows(); }
    Index cols() const { return matrix.cols(); }

    void set_row(Index i, RowSense sense, Scalar b, std::string name = {}) {
        senses[static_cast<std::size_t>(i)] = sense;
        rhs(i) = b;
        if (!name.empty()) row_names[static_cast<std::size_t>(i)] = std::move(name);
    }

    void set_col(Index j, Scalar cost, Scalar lo, Scalar hi, std::string name = {}) {
        objective(j) = cost;
        lower(j) = lo;
        upper(j) = hi;
        if (!name.empty()) col_names[static_cast<std::size_t>(j)] = std::move(name);
    }

    /// Throws MalformedLpError naming the first violated shape or bound invariant.
    void validate() const {
        const auto m = rows();
        const auto n = cols();
        if (rhs.size() != m || static_cast<Index>(senses.size()) != m)
            throw MalformedLpError("row count mismatch: matrix has " + std::to_string(m) +
                                   " rows, rhs " + std::to_string(rhs.size()) + ", senses " +
                                   std::to_string(senses.size()));
        if (objective.size() != n || lower.size() != n || upper.size() != n)
            throw MalformedLpError("column count mismatch: matrix has " + std::to_string(n) +
                                   " columns");
        if (!row_names.empty() && static_cast<Index>(row_names.size()) != m)
            throw MalformedLpError("row name count mismatch");
        if (!col_names.empty() && static_cast<Index>(col_names.size()) != n)
            throw MalformedLpError("column name count mismatch");
        for (Index j = 0; j < n; ++j) {
            if (std::isnan(lower(j)) || std::isnan(upper(j)) || lower(j) > upper(j))
                throw MalformedLpError("column " + col_label(j) + " has lower > upper");
            if (lower(j) == infinity<Scalar>() || upper(j) == -infinity<Scalar>())
                throw MalformedLpError("column " + col_label(j) + " has an infinite fixing");
            if (!std::isfinite(objective(j)))
                throw MalformedLpError("column " + col_label(j) + " has a non-finite cost");
        }
        for (Index i = 0; i < m; ++i)
            if (!std::isfinite(rhs(i)))
                throw MalformedLpError("row " + row_label(i) + " has a non-finite rhs");
        if (!matrix.allFinite()) throw MalformedLpError("constraint matrix has non-finite entries");
    }

    std::string row_label(Index i) const {
        const auto k = static_cast<std::size_t>(i);
        if (k < row_names.size() && !row_names[k].empty()) return row_names[k];
        return "r" + std::to_string(i);
    }

    std::string col_label(Index j) const {
        const auto k = static_cast<std::size_t>(j);
        if (k < col_names.size() && !col_names[k].empty()) return col_names[k];
        return "c" + std::to_string(j);
    }
};

}  // namespace adl::lp
