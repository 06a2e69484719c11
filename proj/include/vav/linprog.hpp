#pragma once

#include "vav/common.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace vav::lp {

enum class Status { Optimal, Infeasible };

struct Result {
    Status status = Status::Infeasible;
    Vector x;
    double objective = 0.0;
};

namespace detail {

constexpr double kTol = 1e-9;

} // namespace detail

/// Maximizes c.x subject to A x <= b and elementwise box bounds
/// lower <= x <= upper. Dense two-phase simplex with Bland's rule; intended
/// for the small, well-scaled programs used in half-space redundancy removal.
inline Result maximize(const Vector& c, const Matrix& a, const Vector& b, const Vector& lower,
                       const Vector& upper) {
    const int k = static_cast<int>(c.size());
    const int m = static_cast<int>(a.rows());
    require_dims(a.cols() == k || m == 0, "lp::maximize: constraint width mismatch");
    require_dims(b.size() == m, "lp::maximize: rhs length mismatch");
    require_dims(lower.size() == k && upper.size() == k, "lp::maximize: bound length mismatch");
    for (int i = 0; i < k; ++i)
        require(lower[i] <= upper[i], "lp::maximize: empty box");

    // substitute y = x - lower >= 0; append the upper-bound rows
    const int rows = m + k;
    Matrix cons(rows, k);
    Vector rhs(rows);
    if (m > 0) {
        cons.topRows(m) = a;
        rhs.head(m) = b - a * lower;
    }
    cons.bottomRows(k) = Matrix::Identity(k, k);
    rhs.tail(k) = upper - lower;

    // columns: k structural | rows slacks | artificials | rhs
    int n_art = 0;
    for (int i = 0; i < rows; ++i)
        if (rhs[i] < 0.0) ++n_art;
    const int n_cols = k + rows + n_art;
    Matrix tab = Matrix::Zero(rows, n_cols + 1);
    std::vector<int> basis(static_cast<std::size_t>(rows));
    int art = 0;
    for (int i = 0; i < rows; ++i) {
        double sign = 1.0;
        if (rhs[i] < 0.0) sign = -1.0;
        tab.block(i, 0, 1, k) = sign * cons.row(i);
        tab(i, k + i) = sign; // slack
        tab(i, n_cols) = sign * rhs[i];
        if (sign < 0.0) {
            tab(i, k + rows + art) = 1.0;
            basis[static_cast<std::size_t>(i)] = k + rows + art;
            ++art;
        } else {
            basis[static_cast<std::size_t>(i)] = k + i;
        }
    }

    const auto run_phase = [&](Vector& cost) -> bool {
        // canonicalize the cost row against the current basis
        for (int i = 0; i < rows; ++i) {
            const double cb = cost[basis[static_cast<std::size_t>(i)]];
            if (cb != 0.0) cost -= cb * tab.row(i).transpose();
        }
        const int rhs_col = n_cols;
        while (true) {
            int enter = -1;
            for (int j = 0; j < n_cols; ++j)
                if (cost[j] < -detail::kTol) {
                    enter = j;
                    break;
                }
            if (enter < 0) return true;

            int leave = -1;
            double best_ratio = std::numeric_limits<double>::infinity();
            for (int i = 0; i < rows; ++i) {
                if (tab(i, enter) <= detail::kTol) continue;
                const double ratio = tab(i, rhs_col) / tab(i, enter);
                const bool better =
                    ratio < best_ratio - 1e-12 ||
                    (ratio <= best_ratio + 1e-12 &&
                     (leave < 0 ||
                      basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leave)]));
                if (better) {
                    best_ratio = std::min(best_ratio, ratio);
                    leave = i;
                }
            }
            if (leave < 0) return false;

            tab.row(leave) /= tab(leave, enter);
            for (int i = 0; i < rows; ++i) {
                if (i == leave) continue;
                const double f = tab(i, enter);
                if (f != 0.0) tab.row(i) -= f * tab.row(leave);
            }
            const double cf = cost[enter];
            if (cf != 0.0) cost -= cf * tab.row(leave).transpose();
            basis[static_cast<std::size_t>(leave)] = enter;
        }
    };

    if (n_art > 0) {
        Vector phase1 = Vector::Zero(n_cols + 1);
        for (int j = k + rows; j < n_cols; ++j) phase1[j] = 1.0;
        if (!run_phase(phase1)) throw SolverError("lp::maximize: phase-1 simplex failed");
        if (-phase1[n_cols] > 1e-7) return Result{Status::Infeasible, Vector(), 0.0};
        // pivot any residual zero-level artificials out of the basis
        for (int i = 0; i < rows; ++i) {
            if (basis[static_cast<std::size_t>(i)] < k + rows) continue;
            int j = 0;
            while (j < k + rows && std::abs(tab(i, j)) <= detail::kTol) ++j;
            if (j == k + rows) continue; // redundant row, leave at zero
            tab.row(i) /= tab(i, j);
            for (int r = 0; r < rows; ++r) {
                if (r == i) continue;
                const double f = tab(r, j);
                if (f != 0.0) tab.row(r) -= f * tab.row(i);
            }
            basis[static_cast<std::size_t>(i)] = j;
        }
        // forbid artificials from re-entering
        tab.middleCols(k + rows, n_art).setZero();
    }

    Vector phase2 = Vector::Zero(n_cols + 1);
    phase2.head(k) = -c; // minimize -c.y
    if (!run_phase(phase2)) throw SolverError("lp::maximize: phase-2 simplex failed");

    Vector y = Vector::Zero(k);
    for (int i = 0; i < rows; ++i)
        if (basis[static_cast<std::size_t>(i)] < k) y[basis[static_cast<std::size_t>(i)]] = tab(i, n_cols);

    Result res;
    res.status = Status::Optimal;
    res.x = y + lower;
    res.objective = c.dot(res.x);
    return res;
}

} // namespace vav::lp
