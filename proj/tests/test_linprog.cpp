#include "vav/linprog.hpp"
#include "vav/rng.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace vav;
using Catch::Approx;

namespace {

/// Brute-force LP oracle: enumerate all vertices (k-subsets of active
/// constraints, box rows included) of the feasible polytope and take the best.
/// Returns NaN when infeasible.
double vertex_enumeration_max(const Vector& c, const Matrix& a, const Vector& b,
                              const Vector& lower, const Vector& upper) {
    const int k = static_cast<int>(c.size());
    Matrix all(a.rows() + 2 * k, k);
    Vector rhs(a.rows() + 2 * k);
    all.topRows(a.rows()) = a;
    rhs.head(a.rows()) = b;
    all.middleRows(a.rows(), k) = Matrix::Identity(k, k);
    rhs.segment(a.rows(), k) = upper;
    all.bottomRows(k) = -Matrix::Identity(k, k);
    rhs.tail(k) = -lower;

    const int m = static_cast<int>(all.rows());
    double best = std::numeric_limits<double>::quiet_NaN();
    std::vector<int> idx(static_cast<std::size_t>(k));
    const std::function<void(int, int)> rec = [&](int start, int depth) {
        if (depth == k) {
            Matrix sys(k, k);
            Vector sys_rhs(k);
            for (int i = 0; i < k; ++i) {
                sys.row(i) = all.row(idx[static_cast<std::size_t>(i)]);
                sys_rhs[i] = rhs[idx[static_cast<std::size_t>(i)]];
            }
            Eigen::FullPivLU<Matrix> lu(sys);
            if (!lu.isInvertible()) return;
            const Vector x = lu.solve(sys_rhs);
            if (((all * x - rhs).array() <= 1e-8).all()) {
                const double val = c.dot(x);
                if (std::isnan(best) || val > best) best = val;
            }
            return;
        }
        for (int i = start; i < m; ++i) {
            idx[static_cast<std::size_t>(depth)] = i;
            rec(i + 1, depth + 1);
        }
    };
    rec(0, 0);
    return best;
}

} // namespace

TEST_CASE("lp: unconstrained box maximum") {
    const Vector c = (Vector(2) << 1.0, 1.0).finished();
    const auto res = lp::maximize(c, Matrix::Zero(0, 2), Vector::Zero(0),
                                  Vector::Constant(2, -1.0), Vector::Constant(2, 1.0));
    REQUIRE(res.status == lp::Status::Optimal);
    REQUIRE(res.objective == Approx(2.0).margin(1e-9));
}

TEST_CASE("lp: simple constrained maximum") {
    // max x + 2y st x + y <= 1, box [0, 5]
    const Vector c = (Vector(2) << 1.0, 2.0).finished();
    Matrix a(1, 2);
    a << 1.0, 1.0;
    const Vector b = (Vector(1) << 1.0).finished();
    const auto res = lp::maximize(c, a, b, Vector::Zero(2), Vector::Constant(2, 5.0));
    REQUIRE(res.status == lp::Status::Optimal);
    REQUIRE(res.objective == Approx(2.0).margin(1e-9)); // at (0, 1)
}

TEST_CASE("lp: negative rhs requires phase 1") {
    // max x st -x <= -0.5 (x >= 0.5), box [-1, 1]
    const Vector c = (Vector(1) << 1.0).finished();
    Matrix a(1, 1);
    a << -1.0;
    const Vector b = (Vector(1) << -0.5).finished();
    const auto res = lp::maximize(c, a, b, Vector::Constant(1, -1.0), Vector::Constant(1, 1.0));
    REQUIRE(res.status == lp::Status::Optimal);
    REQUIRE(res.objective == Approx(1.0).margin(1e-9));
    REQUIRE(res.x[0] >= 0.5 - 1e-9);
}

TEST_CASE("lp: infeasible program detected") {
    // x <= -2 with box [-1, 1]
    const Vector c = (Vector(1) << 1.0).finished();
    Matrix a(1, 1);
    a << 1.0;
    const Vector b = (Vector(1) << -2.0).finished();
    const auto res = lp::maximize(c, a, b, Vector::Constant(1, -1.0), Vector::Constant(1, 1.0));
    REQUIRE(res.status == lp::Status::Infeasible);
}

TEST_CASE("lp: degenerate origin vertex") {
    // max x + y st x + y <= 0, -x <= 0, -y <= 0, box [-1, 1]
    const Vector c = (Vector(2) << 1.0, 1.0).finished();
    Matrix a(3, 2);
    a << 1, 1,
        -1, 0,
        0, -1;
    const Vector b = Vector::Zero(3);
    const auto res = lp::maximize(c, a, b, Vector::Constant(2, -1.0), Vector::Constant(2, 1.0));
    REQUIRE(res.status == lp::Status::Optimal);
    REQUIRE(res.objective == Approx(0.0).margin(1e-9));
}

TEST_CASE("lp: random programs agree with vertex enumeration") {
    Rng rng(2024);
    int feasible_seen = 0;
    int infeasible_seen = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const int k = 2 + rng.below(2);     // 2 or 3 variables
        const int m = 1 + rng.below(5);     // up to 5 constraints
        Matrix a(m, k);
        Vector b(m);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < k; ++j) a(i, j) = rng.normal();
            b[i] = rng.normal() * 0.5;
        }
        const Vector c = rng.gaussian(k);
        const Vector lower = Vector::Constant(k, -1.0);
        const Vector upper = Vector::Constant(k, 1.0);

        const auto res = lp::maximize(c, a, b, lower, upper);
        const double oracle = vertex_enumeration_max(c, a, b, lower, upper);
        if (std::isnan(oracle)) {
            REQUIRE(res.status == lp::Status::Infeasible);
            ++infeasible_seen;
        } else {
            REQUIRE(res.status == lp::Status::Optimal);
            REQUIRE(res.objective == Approx(oracle).margin(1e-6));
            REQUIRE(((a * res.x - b).array() <= 1e-7).all());
            ++feasible_seen;
        }
    }
    REQUIRE(feasible_seen > 50);
    REQUIRE(infeasible_seen > 5);
}
