#pragma once

#include "vav/common.hpp"
#include "vav/linprog.hpp"
#include "vav/mdp.hpp"

#include <string>
#include <vector>

namespace vav {

// Tolerances for the strict half-space geometry. Rows are unit-normalized, so
// these are scale-free.
inline constexpr double kDedupCosineThreshold = 1e-4;
inline constexpr double kStrictTol = 1e-8;
inline constexpr double kLpRedundancyTol = 1e-7;

struct Provenance {
    enum class Kind { StateActions, TrajectoryPair };
    Kind kind = Kind::StateActions;
    int s = -1, a = -1, b = -1; // StateActions: optimal a vs suboptimal b at s
    int first = -1, second = -1; // TrajectoryPair / question ids
};

struct Halfspace {
    Vector normal; // unit L2 norm
    Provenance provenance;
};

/// Ordered strict half-space constraints { w : normal_i . w > 0 }; the matrix
/// Delta of the aligned reward polytope when built from an MDP.
struct HalfspaceSet {
    std::vector<Halfspace> rows;
    bool minimal = false;

    bool empty() const { return rows.empty(); }
    int size() const { return static_cast<int>(rows.size()); }
    int k() const { return rows.empty() ? 0 : static_cast<int>(rows.front().normal.size()); }

    Matrix matrix() const {
        Matrix m(size(), k());
        for (int i = 0; i < size(); ++i) m.row(i) = rows[static_cast<std::size_t>(i)].normal.transpose();
        return m;
    }
};

/// Builds the ARP constraint matrix: one row Phi^(s,a) - Phi^(s,b) per state s,
/// optimal action a, suboptimal action b, computed from the successor features
/// of the canonical (uniform-over-ties) optimal policy. Zero rows are dropped
/// and the rest unit-normalized. An empty result marks a trivial reward, not
/// an error.
inline HalfspaceSet build_arp_delta(const Environment& env, const FeatureMap& features,
                                    const RewardWeights& w) {
    const QSolution sol = solve_mdp(env, features, w);
    const SuccessorFeatures sf =
        successor_features(env, features, canonical_optimal_policy(sol));

    HalfspaceSet set;
    for (int s = 0; s < env.n_states; ++s) {
        const auto& optimal = sol.optimal_sets[static_cast<std::size_t>(s)];
        if (static_cast<int>(optimal.size()) == env.n_actions) continue;
        for (int a : optimal)
            for (int b = 0; b < env.n_actions; ++b) {
                if (sol.is_optimal(s, b)) continue;
                Vector normal = sf.row(s, a) - sf.row(s, b);
                const double norm = normal.norm();
                if (norm <= 1e-9) continue;
                set.rows.push_back(Halfspace{normal / norm,
                                             Provenance{Provenance::Kind::StateActions, s, a, b}});
            }
    }
    return set;
}

/// Removes rows whose direction matches an earlier row within the cosine
/// threshold (first occurrence kept). Rows must be unit-normalized.
inline HalfspaceSet dedup_halfspaces(const HalfspaceSet& set,
                                     double threshold = kDedupCosineThreshold) {
    HalfspaceSet out;
    for (const auto& row : set.rows) {
        bool duplicate = false;
        for (const auto& kept : out.rows)
            if (1.0 - kept.normal.dot(row.normal) < threshold) {
                duplicate = true;
                break;
            }
        if (!duplicate) out.rows.push_back(row);
    }
    return out;
}

// Pre-LP dedup threshold for the provably exact tests. A row pair merged at
// the looser default can hide a genuine facet: any reward in the angular
// sliver between the two directions then passes a test it should fail. This
// level only collapses float-noise copies of the same constraint; the LP pass
// handles everything else exactly.
inline constexpr double kExactDedupThreshold = 1e-9;

/// One pass of exact LP redundancy removal: for each row, maximize movement
/// against it subject to the other rows' relaxed (>= 0) constraints inside the
/// box |x_i| <= 1; the row goes iff the optimum cannot exceed 0 by more than
/// the tolerance. The surviving set spans the same cone and is irredundant.
inline HalfspaceSet remove_redundant(const HalfspaceSet& set) {
    std::vector<Halfspace> kept = set.rows;
    const int k = set.k();
    if (kept.size() > 1) {
        const Vector lower = Vector::Constant(k, -1.0);
        const Vector upper = Vector::Constant(k, 1.0);
        std::size_t i = 0;
        while (i < kept.size() && kept.size() > 1) {
            Matrix a(static_cast<Eigen::Index>(kept.size()) - 1, k);
            int r = 0;
            for (std::size_t j = 0; j < kept.size(); ++j) {
                if (j == i) continue;
                a.row(r++) = -kept[j].normal.transpose();
            }
            lp::Result res;
            try {
                res = lp::maximize(-kept[i].normal, a, Vector::Zero(a.rows()), lower, upper);
            } catch (const SolverError& e) {
                throw SolverError("remove_redundant: LP failed on row " + std::to_string(i) +
                                  ": " + e.what());
            }
            if (res.status == lp::Status::Optimal && res.objective <= kLpRedundancyTol)
                kept.erase(kept.begin() + static_cast<std::ptrdiff_t>(i));
            else
                ++i;
        }
    }
    HalfspaceSet out;
    out.rows = std::move(kept);
    out.minimal = true;
    return out;
}

/// build -> dedup -> remove_redundant. The dedup stage only collapses exact
/// duplicates so the resulting cone equals the full constraint cone.
inline HalfspaceSet minimal_arp(const Environment& env, const FeatureMap& features,
                                const RewardWeights& w) {
    return remove_redundant(dedup_halfspaces(build_arp_delta(env, features, w),
                                             kExactDedupThreshold));
}

struct MembershipReport {
    bool member = false;
    bool degenerate = false; // empty constraint set passes everything
    std::vector<int> failing_rows;
};

/// Delta w' > 0, checked on the unit-normalized candidate so the decision is
/// invariant under positive scaling. The zero vector is never a member.
inline MembershipReport arp_membership_report(const HalfspaceSet& set, const Vector& w_prime) {
    MembershipReport report;
    if (set.empty()) {
        report.member = true;
        report.degenerate = true;
        return report;
    }
    require_dims(w_prime.size() == set.k(), "arp_membership: dimension mismatch");
    const double norm = w_prime.norm();
    if (norm <= 0.0) {
        for (int i = 0; i < set.size(); ++i) report.failing_rows.push_back(i);
        return report;
    }
    const Vector unit = w_prime / norm;
    for (int i = 0; i < set.size(); ++i)
        if (set.rows[static_cast<std::size_t>(i)].normal.dot(unit) <= kStrictTol)
            report.failing_rows.push_back(i);
    report.member = report.failing_rows.empty();
    return report;
}

inline bool arp_membership(const HalfspaceSet& set, const Vector& w_prime) {
    return arp_membership_report(set, w_prime).member;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

inline json provenance_to_json(const Provenance& p) {
    if (p.kind == Provenance::Kind::StateActions)
        return json{{"kind", "state_actions"}, {"s", p.s}, {"a", p.a}, {"b", p.b}};
    return json{{"kind", "trajectory_pair"}, {"first", p.first}, {"second", p.second}};
}

inline Provenance provenance_from_json(const json& j) {
    Provenance p;
    if (j.at("kind").get<std::string>() == "state_actions") {
        p.kind = Provenance::Kind::StateActions;
        p.s = j.at("s").get<int>();
        p.a = j.at("a").get<int>();
        p.b = j.at("b").get<int>();
    } else {
        p.kind = Provenance::Kind::TrajectoryPair;
        p.first = j.at("first").get<int>();
        p.second = j.at("second").get<int>();
    }
    return p;
}

inline json halfspace_set_to_json(const HalfspaceSet& set) {
    json normals = json::array();
    json provenance = json::array();
    for (const auto& row : set.rows) {
        normals.push_back(vector_to_json(row.normal));
        provenance.push_back(provenance_to_json(row.provenance));
    }
    return json{{"normals", normals}, {"provenance", provenance}, {"minimal", set.minimal}};
}

inline HalfspaceSet halfspace_set_from_json(const json& j) {
    HalfspaceSet set;
    const auto& normals = j.at("normals");
    const auto& provenance = j.at("provenance");
    for (std::size_t i = 0; i < normals.size(); ++i)
        set.rows.push_back(
            Halfspace{vector_from_json(normals.at(i)), provenance_from_json(provenance.at(i))});
    set.minimal = j.value("minimal", false);
    return set;
}

} // namespace vav
