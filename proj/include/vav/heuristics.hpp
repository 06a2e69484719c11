#pragma once

#include "vav/agents.hpp"
#include "vav/halfspace.hpp"
#include "vav/verdict.hpp"

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

namespace vav {

/// A black-box action-query test: ask the agent for an action at each probe
/// state and require it to fall inside the acceptable set.
struct ActionQueryTest {
    enum class Source { CS, ARP_BB, SCOT, BRUTE };

    Source source = Source::CS;
    std::vector<int> states;
    std::vector<std::vector<int>> acceptable; // aligned with states
    bool cover_complete = true;               // SCOT: whether set cover finished

    int size() const { return static_cast<int>(states.size()); }
};

inline std::string to_string(ActionQueryTest::Source s) {
    switch (s) {
        case ActionQueryTest::Source::CS: return "cs";
        case ActionQueryTest::Source::ARP_BB: return "arp_bb";
        case ActionQueryTest::Source::SCOT: return "scot";
        case ActionQueryTest::Source::BRUTE: return "brute";
    }
    return "?";
}

/// Critical-states heuristic: probe the states whose optimal action beats the
/// mean action value by more than t, most critical first.
inline ActionQueryTest gen_cs(const Environment& env, const FeatureMap& features,
                              const RewardWeights& w, double t) {
    require(t >= 0.0, "gen_cs: threshold must be nonnegative");
    const QSolution sol = solve_mdp(env, features, w);
    std::vector<std::pair<double, int>> critical;
    for (int s = 0; s < env.n_states; ++s) {
        const double gap = sol.v[s] - sol.q.row(s).mean();
        if (gap > t) critical.emplace_back(gap, s);
    }
    std::sort(critical.begin(), critical.end(), [](const auto& lhs, const auto& rhs) {
        if (lhs.first != rhs.first) return lhs.first > rhs.first;
        return lhs.second < rhs.second;
    });

    ActionQueryTest test;
    test.source = ActionQueryTest::Source::CS;
    for (const auto& [gap, s] : critical) {
        test.states.push_back(s);
        test.acceptable.push_back(sol.optimal_sets[static_cast<std::size_t>(s)]);
    }
    return test;
}

/// ARP black-box heuristic: probe the provenance states of the minimal ARP
/// constraint set.
inline ActionQueryTest gen_arp_bb(const Environment& env, const FeatureMap& features,
                                  const RewardWeights& w) {
    const QSolution sol = solve_mdp(env, features, w);
    const HalfspaceSet minimal = minimal_arp(env, features, w);

    ActionQueryTest test;
    test.source = ActionQueryTest::Source::ARP_BB;
    for (const auto& row : minimal.rows) {
        const int s = row.provenance.s;
        if (std::find(test.states.begin(), test.states.end(), s) != test.states.end()) continue;
        test.states.push_back(s);
        test.acceptable.push_back(sol.optimal_sets[static_cast<std::size_t>(s)]);
    }
    return test;
}

/// Set-cover optimal teaching heuristic: roll candidate trajectories from the
/// initial states under the optimal policy, score each by which minimal-ARP
/// constraints its state-action choices imply, and greedily pick trajectories
/// until the constraints are covered. Probes every state along the picks.
inline ActionQueryTest gen_scot(const Environment& env, const FeatureMap& features,
                                const RewardWeights& w, int m, int horizon,
                                std::uint64_t rng_seed) {
    require(m >= 1, "gen_scot: need at least one rollout per start state");
    const QSolution sol = solve_mdp(env, features, w);
    const Policy policy = canonical_optimal_policy(sol);
    const SuccessorFeatures sf = successor_features(env, features, policy);
    const HalfspaceSet minimal = minimal_arp(env, features, w);

    ActionQueryTest test;
    test.source = ActionQueryTest::Source::SCOT;
    if (minimal.empty()) return test;

    // candidate starts: the support of the initial distribution, or every
    // non-terminal state when the support is a single state
    std::vector<int> starts;
    for (int s = 0; s < env.n_states; ++s)
        if (env.initial_dist[s] > 1e-12) starts.push_back(s);
    if (starts.size() == 1) {
        starts.clear();
        for (int s = 0; s < env.n_states; ++s)
            if (!env.is_terminal(s)) starts.push_back(s);
    }

    Rng rng(rng_seed);
    std::vector<Trajectory> candidates;
    for (int s : starts)
        for (int i = 0; i < m; ++i)
            candidates.push_back(rollout(env, policy, s, horizon, rng));

    // coverage: constraint indices whose normals the trajectory's (s, a, b)
    // half-spaces reproduce within the dedup threshold
    const auto coverage_of = [&](const Trajectory& traj) {
        std::vector<bool> mask(static_cast<std::size_t>(minimal.size()), false);
        for (std::size_t t = 0; t < traj.actions.size(); ++t) {
            const int s = traj.states[t];
            const int a = traj.actions[t];
            for (int b = 0; b < env.n_actions; ++b) {
                if (sol.is_optimal(s, b)) continue;
                Vector normal = sf.row(s, a) - sf.row(s, b);
                const double norm = normal.norm();
                if (norm <= 1e-9) continue;
                normal /= norm;
                for (int c = 0; c < minimal.size(); ++c)
                    if (1.0 - minimal.rows[static_cast<std::size_t>(c)].normal.dot(normal) <
                        kDedupCosineThreshold)
                        mask[static_cast<std::size_t>(c)] = true;
            }
        }
        return mask;
    };

    std::vector<std::vector<bool>> coverage;
    coverage.reserve(candidates.size());
    for (const auto& traj : candidates) coverage.push_back(coverage_of(traj));

    std::vector<bool> covered(static_cast<std::size_t>(minimal.size()), false);
    std::vector<std::size_t> picks;
    while (std::find(covered.begin(), covered.end(), false) != covered.end()) {
        std::size_t best = 0;
        int best_new = 0;
        for (std::size_t c = 0; c < candidates.size(); ++c) {
            int fresh = 0;
            for (std::size_t i = 0; i < covered.size(); ++i)
                if (!covered[i] && coverage[c][i]) ++fresh;
            if (fresh > best_new) {
                best_new = fresh;
                best = c;
            }
        }
        if (best_new == 0) {
            test.cover_complete = false; // uncoverable constraints remain
            break;
        }
        picks.push_back(best);
        for (std::size_t i = 0; i < covered.size(); ++i)
            if (coverage[best][i]) covered[i] = true;
    }

    for (std::size_t p : picks)
        for (int s : candidates[p].states) {
            if (std::find(test.states.begin(), test.states.end(), s) != test.states.end()) continue;
            test.states.push_back(s);
            test.acceptable.push_back(sol.optimal_sets[static_cast<std::size_t>(s)]);
        }
    return test;
}

/// Draws queries_per_state actions at every probe state; any answer outside
/// the acceptable set fails the test.
inline Verdict administer_action_test(const ActionQueryTest& test, const Agent& agent,
                                      int queries_per_state, Rng& rng) {
    if (!agent.supports(Capability::ActionQuery))
        throw UnsupportedQueryError("administer_action_test: agent lacks action queries");
    Verdict verdict;
    for (int i = 0; i < test.size(); ++i) {
        const int s = test.states[static_cast<std::size_t>(i)];
        const auto& ok = test.acceptable[static_cast<std::size_t>(i)];
        for (int q = 0; q < queries_per_state; ++q) {
            ++verdict.queries_used;
            const int a = agent.action_query(s, rng);
            if (std::find(ok.begin(), ok.end(), a) == ok.end()) {
                std::string expected = "{";
                for (std::size_t j = 0; j < ok.size(); ++j)
                    expected += (j ? "," : "") + std::to_string(ok[j]);
                expected += "}";
                verdict.fail("state " + std::to_string(s), "action " + std::to_string(a),
                             expected);
            }
        }
    }
    return verdict;
}

struct BruteForceResult {
    std::optional<ActionQueryTest> test; // empty when no subset met the bound
    int misaligned_policies = 0;
    double worst_pass_probability = 1.0;
    // optimal-set profiles of the sampled misaligned policies, for external
    // verification of the search
    std::vector<std::vector<std::vector<int>>> misaligned_sets;
};

/// Desk-scale search for the smallest action-query test with false-positive
/// rate below delta_fpr against sampled misaligned rational policies
/// (breadth-first over probe subsets by size, capped at 6 probes). Detection
/// probabilities are Monte Carlo ratios over sampled action draws.
inline BruteForceResult brute_force_test_search(const Environment& env, const FeatureMap& features,
                                                const RewardWeights& w, double epsilon,
                                                double delta_fpr, int reward_sample_count,
                                                int rollouts_per_state, std::uint64_t rng_seed) {
    require(epsilon >= 0.0 && delta_fpr > 0.0, "brute_force_test_search: bad thresholds");
    const QSolution sol = solve_mdp(env, features, w);
    const int n = env.n_states;

    // epsilon-acceptable actions under the tester: Q-gap at most epsilon
    std::vector<std::vector<int>> acceptable(static_cast<std::size_t>(n));
    for (int s = 0; s < n; ++s)
        for (int a = 0; a < env.n_actions; ++a)
            if (sol.v[s] - sol.q(s, a) <= epsilon + optimal_action_tolerance(sol.v[s]))
                acceptable[static_cast<std::size_t>(s)].push_back(a);

    // sample candidate rewards, keep the epsilon-misaligned rational policies
    Rng rng(rng_seed);
    std::vector<std::vector<std::vector<int>>> misaligned_sets; // optimal sets per policy
    const Vector r_true = features.phi * w.w;
    std::vector<std::vector<std::vector<int>>> seen_profiles;
    for (int i = 0; i < reward_sample_count; ++i) {
        const Vector cand = rng.unit_vector(features.k());
        const QSolution cand_sol = solve_mdp(env, features, RewardWeights{cand});
        if (std::find(seen_profiles.begin(), seen_profiles.end(), cand_sol.optimal_sets) !=
            seen_profiles.end())
            continue;
        seen_profiles.push_back(cand_sol.optimal_sets);
        const double gap =
            policy_value_gap(env, r_true, sol.v, canonical_optimal_policy(cand_sol));
        if (gap > epsilon) misaligned_sets.push_back(cand_sol.optimal_sets);
    }

    BruteForceResult result;
    result.misaligned_policies = static_cast<int>(misaligned_sets.size());
    result.misaligned_sets = misaligned_sets;

    const auto make_test = [&](const std::vector<int>& subset) {
        ActionQueryTest test;
        test.source = ActionQueryTest::Source::BRUTE;
        for (int s : subset) {
            test.states.push_back(s);
            test.acceptable.push_back(acceptable[static_cast<std::size_t>(s)]);
        }
        return test;
    };

    if (misaligned_sets.empty()) {
        result.test = make_test({});
        result.worst_pass_probability = 0.0;
        return result;
    }

    // detection probability per (policy, state): the ratio of sampled actions
    // whose Q-gap under the tester exceeds epsilon
    Matrix detect(static_cast<Eigen::Index>(misaligned_sets.size()), n);
    for (std::size_t p = 0; p < misaligned_sets.size(); ++p)
        for (int s = 0; s < n; ++s) {
            const auto& support = misaligned_sets[p][static_cast<std::size_t>(s)];
            const auto& ok = acceptable[static_cast<std::size_t>(s)];
            int hits = 0;
            for (int i = 0; i < rollouts_per_state; ++i) {
                const int a = support[static_cast<std::size_t>(rng.below(static_cast<int>(support.size())))];
                if (std::find(ok.begin(), ok.end(), a) == ok.end()) ++hits;
            }
            detect(static_cast<Eigen::Index>(p), s) =
                static_cast<double>(hits) / static_cast<double>(rollouts_per_state);
        }

    const auto worst_pass = [&](const std::vector<int>& subset) {
        double worst = 0.0;
        for (Eigen::Index p = 0; p < detect.rows(); ++p) {
            double pass = 1.0;
            for (int s : subset) pass *= 1.0 - detect(p, s);
            worst = std::max(worst, pass);
        }
        return worst;
    };

    // breadth-first over subset sizes
    const int max_size = std::min(6, n);
    std::vector<int> subset;
    for (int size = 1; size <= max_size; ++size) {
        subset.assign(static_cast<std::size_t>(size), 0);
        for (int i = 0; i < size; ++i) subset[static_cast<std::size_t>(i)] = i;
        while (true) {
            const double pass = worst_pass(subset);
            if (pass < delta_fpr) {
                result.test = make_test(subset);
                result.worst_pass_probability = pass;
                return result;
            }
            // next combination in lexicographic order
            int i = size - 1;
            while (i >= 0 && subset[static_cast<std::size_t>(i)] == n - size + i) --i;
            if (i < 0) break;
            ++subset[static_cast<std::size_t>(i)];
            for (int j = i + 1; j < size; ++j)
                subset[static_cast<std::size_t>(j)] = subset[static_cast<std::size_t>(j - 1)] + 1;
        }
    }
    return result; // no test within the size cap
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

inline json action_test_to_json(const ActionQueryTest& test) {
    return json{{"source", to_string(test.source)},
                {"states", test.states},
                {"acceptable", test.acceptable},
                {"cover_complete", test.cover_complete}};
}

inline ActionQueryTest action_test_from_json(const json& j) {
    ActionQueryTest test;
    const auto src = j.at("source").get<std::string>();
    if (src == "cs") test.source = ActionQueryTest::Source::CS;
    else if (src == "arp_bb") test.source = ActionQueryTest::Source::ARP_BB;
    else if (src == "scot") test.source = ActionQueryTest::Source::SCOT;
    else test.source = ActionQueryTest::Source::BRUTE;
    test.states = j.at("states").get<std::vector<int>>();
    test.acceptable = j.at("acceptable").get<std::vector<std::vector<int>>>();
    test.cover_complete = j.value("cover_complete", true);
    return test;
}

} // namespace vav
