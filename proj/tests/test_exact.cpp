#include "vav/exact_tests.hpp"
#include "vav/gridworld.hpp"

#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace vav;
using Catch::Approx;

namespace {

/// Samples unit-sphere agents and labels them by the exact-alignment oracle:
/// gap of the canonical optimal policy under the tester's reward.
struct LabeledAgent {
    Vector w_prime;
    bool aligned = false;
};

std::vector<LabeledAgent> sample_labeled(const Environment& env, const FeatureMap& features,
                                         const RewardWeights& w, int n, Rng& rng) {
    const auto sol_true = solve_mdp(env, features, w);
    const Vector r_true = features.phi * w.w;
    std::vector<LabeledAgent> agents;
    for (int i = 0; i < n; ++i) {
        LabeledAgent agent;
        agent.w_prime = rng.unit_vector(features.k());
        const auto sol = solve_mdp(env, features, RewardWeights{agent.w_prime});
        const double gap =
            policy_value_gap(env, r_true, sol_true.v, canonical_optimal_policy(sol));
        agent.aligned = gap <= 1e-9;
        agents.push_back(std::move(agent));
    }
    return agents;
}

} // namespace

TEST_CASE("gen_weight_test: island test has two constraints and one query") {
    const auto world = builtin_env("island");
    const auto test = gen_weight_test(world.env, world.features, world.weights);
    const auto& payload = std::get<WeightTest>(test.payload);
    REQUIRE(payload.constraints.size() == 2);

    RationalAgent aligned(world.env, world.features, world.weights.w);
    const auto verdict = administer(test, aligned);
    REQUIRE(verdict.passed);
    REQUIRE(verdict.queries_used == 1);

    RationalAgent flipped(world.env, world.features, -world.weights.w);
    const auto bad = administer(test, flipped);
    REQUIRE_FALSE(bad.passed);
    REQUIRE(!bad.failures.empty());
}

TEST_CASE("gen_weight_test: trivial reward degenerates to a pass-everything test") {
    auto world = gen_random_gridworld(3, 3, 3, 70);
    const auto test = gen_weight_test(world.env, world.features, RewardWeights{Vector::Zero(3)});
    REQUIRE(std::get<WeightTest>(test.payload).constraints.empty());
    Rng rng(71);
    RationalAgent any(world.env, world.features, rng.unit_vector(3));
    REQUIRE(administer(test, any).passed);
}

TEST_CASE("weight test separates aligned from misaligned rational agents") {
    auto world = gen_random_gridworld(8, 8, 4, 88);
    Rng rng(89);
    const RewardWeights w{rng.unit_vector(4)};
    const auto test = gen_weight_test(world.env, world.features, w);

    const auto agents = sample_labeled(world.env, world.features, w, 50, rng);
    int misaligned_seen = 0;
    for (const auto& agent : agents) {
        RationalAgent rational(world.env, world.features, agent.w_prime);
        const bool passed = administer(test, rational).passed;
        REQUIRE(passed == agent.aligned);
        if (!agent.aligned) ++misaligned_seen;
    }
    REQUIRE(misaligned_seen >= 40); // random agents are overwhelmingly misaligned
}

TEST_CASE("gen_reward_sample_test: basis sizes") {
    SECTION("one-hot features: rank equals k") {
        auto world = gen_random_gridworld(3, 3, 3, 91);
        REQUIRE(gen_reward_sample_test(world.features).size() == 3);
    }
    SECTION("duplicated feature column reduces the query count to the rank") {
        Matrix phi(4, 3);
        phi << 1, 1, 0,
               0, 0, 1,
               1, 1, 1,
               0, 0, 0; // col 1 duplicates col 0
        const auto states = gen_reward_sample_test(FeatureMap{phi});
        REQUIRE(states.size() == 2);
    }
    SECTION("island: three indicator features give one state per color") {
        const auto world = builtin_env("island");
        const auto states = gen_reward_sample_test(world.features);
        REQUIRE(states.size() == 3);
        std::set<char> labels;
        for (int s : states) labels.insert(world.grid.label(s));
        REQUIRE(labels == std::set<char>{'G', '.', 'B'});
    }
}

TEST_CASE("recover_w_from_rewards: noiseless recovery and membership equivalence") {
    auto world = gen_random_gridworld(5, 5, 4, 92);
    Rng rng(93);
    const RewardWeights w{rng.unit_vector(4)};
    const auto constraints = minimal_arp(world.env, world.features, w);
    const auto states = gen_reward_sample_test(world.features);

    for (int trial = 0; trial < 20; ++trial) {
        const Vector hidden = rng.unit_vector(4);
        std::vector<std::pair<int, double>> samples;
        for (int s : states) samples.emplace_back(s, world.features.row(s).dot(hidden));
        const auto recovered = recover_w_from_rewards(samples, world.features);
        // exact for noiseless rational answers
        for (int s : states)
            REQUIRE(world.features.row(s).dot(recovered.w) ==
                    Approx(world.features.row(s).dot(hidden)).margin(1e-9));
        REQUIRE(arp_membership(constraints, recovered.w) == arp_membership(constraints, hidden));
    }
}

TEST_CASE("recover_w_from_rewards: zero samples recover the zero reward") {
    auto world = gen_random_gridworld(4, 4, 3, 94);
    Rng rng(95);
    const auto constraints = minimal_arp(world.env, world.features, RewardWeights{rng.unit_vector(3)});
    std::vector<std::pair<int, double>> samples;
    for (int s : gen_reward_sample_test(world.features)) samples.emplace_back(s, 0.0);
    const auto recovered = recover_w_from_rewards(samples, world.features);
    REQUIRE(recovered.w.norm() == Approx(0.0).margin(1e-12));
    REQUIRE_FALSE(arp_membership(constraints, recovered.w));
}

TEST_CASE("recover_w_from_rewards: tiny noise leaves the verdict unchanged") {
    auto world = gen_random_gridworld(5, 4, 4, 96);
    Rng rng(97);
    const RewardWeights w{rng.unit_vector(4)};
    const auto constraints = minimal_arp(world.env, world.features, w);
    const auto states = gen_reward_sample_test(world.features);

    for (int trial = 0; trial < 50; ++trial) {
        const Vector hidden = rng.unit_vector(4);
        std::vector<std::pair<int, double>> clean, noisy;
        for (int s : states) {
            const double r = world.features.row(s).dot(hidden);
            clean.emplace_back(s, r);
            noisy.emplace_back(s, r + 1e-6 * rng.normal());
        }
        const bool verdict_clean =
            arp_membership(constraints, recover_w_from_rewards(clean, world.features).w);
        const bool verdict_noisy =
            arp_membership(constraints, recover_w_from_rewards(noisy, world.features).w);
        REQUIRE(verdict_clean == verdict_noisy);
    }
}

TEST_CASE("recover_w_from_rewards: under-determined samples are rejected with a direction") {
    auto world = gen_random_gridworld(3, 3, 3, 98);
    const auto states = gen_reward_sample_test(world.features);
    REQUIRE(states.size() == 3);
    std::vector<std::pair<int, double>> samples = {{states[0], 1.0}}; // misses two directions
    REQUIRE_THROWS_AS(recover_w_from_rewards(samples, world.features), UnderdeterminedError);
    try {
        recover_w_from_rewards(samples, world.features);
    } catch (const UnderdeterminedError& e) {
        REQUIRE(std::string(e.what()).find("missing feature direction") != std::string::npos);
    }
}

TEST_CASE("value query test: reconstruction, bounds, and administration") {
    auto world = gen_random_gridworld(6, 5, 4, 101);
    Rng rng(102);
    const RewardWeights w{rng.unit_vector(4)};
    const auto test = make_value_query_test(world.env, world.features, w);
    const auto& payload = std::get<ValueQueryTest>(test.payload);

    const int d_max = max_transition_degree(world.env);
    REQUIRE(d_max == 1); // deterministic gridworld

    const Vector hidden = rng.unit_vector(4);
    RationalAgent agent(world.env, world.features, hidden);
    const auto verdict = administer(test, agent);
    REQUIRE(verdict.queries_used <= 4 * (d_max + 1));
    REQUIRE(verdict.passed == arp_membership(payload.constraints, hidden));

    // Bellman-identity reconstruction matches the hidden reward exactly
    std::vector<ValueProbeAnswer> answers;
    for (const auto& probe : payload.probes) {
        ValueProbeAnswer ans;
        ans.q_value = agent.q_value_query(probe.s, probe.a);
        for (const auto& [sp, p] : probe.successors) ans.successor_values.push_back(agent.value_query(sp));
        answers.push_back(std::move(ans));
    }
    const auto recovered = recover_w_from_values(payload, answers);
    for (int s = 0; s < world.env.n_states; ++s)
        REQUIRE(world.features.row(s).dot(recovered.w) ==
                Approx(world.features.row(s).dot(hidden)).margin(1e-8));
}

TEST_CASE("value query test respects the k(d_max+1) bound on stochastic environments") {
    Rng rng(103);
    const auto env = oracle::random_environment(9, 3, 0.9, rng, /*max_support=*/4);
    const auto features = oracle::random_features(9, 4, rng);
    const auto test = gen_value_query_test(env, features);
    const int d_max = max_transition_degree(env);

    int queries = 0;
    for (const auto& probe : test.probes) queries += 1 + static_cast<int>(probe.successors.size());
    REQUIRE(queries <= 4 * (d_max + 1));
}

TEST_CASE("gen_preference_test: island emits the two figure queries") {
    const auto world = builtin_env("island");
    const auto test = gen_preference_test(world.env, world.features, world.weights, 42);
    const auto& payload = std::get<PreferenceTest>(test.payload);
    REQUIRE(payload.pairs.size() == 2);

    // no identical pairs, nonzero normals
    for (const auto& pair : payload.pairs) {
        REQUIRE(pair.first.states != pair.second.states);
        REQUIRE((pair.phi_first - pair.phi_second).norm() > 1e-9);
    }

    // one query separates goal-seeking from wandering on white cells, the
    // other separates white paths from blue paths
    bool goal_query = false, water_query = false;
    for (const auto& pair : payload.pairs) {
        const auto count = [&](const Trajectory& t, char label) {
            int c = 0;
            for (int s : t.states)
                if (world.grid.label(s) == label) ++c;
            return c;
        };
        const int good_blue = count(pair.first, 'B');
        const int bad_blue = count(pair.second, 'B');
        const int good_goal = count(pair.first, 'G');
        const int bad_goal = count(pair.second, 'G');
        if (good_blue < bad_blue) water_query = true;
        if (good_goal > bad_goal && good_blue == bad_blue) goal_query = true;
    }
    REQUIRE(goal_query);
    REQUIRE(water_query);

    RationalAgent aligned(world.env, world.features, world.weights.w);
    REQUIRE(administer(test, aligned).passed);
    RationalAgent flipped(world.env, world.features, -world.weights.w);
    REQUIRE_FALSE(administer(test, flipped).passed);
}

TEST_CASE("gen_preference_test: stochastic environments need a Monte Carlo count") {
    Rng rng(104);
    const auto env = oracle::random_environment(6, 2, 0.9, rng);
    const auto features = oracle::random_features(6, 3, rng);
    const Vector w = rng.unit_vector(3);
    REQUIRE_THROWS_AS(gen_preference_test(env, features, RewardWeights{w}, 1), Error);
    // with averaging it generates and the aligned agent passes
    const auto test = gen_preference_test(env, features, RewardWeights{w}, 1, /*mc_rollouts=*/256);
    RationalAgent aligned(env, features, w);
    REQUIRE(administer(test, aligned).passed);
}

TEST_CASE("preference-consistent rewards lie inside the ARP cone") {
    for (std::uint64_t seed : {11u, 12u}) {
        auto world = gen_random_gridworld(5, 4, 4, seed);
        Rng rng(seed + 500);
        const RewardWeights w{rng.unit_vector(4)};
        const auto arp = minimal_arp(world.env, world.features, w);
        const auto test = gen_preference_test(world.env, world.features, w, seed);
        const auto& payload = std::get<PreferenceTest>(test.payload);

        Rng probe_rng(seed + 600);
        for (int i = 0; i < 1000; ++i) {
            const Vector v = probe_rng.unit_vector(4);
            bool consistent = true;
            for (const auto& pair : payload.pairs)
                if (v.dot(pair.phi_first - pair.phi_second) <= kPreferenceTieTol) {
                    consistent = false;
                    break;
                }
            if (consistent) REQUIRE(arp_membership(arp, v));
        }
    }
}

TEST_CASE("zero false negatives across all exact test kinds") {
    auto world = gen_random_gridworld(6, 5, 4, 110);
    Rng rng(111);
    const RewardWeights w{rng.unit_vector(4)};
    const auto arp = minimal_arp(world.env, world.features, w);

    const auto weight_test = gen_weight_test(world.env, world.features, w);
    const auto reward_test = make_reward_sample_test(world.env, world.features, w);
    const auto value_test = make_value_query_test(world.env, world.features, w);
    const auto pref_test = gen_preference_test(world.env, world.features, w, 112);

    // positively-scaled and convexly-perturbed-within-cone candidates
    std::vector<Vector> insiders;
    for (double c : {0.5, 2.0, 10.0}) insiders.push_back(c * w.w);
    while (insiders.size() < 50) {
        const Vector cand = (w.w + 0.25 * rng.gaussian(4)).normalized();
        if (arp_membership(arp, cand)) insiders.push_back(cand);
    }

    for (const auto& w_prime : insiders) {
        RationalAgent agent(world.env, world.features, w_prime);
        REQUIRE(administer(weight_test, agent).passed);
        REQUIRE(administer(reward_test, agent).passed);
        REQUIRE(administer(value_test, agent).passed);
        REQUIRE(administer(pref_test, agent).passed);
    }
}

TEST_CASE("random preference constraints shrink toward the ARP cone") {
    // machine-generated trajectory pairs labeled by the tester's reward: the
    // excess volume outside the ARP decays quickly as constraints accumulate
    auto world = gen_random_gridworld(4, 4, 3, 120);
    Rng rng(121);
    const RewardWeights w{rng.unit_vector(3)};
    const auto arp = minimal_arp(world.env, world.features, w);
    const int horizon = default_horizon(world.env.gamma, world.env.n_states);

    Policy uniform{Matrix::Constant(world.env.n_states, world.env.n_actions,
                                    1.0 / world.env.n_actions)};
    std::vector<Vector> normals;
    for (int i = 0; i < 512; ++i) {
        const int s1 = rng.below(world.env.n_states);
        const int s2 = rng.below(world.env.n_states);
        const auto t1 = rollout(world.env, uniform, s1, horizon, rng, false);
        const auto t2 = rollout(world.env, uniform, s2, horizon, rng, false);
        const Vector d = trajectory_features(t1, world.features, world.env.gamma) -
                         trajectory_features(t2, world.features, world.env.gamma);
        if (d.norm() <= 1e-9) continue;
        normals.push_back(w.w.dot(d) >= 0 ? d.normalized() : Vector(-d.normalized()));
    }

    const auto excess_fraction = [&](std::size_t n_constraints) {
        Rng probe_rng(122);
        int inside_induced = 0, excess = 0;
        for (int i = 0; i < 2000; ++i) {
            const Vector v = probe_rng.unit_vector(3);
            bool ok = true;
            for (std::size_t c = 0; c < n_constraints && ok; ++c)
                if (normals[c].dot(v) <= kStrictTol) ok = false;
            if (!ok) continue;
            ++inside_induced;
            if (!arp_membership(arp, v)) ++excess;
        }
        return inside_induced == 0 ? 0.0 : static_cast<double>(excess) / 2000.0;
    };

    const double e8 = excess_fraction(8);
    const double e64 = excess_fraction(64);
    const double e512 = excess_fraction(std::min<std::size_t>(512, normals.size()));
    REQUIRE(e64 <= e8 + 1e-12);
    REQUIRE(e512 <= e64 + 1e-12);
    REQUIRE(e512 <= 0.5 * e8 + 0.005);
}

TEST_CASE("alignment test JSON round trips") {
    const auto world = builtin_env("island");
    Rng rng(130);

    const auto tests = {gen_weight_test(world.env, world.features, world.weights),
                        make_reward_sample_test(world.env, world.features, world.weights),
                        make_value_query_test(world.env, world.features, world.weights),
                        gen_preference_test(world.env, world.features, world.weights, 131)};
    RationalAgent agent(world.env, world.features, world.weights.w);
    RationalAgent opponent(world.env, world.features, rng.unit_vector(3));
    for (const auto& test : tests) {
        const auto round = alignment_test_from_json(alignment_test_to_json(test));
        REQUIRE(round.kind() == test.kind());
        REQUIRE(administer(round, agent).passed == administer(test, agent).passed);
        REQUIRE(administer(round, opponent, 7).passed == administer(test, opponent, 7).passed);
    }
}
