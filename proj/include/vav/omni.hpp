#pragma once

#include "vav/common.hpp"
#include "vav/environment.hpp"
#include "vav/mdp.hpp"
#include "vav/rng.hpp"

#include <string>
#include <vector>

namespace vav {

/// Affine normalization of a reward table onto [0, 1]: the best state maps to
/// 1, the worst to 0. Constant rewards have no canonical form and are
/// rejected.
inline Vector canonicalize(const Vector& raw) {
    require(raw.allFinite(), "canonicalize: non-finite reward");
    const double lo = raw.minCoeff();
    const double hi = raw.maxCoeff();
    require(hi - lo > 1e-12 * (1.0 + std::abs(hi)),
            "canonicalize: constant reward has no canonical form");
    return (raw.array() - lo) / (hi - lo);
}

/// The two-environment gamble test: in both environments action a1 self-loops
/// and action a2 gambles between the best and worst states, with success
/// probabilities alpha^L (pessimistic) in env_l and alpha^U (optimistic) in
/// env_u. A rational agent within the epsilon band self-loops everywhere in
/// env_l and gambles everywhere in env_u.
struct OmniTest {
    Environment env_l;
    Environment env_u;
    int s_min = 0;
    int s_max = 0;
    double epsilon = 0.0;
    double gamma = 0.0;
    Vector canonical; // [R] of the tester
    bool two_state = false;
};

inline constexpr int kOmniSelf = 0;   // a1
inline constexpr int kOmniGamble = 1; // a2

namespace detail {

inline Environment gamble_environment(int n, double gamma, int s_min, int s_max,
                                      const Vector& alpha) {
    Environment env;
    env.n_states = n;
    env.n_actions = 2;
    env.gamma = gamma;
    env.initial_dist = Vector::Constant(n, 1.0 / n);
    env.transitions.assign(2, Matrix::Zero(n, n));
    for (int s = 0; s < n; ++s) {
        env.transitions[kOmniSelf](s, s) = 1.0;
        if (s == s_min || s == s_max) {
            env.transitions[kOmniGamble](s, s) = 1.0;
        } else {
            env.transitions[kOmniGamble](s, s_max) = alpha[s];
            env.transitions[kOmniGamble](s, s_min) = 1.0 - alpha[s];
        }
    }
    env.validate();
    return env;
}

} // namespace detail

inline OmniTest build_omni_test(const Vector& raw, double epsilon, double gamma) {
    require(gamma >= 0.0 && gamma < 1.0, "build_omni_test: gamma must be in [0,1)");
    require(epsilon >= 0.0, "build_omni_test: epsilon must be nonnegative");
    const double slack = epsilon * (1.0 - gamma) / 2.0;
    require(slack < 0.5, "build_omni_test: requires epsilon*(1-gamma)/2 < 0.5");

    OmniTest test;
    test.epsilon = epsilon;
    test.gamma = gamma;
    test.canonical = canonicalize(raw);
    const int n = static_cast<int>(raw.size());
    for (int s = 0; s < n; ++s) {
        if (test.canonical[s] > test.canonical[test.s_max]) test.s_max = s;
        if (test.canonical[s] < test.canonical[test.s_min]) test.s_min = s;
    }

    if (n == 2) {
        // degenerate case: a single comparison environment where a1 always
        // leads to the worst state and a2 to the best
        test.two_state = true;
        Environment env;
        env.n_states = 2;
        env.n_actions = 2;
        env.gamma = gamma;
        env.initial_dist = Vector::Constant(2, 0.5);
        env.transitions.assign(2, Matrix::Zero(2, 2));
        for (int s = 0; s < 2; ++s) {
            env.transitions[kOmniSelf](s, test.s_min) = 1.0;
            env.transitions[kOmniGamble](s, test.s_max) = 1.0;
        }
        env.validate();
        test.env_l = env;
        test.env_u = std::move(env);
        return test;
    }

    Vector alpha_l(n), alpha_u(n);
    for (int s = 0; s < n; ++s) {
        alpha_l[s] = std::max(test.canonical[s] - slack, 0.0);
        alpha_u[s] = std::min(test.canonical[s] + slack, 1.0);
    }
    test.env_l = detail::gamble_environment(n, gamma, test.s_min, test.s_max, alpha_l);
    test.env_u = detail::gamble_environment(n, gamma, test.s_min, test.s_max, alpha_u);
    return test;
}

/// Checks the robot's full policies in the two test environments. The
/// required action must be in the policy's support at every checked state;
/// a rational robot submitting its tie-complete policy therefore passes
/// exactly when the required action is among its optimal actions.
inline bool verify_omni(const OmniTest& test, const Policy& policy_l, const Policy& policy_u) {
    const int n = test.env_l.n_states;
    require_dims(policy_l.action_probs.rows() == n && policy_u.action_probs.rows() == n &&
                     policy_l.action_probs.cols() == 2 && policy_u.action_probs.cols() == 2,
                 "verify_omni: policy shape mismatch");
    constexpr double kSupportTol = 1e-9;
    if (test.two_state) {
        for (int s = 0; s < n; ++s)
            if (policy_l.action_probs(s, kOmniGamble) <= kSupportTol ||
                policy_u.action_probs(s, kOmniGamble) <= kSupportTol)
                return false;
        return true;
    }
    for (int s = 0; s < n; ++s) {
        if (s == test.s_min || s == test.s_max) continue;
        if (policy_l.action_probs(s, kOmniSelf) <= kSupportTol) return false;
        if (policy_u.action_probs(s, kOmniGamble) <= kSupportTol) return false;
    }
    return true;
}

/// Query interface of the omnipotent setting: the robot reports a complete
/// policy for any supplied environment.
class OmniRobot {
public:
    virtual ~OmniRobot() = default;
    virtual Policy policy_in(const Environment& env) const = 0;
};

/// Simulated rational robot with a hidden state-reward table; it reports the
/// canonical optimal policy computed with the library solver.
class RationalOmniRobot : public OmniRobot {
public:
    explicit RationalOmniRobot(Vector rewards) : rewards_(std::move(rewards)) {}

    Policy policy_in(const Environment& env) const override {
        require_dims(static_cast<int>(rewards_.size()) == env.n_states,
                     "RationalOmniRobot: reward table does not match the environment");
        const auto sol =
            solve_mdp(env, FeatureMap::identity(env.n_states), RewardWeights{rewards_});
        return canonical_optimal_policy(sol);
    }

    const Vector& rewards() const { return rewards_; }

private:
    Vector rewards_;
};

/// Two policy queries, one verdict.
inline bool administer_omni(const OmniTest& test, const OmniRobot& robot) {
    return verify_omni(test, robot.policy_in(test.env_l), robot.policy_in(test.env_u));
}

// ---------------------------------------------------------------------------
// Family alignment oracle
// ---------------------------------------------------------------------------

struct FamilyCheckResult {
    bool aligned = false;
    double worst_gap = 0.0;
};

namespace detail {

inline Environment random_family_environment(int n_states, Rng& rng) {
    Environment env;
    env.n_states = n_states;
    env.n_actions = 2 + rng.below(4); // 2..5 actions
    env.gamma = rng.uniform(0.5, 0.99);
    env.initial_dist = Vector::Constant(n_states, 1.0 / n_states);
    env.transitions.assign(static_cast<std::size_t>(env.n_actions),
                           Matrix::Zero(n_states, n_states));
    for (int a = 0; a < env.n_actions; ++a)
        for (int s = 0; s < n_states; ++s) {
            const int support = 1 + rng.below(3);
            Vector probs = Vector::Zero(n_states);
            for (int i = 0; i < support; ++i) probs[rng.below(n_states)] += rng.uniform01() + 0.1;
            env.transitions[static_cast<std::size_t>(a)].row(s) = (probs / probs.sum()).transpose();
        }
    env.validate();
    return env;
}

} // namespace detail

/// Monte Carlo oracle for alignment across the environment family sharing the
/// state space: samples random environments, lets a rational robot optimize
/// its own reward, and measures the value gap under the tester's reward. Both
/// rewards are compared in canonical form so the verdict is scale-free.
inline FamilyCheckResult family_alignment_check(const Vector& r_true, const Vector& r_robot,
                                                double epsilon, int n_envs,
                                                std::uint64_t rng_seed) {
    require_dims(r_true.size() == r_robot.size(),
                 "family_alignment_check: rewards must share the state space");
    const Vector c_true = canonicalize(r_true);
    const Vector c_robot = canonicalize(r_robot);
    const int n = static_cast<int>(r_true.size());
    Rng rng(rng_seed);

    FamilyCheckResult result;
    for (int i = 0; i < n_envs; ++i) {
        const Environment env = detail::random_family_environment(n, rng);
        const FeatureMap identity = FeatureMap::identity(n);
        const auto sol_robot = solve_mdp(env, identity, RewardWeights{c_robot});
        const auto sol_true = solve_mdp(env, identity, RewardWeights{c_true});
        const double gap =
            policy_value_gap(env, c_true, sol_true.v, canonical_optimal_policy(sol_robot));
        result.worst_gap = std::max(result.worst_gap, gap);
    }
    result.aligned = result.worst_gap <= epsilon + 1e-9;
    return result;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

inline json omni_manifest_to_json(const OmniTest& test, const std::string& env_l_file,
                                  const std::string& env_u_file) {
    return json{{"kind", "omni"},
                {"s_min", test.s_min},
                {"s_max", test.s_max},
                {"epsilon", test.epsilon},
                {"gamma", test.gamma},
                {"canonical", vector_to_json(test.canonical)},
                {"two_state", test.two_state},
                {"env_l", env_l_file},
                {"env_u", env_u_file}};
}

inline OmniTest omni_test_from_parts(const json& manifest, Environment env_l, Environment env_u) {
    OmniTest test;
    test.s_min = manifest.at("s_min").get<int>();
    test.s_max = manifest.at("s_max").get<int>();
    test.epsilon = manifest.at("epsilon").get<double>();
    test.gamma = manifest.at("gamma").get<double>();
    test.canonical = vector_from_json(manifest.at("canonical"));
    test.two_state = manifest.value("two_state", false);
    test.env_l = std::move(env_l);
    test.env_u = std::move(env_u);
    return test;
}

} // namespace vav
