#pragma once

#include "vav/common.hpp"
#include "vav/environment.hpp"
#include "vav/mdp.hpp"
#include "vav/rng.hpp"

namespace vav {

enum class Capability { Weight, RewardSample, ValueQuery, Preference, ActionQuery };

enum class PreferenceAnswer { First, Second, Indifferent };

/// A pairwise trajectory comparison. Feature totals are always present;
/// trajectories are attached when available so interactive agents can render
/// them.
struct PreferenceQuery {
    Vector phi_first;
    Vector phi_second;
    const Trajectory* traj_first = nullptr;
    const Trajectory* traj_second = nullptr;
};

/// Query surface of the agent under test. Handlers throw
/// UnsupportedQueryError unless the agent advertises the capability.
class Agent {
public:
    virtual ~Agent() = default;

    virtual bool supports(Capability) const = 0;

    virtual Vector weight_query() const { throw UnsupportedQueryError("weight_query"); }
    virtual double reward_query(int) const { throw UnsupportedQueryError("reward_query"); }
    virtual double value_query(int) const { throw UnsupportedQueryError("value_query"); }
    virtual double q_value_query(int, int) const { throw UnsupportedQueryError("q_value_query"); }
    virtual PreferenceAnswer preference_query(const PreferenceQuery&) const {
        throw UnsupportedQueryError("preference_query");
    }
    virtual int action_query(int, Rng&) const { throw UnsupportedQueryError("action_query"); }
};

/// Exact ties in a preference comparison are reported as Indifferent.
inline constexpr double kPreferenceTieTol = 1e-12;

/// Agent that is rational with respect to a hidden weight vector: every
/// answer is consistent with the optimal Q-function under w', and action
/// queries sample uniformly from the optimal action set.
class RationalAgent : public Agent {
public:
    RationalAgent(Environment env, FeatureMap features, Vector w_prime)
        : env_(std::move(env)), features_(std::move(features)), w_(std::move(w_prime)),
          solution_(solve_mdp(env_, features_, RewardWeights{w_})) {}

    bool supports(Capability) const override { return true; }

    Vector weight_query() const override { return w_; }

    double reward_query(int s) const override { return features_.row(s).dot(w_); }

    double value_query(int s) const override { return solution_.v[s]; }

    double q_value_query(int s, int a) const override { return solution_.q(s, a); }

    PreferenceAnswer preference_query(const PreferenceQuery& q) const override {
        const double gap = w_.dot(q.phi_first - q.phi_second);
        if (std::abs(gap) < kPreferenceTieTol) return PreferenceAnswer::Indifferent;
        return gap > 0.0 ? PreferenceAnswer::First : PreferenceAnswer::Second;
    }

    int action_query(int s, Rng& rng) const override {
        const auto& set = solution_.optimal_sets[static_cast<std::size_t>(s)];
        return set[static_cast<std::size_t>(rng.below(static_cast<int>(set.size())))];
    }

    const Vector& hidden_weights() const { return w_; }
    const QSolution& solution() const { return solution_; }
    Policy canonical_policy() const { return canonical_optimal_policy(solution_); }

private:
    Environment env_;
    FeatureMap features_;
    Vector w_;
    QSolution solution_;
};

/// Black-box policy that picks actions uniformly at random; answers nothing
/// else. The impossibility baseline for action-query tests.
class UniformRandomAgent : public Agent {
public:
    explicit UniformRandomAgent(int n_actions) : n_actions_(n_actions) {}

    bool supports(Capability c) const override { return c == Capability::ActionQuery; }

    int action_query(int, Rng& rng) const override { return rng.below(n_actions_); }

private:
    int n_actions_;
};

} // namespace vav
