#pragma once

#include "vav/common.hpp"
#include "vav/environment.hpp"
#include "vav/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace vav {

/// Optimal state-action values plus the per-state optimal action sets
/// A_R(s) = { a : q(s,a) >= v(s) - tol_q }.
struct QSolution {
    Matrix q;                                  // (n_states, n_actions)
    Vector v;                                  // (n_states)
    std::vector<std::vector<int>> optimal_sets;

    bool is_optimal(int s, int a) const {
        const auto& set = optimal_sets[static_cast<std::size_t>(s)];
        return std::find(set.begin(), set.end(), a) != set.end();
    }
};

struct SuccessorFeatures {
    std::vector<Matrix> phi_sa; // phi_sa[a].row(s) = Phi_pi^{(s,a)}

    Vector row(int s, int a) const { return phi_sa[static_cast<std::size_t>(a)].row(s).transpose(); }
};

struct SolveOptions {
    double vi_tol = 1e-12;
    int max_sweeps = 100000;
};

inline double optimal_action_tolerance(double v_s) {
    return 1e-6 * (1.0 + std::abs(v_s));
}

namespace detail {

inline std::vector<std::vector<int>> optimal_sets_from_q(const Matrix& q, const Vector& v) {
    std::vector<std::vector<int>> sets(static_cast<std::size_t>(q.rows()));
    for (int s = 0; s < q.rows(); ++s) {
        const double tol = optimal_action_tolerance(v[s]);
        for (int a = 0; a < q.cols(); ++a)
            if (q(s, a) >= v[s] - tol) sets[static_cast<std::size_t>(s)].push_back(a);
    }
    return sets;
}

inline Matrix policy_transition_matrix(const Environment& env, const Policy& policy) {
    Matrix p = Matrix::Zero(env.n_states, env.n_states);
    for (int a = 0; a < env.n_actions; ++a)
        p += policy.action_probs.col(a).asDiagonal() * env.transitions[static_cast<std::size_t>(a)];
    return p;
}

inline Matrix deterministic_transition_matrix(const Environment& env, const std::vector<int>& actions) {
    Matrix p(env.n_states, env.n_states);
    for (int s = 0; s < env.n_states; ++s)
        p.row(s) = env.transitions[static_cast<std::size_t>(actions[static_cast<std::size_t>(s)])].row(s);
    return p;
}

} // namespace detail

/// Exact V^pi for state rewards r, by solving (I - gamma P_pi) v = r.
inline Vector policy_evaluation(const Environment& env, const Vector& rewards, const Policy& policy) {
    require_dims(rewards.size() == env.n_states, "policy_evaluation: reward size mismatch");
    require_dims(policy.action_probs.rows() == env.n_states &&
                     policy.action_probs.cols() == env.n_actions,
                 "policy_evaluation: policy shape mismatch");
    const Matrix p_pi = detail::policy_transition_matrix(env, policy);
    const Matrix lhs = Matrix::Identity(env.n_states, env.n_states) - env.gamma * p_pi;
    return lhs.partialPivLu().solve(rewards);
}

/// Solves for optimal Q under R(s) = w . phi(s). Value iteration is used to
/// warm-start an exact policy-iteration refinement, so the returned values
/// satisfy the Bellman optimality equation to linear-solver precision.
inline QSolution solve_mdp(const Environment& env, const FeatureMap& features,
                           const RewardWeights& w, const SolveOptions& opts = {}) {
    require_dims(features.phi.rows() == env.n_states,
                 "solve_mdp: feature rows must equal n_states");
    require_dims(features.phi.cols() == w.w.size(), "solve_mdp: weight length must equal k");
    const int n = env.n_states;
    const int na = env.n_actions;
    const Vector r = features.phi * w.w;

    // Value-iteration phase: sup-norm threshold, with an early hand-off once
    // the greedy policy stops changing (the refinement below is exact either way).
    Matrix q = Matrix::Zero(n, na);
    std::vector<int> greedy(static_cast<std::size_t>(n), 0);
    int stable_sweeps = 0;
    bool warmed = false;
    for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
        const Vector v = q.rowwise().maxCoeff();
        Matrix q_next(n, na);
        for (int a = 0; a < na; ++a)
            q_next.col(a) = r + env.gamma * (env.transitions[static_cast<std::size_t>(a)] * v);
        const double diff = (q_next - q).cwiseAbs().maxCoeff();
        q = std::move(q_next);

        std::vector<int> g(static_cast<std::size_t>(n));
        for (int s = 0; s < n; ++s) {
            int best = 0;
            for (int a = 1; a < na; ++a)
                if (q(s, a) > q(s, best)) best = a;
            g[static_cast<std::size_t>(s)] = best;
        }
        stable_sweeps = (g == greedy) ? stable_sweeps + 1 : 0;
        greedy = std::move(g);

        if (diff <= opts.vi_tol || stable_sweeps >= 25) {
            warmed = true;
            break;
        }
    }
    if (!warmed)
        throw ConvergenceError("solve_mdp: value iteration hit the sweep cap; "
                               "gamma may be too close to 1");

    // Policy-iteration refinement with exact policy evaluation.
    const Matrix identity = Matrix::Identity(n, n);
    Vector v(n);
    for (int iter = 0;; ++iter) {
        if (iter > 1000) throw ConvergenceError("solve_mdp: policy iteration failed to settle");
        const Matrix p_pol = detail::deterministic_transition_matrix(env, greedy);
        v = (identity - env.gamma * p_pol).partialPivLu().solve(r);
        for (int a = 0; a < na; ++a)
            q.col(a) = r + env.gamma * (env.transitions[static_cast<std::size_t>(a)] * v);
        bool changed = false;
        for (int s = 0; s < n; ++s) {
            const int cur = greedy[static_cast<std::size_t>(s)];
            double best = q(s, cur);
            int best_a = cur;
            for (int a = 0; a < na; ++a)
                if (q(s, a) > best + 1e-13 * (1.0 + std::abs(best))) {
                    best = q(s, a);
                    best_a = a;
                }
            if (best_a != cur) {
                greedy[static_cast<std::size_t>(s)] = best_a;
                changed = true;
            }
        }
        if (!changed) break;
    }

    QSolution sol;
    sol.q = q;
    sol.v = q.rowwise().maxCoeff();
    sol.optimal_sets = detail::optimal_sets_from_q(sol.q, sol.v);
    return sol;
}

/// Max Bellman-optimality residual of a QSolution, for verification.
inline double bellman_residual(const Environment& env, const FeatureMap& features,
                               const RewardWeights& w, const QSolution& sol) {
    const Vector r = features.phi * w.w;
    double worst = 0.0;
    for (int a = 0; a < env.n_actions; ++a) {
        const Vector backed = r + env.gamma * (env.transitions[static_cast<std::size_t>(a)] * sol.v);
        worst = std::max(worst, (backed - sol.q.col(a)).cwiseAbs().maxCoeff());
    }
    return worst;
}

/// The canonical optimal policy: uniform over A_R(s) at every state, so it is
/// deterministic given (env, w) with no arbitrary tie-breaking.
inline Policy canonical_optimal_policy(const QSolution& sol) {
    const int n = static_cast<int>(sol.q.rows());
    const int na = static_cast<int>(sol.q.cols());
    Policy pol{Matrix::Zero(n, na)};
    for (int s = 0; s < n; ++s) {
        const auto& set = sol.optimal_sets[static_cast<std::size_t>(s)];
        for (int a : set) pol.action_probs(s, a) = 1.0 / static_cast<double>(set.size());
    }
    return pol;
}

/// Deterministic optimal policy breaking ties toward the lowest action index.
inline Policy greedy_optimal_policy(const QSolution& sol) {
    const int n = static_cast<int>(sol.q.rows());
    const int na = static_cast<int>(sol.q.cols());
    Policy pol{Matrix::Zero(n, na)};
    for (int s = 0; s < n; ++s)
        pol.action_probs(s, sol.optimal_sets[static_cast<std::size_t>(s)].front()) = 1.0;
    return pol;
}

/// Expected discounted feature counts Phi_pi^{(s,a)} via vectorized policy
/// evaluation over the k feature channels.
inline SuccessorFeatures successor_features(const Environment& env, const FeatureMap& features,
                                            const Policy& policy) {
    require_dims(features.phi.rows() == env.n_states,
                 "successor_features: feature rows must equal n_states");
    policy.validate();
    const Matrix p_pi = detail::policy_transition_matrix(env, policy);
    const Matrix lhs = Matrix::Identity(env.n_states, env.n_states) - env.gamma * p_pi;
    const Matrix x = lhs.partialPivLu().solve(features.phi); // (n, k) on-policy feature values
    SuccessorFeatures sf;
    sf.phi_sa.reserve(static_cast<std::size_t>(env.n_actions));
    for (int a = 0; a < env.n_actions; ++a)
        sf.phi_sa.push_back(features.phi + env.gamma * (env.transitions[static_cast<std::size_t>(a)] * x));
    return sf;
}

/// Discounted feature sum of a trajectory; the discount exponent starts at 0.
inline Vector trajectory_features(const Trajectory& traj, const FeatureMap& features, double gamma) {
    Vector total = Vector::Zero(features.k());
    double scale = 1.0;
    for (int s : traj.states) {
        require_dims(s >= 0 && s < features.phi.rows(), "trajectory_features: state out of range");
        total += scale * features.row(s);
        scale *= gamma;
    }
    return total;
}

/// Samples a trajectory of at most `horizon` transitions. When
/// `stop_at_terminal` is set the walk truncates on entering an absorbing
/// terminal (display convention); otherwise it keeps self-looping there so
/// discounted feature counts stay comparable across trajectories.
inline Trajectory rollout(const Environment& env, const Policy& policy, int start_state,
                          int horizon, Rng& rng, bool stop_at_terminal = true) {
    require(horizon >= 1, "rollout: horizon must be >= 1");
    require(start_state >= 0 && start_state < env.n_states, "rollout: start state out of range");
    Trajectory traj;
    traj.states.push_back(start_state);
    int s = start_state;
    for (int t = 0; t < horizon; ++t) {
        if (stop_at_terminal && env.is_terminal(s)) break;
        const int a = rng.categorical(policy.action_probs.row(s).transpose());
        const int sp = rng.categorical(env.transitions[static_cast<std::size_t>(a)].row(s).transpose());
        traj.actions.push_back(a);
        traj.states.push_back(sp);
        s = sp;
    }
    return traj;
}

/// Max-over-states shortfall of a policy against the optimal values under w.
/// Zero (within tolerance) exactly when the policy is an optimal policy.
inline double policy_value_gap(const Environment& env, const FeatureMap& features,
                               const RewardWeights& w, const Policy& policy) {
    const QSolution sol = solve_mdp(env, features, w);
    const Vector r = features.phi * w.w;
    const Vector v_pi = policy_evaluation(env, r, policy);
    return (sol.v - v_pi).maxCoeff();
}

inline double policy_value_gap(const Environment& env, const Vector& rewards,
                               const Vector& v_star, const Policy& policy) {
    const Vector v_pi = policy_evaluation(env, rewards, policy);
    return (v_star - v_pi).maxCoeff();
}

/// Smallest achievable V^pi(s) over all policies whose per-state support lies
/// in `action_sets`, computed exactly. Maximizing the gap against V* over
/// OPT(R') reduces to this with action_sets = A_{R'}.
inline Vector worst_value_in_sets(const Environment& env, const Vector& rewards,
                                  const std::vector<std::vector<int>>& action_sets,
                                  const SolveOptions& opts = {}) {
    require_dims(static_cast<int>(action_sets.size()) == env.n_states,
                 "worst_value_in_sets: need one action set per state");
    const int n = env.n_states;
    Vector v = Vector::Zero(n);
    std::vector<int> pick(static_cast<std::size_t>(n));
    for (int s = 0; s < n; ++s) pick[static_cast<std::size_t>(s)] = action_sets[static_cast<std::size_t>(s)].front();

    int stable = 0;
    for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
        Vector v_next(n);
        bool changed = false;
        for (int s = 0; s < n; ++s) {
            double best = std::numeric_limits<double>::infinity();
            int best_a = pick[static_cast<std::size_t>(s)];
            for (int a : action_sets[static_cast<std::size_t>(s)]) {
                const double val = env.transitions[static_cast<std::size_t>(a)].row(s).dot(v);
                if (val < best) {
                    best = val;
                    best_a = a;
                }
            }
            v_next[s] = rewards[s] + env.gamma * best;
            if (best_a != pick[static_cast<std::size_t>(s)]) {
                pick[static_cast<std::size_t>(s)] = best_a;
                changed = true;
            }
        }
        const double diff = (v_next - v).cwiseAbs().maxCoeff();
        v = std::move(v_next);
        stable = changed ? 0 : stable + 1;
        if (diff <= opts.vi_tol || stable >= 25) break;
        if (sweep + 1 == opts.max_sweeps)
            throw ConvergenceError("worst_value_in_sets: sweep cap reached");
    }

    // policy-iteration refinement on the minimization problem
    const Matrix identity = Matrix::Identity(n, n);
    for (int iter = 0;; ++iter) {
        if (iter > 1000) throw ConvergenceError("worst_value_in_sets: refinement failed to settle");
        const Matrix p = detail::deterministic_transition_matrix(env, pick);
        v = (identity - env.gamma * p).partialPivLu().solve(rewards);
        bool changed = false;
        for (int s = 0; s < n; ++s) {
            const int cur = pick[static_cast<std::size_t>(s)];
            double best = env.transitions[static_cast<std::size_t>(cur)].row(s).dot(v);
            int best_a = cur;
            for (int a : action_sets[static_cast<std::size_t>(s)])
                if (env.transitions[static_cast<std::size_t>(a)].row(s).dot(v) <
                    best - 1e-13 * (1.0 + std::abs(best))) {
                    best = env.transitions[static_cast<std::size_t>(a)].row(s).dot(v);
                    best_a = a;
                }
            if (best_a != cur) {
                pick[static_cast<std::size_t>(s)] = best_a;
                changed = true;
            }
        }
        if (!changed) return v;
    }
}

/// Default rollout horizon: the smallest H with gamma^H < 1e-6, capped at
/// 10 * n_states. Long enough that discounted feature tails are negligible.
inline int default_horizon(double gamma, int n_states) {
    const int cap = std::max(1, 10 * n_states);
    if (gamma <= 0.0) return 1;
    const int h = static_cast<int>(std::ceil(std::log(1e-6) / std::log(gamma)));
    return std::clamp(h, 1, cap);
}

/// d_max: the largest number of positive-probability successors over (s,a).
inline int max_transition_degree(const Environment& env) {
    int d = 0;
    for (int a = 0; a < env.n_actions; ++a)
        for (int s = 0; s < env.n_states; ++s) {
            int count = 0;
            for (int sp = 0; sp < env.n_states; ++sp)
                if (env.p(s, a, sp) > 1e-12) ++count;
            d = std::max(d, count);
        }
    return d;
}

} // namespace vav
