#pragma once

#include "vav/common.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <set>
#include <vector>

namespace vav {

using json = nlohmann::json;

/// Tabular environment E = (S, A, P, S0, gamma) plus a set of absorbing
/// terminal states. Terminal states keep emitting their state reward every
/// step (infinite-horizon absorbing convention); rollouts may truncate at
/// them for display only.
struct Environment {
    int n_states = 0;
    int n_actions = 0;
    std::vector<Matrix> transitions; // transitions[a](s, s')
    double gamma = 0.95;
    Vector initial_dist;
    std::vector<int> terminals;

    double p(int s, int a, int sp) const { return transitions[static_cast<std::size_t>(a)](s, sp); }

    bool is_terminal(int s) const {
        return std::find(terminals.begin(), terminals.end(), s) != terminals.end();
    }

    void validate() const {
        require_dims(n_states >= 1 && n_actions >= 1, "Environment: need at least one state and action");
        require(gamma >= 0.0 && gamma < 1.0, "Environment: gamma must be in [0,1)");
        require_dims(static_cast<int>(transitions.size()) == n_actions,
                     "Environment: transition tensor has wrong action count");
        for (int a = 0; a < n_actions; ++a) {
            const Matrix& t = transitions[static_cast<std::size_t>(a)];
            require_dims(t.rows() == n_states && t.cols() == n_states,
                         "Environment: transition matrix shape mismatch");
            for (int s = 0; s < n_states; ++s) {
                require((t.row(s).array() >= -1e-12).all(),
                        "Environment: negative transition probability");
                require(std::abs(t.row(s).sum() - 1.0) <= 1e-9,
                        "Environment: transitions[s,a,.] must sum to 1");
            }
        }
        require_dims(initial_dist.size() == n_states, "Environment: initial_dist size mismatch");
        require(std::abs(initial_dist.sum() - 1.0) <= 1e-9,
                "Environment: initial_dist must sum to 1");
        for (int t : terminals) {
            require(t >= 0 && t < n_states, "Environment: terminal index out of range");
            for (int a = 0; a < n_actions; ++a)
                require(std::abs(p(t, a, t) - 1.0) <= 1e-9,
                        "Environment: terminal states must be absorbing under every action");
        }
    }
};

/// Per-state feature vectors; row s is phi(s).
struct FeatureMap {
    Matrix phi; // (n_states, k)

    int k() const { return static_cast<int>(phi.cols()); }
    Vector row(int s) const { return phi.row(s).transpose(); }

    void validate() const {
        require_dims(phi.cols() >= 1, "FeatureMap: need k >= 1");
        require(phi.allFinite(), "FeatureMap: non-finite feature entry");
    }

    static FeatureMap identity(int n_states) {
        return FeatureMap{Matrix::Identity(n_states, n_states)};
    }
};

/// Linear reward weights: R(s) = w . phi(s).
struct RewardWeights {
    Vector w;

    void validate() const { require(w.allFinite(), "RewardWeights: non-finite weight"); }
};

struct Policy {
    Matrix action_probs; // (n_states, n_actions)

    void validate() const {
        for (int s = 0; s < action_probs.rows(); ++s) {
            require((action_probs.row(s).array() >= -1e-12).all(),
                    "Policy: negative action probability");
            require(std::abs(action_probs.row(s).sum() - 1.0) <= 1e-9,
                    "Policy: action probabilities must sum to 1");
        }
    }
};

struct Trajectory {
    std::vector<int> states;
    std::vector<int> actions; // one shorter than states
    Vector discounted_features;
};

// ---------------------------------------------------------------------------
// JSON serialization
// ---------------------------------------------------------------------------

inline json environment_to_json(const Environment& env, const FeatureMap& features) {
    json j;
    j["n_states"] = env.n_states;
    j["n_actions"] = env.n_actions;
    j["gamma"] = env.gamma;
    json trans = json::array();
    for (int s = 0; s < env.n_states; ++s) {
        json per_action = json::array();
        for (int a = 0; a < env.n_actions; ++a) {
            json row = json::array();
            for (int sp = 0; sp < env.n_states; ++sp) row.push_back(env.p(s, a, sp));
            per_action.push_back(std::move(row));
        }
        trans.push_back(std::move(per_action));
    }
    j["transitions"] = std::move(trans);
    j["initial_dist"] = std::vector<double>(env.initial_dist.data(),
                                            env.initial_dist.data() + env.initial_dist.size());
    j["terminals"] = env.terminals;
    json feats = json::array();
    for (int s = 0; s < env.n_states; ++s) {
        json row = json::array();
        for (int f = 0; f < features.k(); ++f) row.push_back(features.phi(s, f));
        feats.push_back(std::move(row));
    }
    j["features"] = std::move(feats);
    return j;
}

inline std::pair<Environment, FeatureMap> environment_from_json(const json& j) {
    Environment env;
    env.n_states = j.at("n_states").get<int>();
    env.n_actions = j.at("n_actions").get<int>();
    env.gamma = j.at("gamma").get<double>();
    env.transitions.assign(static_cast<std::size_t>(env.n_actions),
                           Matrix::Zero(env.n_states, env.n_states));
    const json& trans = j.at("transitions");
    require_dims(static_cast<int>(trans.size()) == env.n_states,
                 "environment_from_json: transitions outer size must be n_states");
    for (int s = 0; s < env.n_states; ++s)
        for (int a = 0; a < env.n_actions; ++a)
            for (int sp = 0; sp < env.n_states; ++sp)
                env.transitions[static_cast<std::size_t>(a)](s, sp) =
                    trans.at(static_cast<std::size_t>(s)).at(static_cast<std::size_t>(a)).at(static_cast<std::size_t>(sp)).get<double>();
    const auto init = j.at("initial_dist").get<std::vector<double>>();
    env.initial_dist = Eigen::Map<const Vector>(init.data(), static_cast<Eigen::Index>(init.size()));
    env.terminals = j.at("terminals").get<std::vector<int>>();

    FeatureMap features;
    const json& feats = j.at("features");
    const int k = feats.empty() ? 0 : static_cast<int>(feats.at(0).size());
    features.phi = Matrix::Zero(env.n_states, k);
    for (int s = 0; s < env.n_states; ++s)
        for (int f = 0; f < k; ++f)
            features.phi(s, f) = feats.at(static_cast<std::size_t>(s)).at(static_cast<std::size_t>(f)).get<double>();

    env.validate();
    features.validate();
    return {std::move(env), std::move(features)};
}

inline json trajectory_to_json(const Trajectory& t) {
    return json{{"states", t.states}, {"actions", t.actions}};
}

inline Trajectory trajectory_from_json(const json& j) {
    Trajectory t;
    t.states = j.at("states").get<std::vector<int>>();
    t.actions = j.at("actions").get<std::vector<int>>();
    return t;
}

inline json vector_to_json(const Vector& v) {
    return json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline Vector vector_from_json(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

} // namespace vav
