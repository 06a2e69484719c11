#pragma once

#include "vav/agents.hpp"
#include "vav/exact_tests.hpp"
#include "vav/halfspace.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace vav {

/// Elicited preferences, stored winner-first so each pair induces the normal
/// phi_win - phi_lose.
struct PreferenceDataset {
    struct Entry {
        Vector phi_win;
        Vector phi_lose;
        Trajectory traj_win;
        Trajectory traj_lose;
    };
    std::vector<Entry> pairs;
    std::vector<std::string> warnings;

    int size() const { return static_cast<int>(pairs.size()); }
};

struct PosteriorSamples {
    std::vector<Vector> samples; // unit norm
    Vector mean_w;
    double acceptance_rate = 1.0;
    std::vector<std::string> warnings;
};

enum class EpsilonMode { Mean, EpsDelta };

struct EpsilonTest {
    struct Question {
        Vector phi_first; // expected winner
        Vector phi_second;
        Trajectory traj_first;
        Trajectory traj_second;
    };
    std::vector<Question> questions;
    double epsilon = 0.0;
    EpsilonMode mode = EpsilonMode::Mean;
    double delta = 0.1;

    bool empty() const { return questions.empty(); } // an empty test passes everything
    int size() const { return static_cast<int>(questions.size()); }
};

using PreferenceOracle = std::function<PreferenceAnswer(const PreferenceQuery&)>;

/// Strict synthetic comparison under a known reward; ties resolve toward the
/// first argument.
inline PreferenceAnswer synthetic_oracle(const Vector& w_true, const PreferenceQuery& pair) {
    return w_true.dot(pair.phi_first - pair.phi_second) >= 0.0 ? PreferenceAnswer::First
                                                               : PreferenceAnswer::Second;
}

inline PreferenceOracle make_synthetic_oracle(Vector w_true) {
    return [w = std::move(w_true)](const PreferenceQuery& pair) {
        return synthetic_oracle(w, pair);
    };
}

// ---------------------------------------------------------------------------
// Posterior sampling
// ---------------------------------------------------------------------------

namespace detail {

inline double log_sigmoid(double x) {
    return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

/// Logistic choice log-likelihood of unit reward w for answered normals
/// (rows of D, winner-first): sum_i log sigma(w . d_i).
inline double preference_log_likelihood(const Matrix& normals, const Vector& w) {
    double total = 0.0;
    const Vector gaps = normals * w;
    for (int i = 0; i < gaps.size(); ++i) total += log_sigmoid(gaps[i]);
    return total;
}

} // namespace detail

struct McmcOptions {
    int steps = 20000;   // 50% burn-in
    double initial_scale = 0.5;
};

/// Random-walk Metropolis chain on the unit sphere under the logistic choice
/// likelihood. The proposal scale auto-tunes toward a 0.2-0.4 acceptance rate
/// during burn-in; a final rate outside [0.1, 0.6] is flagged as a mixing
/// warning.
inline PosteriorSamples sample_posterior(const Matrix& normals, int k, int m, Rng& rng,
                                         const McmcOptions& opts = {}) {
    PosteriorSamples out;
    if (normals.rows() == 0) { // prior only: uniform on the sphere
        for (int i = 0; i < m; ++i) out.samples.push_back(rng.unit_vector(k));
    } else {
        Vector current = rng.unit_vector(k);
        double current_ll = detail::preference_log_likelihood(normals, current);
        double scale = opts.initial_scale;
        const int burn = opts.steps / 2;
        const int stride = std::max(1, (opts.steps - burn) / m);
        int accepted_window = 0, window = 0;
        int accepted_post = 0, post = 0;
        for (int step = 0; step < opts.steps; ++step) {
            Vector proposal = current + scale * rng.gaussian(k);
            const double norm = proposal.norm();
            bool accept = false;
            if (norm > 1e-12) {
                proposal /= norm;
                const double ll = detail::preference_log_likelihood(normals, proposal);
                accept = std::log(rng.uniform01() + 1e-300) < ll - current_ll;
                if (accept) {
                    current = std::move(proposal);
                    current_ll = ll;
                }
            }
            if (step < burn) {
                ++window;
                if (accept) ++accepted_window;
                if (window == 200) { // tune toward the target acceptance band
                    const double rate = static_cast<double>(accepted_window) / window;
                    if (rate < 0.2) scale *= 0.7;
                    else if (rate > 0.4) scale *= 1.4;
                    scale = std::clamp(scale, 1e-3, 2.0);
                    accepted_window = 0;
                    window = 0;
                }
            } else {
                ++post;
                if (accept) ++accepted_post;
                if ((step - burn) % stride == 0 && static_cast<int>(out.samples.size()) < m)
                    out.samples.push_back(current);
            }
        }
        while (static_cast<int>(out.samples.size()) < m) out.samples.push_back(current);
        out.acceptance_rate = post > 0 ? static_cast<double>(accepted_post) / post : 0.0;
        if (out.acceptance_rate < 0.1 || out.acceptance_rate > 0.6)
            out.warnings.push_back("posterior chain acceptance rate " +
                                   std::to_string(out.acceptance_rate) +
                                   " outside [0.1, 0.6]; samples may mix poorly");
    }
    out.mean_w = Vector::Zero(k);
    for (const auto& s : out.samples) out.mean_w += s;
    if (!out.samples.empty()) out.mean_w /= static_cast<double>(out.samples.size());
    return out;
}

// ---------------------------------------------------------------------------
// Elicitation
// ---------------------------------------------------------------------------

struct ElicitOptions {
    int pool_size = 100;        // candidate trajectory pairs per round
    int policies_per_round = 3; // posterior-sample policies mixed with random walks
    McmcOptions mcmc;
};

struct ElicitationResult {
    PreferenceDataset dataset;
    PosteriorSamples posterior;
};

/// Active preference elicitation against an oracle: each round scores a pool
/// of random trajectory pairs by expected information gain over the posterior
/// samples, asks the best one, and refreshes the posterior by Markov-chain
/// sampling under the logistic choice likelihood.
inline ElicitationResult elicit(const Environment& env, const FeatureMap& features,
                                const PreferenceOracle& oracle, int n, int m,
                                std::uint64_t rng_seed, const ElicitOptions& opts = {}) {
    require(n >= 0, "elicit: negative question budget");
    require(m >= 1, "elicit: need at least one posterior sample");
    Rng rng(rng_seed);
    const int k = features.k();
    const int horizon = default_horizon(env.gamma, env.n_states);

    std::vector<int> starts;
    for (int s = 0; s < env.n_states; ++s)
        if (!env.is_terminal(s)) starts.push_back(s);
    const Policy uniform{Matrix::Constant(env.n_states, env.n_actions, 1.0 / env.n_actions)};

    ElicitationResult result;
    Matrix normals(0, k);
    result.posterior = sample_posterior(normals, k, m, rng, opts.mcmc);

    for (int round = 0; round < n; ++round) {
        // policies rolled under current posterior beliefs, mixed with random walks
        std::vector<Policy> policies;
        for (int i = 0; i < opts.policies_per_round; ++i) {
            const Vector& w_sample =
                result.posterior.samples[static_cast<std::size_t>(
                    rng.below(static_cast<int>(result.posterior.samples.size())))];
            policies.push_back(
                canonical_optimal_policy(solve_mdp(env, features, RewardWeights{w_sample})));
        }
        const auto sample_trajectory = [&]() {
            const int start = starts[static_cast<std::size_t>(rng.below(static_cast<int>(starts.size())))];
            const Policy& policy =
                rng.uniform01() < 0.5
                    ? uniform
                    : policies[static_cast<std::size_t>(rng.below(static_cast<int>(policies.size())))];
            return rollout(env, policy, start, horizon, rng, /*stop_at_terminal=*/false);
        };

        // score the candidate pool by expected information gain
        struct Candidate {
            Trajectory a, b;
            Vector phi_a, phi_b;
            double info_gain = 0.0;
        };
        Candidate best;
        bool have_best = false;
        for (int c = 0; c < opts.pool_size; ++c) {
            Candidate cand;
            cand.a = sample_trajectory();
            cand.b = sample_trajectory();
            cand.phi_a = trajectory_features(cand.a, features, env.gamma);
            cand.phi_b = trajectory_features(cand.b, features, env.gamma);
            const Vector d = cand.phi_a - cand.phi_b;
            if (d.norm() <= 1e-9) continue;
            double mean_p = 0.0, mean_entropy = 0.0;
            for (const auto& w_i : result.posterior.samples) {
                const double p = detail::sigmoid(w_i.dot(d));
                mean_p += p;
                if (p > 0.0 && p < 1.0)
                    mean_entropy += -(p * std::log2(p) + (1.0 - p) * std::log2(1.0 - p));
            }
            const double count = static_cast<double>(result.posterior.samples.size());
            mean_p /= count;
            mean_entropy /= count;
            double marginal_entropy = 0.0;
            if (mean_p > 0.0 && mean_p < 1.0)
                marginal_entropy =
                    -(mean_p * std::log2(mean_p) + (1.0 - mean_p) * std::log2(1.0 - mean_p));
            cand.info_gain = marginal_entropy - mean_entropy;
            require(std::isfinite(cand.info_gain), "elicit: non-finite information gain");
            if (!have_best || cand.info_gain > best.info_gain) {
                best = std::move(cand);
                have_best = true;
            }
        }
        require(have_best, "elicit: empty candidate pool");

        const PreferenceQuery query{best.phi_a, best.phi_b, &best.a, &best.b};
        const PreferenceAnswer answer = oracle(query);
        PreferenceDataset::Entry entry;
        if (answer == PreferenceAnswer::Second) {
            entry.phi_win = best.phi_b;
            entry.phi_lose = best.phi_a;
            entry.traj_win = best.b;
            entry.traj_lose = best.a;
        } else {
            entry.phi_win = best.phi_a;
            entry.phi_lose = best.phi_b;
            entry.traj_win = best.a;
            entry.traj_lose = best.b;
        }
        result.dataset.pairs.push_back(std::move(entry));

        normals.conservativeResize(normals.rows() + 1, k);
        normals.row(normals.rows() - 1) =
            (result.dataset.pairs.back().phi_win - result.dataset.pairs.back().phi_lose)
                .transpose();
        result.posterior = sample_posterior(normals, k, m, rng, opts.mcmc);
    }
    for (const auto& warning : result.posterior.warnings)
        result.dataset.warnings.push_back(warning);
    return result;
}

// ---------------------------------------------------------------------------
// Test construction
// ---------------------------------------------------------------------------

/// Removes repeated questions (same induced direction within the cosine
/// threshold, first kept). A pair answered both ways is contradictory: both
/// copies are dropped and the event logged.
inline PreferenceDataset dedup_questions(const PreferenceDataset& dataset) {
    PreferenceDataset out;
    out.warnings = dataset.warnings;
    std::vector<Vector> kept_directions;
    for (const auto& entry : dataset.pairs) {
        const Vector normal = entry.phi_win - entry.phi_lose;
        if (normal.norm() <= 1e-9) continue;
        const Vector direction = normal.normalized();
        bool duplicate = false;
        bool contradictory = false;
        std::size_t clash = 0;
        for (std::size_t i = 0; i < kept_directions.size() && !duplicate && !contradictory; ++i) {
            if (1.0 - kept_directions[i].dot(direction) < kDedupCosineThreshold) duplicate = true;
            if (1.0 + kept_directions[i].dot(direction) < kDedupCosineThreshold) {
                contradictory = true;
                clash = i;
            }
        }
        if (contradictory) {
            out.warnings.push_back("contradictory duplicate answers; dropping both copies");
            out.pairs.erase(out.pairs.begin() + static_cast<std::ptrdiff_t>(clash));
            kept_directions.erase(kept_directions.begin() + static_cast<std::ptrdiff_t>(clash));
            continue;
        }
        if (duplicate) continue;
        out.pairs.push_back(entry);
        kept_directions.push_back(direction);
    }
    return out;
}

/// Keeps questions whose estimated value gap is at least epsilon: under the
/// posterior mean (Mean mode), or with posterior probability >= 1 - delta
/// (EpsDelta mode).
inline PreferenceDataset epsilon_filter(const PreferenceDataset& dataset,
                                        const PosteriorSamples& posterior, double epsilon,
                                        EpsilonMode mode, double delta = 0.1) {
    require(epsilon >= 0.0, "epsilon_filter: epsilon must be nonnegative");
    PreferenceDataset out;
    out.warnings = dataset.warnings;
    for (const auto& entry : dataset.pairs) {
        const Vector d = entry.phi_win - entry.phi_lose;
        bool keep;
        if (mode == EpsilonMode::Mean) {
            keep = posterior.mean_w.dot(d) >= epsilon;
        } else {
            int above = 0;
            for (const auto& w_i : posterior.samples)
                if (w_i.dot(d) > epsilon) ++above;
            keep = above >= (1.0 - delta) * static_cast<double>(posterior.samples.size());
        }
        if (keep) out.pairs.push_back(entry);
    }
    return out;
}

/// dedup -> epsilon-filter -> LP redundancy removal on the induced normals.
inline EpsilonTest build_epsilon_test(const PreferenceDataset& dataset,
                                      const PosteriorSamples& posterior, double epsilon,
                                      EpsilonMode mode, double delta = 0.1) {
    const PreferenceDataset filtered =
        epsilon_filter(dedup_questions(dataset), posterior, epsilon, mode, delta);

    HalfspaceSet set;
    for (int i = 0; i < filtered.size(); ++i) {
        const Vector normal =
            filtered.pairs[static_cast<std::size_t>(i)].phi_win -
            filtered.pairs[static_cast<std::size_t>(i)].phi_lose;
        set.rows.push_back(
            Halfspace{normal.normalized(), Provenance{Provenance::Kind::TrajectoryPair, -1, -1, -1, i, i}});
    }
    const HalfspaceSet minimal = remove_redundant(set);

    EpsilonTest test;
    test.epsilon = epsilon;
    test.mode = mode;
    test.delta = delta;
    for (const auto& row : minimal.rows) {
        const auto& entry = filtered.pairs[static_cast<std::size_t>(row.provenance.first)];
        test.questions.push_back(
            EpsilonTest::Question{entry.phi_win, entry.phi_lose, entry.traj_win, entry.traj_lose});
    }
    return test;
}

inline Verdict administer_epsilon_test(const EpsilonTest& test, const Agent& agent) {
    if (!agent.supports(Capability::Preference))
        throw UnsupportedQueryError("administer_epsilon_test: agent lacks preference queries");
    Verdict verdict;
    for (std::size_t i = 0; i < test.questions.size(); ++i) {
        const auto& q = test.questions[i];
        const PreferenceQuery query{q.phi_first, q.phi_second, &q.traj_first, &q.traj_second};
        const PreferenceAnswer answer = agent.preference_query(query);
        ++verdict.queries_used;
        if (answer != PreferenceAnswer::First)
            verdict.fail("question " + std::to_string(i),
                         answer == PreferenceAnswer::Second ? "second" : "indifferent", "first");
    }
    return verdict;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct EvalMetrics {
    // labels from agreement with w_true on the epsilon-compatible questions
    double accuracy = 0.0;
    double fpr = 0.0;
    double fnr = 0.0;
    // labels from the value-gap criterion on the generating environment
    double accuracy_gap = 0.0;
    double fpr_gap = 0.0;
    double fnr_gap = 0.0;
    double aligned_fraction = 0.0;
    double sigma = 1.0;
    bool balanced = false;
    int n_rewards = 0;
    std::vector<std::string> warnings;
};

struct EvalOptions {
    bool gap_labels = true; // also compute the (slower) value-gap labels
    int max_balance_iters = 40;
};

/// Evaluates a test against reward candidates drawn around w_true, adapting
/// the draw variance until the aligned fraction is balanced in [0.45, 0.55].
/// Two ground-truth labels are computed: agreement with w_true on every
/// epsilon-compatible elicited question, and (separately) policy value gap at
/// most epsilon on the generating environment.
inline EvalMetrics evaluate_test(const EpsilonTest& test, const PreferenceDataset& dataset,
                                 const Environment& env, const FeatureMap& features,
                                 const Vector& w_true, int n_rewards, std::uint64_t rng_seed,
                                 const EvalOptions& opts = {}) {
    require(n_rewards >= 1, "evaluate_test: need candidate rewards");
    EvalMetrics metrics;
    metrics.n_rewards = n_rewards;

    // epsilon-compatible questions under the true reward
    std::vector<Vector> compatible;
    for (const auto& entry : dataset.pairs) {
        const Vector d = entry.phi_win - entry.phi_lose;
        if (w_true.dot(d) >= test.epsilon) compatible.push_back(d);
    }

    const auto aligned_label = [&](const Vector& w_test) {
        for (const auto& d : compatible)
            if (w_test.dot(d) <= 0.0) return false;
        return true;
    };

    // draw a balanced candidate set
    Rng rng(rng_seed);
    double sigma = 1.0;
    std::vector<Vector> candidates;
    std::vector<char> labels;
    double fraction = 0.0;
    bool balanced = false;
    for (int iter = 0; iter < opts.max_balance_iters; ++iter) {
        Rng draw = rng.fork(static_cast<std::uint64_t>(iter));
        candidates.clear();
        labels.clear();
        int aligned = 0;
        for (int i = 0; i < n_rewards; ++i) {
            Vector w_test = w_true + sigma * draw.gaussian(static_cast<int>(w_true.size()));
            const double norm = w_test.norm();
            if (norm <= 1e-12) {
                w_test = w_true;
            } else {
                w_test /= norm;
            }
            const bool label = aligned_label(w_test);
            candidates.push_back(std::move(w_test));
            labels.push_back(label ? 1 : 0);
            if (label) ++aligned;
        }
        fraction = static_cast<double>(aligned) / n_rewards;
        if (fraction >= 0.45 && fraction <= 0.55) {
            balanced = true;
            break;
        }
        if (fraction > 0.55) sigma *= 1.6; // spread out to create misaligned rewards
        else sigma /= 1.6;
        if (sigma < 1e-4 || sigma > 1e4) {
            sigma = std::clamp(sigma, 1e-4, 1e4);
            metrics.warnings.push_back("could not balance the test reward classes; "
                                       "using the last reasonable set");
            break;
        }
    }
    metrics.sigma = sigma;
    metrics.balanced = balanced;
    metrics.aligned_fraction = fraction;

    // verdicts and both label families
    const QSolution sol_true = solve_mdp(env, features, RewardWeights{w_true});
    const Vector r_true = features.phi * w_true;
    int correct = 0, fp = 0, fn = 0, n_aligned = 0, n_misaligned = 0;
    int correct_gap = 0, fp_gap = 0, fn_gap = 0, n_aligned_gap = 0, n_misaligned_gap = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const Vector& w_test = candidates[i];
        bool pass = true;
        for (const auto& q : test.questions)
            if (w_test.dot(q.phi_first - q.phi_second) <= kPreferenceTieTol) {
                pass = false;
                break;
            }
        const bool label = labels[i] != 0;
        if (label) ++n_aligned;
        else ++n_misaligned;
        if (pass == label) ++correct;
        if (pass && !label) ++fp;
        if (!pass && label) ++fn;

        if (opts.gap_labels) {
            const auto sol_test = solve_mdp(env, features, RewardWeights{w_test});
            const double gap =
                policy_value_gap(env, r_true, sol_true.v, canonical_optimal_policy(sol_test));
            const bool label_gap = gap <= test.epsilon + 1e-9;
            if (label_gap) ++n_aligned_gap;
            else ++n_misaligned_gap;
            if (pass == label_gap) ++correct_gap;
            if (pass && !label_gap) ++fp_gap;
            if (!pass && label_gap) ++fn_gap;
        }
    }
    const double n = static_cast<double>(candidates.size());
    metrics.accuracy = correct / n;
    metrics.fpr = n_misaligned > 0 ? static_cast<double>(fp) / n_misaligned : 0.0;
    metrics.fnr = n_aligned > 0 ? static_cast<double>(fn) / n_aligned : 0.0;
    if (opts.gap_labels) {
        metrics.accuracy_gap = correct_gap / n;
        metrics.fpr_gap = n_misaligned_gap > 0 ? static_cast<double>(fp_gap) / n_misaligned_gap : 0.0;
        metrics.fnr_gap = n_aligned_gap > 0 ? static_cast<double>(fn_gap) / n_aligned_gap : 0.0;
    }
    return metrics;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

inline json dataset_to_json(const PreferenceDataset& dataset) {
    json pairs = json::array();
    for (const auto& entry : dataset.pairs)
        pairs.push_back(json{{"phi_win", vector_to_json(entry.phi_win)},
                             {"phi_lose", vector_to_json(entry.phi_lose)},
                             {"traj_win", trajectory_to_json(entry.traj_win)},
                             {"traj_lose", trajectory_to_json(entry.traj_lose)}});
    return json{{"pairs", pairs}, {"warnings", dataset.warnings}};
}

inline PreferenceDataset dataset_from_json(const json& j) {
    PreferenceDataset dataset;
    for (const auto& p : j.at("pairs")) {
        PreferenceDataset::Entry entry;
        entry.phi_win = vector_from_json(p.at("phi_win"));
        entry.phi_lose = vector_from_json(p.at("phi_lose"));
        entry.traj_win = trajectory_from_json(p.at("traj_win"));
        entry.traj_lose = trajectory_from_json(p.at("traj_lose"));
        dataset.pairs.push_back(std::move(entry));
    }
    if (j.contains("warnings")) dataset.warnings = j.at("warnings").get<std::vector<std::string>>();
    return dataset;
}

inline json posterior_to_json(const PosteriorSamples& posterior) {
    json samples = json::array();
    for (const auto& s : posterior.samples) samples.push_back(vector_to_json(s));
    return json{{"samples", samples},
                {"mean_w", vector_to_json(posterior.mean_w)},
                {"acceptance_rate", posterior.acceptance_rate},
                {"warnings", posterior.warnings}};
}

inline PosteriorSamples posterior_from_json(const json& j) {
    PosteriorSamples posterior;
    for (const auto& s : j.at("samples")) posterior.samples.push_back(vector_from_json(s));
    posterior.mean_w = vector_from_json(j.at("mean_w"));
    posterior.acceptance_rate = j.value("acceptance_rate", 1.0);
    if (j.contains("warnings")) posterior.warnings = j.at("warnings").get<std::vector<std::string>>();
    return posterior;
}

inline json epsilon_test_to_json(const EpsilonTest& test) {
    json questions = json::array();
    for (const auto& q : test.questions)
        questions.push_back(json{{"phi_first", vector_to_json(q.phi_first)},
                                 {"phi_second", vector_to_json(q.phi_second)},
                                 {"traj_first", trajectory_to_json(q.traj_first)},
                                 {"traj_second", trajectory_to_json(q.traj_second)}});
    return json{{"kind", "epsilon"},
                {"questions", questions},
                {"epsilon", test.epsilon},
                {"mode", test.mode == EpsilonMode::Mean ? "mean" : "eps_delta"},
                {"delta", test.delta}};
}

inline EpsilonTest epsilon_test_from_json(const json& j) {
    EpsilonTest test;
    for (const auto& q : j.at("questions")) {
        EpsilonTest::Question question;
        question.phi_first = vector_from_json(q.at("phi_first"));
        question.phi_second = vector_from_json(q.at("phi_second"));
        question.traj_first = trajectory_from_json(q.at("traj_first"));
        question.traj_second = trajectory_from_json(q.at("traj_second"));
        test.questions.push_back(std::move(question));
    }
    test.epsilon = j.at("epsilon").get<double>();
    test.mode = j.at("mode").get<std::string>() == "mean" ? EpsilonMode::Mean : EpsilonMode::EpsDelta;
    test.delta = j.value("delta", 0.1);
    return test;
}

} // namespace vav
