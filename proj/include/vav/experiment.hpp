#pragma once

#include "vav/epsilon.hpp"
#include "vav/exact_tests.hpp"
#include "vav/gridworld.hpp"
#include "vav/heuristics.hpp"

#include <cstdio>
#include <string>
#include <vector>

namespace vav {

struct ExperimentConfig {
    std::vector<std::pair<int, int>> grid_sizes; // (width, height)
    std::vector<int> feature_counts;
    int mdps_per_config = 50;
    int agents_per_mdp = 50;
    std::vector<std::string> methods = {"arp_w", "arp_pref", "arp_bb", "scot", "cs"};
    std::vector<double> cs_thresholds = {0.2};
    std::uint64_t seed = 0;
    double gamma = 0.95;

    void validate() const {
        require(!grid_sizes.empty() && !feature_counts.empty(), "ExperimentConfig: empty sweep");
        require(mdps_per_config >= 1 && agents_per_mdp >= 1, "ExperimentConfig: counts must be positive");
        require(!methods.empty(), "ExperimentConfig: no methods");
    }
};

struct SampledAgent {
    Vector w_prime;
    RationalAgent agent;
    bool aligned = false;
};

/// Exact-alignment label: the candidate's canonical optimal policy has zero
/// value gap under the tester's reward.
inline bool exact_alignment_label(const Environment& env, const Vector& tester_rewards,
                                  const Vector& tester_v, const QSolution& candidate_sol) {
    const double gap = policy_value_gap(env, tester_rewards, tester_v,
                                        canonical_optimal_policy(candidate_sol));
    return gap <= 1e-9;
}

/// Unit-hypersphere rational agents with ground-truth labels; candidates whose
/// optimal-set profile duplicates an earlier one are removed.
inline std::vector<SampledAgent> sample_agents(const Environment& env, const FeatureMap& features,
                                               const RewardWeights& tester, int n,
                                               std::uint64_t rng_seed) {
    require(n >= 1, "sample_agents: need at least one agent");
    Rng rng(rng_seed);
    const auto tester_sol = solve_mdp(env, features, tester);
    const Vector tester_rewards = features.phi * tester.w;

    std::vector<SampledAgent> agents;
    std::vector<std::vector<std::vector<int>>> profiles;
    for (int i = 0; i < n; ++i) {
        const Vector w_prime = rng.unit_vector(features.k());
        RationalAgent agent(env, features, w_prime);
        const auto& profile = agent.solution().optimal_sets;
        if (std::find(profiles.begin(), profiles.end(), profile) != profiles.end()) continue;
        profiles.push_back(profile);
        const bool aligned =
            exact_alignment_label(env, tester_rewards, tester_sol.v, agent.solution());
        agents.push_back(SampledAgent{w_prime, std::move(agent), aligned});
    }
    return agents;
}

struct ExperimentRow {
    int grid_w = 0, grid_h = 0, k = 0;
    std::string method;
    double t = -1.0; // cs threshold; negative means not applicable
    std::uint64_t seed = 0;
    double mean_queries = 0.0;
    double accuracy = 0.0, fpr = 0.0, fnr = 0.0;
    int n_agents = 0;
    // raw verdict counts across the cell
    int pass_aligned = 0, pass_misaligned = 0, fail_aligned = 0, fail_misaligned = 0;
    long total_queries = 0;
    int failed_cells = 0; // generation failures recorded, run continues
};

struct ExperimentResult {
    std::vector<ExperimentRow> rows;
    std::vector<std::string> violations; // harness invariants that broke
    bool ok() const { return violations.empty(); }
};

namespace detail {

inline std::string format_double(double v) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.9g", v);
    return buffer;
}

} // namespace detail

/// Full sweep over grid sizes, feature counts, and methods: one tester and one
/// agent cohort per sampled MDP, every method administered to every agent.
/// Two harness invariants are checked into `violations`: exact methods keep
/// accuracy 1.0, and no method fails an exactly-aligned agent.
inline ExperimentResult run_sensitivity(const ExperimentConfig& config) {
    config.validate();
    ExperimentResult result;
    Rng master(config.seed);

    int config_index = 0;
    for (const auto& [width, height] : config.grid_sizes) {
        for (int k : config.feature_counts) {
            ++config_index;
            struct Cell {
                std::string method;
                double t = -1.0;
                long queries = 0;
                int administered = 0;
                int pass_aligned = 0, pass_misaligned = 0, fail_aligned = 0, fail_misaligned = 0;
                int failed_cells = 0;
            };
            std::vector<Cell> cells;
            for (const auto& method : config.methods) {
                if (method == "cs") {
                    for (double t : config.cs_thresholds) cells.push_back(Cell{method, t});
                } else {
                    cells.push_back(Cell{method});
                }
            }

            for (int mdp_index = 0; mdp_index < config.mdps_per_config; ++mdp_index) {
                const std::uint64_t cell_tag =
                    static_cast<std::uint64_t>(config_index) * 100000 +
                    static_cast<std::uint64_t>(mdp_index);
                Rng rng = master.fork(cell_tag);
                const auto world =
                    gen_random_gridworld(width, height, k, rng.fork(1).seed(), config.gamma);

                // tester rewards resampled until they induce a nontrivial policy
                Rng tester_rng = rng.fork(2);
                RewardWeights tester{tester_rng.unit_vector(k)};
                QSolution tester_sol = solve_mdp(world.env, world.features, tester);
                for (int attempt = 0; attempt < 100; ++attempt) {
                    bool trivial = true;
                    for (int s = 0; s < world.env.n_states && trivial; ++s)
                        if (static_cast<int>(tester_sol.optimal_sets[static_cast<std::size_t>(s)].size()) !=
                            world.env.n_actions)
                            trivial = false;
                    if (!trivial) break;
                    tester.w = tester_rng.unit_vector(k);
                    tester_sol = solve_mdp(world.env, world.features, tester);
                }

                const auto agents = sample_agents(world.env, world.features, tester,
                                                  config.agents_per_mdp, rng.fork(3).seed());

                for (auto& cell : cells) {
                    AlignmentTest test;
                    try {
                        if (cell.method == "arp_w") {
                            test = gen_weight_test(world.env, world.features, tester);
                        } else if (cell.method == "arp_pref") {
                            test = gen_preference_test(world.env, world.features, tester,
                                                       rng.fork(4).seed());
                        } else if (cell.method == "arp_bb") {
                            test = AlignmentTest{gen_arp_bb(world.env, world.features, tester)};
                        } else if (cell.method == "scot") {
                            test = AlignmentTest{gen_scot(
                                world.env, world.features, tester, 1,
                                default_horizon(world.env.gamma, world.env.n_states),
                                rng.fork(5).seed())};
                        } else if (cell.method == "cs") {
                            test = AlignmentTest{
                                gen_cs(world.env, world.features, tester, cell.t)};
                        } else {
                            throw Error("run_sensitivity: unknown method '" + cell.method + "'");
                        }
                    } catch (const Error&) {
                        ++cell.failed_cells;
                        continue;
                    }

                    for (std::size_t agent_index = 0; agent_index < agents.size(); ++agent_index) {
                        const auto& labeled = agents[agent_index];
                        const Verdict verdict =
                            administer(test, labeled.agent,
                                       rng.fork(1000 + agent_index).seed());
                        cell.queries += verdict.queries_used;
                        ++cell.administered;
                        if (verdict.passed && labeled.aligned) ++cell.pass_aligned;
                        if (verdict.passed && !labeled.aligned) ++cell.pass_misaligned;
                        if (!verdict.passed && labeled.aligned) {
                            ++cell.fail_aligned;
                            result.violations.push_back(
                                cell.method + " failed an exactly-aligned agent (grid " +
                                std::to_string(width) + "x" + std::to_string(height) + ", k=" +
                                std::to_string(k) + ")");
                        }
                        if (!verdict.passed && !labeled.aligned) ++cell.fail_misaligned;
                    }
                }
            }

            for (const auto& cell : cells) {
                ExperimentRow row;
                row.grid_w = width;
                row.grid_h = height;
                row.k = k;
                row.method = cell.method;
                row.t = cell.t;
                row.seed = config.seed;
                row.n_agents = cell.administered;
                row.total_queries = cell.queries;
                row.pass_aligned = cell.pass_aligned;
                row.pass_misaligned = cell.pass_misaligned;
                row.fail_aligned = cell.fail_aligned;
                row.fail_misaligned = cell.fail_misaligned;
                row.failed_cells = cell.failed_cells;
                if (cell.administered > 0) {
                    row.mean_queries = static_cast<double>(cell.queries) / cell.administered;
                    row.accuracy =
                        static_cast<double>(cell.pass_aligned + cell.fail_misaligned) /
                        cell.administered;
                    const int misaligned = cell.pass_misaligned + cell.fail_misaligned;
                    const int aligned = cell.pass_aligned + cell.fail_aligned;
                    row.fpr = misaligned > 0
                                  ? static_cast<double>(cell.pass_misaligned) / misaligned
                                  : 0.0;
                    row.fnr = aligned > 0 ? static_cast<double>(cell.fail_aligned) / aligned : 0.0;
                }
                if ((cell.method == "arp_w" || cell.method == "arp_pref") &&
                    cell.administered > 0 && row.accuracy != 1.0)
                    result.violations.push_back(cell.method + " accuracy " +
                                                detail::format_double(row.accuracy) +
                                                " below 1.0 on grid " + std::to_string(width) +
                                                "x" + std::to_string(height) + ", k=" +
                                                std::to_string(k));
                result.rows.push_back(std::move(row));
            }
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Output formats
// ---------------------------------------------------------------------------

inline std::string experiment_csv(const std::vector<ExperimentRow>& rows) {
    std::string out = "grid_w,grid_h,k,method,t,seed,mean_queries,accuracy,fpr,fnr,n_agents\n";
    for (const auto& row : rows) {
        out += std::to_string(row.grid_w) + ',' + std::to_string(row.grid_h) + ',' +
               std::to_string(row.k) + ',' + row.method + ',' +
               (row.t >= 0.0 ? detail::format_double(row.t) : std::string("na")) + ',' +
               std::to_string(row.seed) + ',' + detail::format_double(row.mean_queries) + ',' +
               detail::format_double(row.accuracy) + ',' + detail::format_double(row.fpr) + ',' +
               detail::format_double(row.fnr) + ',' + std::to_string(row.n_agents) + '\n';
    }
    return out;
}

inline json experiment_summary_json(const ExperimentResult& result) {
    json rows = json::array();
    for (const auto& row : result.rows)
        rows.push_back(json{{"grid_w", row.grid_w},
                            {"grid_h", row.grid_h},
                            {"k", row.k},
                            {"method", row.method},
                            {"t", row.t},
                            {"seed", row.seed},
                            {"mean_queries", row.mean_queries},
                            {"accuracy", row.accuracy},
                            {"fpr", row.fpr},
                            {"fnr", row.fnr},
                            {"n_agents", row.n_agents},
                            {"pass_aligned", row.pass_aligned},
                            {"pass_misaligned", row.pass_misaligned},
                            {"fail_aligned", row.fail_aligned},
                            {"fail_misaligned", row.fail_misaligned},
                            {"total_queries", row.total_queries},
                            {"failed_cells", row.failed_cells}});
    return json{{"rows", rows}, {"violations", result.violations}};
}

inline ExperimentConfig experiment_config_from_json(const json& j) {
    ExperimentConfig config;
    config.grid_sizes.clear();
    for (const auto& size : j.at("grid_sizes"))
        config.grid_sizes.emplace_back(size.at(0).get<int>(), size.at(1).get<int>());
    config.feature_counts = j.at("feature_counts").get<std::vector<int>>();
    config.mdps_per_config = j.value("mdps_per_config", 50);
    config.agents_per_mdp = j.value("agents_per_mdp", 50);
    if (j.contains("methods")) config.methods = j.at("methods").get<std::vector<std::string>>();
    if (j.contains("cs_thresholds"))
        config.cs_thresholds = j.at("cs_thresholds").get<std::vector<double>>();
    config.seed = j.value("seed", 0);
    config.gamma = j.value("gamma", 0.95);
    config.validate();
    return config;
}

inline json experiment_config_to_json(const ExperimentConfig& config) {
    json sizes = json::array();
    for (const auto& [w, h] : config.grid_sizes) sizes.push_back(json::array({w, h}));
    return json{{"grid_sizes", sizes},
                {"feature_counts", config.feature_counts},
                {"mdps_per_config", config.mdps_per_config},
                {"agents_per_mdp", config.agents_per_mdp},
                {"methods", config.methods},
                {"cs_thresholds", config.cs_thresholds},
                {"seed", config.seed},
                {"gamma", config.gamma}};
}

} // namespace vav
