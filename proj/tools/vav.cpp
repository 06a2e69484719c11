// Command-line front end: environment builders, test generation and
// administration, preference elicitation, the two-environment gamble test,
// and the sensitivity-study harness.

#include "vav/vav.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

namespace {

using namespace vav;

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    json j;
    in >> j;
    return j;
}

void write_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(2) << '\n';
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << text;
}

Vector read_weights(const std::string& path) {
    const json j = read_json(path);
    return vector_from_json(j.contains("w") ? j.at("w") : j);
}

struct LoadedEnv {
    Environment env;
    FeatureMap features;
    std::optional<GridSpec> grid;
};

LoadedEnv load_env(const std::string& path) {
    const json j = read_json(path);
    auto [env, features] = environment_from_json(j);
    LoadedEnv loaded{std::move(env), std::move(features), std::nullopt};
    if (j.contains("grid")) loaded.grid = grid_from_json(j.at("grid"));
    return loaded;
}

json env_json_with_grid(const Environment& env, const FeatureMap& features, const GridSpec& grid) {
    json j = environment_to_json(env, features);
    j["grid"] = grid_to_json(grid);
    return j;
}

/// Preference-answering human on stdin; trajectories render as grid overlays.
class InteractiveAgent : public Agent {
public:
    explicit InteractiveAgent(std::optional<GridSpec> grid) : grid_(std::move(grid)) {}

    bool supports(Capability c) const override {
        return c == Capability::Preference || c == Capability::ActionQuery;
    }

    PreferenceAnswer preference_query(const PreferenceQuery& query) const override {
        if (grid_ && query.traj_first && query.traj_second) {
            for (const auto& line : render_pair(*grid_, *query.traj_first, *query.traj_second))
                std::cout << line << '\n';
        } else {
            std::cout << "phi(1) = [" << query.phi_first.transpose() << "]\n"
                      << "phi(2) = [" << query.phi_second.transpose() << "]\n";
        }
        std::cout << "Which trajectory do you prefer? [1/2] " << std::flush;
        std::string line;
        while (std::getline(std::cin, line)) {
            if (line == "1") return PreferenceAnswer::First;
            if (line == "2") return PreferenceAnswer::Second;
            std::cout << "Please answer 1 or 2: " << std::flush;
        }
        throw IoError("interactive agent: input closed");
    }

    int action_query(int s, Rng&) const override {
        if (grid_) {
            for (const auto& line : render_probes(*grid_, {s})) std::cout << line << '\n';
        }
        std::cout << "Action at state " << s << " (0=up 1=down 2=left 3=right)? " << std::flush;
        std::string line;
        while (std::getline(std::cin, line)) {
            try {
                return std::stoi(line);
            } catch (const std::exception&) {
                std::cout << "Please answer with an action index: " << std::flush;
            }
        }
        throw IoError("interactive agent: input closed");
    }

private:
    std::optional<GridSpec> grid_;
};

int run(int argc, char** argv) {
    CLI::App app{"value alignment verification toolkit"};
    app.require_subcommand(1);

    // ---------------------------------------------------------------- env
    auto* env_cmd = app.add_subcommand("env", "environment builders");
    env_cmd->require_subcommand(1);

    auto* env_gen = env_cmd->add_subcommand("gen", "random gridworld");
    int width = 6, height = 6, features_count = 4;
    std::uint64_t seed = 0;
    double gamma = 0.95;
    std::string out_path = "env.json";
    env_gen->add_option("--width", width);
    env_gen->add_option("--height", height);
    env_gen->add_option("--features", features_count);
    env_gen->add_option("--seed", seed);
    env_gen->add_option("--gamma", gamma);
    env_gen->add_option("-o,--out", out_path);
    env_gen->callback([&] {
        const auto world = gen_random_gridworld(width, height, features_count, seed, gamma);
        write_json(out_path, env_json_with_grid(world.env, world.features, world.grid));
        std::cout << "wrote " << out_path << '\n';
    });

    auto* env_builtin = env_cmd->add_subcommand("builtin", "island or lava case study");
    std::string builtin_name = "island";
    std::string weights_out;
    env_builtin->add_option("--name", builtin_name, "island|lava")->required();
    env_builtin->add_option("--gamma", gamma);
    env_builtin->add_option("-o,--out", out_path);
    env_builtin->add_option("--weights-out", weights_out);
    env_builtin->callback([&] {
        const auto world = builtin_env(builtin_name, gamma);
        write_json(out_path, env_json_with_grid(world.env, world.features, world.grid));
        std::cout << "wrote " << out_path << '\n';
        if (!weights_out.empty()) {
            write_json(weights_out, json{{"w", vector_to_json(world.weights.w)}});
            std::cout << "wrote " << weights_out << '\n';
        }
        for (const auto& line : render_grid(world.grid)) std::cout << line << '\n';
    });

    // ---------------------------------------------------------------- test
    auto* test_cmd = app.add_subcommand("test", "alignment tests");
    test_cmd->require_subcommand(1);

    auto* test_gen = test_cmd->add_subcommand("gen", "generate a test");
    std::string method = "arp-w", env_path = "env.json", weights_path = "weights.json";
    std::string test_out = "test.json";
    double cs_threshold = 0.2;
    int mc_rollouts = 0;
    int scot_m = 1;
    test_gen->add_option("--method", method,
                         "arp-w|arp-pref|arp-bb|scot|cs|reward-sample|value-query")
        ->required();
    test_gen->add_option("--env", env_path)->required();
    test_gen->add_option("--weights", weights_path)->required();
    test_gen->add_option("--t", cs_threshold);
    test_gen->add_option("--seed", seed);
    test_gen->add_option("--mc-rollouts", mc_rollouts);
    test_gen->add_option("--m", scot_m, "SCOT rollouts per start state");
    test_gen->add_option("-o,--out", test_out);
    test_gen->callback([&] {
        const auto loaded = load_env(env_path);
        const RewardWeights w{read_weights(weights_path)};
        AlignmentTest test;
        if (method == "arp-w") {
            test = gen_weight_test(loaded.env, loaded.features, w);
        } else if (method == "arp-pref") {
            test = gen_preference_test(loaded.env, loaded.features, w, seed, mc_rollouts);
        } else if (method == "arp-bb") {
            test = AlignmentTest{gen_arp_bb(loaded.env, loaded.features, w)};
        } else if (method == "scot") {
            test = AlignmentTest{gen_scot(loaded.env, loaded.features, w, scot_m,
                                          default_horizon(loaded.env.gamma, loaded.env.n_states),
                                          seed)};
        } else if (method == "cs") {
            test = AlignmentTest{gen_cs(loaded.env, loaded.features, w, cs_threshold)};
        } else if (method == "reward-sample") {
            test = make_reward_sample_test(loaded.env, loaded.features, w);
        } else if (method == "value-query") {
            test = make_value_query_test(loaded.env, loaded.features, w);
        } else {
            throw Error("unknown method '" + method + "'");
        }
        json j = alignment_test_to_json(test);
        if (loaded.grid) j["grid"] = grid_to_json(*loaded.grid);
        write_json(test_out, j);
        std::cout << "wrote " << test_out << " (kind " << test.kind() << ")\n";
        if (const auto* action = std::get_if<ActionQueryTest>(&test.payload); action && loaded.grid) {
            for (const auto& line : render_probes(*loaded.grid, action->states))
                std::cout << line << '\n';
        }
    });

    auto* test_run = test_cmd->add_subcommand("run", "administer a test to an agent");
    std::string test_path = "test.json", agent_kind = "rational", agent_weights_path;
    std::string verdict_out;
    int queries_per_state = 1;
    test_run->add_option("--test", test_path)->required();
    test_run->add_option("--agent", agent_kind, "rational|random|interactive")->required();
    test_run->add_option("--agent-weights", agent_weights_path);
    test_run->add_option("--env", env_path);
    test_run->add_option("--seed", seed);
    test_run->add_option("--queries-per-state", queries_per_state);
    test_run->add_option("-o,--out", verdict_out);
    test_run->callback([&] {
        const json test_json = read_json(test_path);
        std::optional<GridSpec> grid;
        if (test_json.contains("grid")) grid = grid_from_json(test_json.at("grid"));

        std::unique_ptr<Agent> agent;
        std::optional<LoadedEnv> loaded;
        if (agent_kind == "rational") {
            if (env_path.empty() || agent_weights_path.empty())
                throw Error("rational agent needs --env and --agent-weights");
            loaded = load_env(env_path);
            agent = std::make_unique<RationalAgent>(loaded->env, loaded->features,
                                                    read_weights(agent_weights_path));
        } else if (agent_kind == "random") {
            if (env_path.empty()) throw Error("random agent needs --env");
            loaded = load_env(env_path);
            agent = std::make_unique<UniformRandomAgent>(loaded->env.n_actions);
        } else if (agent_kind == "interactive") {
            agent = std::make_unique<InteractiveAgent>(grid);
        } else {
            throw Error("unknown agent '" + agent_kind + "'");
        }

        Verdict verdict;
        if (test_json.at("kind").get<std::string>() == "epsilon") {
            verdict = administer_epsilon_test(epsilon_test_from_json(test_json), *agent);
        } else {
            const AlignmentTest test = alignment_test_from_json(test_json);
            if (const auto* action = std::get_if<ActionQueryTest>(&test.payload)) {
                Rng rng(seed);
                verdict = administer_action_test(*action, *agent, queries_per_state, rng);
            } else {
                verdict = administer(test, *agent, seed);
            }
        }
        const json out = verdict_to_json(verdict);
        if (!verdict_out.empty()) write_json(verdict_out, out);
        std::cout << out.dump(2) << '\n';
        if (!verdict.passed) throw CLI::RuntimeError(2);
    });

    // ---------------------------------------------------------------- elicit
    auto* elicit_cmd = app.add_subcommand("elicit", "preference elicitation");
    std::string oracle_kind = "synthetic", w_true_path, dataset_out = "dataset.json",
                posterior_out = "posterior.json";
    int n_questions = 25, n_samples = 100;
    elicit_cmd->add_option("--env", env_path)->required();
    elicit_cmd->add_option("--oracle", oracle_kind, "synthetic|interactive")->required();
    elicit_cmd->add_option("--w-true", w_true_path, "hidden weights for the synthetic oracle");
    elicit_cmd->add_option("--n", n_questions);
    elicit_cmd->add_option("--samples", n_samples, "posterior sample count M");
    elicit_cmd->add_option("--seed", seed);
    elicit_cmd->add_option("--dataset-out", dataset_out);
    elicit_cmd->add_option("--posterior-out", posterior_out);
    elicit_cmd->callback([&] {
        const auto loaded = load_env(env_path);
        PreferenceOracle oracle;
        std::unique_ptr<InteractiveAgent> human;
        if (oracle_kind == "synthetic") {
            if (w_true_path.empty()) throw Error("synthetic oracle needs --w-true");
            oracle = make_synthetic_oracle(read_weights(w_true_path));
        } else if (oracle_kind == "interactive") {
            human = std::make_unique<InteractiveAgent>(loaded.grid);
            oracle = [&human](const PreferenceQuery& q) { return human->preference_query(q); };
        } else {
            throw Error("unknown oracle '" + oracle_kind + "'");
        }
        const auto result = elicit(loaded.env, loaded.features, oracle, n_questions, n_samples, seed);
        write_json(dataset_out, dataset_to_json(result.dataset));
        write_json(posterior_out, posterior_to_json(result.posterior));
        std::cout << "asked " << result.dataset.size() << " questions; wrote " << dataset_out
                  << " and " << posterior_out << '\n';
        for (const auto& warning : result.dataset.warnings) std::cerr << "warning: " << warning << '\n';
    });

    // ---------------------------------------------------------------- eps
    auto* eps_cmd = app.add_subcommand("eps", "epsilon-alignment tests from elicited preferences");
    eps_cmd->require_subcommand(1);

    auto* eps_build = eps_cmd->add_subcommand("build", "dedup, filter, and minimize");
    std::string dataset_path = "dataset.json", posterior_path = "posterior.json";
    double epsilon = 0.0, delta = 0.1;
    std::string mode = "mean";
    eps_build->add_option("--dataset", dataset_path)->required();
    eps_build->add_option("--posterior", posterior_path)->required();
    eps_build->add_option("--epsilon", epsilon)->required();
    eps_build->add_option("--mode", mode, "mean|eps-delta");
    eps_build->add_option("--delta", delta);
    eps_build->add_option("-o,--out", test_out);
    eps_build->callback([&] {
        const auto dataset = dataset_from_json(read_json(dataset_path));
        const auto posterior = posterior_from_json(read_json(posterior_path));
        const auto test = build_epsilon_test(dataset, posterior, epsilon,
                                             mode == "mean" ? EpsilonMode::Mean : EpsilonMode::EpsDelta,
                                             delta);
        write_json(test_out, epsilon_test_to_json(test));
        std::cout << "wrote " << test_out << " with " << test.size() << " of " << dataset.size()
                  << " questions\n";
        if (test.empty()) std::cerr << "warning: empty test passes every agent\n";
    });

    auto* eps_eval = eps_cmd->add_subcommand("eval", "accuracy metrics over balanced test rewards");
    std::vector<double> epsilons;
    int n_rewards = 1000;
    std::string csv_out = "metrics.csv", gap_csv_out;
    bool no_gap_labels = false;
    eps_eval->add_option("--dataset", dataset_path)->required();
    eps_eval->add_option("--posterior", posterior_path)->required();
    eps_eval->add_option("--env", env_path)->required();
    eps_eval->add_option("--w-true", w_true_path)->required();
    eps_eval->add_option("--epsilon", epsilons, "one or more epsilon values")->required();
    eps_eval->add_option("--mode", mode, "mean|eps-delta");
    eps_eval->add_option("--delta", delta);
    eps_eval->add_option("--n-rewards", n_rewards);
    eps_eval->add_option("--seed", seed);
    eps_eval->add_option("-o,--out", csv_out);
    eps_eval->add_option("--gap-out", gap_csv_out, "companion CSV with value-gap labels");
    eps_eval->add_flag("--no-gap-labels", no_gap_labels);
    eps_eval->callback([&] {
        const auto dataset = dataset_from_json(read_json(dataset_path));
        const auto posterior = posterior_from_json(read_json(posterior_path));
        const auto loaded = load_env(env_path);
        const Vector w_true = read_weights(w_true_path);
        EvalOptions opts;
        opts.gap_labels = !no_gap_labels;
        std::string csv = "epsilon,n,seed,accuracy,fpr,fnr\n";
        std::string gap_csv = "epsilon,n,seed,accuracy,fpr,fnr\n";
        for (double eps : epsilons) {
            const auto test = build_epsilon_test(dataset, posterior, eps,
                                                 mode == "mean" ? EpsilonMode::Mean
                                                                : EpsilonMode::EpsDelta,
                                                 delta);
            const auto metrics = evaluate_test(test, dataset, loaded.env, loaded.features, w_true,
                                               n_rewards, seed, opts);
            csv += detail::format_double(eps) + ',' + std::to_string(dataset.size()) + ',' +
                   std::to_string(seed) + ',' + detail::format_double(metrics.accuracy) + ',' +
                   detail::format_double(metrics.fpr) + ',' + detail::format_double(metrics.fnr) +
                   '\n';
            gap_csv += detail::format_double(eps) + ',' + std::to_string(dataset.size()) + ',' +
                       std::to_string(seed) + ',' + detail::format_double(metrics.accuracy_gap) +
                       ',' + detail::format_double(metrics.fpr_gap) + ',' +
                       detail::format_double(metrics.fnr_gap) + '\n';
            for (const auto& warning : metrics.warnings)
                std::cerr << "warning (epsilon " << eps << "): " << warning << '\n';
        }
        write_text(csv_out, csv);
        std::cout << "wrote " << csv_out << '\n';
        if (!gap_csv_out.empty() && !no_gap_labels) {
            write_text(gap_csv_out, gap_csv);
            std::cout << "wrote " << gap_csv_out << '\n';
        }
    });

    // ---------------------------------------------------------------- omni
    auto* omni_cmd = app.add_subcommand("omni", "two-environment gamble test");
    omni_cmd->require_subcommand(1);

    auto* omni_gen = omni_cmd->add_subcommand("gen", "build the gamble environments");
    std::string rewards_path = "rewards.json", out_prefix = "omni";
    omni_gen->add_option("--rewards", rewards_path)->required();
    omni_gen->add_option("--epsilon", epsilon)->required();
    omni_gen->add_option("--gamma", gamma);
    omni_gen->add_option("--out-prefix", out_prefix);
    omni_gen->callback([&] {
        const json j = read_json(rewards_path);
        const Vector r = vector_from_json(j.contains("r") ? j.at("r") : j);
        const auto test = build_omni_test(r, epsilon, gamma);
        const std::string l_file = out_prefix + "_L.json";
        const std::string u_file = out_prefix + "_U.json";
        const FeatureMap identity = FeatureMap::identity(test.env_l.n_states);
        write_json(l_file, environment_to_json(test.env_l, identity));
        write_json(u_file, environment_to_json(test.env_u, identity));
        write_json(out_prefix + "_manifest.json", omni_manifest_to_json(test, l_file, u_file));
        std::cout << "wrote " << l_file << ", " << u_file << ", " << out_prefix
                  << "_manifest.json\n";
    });

    auto* omni_verify = omni_cmd->add_subcommand("verify", "check a robot's gamble policies");
    std::string manifest_path = "omni_manifest.json", robot_rewards_path, policy_l_path,
                policy_u_path;
    omni_verify->add_option("--manifest", manifest_path)->required();
    omni_verify->add_option("--robot-rewards", robot_rewards_path,
                            "simulate a rational robot with this reward table");
    omni_verify->add_option("--policy-l", policy_l_path, "policy JSON for the pessimistic env");
    omni_verify->add_option("--policy-u", policy_u_path, "policy JSON for the optimistic env");
    omni_verify->callback([&] {
        const json manifest = read_json(manifest_path);
        auto [env_l, feat_l] = environment_from_json(read_json(manifest.at("env_l").get<std::string>()));
        auto [env_u, feat_u] = environment_from_json(read_json(manifest.at("env_u").get<std::string>()));
        const auto test = omni_test_from_parts(manifest, std::move(env_l), std::move(env_u));

        bool passed;
        if (!robot_rewards_path.empty()) {
            const json j = read_json(robot_rewards_path);
            RationalOmniRobot robot(vector_from_json(j.contains("r") ? j.at("r") : j));
            passed = administer_omni(test, robot);
        } else if (!policy_l_path.empty() && !policy_u_path.empty()) {
            const auto read_policy = [](const std::string& path) {
                const json j = read_json(path);
                const auto& rows = j.at("action_probs");
                Matrix probs(rows.size(), rows.at(0).size());
                for (std::size_t s = 0; s < rows.size(); ++s)
                    probs.row(static_cast<Eigen::Index>(s)) =
                        vector_from_json(rows.at(s)).transpose();
                Policy policy{std::move(probs)};
                policy.validate();
                return policy;
            };
            passed = verify_omni(test, read_policy(policy_l_path), read_policy(policy_u_path));
        } else {
            throw Error("omni verify needs --robot-rewards or both --policy-l and --policy-u");
        }
        std::cout << json{{"passed", passed}}.dump(2) << '\n';
        if (!passed) throw CLI::RuntimeError(2);
    });

    // ---------------------------------------------------------------- experiment
    auto* experiment_cmd = app.add_subcommand("experiment", "sensitivity harness");
    experiment_cmd->require_subcommand(1);
    auto* experiment_run = experiment_cmd->add_subcommand("run", "full sweep from a config file");
    std::string config_path = "config.json", json_out;
    experiment_run->add_option("--config", config_path)->required();
    experiment_run->add_option("--csv-out", csv_out);
    experiment_run->add_option("--json-out", json_out);
    experiment_run->callback([&] {
        const auto config = experiment_config_from_json(read_json(config_path));
        const auto result = run_sensitivity(config);
        write_text(csv_out, experiment_csv(result.rows));
        std::cout << "wrote " << csv_out << " (" << result.rows.size() << " rows)\n";
        if (!json_out.empty()) write_json(json_out, experiment_summary_json(result));
        for (const auto& violation : result.violations)
            std::cerr << "invariant violation: " << violation << '\n';
        if (!result.ok()) throw CLI::RuntimeError(1);
    });

    CLI11_PARSE(app, argc, argv);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const vav::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
