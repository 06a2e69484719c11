#pragma once

#include "vav/common.hpp"
#include "vav/environment.hpp"
#include "vav/rng.hpp"

#include <string>
#include <vector>

namespace vav {

/// Grid geometry and per-cell labels, kept alongside an Environment for
/// rendering and structural assertions. State index is row * width + col.
struct GridSpec {
    int width = 0;
    int height = 0;
    std::vector<char> cell; // one label per state

    int state(int row, int col) const { return row * width + col; }
    int row_of(int s) const { return s / width; }
    int col_of(int s) const { return s % width; }
    char label(int s) const { return cell[static_cast<std::size_t>(s)]; }
};

struct GridWorld {
    Environment env;
    FeatureMap features;
    GridSpec grid;
};

struct BuiltinWorld {
    Environment env;
    FeatureMap features;
    RewardWeights weights;
    GridSpec grid;
    int start_state = 0;
};

// Actions: 0 = up, 1 = down, 2 = left, 3 = right. Off-grid moves self-loop.
inline constexpr int kGridActions = 4;

namespace detail {

inline Environment grid_environment(const GridSpec& grid, double gamma,
                                    const std::vector<int>& terminals,
                                    const Vector& initial_dist) {
    const int n = grid.width * grid.height;
    Environment env;
    env.n_states = n;
    env.n_actions = kGridActions;
    env.gamma = gamma;
    env.terminals = terminals;
    env.initial_dist = initial_dist;
    env.transitions.assign(kGridActions, Matrix::Zero(n, n));
    const int dr[kGridActions] = {-1, 1, 0, 0};
    const int dc[kGridActions] = {0, 0, -1, 1};
    for (int s = 0; s < n; ++s) {
        const int r = grid.row_of(s);
        const int c = grid.col_of(s);
        for (int a = 0; a < kGridActions; ++a) {
            int nr = r + dr[a];
            int nc = c + dc[a];
            int sp;
            if (env.is_terminal(s) || nr < 0 || nr >= grid.height || nc < 0 || nc >= grid.width)
                sp = s;
            else
                sp = grid.state(nr, nc);
            env.transitions[static_cast<std::size_t>(a)](s, sp) = 1.0;
        }
    }
    env.validate();
    return env;
}

inline FeatureMap one_hot_features(const std::vector<int>& colors, int k) {
    Matrix phi = Matrix::Zero(static_cast<Eigen::Index>(colors.size()), k);
    for (std::size_t s = 0; s < colors.size(); ++s) phi(static_cast<Eigen::Index>(s), colors[s]) = 1.0;
    return FeatureMap{std::move(phi)};
}

} // namespace detail

/// Deterministic four-action gridworld with one-hot color features placed
/// uniformly at random; every color appears at least once. Uniform initial
/// distribution, no terminals.
inline GridWorld gen_random_gridworld(int width, int height, int n_features,
                                      std::uint64_t rng_seed, double gamma = 0.95) {
    const int n = width * height;
    require(width >= 1 && height >= 1, "gen_random_gridworld: degenerate grid");
    require(n_features >= 2, "gen_random_gridworld: need at least 2 features");
    require(n_features <= n, "gen_random_gridworld: more features than cells");

    Rng rng(rng_seed);
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int s = 0; s < n; ++s) order[static_cast<std::size_t>(s)] = s;
    rng.shuffle(order);

    std::vector<int> colors(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i)
        colors[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] =
            (i < n_features) ? i : rng.below(n_features);

    GridSpec grid;
    grid.width = width;
    grid.height = height;
    grid.cell.resize(static_cast<std::size_t>(n));
    for (int s = 0; s < n; ++s) {
        const int c = colors[static_cast<std::size_t>(s)];
        grid.cell[static_cast<std::size_t>(s)] = static_cast<char>(c < 10 ? '0' + c : 'a' + (c - 10));
    }

    GridWorld world;
    world.grid = grid;
    world.env = detail::grid_environment(grid, gamma, {}, Vector::Constant(n, 1.0 / n));
    world.features = detail::one_hot_features(colors, n_features);
    return world;
}

/// The two case-study worlds. Layouts are reconstructions at the figure-level
/// structure: a green absorbing goal, white walkable cells, and a hazardous
/// color (blue water / red lava) that the optimal policy avoids.
///   island: R(s) = 50*green - 1*white - 50*blue
///   lava:   R(s) = 50*green - 1*white - 50*red
inline BuiltinWorld builtin_env(const std::string& name, double gamma = 0.95) {
    std::vector<std::string> art;
    char hazard;
    if (name == "island") {
        art = {"BBBBBBB",
               "B.....B",
               "B.....B",
               "B..G..B",
               "BBBBBBB"};
        hazard = 'B';
    } else if (name == "lava") {
        art = {"......",
               "..RR..",
               "..RR..",
               "..RR.G",
               "......"};
        hazard = 'R';
    } else {
        throw Error("builtin_env: unknown environment '" + name + "'");
    }

    GridSpec grid;
    grid.height = static_cast<int>(art.size());
    grid.width = static_cast<int>(art.front().size());
    const int n = grid.width * grid.height;
    grid.cell.resize(static_cast<std::size_t>(n));
    std::vector<int> colors(static_cast<std::size_t>(n));
    std::vector<int> terminals;
    for (int r = 0; r < grid.height; ++r)
        for (int c = 0; c < grid.width; ++c) {
            const int s = grid.state(r, c);
            const char ch = art[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
            grid.cell[static_cast<std::size_t>(s)] = ch;
            if (ch == 'G') {
                colors[static_cast<std::size_t>(s)] = 0;
                terminals.push_back(s);
            } else if (ch == hazard) {
                colors[static_cast<std::size_t>(s)] = 2;
            } else {
                colors[static_cast<std::size_t>(s)] = 1;
            }
        }

    const int start = (name == "island") ? grid.state(1, 2) : grid.state(3, 0);
    Vector init = Vector::Zero(n);
    init[start] = 1.0;

    BuiltinWorld world;
    world.grid = grid;
    world.env = detail::grid_environment(grid, gamma, terminals, init);
    world.features = detail::one_hot_features(colors, 3);
    world.weights = RewardWeights{(Vector(3) << 50.0, -1.0, -50.0).finished()};
    world.start_state = start;
    return world;
}

// ---------------------------------------------------------------------------
// ASCII rendering
// ---------------------------------------------------------------------------

/// Renders the grid with an optional per-state overlay mark ('\0' = none).
inline std::vector<std::string> render_grid(const GridSpec& grid,
                                            const std::vector<char>& overlay = {}) {
    std::vector<std::string> lines;
    for (int r = 0; r < grid.height; ++r) {
        std::string line;
        for (int c = 0; c < grid.width; ++c) {
            const int s = grid.state(r, c);
            line += grid.label(s);
            const char mark = (s < static_cast<int>(overlay.size())) ? overlay[static_cast<std::size_t>(s)] : '\0';
            line += mark ? mark : ' ';
            line += ' ';
        }
        while (!line.empty() && line.back() == ' ') line.pop_back();
        lines.push_back(std::move(line));
    }
    return lines;
}

inline std::vector<std::string> render_probes(const GridSpec& grid, const std::vector<int>& states) {
    std::vector<char> overlay(static_cast<std::size_t>(grid.width * grid.height), '\0');
    for (int s : states) overlay[static_cast<std::size_t>(s)] = '?';
    return render_grid(grid, overlay);
}

inline std::vector<std::string> render_trajectory(const GridSpec& grid, const Trajectory& traj) {
    std::vector<char> overlay(static_cast<std::size_t>(grid.width * grid.height), '\0');
    for (int s : traj.states) overlay[static_cast<std::size_t>(s)] = '*';
    if (!traj.states.empty()) overlay[static_cast<std::size_t>(traj.states.front())] = 'S';
    return render_grid(grid, overlay);
}

/// Two trajectories side by side, for preference prompts.
inline std::vector<std::string> render_pair(const GridSpec& grid, const Trajectory& first,
                                            const Trajectory& second) {
    const auto left = render_trajectory(grid, first);
    const auto right = render_trajectory(grid, second);
    std::vector<std::string> lines;
    lines.push_back("(1)");
    for (const auto& l : left) lines.push_back("  " + l);
    lines.push_back("(2)");
    for (const auto& l : right) lines.push_back("  " + l);
    return lines;
}

inline json grid_to_json(const GridSpec& grid) {
    return json{{"width", grid.width},
                {"height", grid.height},
                {"cells", std::string(grid.cell.begin(), grid.cell.end())}};
}

inline GridSpec grid_from_json(const json& j) {
    GridSpec g;
    g.width = j.at("width").get<int>();
    g.height = j.at("height").get<int>();
    const auto cells = j.at("cells").get<std::string>();
    g.cell.assign(cells.begin(), cells.end());
    require_dims(static_cast<int>(g.cell.size()) == g.width * g.height,
                 "grid_from_json: cells length mismatch");
    return g;
}

} // namespace vav
