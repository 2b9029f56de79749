#pragma once

#include "sg/game.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

namespace sg {

/// Shape of a seeded random game.
struct RandomGameSpec {
    int num_states = 10;
    int num_actions = 2;
    double gamma = 0.9;
    /// Next-state support size per action; 0 or >= num_states means dense rows.
    int support = 0;
    /// Point-mass transitions (overrides support).
    bool deterministic = false;
    /// Fraction of MAX-owned states; each state's owner is drawn independently.
    double max_fraction = 0.5;
};

/**
 * Random game with rewards uniform on [0,1].  Rows put weights drawn
 * uniformly from (0,1] on `support` distinct states and normalize them, so
 * dense rows give an ergodic chain under every strategy.
 */
inline StochasticGame random_game(const RandomGameSpec& spec, std::uint64_t seed) {
    if (spec.num_states < 1 || spec.num_actions < 1) throw std::invalid_argument("random_game: empty shape");
    if (!(spec.gamma >= 0.0 && spec.gamma < 1.0)) throw std::invalid_argument("random_game: gamma must lie in [0,1)");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int n = spec.num_states;
    const int k = spec.deterministic ? 1 : (spec.support <= 0 || spec.support >= n ? n : spec.support);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<State> states(n);
    for (auto& st : states) {
        st.owner = unit(rng) < spec.max_fraction ? Owner::Max : Owner::Min;
        for (int a = 0; a < spec.num_actions; ++a) {
            Action act;
            act.reward = unit(rng);
            std::shuffle(order.begin(), order.end(), rng);
            std::vector<int> targets(order.begin(), order.begin() + k);
            std::sort(targets.begin(), targets.end());
            double total = 0.0;
            std::vector<double> w(k);
            for (auto& x : w) total += (x = 1.0 - unit(rng));
            for (int j = 0; j < k; ++j) act.next.entries.emplace_back(targets[j], w[j] / total);
            st.actions.push_back(std::move(act));
        }
    }
    return StochasticGame(spec.gamma, std::move(states), 1.0);
}

/// Random vector with entries uniform on [lo, hi].
inline Eigen::VectorXd random_vector(int n, double lo, double hi, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> d(lo, hi);
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = d(rng);
    return v;
}

/// Uniformly random pure strategy.
inline Strategy random_strategy(const StochasticGame& game, std::mt19937_64& rng) {
    Strategy sigma(game.num_states());
    for (int s = 0; s < game.num_states(); ++s)
        sigma[s] = std::uniform_int_distribution<int>(0, game.num_actions(s) - 1)(rng);
    return sigma;
}

}  // namespace sg
