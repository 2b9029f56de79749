#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sg {

/// Player owning a state: MIN minimizes discounted reward, MAX maximizes it.
enum class Owner { Min, Max };

inline Owner opponent(Owner o) { return o == Owner::Min ? Owner::Max : Owner::Min; }

inline const char* owner_name(Owner o) { return o == Owner::Min ? "min" : "max"; }

/// Per-state values, in discounted cumulative reward units.
using ValueVector = Eigen::VectorXd;

/// Per state-action values, indexed by StochasticGame::pair_index.
using QFunction = Eigen::VectorXd;

/// One chosen action per state. Entries of -1 mark "undefined" in partial strategies.
using Strategy = std::vector<int>;

/**
 * Sparse next-state distribution of one action.
 *
 * A row is either an explicit list of (state, probability) entries or the
 * compact "uniform over all states" marker used by the hard instances.
 */
struct Transition {
    std::vector<std::pair<int, double>> entries;
    bool uniform = false;

    static Transition point(int s) { return Transition{{{s, 1.0}}, false}; }
    static Transition uniform_all() { return Transition{{}, true}; }

    /// Expected value of v under this row.  `v_mean` must equal v.mean().
    double expect(const ValueVector& v, double v_mean) const {
        if (uniform) return v_mean;
        double acc = 0.0;
        for (const auto& [t, p] : entries) acc += p * v[t];
        return acc;
    }

    bool operator==(const Transition&) const = default;
};

struct Action {
    double reward = 0.0;
    Transition next;

    bool operator==(const Action&) const = default;
};

struct State {
    Owner owner = Owner::Min;
    std::vector<Action> actions;

    bool operator==(const State&) const = default;
};

/**
 * Immutable turn-based two-player zero-sum discounted stochastic game.
 *
 * Construction only checks shape (non-empty state list).  Use validate() to
 * obtain the list of violated invariants; loaders and generators call it.
 * State-action pairs are numbered contiguously so that Q-functions and
 * per-pair statistics are flat vectors.
 */
class StochasticGame {
public:
    StochasticGame(double gamma, std::vector<State> states, std::optional<double> reward_bound = std::nullopt)
        : gamma_(gamma), states_(std::move(states)) {
        if (states_.empty()) throw std::invalid_argument("game must have at least one state");
        offsets_.reserve(states_.size() + 1);
        offsets_.push_back(0);
        for (const auto& st : states_) offsets_.push_back(offsets_.back() + st.actions.size());
        pair_state_.resize(offsets_.back());
        for (std::size_t s = 0; s < states_.size(); ++s)
            for (std::size_t p = offsets_[s]; p < offsets_[s + 1]; ++p) pair_state_[p] = static_cast<int>(s);
        double bound = 0.0;
        for (const auto& st : states_)
            for (const auto& a : st.actions) bound = std::max(bound, std::abs(a.reward));
        reward_bound_ = reward_bound.value_or(bound);
    }

    int num_states() const { return static_cast<int>(states_.size()); }
    int num_actions(int s) const { return static_cast<int>(states_[s].actions.size()); }
    int num_pairs() const { return static_cast<int>(offsets_.back()); }
    int pair_index(int s, int a) const { return static_cast<int>(offsets_[s]) + a; }
    int pair_state(int p) const { return pair_state_[p]; }
    int pair_action(int p) const { return p - static_cast<int>(offsets_[pair_state_[p]]); }

    double gamma() const { return gamma_; }
    double reward_bound() const { return reward_bound_; }
    Owner owner(int s) const { return states_[s].owner; }
    const State& state(int s) const { return states_[s]; }
    const std::vector<State>& states() const { return states_; }
    const Action& action(int s, int a) const { return states_[s].actions[a]; }
    double reward(int s, int a) const { return states_[s].actions[a].reward; }
    const Transition& transition(int s, int a) const { return states_[s].actions[a].next; }

    /// Returns true if every state is owned by `o`.
    bool single_player(Owner o) const {
        return std::all_of(states_.begin(), states_.end(), [o](const State& st) { return st.owner == o; });
    }

    bool operator==(const StochasticGame& other) const {
        return gamma_ == other.gamma_ && reward_bound_ == other.reward_bound_ && states_ == other.states_;
    }

private:
    double gamma_;
    double reward_bound_ = 0.0;
    std::vector<State> states_;
    std::vector<std::size_t> offsets_;
    std::vector<int> pair_state_;
};

/**
 * Lists every violated invariant of `game`.  An empty result means the game
 * is well-formed: 0 < gamma < 1, each state has an action, each transition row
 * is non-negative with in-range indices and sums to 1 within 1e-9, and each
 * reward is finite and within the recorded reward bound.
 */
inline std::vector<std::string> validate(const StochasticGame& game) {
    std::vector<std::string> report;
    auto emit = [&report](const std::string& msg) { report.push_back(msg); };
    const double g = game.gamma();
    if (!(g > 0.0 && g < 1.0)) {
        std::ostringstream os;
        os << "gamma " << g << " outside (0,1)";
        emit(os.str());
    }
    const int n = game.num_states();
    for (int s = 0; s < n; ++s) {
        if (game.num_actions(s) == 0) {
            emit("state " + std::to_string(s) + " has no actions");
            continue;
        }
        for (int a = 0; a < game.num_actions(s); ++a) {
            const auto& act = game.action(s, a);
            std::string where = "(" + std::to_string(s) + "," + std::to_string(a) + ")";
            if (!std::isfinite(act.reward)) {
                emit("non-finite reward at " + where);
            } else if (std::abs(act.reward) > game.reward_bound() + 1e-12) {
                std::ostringstream os;
                os << "reward " << act.reward << " exceeds bound " << game.reward_bound() << " at " << where;
                emit(os.str());
            }
            if (act.next.uniform) {
                if (!act.next.entries.empty()) emit("uniform row with explicit entries at " + where);
                continue;
            }
            if (act.next.entries.empty()) {
                emit("empty transition row at " + where);
                continue;
            }
            double sum = 0.0;
            bool bad_index = false;
            for (const auto& [t, p] : act.next.entries) {
                if (t < 0 || t >= n) bad_index = true;
                if (!(p >= 0.0) || !std::isfinite(p)) {
                    std::ostringstream os;
                    os << "negative or non-finite probability " << p << " at " << where;
                    emit(os.str());
                }
                sum += p;
            }
            if (bad_index) emit("next-state index out of range at " + where);
            if (std::abs(sum - 1.0) > 1e-9) {
                std::ostringstream os;
                os << "transition sum " << sum << " != 1 at " << where;
                emit(os.str());
            }
        }
    }
    return report;
}

/// Throws std::invalid_argument listing the violations if the game is malformed.
inline void require_valid(const StochasticGame& game) {
    auto report = validate(game);
    if (report.empty()) return;
    std::string msg = "invalid game:";
    for (const auto& r : report) msg += "\n  " + r;
    throw std::invalid_argument(msg);
}

/// Returns true if every reward lies in [0, 1].
inline bool rewards_in_unit_interval(const StochasticGame& game) {
    for (const auto& st : game.states())
        for (const auto& a : st.actions)
            if (!(a.reward >= 0.0 && a.reward <= 1.0)) return false;
    return true;
}

/**
 * Swaps the roles of the two players: owners flip and rewards become 1 - r.
 * The optimal value of the result is 1/(1-gamma) - v*, so the min player of
 * the mirrored game plays the max player's optimum of the original.
 */
inline StochasticGame mirror(const StochasticGame& game) {
    if (!rewards_in_unit_interval(game)) throw std::invalid_argument("mirror requires rewards in [0,1]");
    std::vector<State> states = game.states();
    for (auto& st : states) {
        st.owner = opponent(st.owner);
        for (auto& a : st.actions) a.reward = 1.0 - a.reward;
    }
    return StochasticGame(game.gamma(), std::move(states), game.reward_bound());
}

/**
 * Maps rewards to (r + offset) / scale.  Strategy values transform the same
 * way with offset/(1-gamma) in place of offset, so optimal strategies are
 * unchanged.  The recorded reward bound is recomputed from the new rewards.
 */
inline StochasticGame affine_reward_map(const StochasticGame& game, double scale, double offset) {
    if (!(scale > 0.0)) throw std::invalid_argument("affine_reward_map requires scale > 0");
    std::vector<State> states = game.states();
    for (auto& st : states)
        for (auto& a : st.actions) a.reward = (a.reward + offset) / scale;
    return StochasticGame(game.gamma(), std::move(states));
}

/// Restriction of a joint strategy to one player's states; other entries become -1.
inline Strategy restrict_to(const StochasticGame& game, const Strategy& sigma, Owner player) {
    Strategy out(sigma.size(), -1);
    for (int s = 0; s < game.num_states(); ++s)
        if (game.owner(s) == player) out[s] = sigma[s];
    return out;
}

/// Throws if sigma is not a total strategy for game.
inline void require_total(const StochasticGame& game, const Strategy& sigma) {
    if (static_cast<int>(sigma.size()) != game.num_states())
        throw std::invalid_argument("strategy length does not match state count");
    for (int s = 0; s < game.num_states(); ++s)
        if (sigma[s] < 0 || sigma[s] >= game.num_actions(s))
            throw std::invalid_argument("strategy action out of range at state " + std::to_string(s));
}

}  // namespace sg
