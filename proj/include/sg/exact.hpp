#pragma once

#include "sg/game.hpp"
#include "sg/linalg.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace sg {

/// One action switch made by an iterative solver.
struct Flip {
    int state = 0;
    int old_action = 0;
    int new_action = 0;
};

/**
 * One record per solver iteration.  For policy and strategy iteration an
 * iteration is one exact policy evaluation together with every switch made
 * from that evaluation; `evaluations` is the running count of linear solves.
 */
struct IterationRecord {
    long iter = 0;
    double residual = 0.0;
    std::vector<Flip> changes;
    long evaluations = 0;
};

struct SolveTrace {
    std::vector<IterationRecord> iterations;

    long evaluations() const { return iterations.empty() ? 0 : iterations.back().evaluations; }

    /// Number of iterations that switched at least one action.
    long improving_iterations() const {
        long k = 0;
        for (const auto& it : iterations) k += it.changes.empty() ? 0 : 1;
        return k;
    }
};

/// Q(s,a) = r(s,a) + gamma * <P(.|s,a), v>.
inline QFunction q_from_v(const StochasticGame& game, const ValueVector& v) {
    if (v.size() != game.num_states()) throw std::invalid_argument("q_from_v: dimension mismatch");
    const double mean = v.mean();
    const double g = game.gamma();
    QFunction q(game.num_pairs());
    for (int s = 0; s < game.num_states(); ++s)
        for (int a = 0; a < game.num_actions(s); ++a)
            q[game.pair_index(s, a)] = game.reward(s, a) + g * game.transition(s, a).expect(v, mean);
    return q;
}

/// Lowest-index optimizing action at s for the state's owner.
inline int greedy_action(const StochasticGame& game, const QFunction& q, int s) {
    const bool maximize = game.owner(s) == Owner::Max;
    int best = 0;
    double best_val = q[game.pair_index(s, 0)];
    for (int a = 1; a < game.num_actions(s); ++a) {
        const double val = q[game.pair_index(s, a)];
        if (maximize ? val > best_val : val < best_val) {
            best = a;
            best_val = val;
        }
    }
    return best;
}

/**
 * V[Q] and an achieving strategy: min over actions on MIN states, max on MAX
 * states, ties broken by the lowest action index.
 */
inline std::pair<ValueVector, Strategy> greedy(const StochasticGame& game, const QFunction& q) {
    if (q.size() != game.num_pairs()) throw std::invalid_argument("greedy: dimension mismatch");
    ValueVector v(game.num_states());
    Strategy sigma(game.num_states());
    for (int s = 0; s < game.num_states(); ++s) {
        sigma[s] = greedy_action(game, q, s);
        v[s] = q[game.pair_index(s, sigma[s])];
    }
    return {v, sigma};
}

/// Bellman operator T[v].
inline ValueVector bellman(const StochasticGame& game, const ValueVector& v) { return greedy(game, q_from_v(game, v)).first; }

/// Strategy operator T_sigma[v](s) = r(s, sigma(s)) + gamma <P(.|s,sigma(s)), v>.
inline ValueVector apply_strategy(const StochasticGame& game, const Strategy& sigma, const ValueVector& v) {
    require_total(game, sigma);
    return strategy_rewards(game, sigma) + game.gamma() * apply_chain(game, sigma, v);
}

/**
 * Half Bellman operator: states owned by `player` follow pi, the other
 * player's states take the Bellman optimum.  pi may be partial (-1 off the
 * player's states) but must be defined on every state the player owns.
 */
inline ValueVector half_bellman(const StochasticGame& game, const ValueVector& v, const Strategy& pi, Owner player) {
    if (static_cast<int>(pi.size()) != game.num_states()) throw std::invalid_argument("half_bellman: strategy length");
    QFunction q = q_from_v(game, v);
    ValueVector out(game.num_states());
    for (int s = 0; s < game.num_states(); ++s) {
        if (game.owner(s) == player) {
            if (pi[s] < 0 || pi[s] >= game.num_actions(s))
                throw std::invalid_argument("half_bellman: strategy undefined at owned state " + std::to_string(s));
            out[s] = q[game.pair_index(s, pi[s])];
        } else {
            out[s] = q[game.pair_index(s, greedy_action(game, q, s))];
        }
    }
    return out;
}

/// Exact value of a joint strategy: solves (I - gamma P_sigma) v = r_sigma.
inline ValueVector evaluate(const StochasticGame& game, const Strategy& sigma) {
    ChainSolver solver(game, sigma, game.gamma(), false);
    return solver.solve(strategy_rewards(game, sigma));
}

struct ValueIterationResult {
    ValueVector value;
    Strategy strategy;
    SolveTrace trace;
};

/**
 * Iterates v <- T[v] until ||v_i - v_{i-1}|| <= tol (1-gamma) / (2 gamma), so
 * the returned v is within tol of v*.  The strategy is greedy for Q(v).
 */
inline ValueIterationResult value_iteration(const StochasticGame& game, double tol,
                                            std::optional<ValueVector> v0 = std::nullopt,
                                            long max_iter = 10'000'000) {
    if (!(tol > 0.0)) throw std::invalid_argument("value_iteration: tol must be positive");
    const double g = game.gamma();
    const double stop = g > 0.0 ? tol * (1.0 - g) / (2.0 * g) : std::numeric_limits<double>::infinity();
    ValueIterationResult res;
    ValueVector v = v0.value_or(ValueVector::Zero(game.num_states()));
    for (long it = 1;; ++it) {
        if (it > max_iter) throw std::runtime_error("value_iteration: iteration cap exceeded");
        ValueVector next = bellman(game, v);
        const double diff = (next - v).cwiseAbs().maxCoeff();
        v = std::move(next);
        res.trace.iterations.push_back({it, diff, {}, 0});
        if (diff <= stop) break;
    }
    auto [vq, sigma] = greedy(game, q_from_v(game, v));
    (void)vq;
    res.value = std::move(v);
    res.strategy = std::move(sigma);
    return res;
}

/// Player whose actions are held fixed during policy iteration.
struct FixedPlayer {
    Owner player;
    Strategy pi;
};

struct PolicyIterationResult {
    Strategy strategy;
    ValueVector value;
    SolveTrace trace;
};

/// Switching threshold for "strictly improving": guards against round-off ties.
inline double improvement_tol(const ValueVector& v) { return 1e-10 * (1.0 + v.cwiseAbs().maxCoeff()); }

namespace detail {

/**
 * One improvement sweep over states owned by `player`: each state moves to its
 * lowest-index greedy action if that strictly beats the incumbent.
 * Returns the largest improvement seen.
 */
inline double improve(const StochasticGame& game, const QFunction& q, Owner player, double tol, Strategy& sigma,
                      std::vector<Flip>& flips) {
    double gap = 0.0;
    for (int s = 0; s < game.num_states(); ++s) {
        if (game.owner(s) != player) continue;
        const int cand = greedy_action(game, q, s);
        const double cur = q[game.pair_index(s, sigma[s])];
        const double best = q[game.pair_index(s, cand)];
        const double gain = player == Owner::Max ? best - cur : cur - best;
        gap = std::max(gap, gain);
        if (gain > tol) {
            flips.push_back({s, sigma[s], cand});
            sigma[s] = cand;
        }
    }
    return gap;
}

}  // namespace detail

/**
 * Howard policy iteration.  Each round evaluates the current strategy exactly
 * and switches every optimized state whose greedy action strictly improves on
 * the incumbent.  With `fixed`, that player's actions are frozen and the
 * opponent optimizes; otherwise every state must belong to one player.
 */
inline PolicyIterationResult policy_iteration(const StochasticGame& game, const Strategy& pi_init,
                                              const std::optional<FixedPlayer>& fixed = std::nullopt,
                                              long max_iter = 1'000'000, long evaluations_before = 0) {
    require_total(game, pi_init);
    Strategy sigma = pi_init;
    Owner optimizer;
    if (fixed) {
        optimizer = opponent(fixed->player);
        if (static_cast<int>(fixed->pi.size()) != game.num_states())
            throw std::invalid_argument("policy_iteration: fixed strategy length");
        for (int s = 0; s < game.num_states(); ++s) {
            if (game.owner(s) != fixed->player) continue;
            if (fixed->pi[s] < 0 || fixed->pi[s] >= game.num_actions(s))
                throw std::invalid_argument("policy_iteration: fixed strategy undefined at state " + std::to_string(s));
            sigma[s] = fixed->pi[s];
        }
    } else {
        optimizer = game.owner(0);
        if (!game.single_player(optimizer))
            throw std::invalid_argument("policy_iteration: game has two players and no fixed strategy");
    }
    PolicyIterationResult res;
    long evals = evaluations_before;
    for (long it = 1;; ++it) {
        if (it > max_iter) throw std::runtime_error("policy_iteration: iteration cap exceeded");
        ValueVector v = evaluate(game, sigma);
        ++evals;
        IterationRecord rec{it, 0.0, {}, evals};
        rec.residual = detail::improve(game, q_from_v(game, v), optimizer, improvement_tol(v), sigma, rec.changes);
        const bool done = rec.changes.empty();
        res.trace.iterations.push_back(std::move(rec));
        if (done) {
            res.value = std::move(v);
            break;
        }
    }
    res.strategy = std::move(sigma);
    return res;
}

struct StrategyIterationResult {
    Strategy strategy;
    ValueVector value;
    SolveTrace trace;
    /// Joint strategy at each policy evaluation, in order (filled when requested).
    std::vector<Strategy> visited;
};

/**
 * Strategy iteration.  Step I runs policy iteration for the max player
 * against the current min strategy, starting from the current joint strategy.
 * Step II moves every min state to its greedy action for the value of
 * (current min strategy, new max strategy) when that strictly improves.  Stops
 * when Step II changes nothing; the result is then an equilibrium.  Min
 * switches are recorded on the evaluation they were computed from.
 */
inline StrategyIterationResult strategy_iteration(const StochasticGame& game, const Strategy& sigma_init,
                                                  bool record_visited = false, long max_outer = 100'000) {
    require_total(game, sigma_init);
    StrategyIterationResult res;
    Strategy sigma = sigma_init;
    long evals = 0;
    for (long outer = 1;; ++outer) {
        if (outer > max_outer) throw std::runtime_error("strategy_iteration: iteration cap exceeded");
        // Step I, with the path recorded evaluation by evaluation.
        ValueVector v;
        for (;;) {
            if (record_visited) res.visited.push_back(sigma);
            v = evaluate(game, sigma);
            ++evals;
            IterationRecord rec{static_cast<long>(res.trace.iterations.size()) + 1, 0.0, {}, evals};
            rec.residual = detail::improve(game, q_from_v(game, v), Owner::Max, improvement_tol(v), sigma, rec.changes);
            const bool done = rec.changes.empty();
            res.trace.iterations.push_back(std::move(rec));
            if (done) break;
        }
        // Step II.
        auto& rec = res.trace.iterations.back();
        const double gap = detail::improve(game, q_from_v(game, v), Owner::Min, improvement_tol(v), sigma, rec.changes);
        rec.residual = std::max(rec.residual, gap);
        if (rec.changes.empty()) {
            res.value = std::move(v);
            break;
        }
    }
    res.strategy = std::move(sigma);
    return res;
}

/**
 * Stationary distribution of P_sigma by power iteration from the uniform
 * distribution.  If the plain iteration has not settled after a burn-in, the
 * iteration switches to the lazy chain (I + P)/2, which has the same
 * stationary distribution and cannot oscillate on periodic chains.
 */
inline Eigen::VectorXd stationary_distribution(const StochasticGame& game, const Strategy& sigma, double tol = 1e-12,
                                               long max_iter = 1'000'000) {
    require_total(game, sigma);
    const int n = game.num_states();
    Eigen::VectorXd lam = Eigen::VectorXd::Constant(n, 1.0 / n);
    const long burn_in = 10'000;
    for (long it = 0; it < max_iter; ++it) {
        Eigen::VectorXd next = apply_chain_transpose(game, sigma, lam);
        const double diff = (next - lam).cwiseAbs().maxCoeff();
        if (diff <= tol) {
            next /= next.sum();
            return next;
        }
        lam = it < burn_in ? next : Eigen::VectorXd(0.5 * (lam + next));
        lam /= lam.sum();
    }
    throw std::runtime_error("stationary_distribution: power iteration did not converge");
}

/// Flux vector x = sum_t gamma^t (P_sigma^T)^t 1, solved directly.
inline Eigen::VectorXd flux(const StochasticGame& game, const Strategy& sigma) {
    ChainSolver solver(game, sigma, game.gamma(), true);
    return solver.solve(Eigen::VectorXd::Ones(game.num_states()));
}

/// How ratio_scan chooses strategies.
struct StrategySource {
    enum class Kind { Enumerate, Sample } kind = Kind::Enumerate;
    long count = 0;
    std::uint64_t seed = 0;

    static StrategySource enumerate() { return {Kind::Enumerate, 0, 0}; }
    static StrategySource sample(long n, std::uint64_t seed) { return {Kind::Sample, n, seed}; }
};

/// Extremes of one scanned strategy.
struct RatioRow {
    long index = 0;
    double lambda_min = 0.0, lambda_max = 0.0, flux_min = 0.0, flux_max = 0.0;
};

struct RatioReport {
    double delta_min = std::numeric_limits<double>::infinity();
    double delta_max = 0.0;
    double c_min = std::numeric_limits<double>::infinity();
    double c_max = 0.0;
    long strategies_scanned = 0;
    long strategies_skipped = 0;
    std::vector<RatioRow> rows;

    double flux_ratio() const { return delta_max / delta_min; }
    double ergodicity_ratio() const { return c_max / c_min; }
};

/// Number of pure stationary strategies, saturating at `cap` + 1.
inline long strategy_count(const StochasticGame& game, long cap) {
    long total = 1;
    for (int s = 0; s < game.num_states(); ++s) {
        total *= game.num_actions(s);
        if (total > cap) return cap + 1;
    }
    return total;
}

/// Calls fn(sigma) for every pure stationary strategy in mixed-radix order.
template <class Fn>
void for_each_strategy(const StochasticGame& game, Fn&& fn) {
    const int n = game.num_states();
    Strategy sigma(n, 0);
    for (;;) {
        fn(static_cast<const Strategy&>(sigma));
        int s = 0;
        while (s < n && ++sigma[s] == game.num_actions(s)) sigma[s++] = 0;
        if (s == n) return;
    }
}

/**
 * Stationary-distribution and flux extremes over a set of strategies: every
 * pure stationary strategy (enumerate) or uniformly random ones (sample).
 * Strategies whose chain fails to converge are skipped and counted.
 */
inline RatioReport ratio_scan(const StochasticGame& game, const StrategySource& source) {
    RatioReport rep;
    long index = 0;
    auto scan = [&](const Strategy& sigma) {
        Eigen::VectorXd lam;
        try {
            lam = stationary_distribution(game, sigma);
        } catch (const std::runtime_error&) {
            ++rep.strategies_skipped;
            ++index;
            return;
        }
        Eigen::VectorXd x = flux(game, sigma);
        RatioRow row{index++, lam.minCoeff(), lam.maxCoeff(), x.minCoeff(), x.maxCoeff()};
        rep.c_min = std::min(rep.c_min, row.lambda_min);
        rep.c_max = std::max(rep.c_max, row.lambda_max);
        rep.delta_min = std::min(rep.delta_min, row.flux_min);
        rep.delta_max = std::max(rep.delta_max, row.flux_max);
        rep.rows.push_back(row);
        ++rep.strategies_scanned;
    };
    if (source.kind == StrategySource::Kind::Enumerate) {
        constexpr long cap = 1'000'000;
        if (strategy_count(game, cap) > cap) throw std::invalid_argument("ratio_scan: too many strategies to enumerate");
        for_each_strategy(game, scan);
    } else {
        if (source.count < 1) throw std::invalid_argument("ratio_scan: sample count must be positive");
        std::mt19937_64 rng(source.seed);
        Strategy sigma(game.num_states());
        for (long k = 0; k < source.count; ++k) {
            for (int s = 0; s < game.num_states(); ++s)
                sigma[s] = std::uniform_int_distribution<int>(0, game.num_actions(s) - 1)(rng);
            scan(sigma);
        }
    }
    return rep;
}

/**
 * Value of the opponent's best response to `pi` of `player`: the optimal
 * value of the MDP obtained by freezing that player's actions.
 */
inline ValueVector best_response_value(const StochasticGame& game, const Strategy& pi, Owner player) {
    Strategy init = pi;
    for (int s = 0; s < game.num_states(); ++s)
        if (game.owner(s) != player || init[s] < 0) init[s] = 0;
    return policy_iteration(game, init, FixedPlayer{player, pi}).value;
}

}  // namespace sg
