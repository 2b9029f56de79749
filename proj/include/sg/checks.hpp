#pragma once

#include "sg/exact.hpp"
#include "sg/game.hpp"
#include "sg/linalg.hpp"
#include "sg/qvi.hpp"
#include "sg/sampler.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace sg {

/// var(v)(s,a) = P v^2 - (P v)^2, floored at 0.
inline Eigen::VectorXd variance_of_value(const StochasticGame& game, const ValueVector& v) {
    if (v.size() != game.num_states()) throw std::invalid_argument("variance_of_value: dimension mismatch");
    const ValueVector sq = v.array().square().matrix();
    const double mean = v.mean();
    const double mean_sq = sq.mean();
    Eigen::VectorXd out(game.num_pairs());
    for (int p = 0; p < game.num_pairs(); ++p) {
        const auto& tr = game.transition(game.pair_state(p), game.pair_action(p));
        const double first = tr.expect(v, mean);
        out[p] = std::max(0.0, tr.expect(sq, mean_sq) - first * first);
    }
    return out;
}

struct Violation {
    int property = 0;
    int entry = 0;     ///< Sequence index, or -1 when not tied to one.
    int location = 0;  ///< State or pair index.
    double lhs = 0.0;
    double rhs = 0.0;
    double slack = 0.0;
};

struct CheckReport {
    bool passed = true;
    std::vector<Violation> violations;
    std::vector<std::string> notes;

    void add(int property, int entry, int location, double lhs, double rhs, double slack) {
        violations.push_back({property, entry, location, lhs, rhs, slack});
        passed = false;
    }
    void fail(const std::string& note) {
        notes.push_back(note);
        passed = false;
    }
    void merge(const CheckReport& other) {
        violations.insert(violations.end(), other.violations.begin(), other.violations.end());
        notes.insert(notes.end(), other.notes.begin(), other.notes.end());
        passed = passed && other.passed;
    }
    bool has_property(int property) const {
        return std::any_of(violations.begin(), violations.end(),
                           [property](const Violation& v) { return v.property == property; });
    }
};

inline constexpr double kCheckSlack = 1e-8;

/// v* to the precision the validators assume.
inline ValueVector reference_value(const StochasticGame& game) { return value_iteration(game, 1e-10).value; }

namespace detail {

/// Records every entry where lhs <= rhs + slack fails (or lhs >= rhs - slack when `upper` is false).
inline void compare(CheckReport& rep, int property, int entry, const Eigen::VectorXd& lhs, const Eigen::VectorXd& rhs,
                    bool upper, double slack) {
    for (Eigen::Index k = 0; k < lhs.size(); ++k) {
        const bool ok = upper ? lhs[k] <= rhs[k] + slack : lhs[k] >= rhs[k] - slack;
        if (!ok) rep.add(property, entry, static_cast<int>(k), lhs[k], rhs[k], slack);
    }
}

inline CheckReport check_sequence(const StochasticGame& game, const VSSequence& seq,
                                  const std::optional<Eigen::VectorXd>& eps_override,
                                  const std::optional<ValueVector>& v_star_in, bool decreasing) {
    if (seq.entries.empty()) throw std::invalid_argument("check: empty sequence");
    const int n = game.num_states();
    for (const auto& e : seq.entries) {
        if (e.v.size() != n || static_cast<int>(e.sigma.size()) != n || e.q.size() != game.num_pairs())
            throw std::invalid_argument("check: sequence dimensions do not match the game");
        require_total(game, e.sigma);
    }
    const ValueVector v_star = v_star_in ? *v_star_in : reference_value(game);
    const double s = kCheckSlack;
    // "upper" means lhs <= rhs for the decreasing direction; every comparison flips for increasing.
    const bool up = decreasing;
    const Owner half_player = decreasing ? Owner::Min : Owner::Max;
    CheckReport rep;
    for (std::size_t i = 0; i < seq.entries.size(); ++i) {
        const auto& e = seq.entries[i];
        const int idx = static_cast<int>(i);
        // Property 1: monotone chain bounded by v*.
        if (i > 0) compare(rep, 1, idx, e.v, seq.entries[i - 1].v, up, s);
        compare(rep, 1, idx, v_star, e.v, up, s);
        // Property 2: one-sided operator inequalities.
        compare(rep, 2, idx, apply_strategy(game, e.sigma, e.v), e.v, up, s);
        compare(rep, 2, idx, bellman(game, e.v), e.v, up, s);
        compare(rep, 2, idx, half_bellman(game, e.v, restrict_to(game, e.sigma, half_player), half_player), e.v, up, s);
        if (i == 0) continue;
        // Property 3: Q is a one-sided estimate of Q(v^(i-1)) up to eps^(i).
        const Eigen::VectorXd& eps = eps_override ? *eps_override : e.xi;
        if (eps.size() != game.num_pairs()) throw std::invalid_argument("check: eps dimension mismatch");
        const Eigen::VectorXd qprev = q_from_v(game, seq.entries[i - 1].v);
        const Eigen::VectorXd bound = decreasing ? Eigen::VectorXd(qprev + eps) : Eigen::VectorXd(qprev - eps);
        compare(rep, 3, idx, e.q, bound, up, s);
        // Property 4: v^(i) is dominated by the greedy value of Q^(i).
        compare(rep, 4, idx, e.v, greedy(game, e.q).first, up, s);
    }
    return rep;
}

}  // namespace detail

/**
 * Certifies a monotone decreasing value-strategy sequence:
 * (1) v^(0) >= ... >= v^(R) >= v*;
 * (2) T_sigma[v] <= v, T[v] <= v and H_{pi_min}[v] <= v at every entry;
 * (3) Q^(i) <= r + gamma P v^(i-1) + eps^(i) for i >= 1;
 * (4) v^(i) <= V[Q^(i)] for i >= 1.
 * eps defaults to the sequence's own xi; v* defaults to value iteration at 1e-10.
 * Entry 0 only carries the input, so (3) and (4) start at i = 1.
 */
inline CheckReport check_mdvss(const StochasticGame& game, const VSSequence& seq,
                               const std::optional<Eigen::VectorXd>& eps_override = std::nullopt,
                               const std::optional<ValueVector>& v_star = std::nullopt) {
    if (seq.direction != Direction::Decreasing) throw std::invalid_argument("check_mdvss: sequence is not decreasing");
    return detail::check_sequence(game, seq, eps_override, v_star, true);
}

/// Mirror of check_mdvss with every inequality reversed and H_{pi_max} in property 2.
inline CheckReport check_mivss(const StochasticGame& game, const VSSequence& seq,
                               const std::optional<Eigen::VectorXd>& eps_override = std::nullopt,
                               const std::optional<ValueVector>& v_star = std::nullopt) {
    if (seq.direction != Direction::Increasing) throw std::invalid_argument("check_mivss: sequence is not increasing");
    return detail::check_sequence(game, seq, eps_override, v_star, false);
}

/**
 * With eps = ||v^(R) - v*||, checks that the terminal strategy of the
 * sequence's player is eps-optimal against an exact best response:
 * v^{pi_min} <= v* + eps (decreasing) or v^{pi_max} >= v* - eps (increasing).
 */
inline CheckReport check_eps_optimal_implication(const StochasticGame& game, const VSSequence& seq,
                                                 const std::optional<ValueVector>& v_star_in = std::nullopt) {
    if (seq.entries.empty()) throw std::invalid_argument("check_eps_optimal_implication: empty sequence");
    const ValueVector v_star = v_star_in ? *v_star_in : reference_value(game);
    const auto& last = seq.entries.back();
    if (last.v.size() != game.num_states()) throw std::invalid_argument("check_eps_optimal_implication: dimension mismatch");
    const double eps = (last.v - v_star).cwiseAbs().maxCoeff();
    const bool decreasing = seq.direction == Direction::Decreasing;
    const Owner player = decreasing ? Owner::Min : Owner::Max;
    const ValueVector br = best_response_value(game, restrict_to(game, last.sigma, player), player);
    CheckReport rep;
    const Eigen::VectorXd bound = (v_star.array() + (decreasing ? eps : -eps)).matrix();
    detail::compare(rep, 1, static_cast<int>(seq.entries.size()) - 1, br, bound, decreasing, kCheckSlack);
    return rep;
}

/// Non-stationary strategy: prefix stages in order, then the tail forever.
struct MarkovianPlan {
    std::vector<Strategy> prefix;
    Strategy tail;
};

struct MarkovianEvaluation {
    std::vector<ValueVector> stage_values;  ///< v_0 .. v_K, where v_K is the tail value.
    ValueVector return_variance;            ///< Variance of the discounted return from each start state.
};

inline void require_plan(const StochasticGame& game, const MarkovianPlan& plan) {
    for (const auto& st : plan.prefix) require_total(game, st);
    require_total(game, plan.tail);
}

/**
 * Stage values by backward recursion v_t = r_t + gamma P_t v_{t+1} from the
 * exact tail value, and the return variance from the second moments
 * M_t = r_t^2 + 2 gamma r_t P_t v_{t+1} + gamma^2 P_t M_{t+1}, whose tail
 * solves (I - gamma^2 P) M = r^2 + 2 gamma r P v.
 */
inline MarkovianEvaluation markovian_evaluate(const StochasticGame& game, const MarkovianPlan& plan) {
    require_plan(game, plan);
    const double g = game.gamma();
    const ValueVector v_tail = evaluate(game, plan.tail);
    const Eigen::VectorXd r_tail = strategy_rewards(game, plan.tail);
    ChainSolver second(game, plan.tail, g * g, false);
    Eigen::VectorXd m = second.solve((r_tail.array().square() +
                                      2.0 * g * r_tail.array() * apply_chain(game, plan.tail, v_tail).array())
                                         .matrix());
    MarkovianEvaluation out;
    out.stage_values.assign(plan.prefix.size() + 1, ValueVector());
    out.stage_values.back() = v_tail;
    ValueVector v = v_tail;
    for (std::size_t k = plan.prefix.size(); k-- > 0;) {
        const Strategy& st = plan.prefix[k];
        const Eigen::VectorXd r = strategy_rewards(game, st);
        const Eigen::VectorXd pv = apply_chain(game, st, v);
        m = (r.array().square() + 2.0 * g * r.array() * pv.array() + g * g * apply_chain(game, st, m).array()).matrix();
        v = r + g * pv;
        out.stage_values[k] = v;
    }
    out.return_variance = (m.array() - v.array().square()).cwiseMax(0.0).matrix();
    return out;
}

/**
 * Compares the return variance with the series
 * sum_t gamma^{2(t+1)} P_0 ... P_{t-1} var_t(v_{t+1}), where var_t is the
 * one-step variance of the next stage value under stage t's strategy.  The
 * series is summed by forward propagation of the start distributions and cut
 * once gamma^{2t} beta^2 < 1e-12.  Returns the largest per-state gap.
 */
inline double variance_bellman_residual(const StochasticGame& game, const MarkovianPlan& plan) {
    const MarkovianEvaluation ev = markovian_evaluate(game, plan);
    const int n = game.num_states();
    const double g = game.gamma();
    const double beta = 1.0 / (1.0 - g);
    auto stage = [&](std::size_t t) -> const Strategy& { return t < plan.prefix.size() ? plan.prefix[t] : plan.tail; };
    auto next_value = [&](std::size_t t) -> const ValueVector& {
        return ev.stage_values[std::min(t + 1, plan.prefix.size())];
    };
    auto step_variance = [&](const Strategy& st, const ValueVector& v) {
        const Eigen::VectorXd var = variance_of_value(game, v);
        Eigen::VectorXd out(n);
        for (int s = 0; s < n; ++s) out[s] = var[game.pair_index(s, st[s])];
        return out;
    };
    // Row s of `reach` is the distribution at stage t from start state s.
    Eigen::MatrixXd reach = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    double weight = g * g;  // gamma^{2(t+1)}
    const Eigen::VectorXd tail_var = step_variance(plan.tail, ev.stage_values.back());
    for (std::size_t t = 0;; ++t) {
        const Strategy& st = stage(t);
        const Eigen::VectorXd var = t < plan.prefix.size() ? step_variance(st, next_value(t)) : tail_var;
        rhs += weight * (reach * var);
        if (weight / (g * g) * beta * beta < 1e-12 && t >= plan.prefix.size()) break;
        Eigen::MatrixXd next(n, n);
        for (int s = 0; s < n; ++s) next.row(s) = apply_chain_transpose(game, st, reach.row(s).transpose()).transpose();
        reach = std::move(next);
        weight *= g * g;
    }
    return (rhs - ev.return_variance).cwiseAbs().maxCoeff();
}

struct ScalingPoint {
    long m1 = 0;
    int trial = 0;
    double error = 0.0;
};

struct ScalingResult {
    std::vector<ScalingPoint> points;
    double slope = 0.0;      ///< Least-squares slope of log(error) on log(m1).
    double intercept = 0.0;
};

/// Least-squares fit of log(error) against log(m1) over all points.
inline std::pair<double, double> log_log_fit(const std::vector<ScalingPoint>& pts) {
    if (pts.size() < 2) throw std::invalid_argument("log_log_fit: need at least two points");
    double mx = 0.0, my = 0.0;
    for (const auto& p : pts) {
        if (!(p.error > 0.0) || p.m1 < 1) throw std::invalid_argument("log_log_fit: errors and m1 must be positive");
        mx += std::log(static_cast<double>(p.m1));
        my += std::log(p.error);
    }
    mx /= pts.size();
    my /= pts.size();
    double sxy = 0.0, sxx = 0.0;
    for (const auto& p : pts) {
        const double dx = std::log(static_cast<double>(p.m1)) - mx;
        sxy += dx * (std::log(p.error) - my);
        sxx += dx * dx;
    }
    if (sxx == 0.0) throw std::invalid_argument("log_log_fit: m1 values must differ");
    return {sxy / sxx, my - sxy / sxx * mx};
}

/**
 * Error of a single qvi_mdvss round against the initial batch size.  Each
 * run starts from v0 = v* + u 1 and sigma0 = sigma* (which meet the input
 * condition) with u = u_fraction * beta, overrides m1, and records
 * ||v^(R) - v*||.  Trial t at batch size m1 uses sampler seed
 * hash(seed, m1, t).
 */
inline ScalingResult scaling_sweep(const StochasticGame& game, const std::vector<long>& m1_values, int trials,
                                   double u_fraction, double delta, QviConstants k, std::uint64_t seed) {
    if (trials < 1) throw std::invalid_argument("scaling_sweep: trials must be positive");
    if (!(u_fraction > 0.0 && u_fraction <= 1.0)) throw std::invalid_argument("scaling_sweep: u_fraction must lie in (0,1]");
    const auto exact = value_iteration(game, 1e-12);
    const double u = u_fraction / (1.0 - game.gamma());
    const ValueVector v0 = (exact.value.array() + u).matrix();
    ScalingResult res;
    for (long m1 : m1_values) {
        k.m1_override = m1;
        for (int t = 0; t < trials; ++t) {
            GenerativeModel model(game, detail::substream_seed(seed, static_cast<std::uint64_t>(m1), t));
            const VSSequence seq = qvi_mdvss(model, u, delta, v0, exact.strategy, k);
            res.points.push_back({m1, t, (seq.entries.back().v - exact.value).cwiseAbs().maxCoeff()});
        }
    }
    std::tie(res.slope, res.intercept) = log_log_fit(res.points);
    return res;
}

}  // namespace sg
