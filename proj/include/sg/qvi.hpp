#pragma once

#include "sg/exact.hpp"
#include "sg/game.hpp"
#include "sg/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sg {

/**
 * Tunable constants of variance-reduced Q-value iteration.  The optional
 * overrides pin the batch sizes directly, which the sample-scaling sweep uses.
 */
struct QviConstants {
    double c1 = 4.0;
    double c2 = 1.0;
    double c3 = 1.0;
    double c = 1.0;
    double C = 0.1;
    std::optional<long> m1_override;
    std::optional<long> m2_override;
};

/// Quantities derived from the constants for one run at precision u.
struct DerivedConstants {
    double beta = 0.0;
    double u = 0.0;
    double delta = 0.0;
    long R = 0;
    long m1 = 0;
    long m2 = 0;
    double L = 0.0;
    double alpha1 = 0.0;
};

/**
 * beta = 1/(1-gamma), R = ceil(c1 beta ln(beta/u)),
 * m1 = ceil(c2 beta^3 max(1, u^-2) ln(8 N / delta)),
 * m2 = ceil(c3 beta^2 ln(2 R N / delta)), L = c ln(N / (delta (1-gamma) u)),
 * alpha1 = L / m1, where N is the number of state-action pairs.  m1 is raised
 * to ceil(L) when needed so that alpha1 <= 1.  When R = 0 no refinement rounds
 * run and m2 is 0.
 */
inline DerivedConstants derive_constants(long num_pairs, double gamma, double u, double delta, const QviConstants& k) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("qvi: gamma must lie in (0,1)");
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("qvi: delta must lie in (0,1)");
    DerivedConstants d;
    d.beta = 1.0 / (1.0 - gamma);
    if (!(u > 0.0 && u <= d.beta * (1.0 + 1e-12))) throw std::invalid_argument("qvi: u must lie in (0, beta]");
    d.u = u;
    d.delta = delta;
    const double n = static_cast<double>(num_pairs);
    d.R = std::max(0L, static_cast<long>(std::ceil(k.c1 * d.beta * std::log(d.beta / u) - 1e-9)));
    d.m1 = static_cast<long>(std::ceil(k.c2 * std::pow(d.beta, 3) * std::max(1.0, 1.0 / (u * u)) * std::log(8.0 * n / delta)));
    if (k.m1_override) d.m1 = *k.m1_override;
    d.m2 = d.R == 0 ? 0 : static_cast<long>(std::ceil(k.c3 * d.beta * d.beta * std::log(2.0 * d.R * n / delta)));
    if (k.m2_override && d.R > 0) d.m2 = *k.m2_override;
    d.L = k.c * std::log(n / (delta * (1.0 - gamma) * u));
    if (d.m1 < 1) d.m1 = 1;
    if (d.L > static_cast<double>(d.m1)) d.m1 = static_cast<long>(std::ceil(d.L));
    d.alpha1 = d.L / static_cast<double>(d.m1);
    return d;
}

enum class Direction { Decreasing, Increasing };

inline const char* direction_name(Direction d) { return d == Direction::Decreasing ? "decreasing" : "increasing"; }

/// One iterate (v^(i), Q^(i), sigma^(i), xi^(i)).
struct VSEntry {
    ValueVector v;
    QFunction q;
    Strategy sigma;
    Eigen::VectorXd xi;
};

/**
 * Iterate log of one QVI run.  Entry i holds the value and strategy after
 * round i, the Q-function that round read, and the per-pair error bound for
 * that Q-function.  Entry 0 holds the input and the initial-batch Q.
 */
struct VSSequence {
    Direction direction = Direction::Decreasing;
    std::vector<VSEntry> entries;
    DerivedConstants constants;
    long samples = 0;
};

/**
 * The min/max roles and rewards of a model with the players swapped and
 * rewards replaced by 1 - r.  Sampling is forwarded, so the transition law
 * and the sample counters are shared with the wrapped model.
 */
template <class Model>
class MirroredModel {
public:
    explicit MirroredModel(Model& base) : base_(base) {}
    int num_states() const { return base_.num_states(); }
    int num_pairs() const { return base_.num_pairs(); }
    int num_actions(int s) const { return base_.num_actions(s); }
    int pair_index(int s, int a) const { return base_.pair_index(s, a); }
    int pair_state(int p) const { return base_.pair_state(p); }
    Owner owner(int s) const { return opponent(base_.owner(s)); }
    double reward(int s, int a) const { return 1.0 - base_.reward(s, a); }
    double gamma() const { return base_.gamma(); }
    BatchEstimate estimate_mean_and_var(const ValueVector& v, long m) { return base_.estimate_mean_and_var(v, m); }
    BatchEstimate estimate_diff_mean(const ValueVector& v, const ValueVector& v0, long m) {
        return base_.estimate_diff_mean(v, v0, m);
    }
    long total_samples() const { return base_.total_samples(); }

private:
    Model& base_;
};

namespace detail {

template <class Model>
std::pair<ValueVector, Strategy> greedy_on(const Model& model, const QFunction& q) {
    const int n = model.num_states();
    ValueVector v(n);
    Strategy sigma(n);
    for (int s = 0; s < n; ++s) {
        const bool maximize = model.owner(s) == Owner::Max;
        int best = 0;
        double best_val = q[model.pair_index(s, 0)];
        for (int a = 1; a < model.num_actions(s); ++a) {
            const double val = q[model.pair_index(s, a)];
            if (maximize ? val > best_val : val < best_val) {
                best = a;
                best_val = val;
            }
        }
        sigma[s] = best;
        v[s] = best_val;
    }
    return {v, sigma};
}

template <class Model>
VSSequence qvi_run(Model& model, double u, double delta, const ValueVector& v0, const Strategy& sigma0,
                   const QviConstants& k, Direction dir) {
    const int n = model.num_states();
    if (v0.size() != n || static_cast<int>(sigma0.size()) != n) throw std::invalid_argument("qvi: dimension mismatch");
    for (int s = 0; s < n; ++s) {
        if (sigma0[s] < 0 || sigma0[s] >= model.num_actions(s)) throw std::invalid_argument("qvi: sigma0 out of range");
        for (int a = 0; a < model.num_actions(s); ++a) {
            const double r = model.reward(s, a);
            if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("qvi: rewards must lie in [0,1]");
        }
    }
    const double g = model.gamma();
    VSSequence seq;
    seq.direction = dir;
    seq.constants = derive_constants(model.num_pairs(), g, u, delta, k);
    const auto& d = seq.constants;
    const double sign = dir == Direction::Decreasing ? 1.0 : -1.0;
    const long start = model.total_samples();
    const int np = model.num_pairs();

    Eigen::VectorXd r(np);
    for (int p = 0; p < np; ++p) {
        const int s = model.pair_state(p);
        r[p] = model.reward(s, p - model.pair_index(s, 0));
    }
    auto clip = [&](const Eigen::VectorXd& x) {
        return dir == Direction::Decreasing ? Eigen::VectorXd(x.cwiseMin(d.beta))
                                            : Eigen::VectorXd(x.cwiseMax(0.0).cwiseMin(d.beta));
    };

    // Initial batch: one-sided estimate of P v0 with a variance-aware shift.
    BatchEstimate init = model.estimate_mean_and_var(v0, d.m1);
    const Eigen::VectorXd spread = (d.alpha1 * init.variance.array()).sqrt().matrix();
    const double flat = std::pow(d.alpha1, 0.75) * d.beta;
    const Eigen::VectorXd w = init.mean + sign * (spread.array() + flat).matrix();
    const double drift = k.C * (1.0 - g) * u;
    const Eigen::VectorXd xi = (2.0 * spread.array() + 2.0 * (flat + drift)).matrix();

    QFunction q = clip(r + g * w);
    seq.entries.push_back({v0, q, sigma0, xi});
    for (long i = 1; i <= d.R; ++i) {
        const VSEntry& prev = seq.entries.back();
        auto [vt, st] = greedy_on(model, q);
        // Keep the previous value and action wherever the new one fails to move in the run's direction.
        for (int s = 0; s < n; ++s) {
            const bool keep = dir == Direction::Decreasing ? vt[s] >= prev.v[s] : vt[s] <= prev.v[s];
            if (keep) {
                vt[s] = prev.v[s];
                st[s] = prev.sigma[s];
            }
        }
        VSEntry entry{vt, q, st, xi};
        BatchEstimate diff = model.estimate_diff_mean(entry.v, v0, d.m2);
        q = clip(r + g * (w + diff.mean + Eigen::VectorXd::Constant(np, sign * drift)));
        seq.entries.push_back(std::move(entry));
    }
    seq.samples = model.total_samples() - start;
    return seq;
}

}  // namespace detail

/**
 * Variance-reduced Q-value iteration producing a monotone decreasing
 * value-strategy sequence.  The caller guarantees v* <= v0 <= v* + u,
 * T[v0] <= v0 and T_sigma0[v0] <= v0.  Estimates are shifted upward so that,
 * with probability at least 1 - delta, every iterate stays an upper bound.
 */
template <class Model>
VSSequence qvi_mdvss(Model& model, double u, double delta, const ValueVector& v0, const Strategy& sigma0,
                     const QviConstants& k = {}) {
    return detail::qvi_run(model, u, delta, v0, sigma0, k, Direction::Decreasing);
}

/// Mirror image of qvi_mdvss: downward shifts, values clipped to [0, beta], increasing iterates.
template <class Model>
VSSequence qvi_mivss(Model& model, double u, double delta, const ValueVector& v0, const Strategy& sigma0,
                     const QviConstants& k = {}) {
    return detail::qvi_run(model, u, delta, v0, sigma0, k, Direction::Increasing);
}

/// Bookkeeping for one halving round of solve().
struct RoundInfo {
    double u = 0.0;
    DerivedConstants constants;
    long samples = 0;
    ValueVector terminal;
    /// Filled by certify_rounds when the exact game is available.
    std::optional<bool> success;
};

struct SolveResult {
    Strategy pi_min;  ///< Defined on MIN states, -1 elsewhere.
    Strategy pi_max;  ///< Defined on MAX states, -1 elsewhere.
    ValueVector v_hat;  ///< Upper estimate of v* from the min-player chain.
    std::vector<RoundInfo> rounds;
    std::vector<RoundInfo> mirror_rounds;
    std::vector<VSSequence> sequences;  ///< Min-player chain, kept when requested.
    std::vector<VSSequence> mirror_sequences;
    long total_samples = 0;
    long rounds_planned = 0;
};

struct SolveOptions {
    bool both_players = true;
    bool keep_sequences = false;
};

namespace detail {

template <class Model>
void halving_chain(Model& model, double epsilon, double delta, const QviConstants& k, bool keep,
                   std::vector<RoundInfo>& rounds, std::vector<VSSequence>& seqs, ValueVector& v, Strategy& sigma,
                   long& planned) {
    const double beta = 1.0 / (1.0 - model.gamma());
    planned = std::max(1L, static_cast<long>(std::ceil(std::log2(beta / epsilon) - 1e-12)));
    const double round_delta = delta / static_cast<double>(planned);
    v = ValueVector::Constant(model.num_states(), beta);
    sigma = Strategy(model.num_states(), 0);
    for (long j = 0; j < planned; ++j) {
        const double u = beta / std::pow(2.0, static_cast<double>(j));
        VSSequence seq = qvi_mdvss(model, u, round_delta, v, sigma, k);
        v = seq.entries.back().v;
        sigma = seq.entries.back().sigma;
        rounds.push_back({u, seq.constants, seq.samples, v, std::nullopt});
        if (keep) seqs.push_back(std::move(seq));
    }
}

}  // namespace detail

/**
 * Full solver: starting from v = beta 1, runs ceil(log2(beta/epsilon)) rounds
 * of qvi_mdvss with u = beta / 2^j and failure budget delta / rounds each,
 * feeding each round's terminal value and strategy into the next.  The
 * min-player strategy comes from this chain; the max-player strategy from the
 * same procedure on the mirrored model.
 */
template <class Model>
SolveResult solve(Model& model, double epsilon, double delta, const QviConstants& k = {}, SolveOptions opt = {}) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("solve: epsilon must lie in (0,1)");
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("solve: delta must lie in (0,1)");
    SolveResult res;
    const long start = model.total_samples();
    ValueVector v;
    Strategy sigma;
    detail::halving_chain(model, epsilon, delta, k, opt.keep_sequences, res.rounds, res.sequences, v, sigma,
                          res.rounds_planned);
    res.v_hat = v;
    res.pi_min = Strategy(model.num_states(), -1);
    res.pi_max = Strategy(model.num_states(), -1);
    for (int s = 0; s < model.num_states(); ++s)
        if (model.owner(s) == Owner::Min) res.pi_min[s] = sigma[s];
    if (opt.both_players) {
        MirroredModel<Model> mirrored(model);
        ValueVector vm;
        Strategy sm;
        long planned = 0;
        detail::halving_chain(mirrored, epsilon, delta, k, opt.keep_sequences, res.mirror_rounds, res.mirror_sequences,
                              vm, sm, planned);
        for (int s = 0; s < model.num_states(); ++s)
            if (model.owner(s) == Owner::Max) res.pi_max[s] = sm[s];
    }
    res.total_samples = model.total_samples() - start;
    return res;
}

/// Expected sample count of a halving chain: N * sum_j (m1_j + R_j m2_j).
inline long planned_samples(const std::vector<RoundInfo>& rounds, long num_pairs) {
    long total = 0;
    for (const auto& r : rounds) total += num_pairs * (r.constants.m1 + r.constants.R * r.constants.m2);
    return total;
}

/**
 * Marks each round of the min-player chain as successful when its terminal
 * value lies in [v*, v* + u/2] entrywise, using an exact optimal value.
 */
inline void certify_rounds(SolveResult& res, const ValueVector& v_star, double slack = 1e-8) {
    for (auto& r : res.rounds) {
        const Eigen::ArrayXd gap = (r.terminal - v_star).array();
        r.success = gap.minCoeff() >= -slack && gap.maxCoeff() <= r.u / 2.0 + slack;
    }
}

}  // namespace sg
