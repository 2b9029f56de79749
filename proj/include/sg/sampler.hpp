#pragma once

#include "sg/game.hpp"

#include <algorithm>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace sg {

/// Per-pair empirical statistics of one sampling batch.
struct BatchEstimate {
    Eigen::VectorXd mean;
    Eigen::VectorXd variance;  ///< Empty for difference batches.
    long m = 0;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of the substream for (pair, batch): independent of call order across pairs.
inline std::uint64_t substream_seed(std::uint64_t master, std::uint64_t pair, std::uint64_t batch) {
    return splitmix64(splitmix64(splitmix64(master) ^ pair) + batch);
}

}  // namespace detail

/**
 * Sampling-only access to a game's transition law.
 *
 * Each (s,a) pair owns a sequence of substreams, one per batch, seeded from
 * (master_seed, pair, batch index).  A batch therefore depends only on the
 * seed and on how many earlier batches that pair has served, never on the
 * order in which pairs are visited.  Counters record every draw.
 *
 * Large batches are drawn as multinomial counts over the row's support
 * (sequential conditional binomials), which has exactly the law of m i.i.d.
 * draws but costs time proportional to the support rather than to m.
 */
class GenerativeModel {
public:
    GenerativeModel(const StochasticGame& game, std::uint64_t master_seed)
        : game_(game), seed_(master_seed), per_pair_(game.num_pairs(), 0), batches_(game.num_pairs(), 0) {
        cdf_.resize(game.num_pairs());
        for (int p = 0; p < game.num_pairs(); ++p) {
            const auto& tr = game.transition(game.pair_state(p), game.pair_action(p));
            if (tr.uniform) continue;
            double acc = 0.0;
            for (const auto& e : tr.entries) {
                acc += e.second;
                cdf_[p].push_back(acc);
            }
        }
    }

    /// The model keeps a reference to the game, so temporaries are rejected.
    GenerativeModel(StochasticGame&&, std::uint64_t) = delete;

    int num_states() const { return game_.num_states(); }
    int num_pairs() const { return game_.num_pairs(); }
    int num_actions(int s) const { return game_.num_actions(s); }
    int pair_index(int s, int a) const { return game_.pair_index(s, a); }
    int pair_state(int p) const { return game_.pair_state(p); }
    Owner owner(int s) const { return game_.owner(s); }
    double reward(int s, int a) const { return game_.reward(s, a); }
    double gamma() const { return game_.gamma(); }
    std::uint64_t master_seed() const { return seed_; }

    /// Single draw from P(.|s,a) on a fresh substream position.
    int sample_transition(int s, int a) {
        check_pair(s, a);
        const int p = game_.pair_index(s, a);
        std::mt19937_64 rng(detail::substream_seed(seed_, p, batches_[p]++));
        ++per_pair_[p];
        ++total_;
        return draw_one(p, rng);
    }

    /// Mean and (floored) variance of v at m fresh next-states, for every pair.
    BatchEstimate estimate_mean_and_var(const ValueVector& v, long m) {
        if (m <= 0) throw std::invalid_argument("estimate_mean_and_var: m must be positive");
        if (v.size() != game_.num_states()) throw std::invalid_argument("estimate_mean_and_var: dimension mismatch");
        BatchEstimate est{Eigen::VectorXd(num_pairs()), Eigen::VectorXd(num_pairs()), m};
        for (int p = 0; p < num_pairs(); ++p) {
            double sum = 0.0, sum_sq = 0.0;
            draw_batch(p, m, [&](int t, long count) {
                sum += count * v[t];
                sum_sq += count * v[t] * v[t];
            });
            const double mean = sum / m;
            est.mean[p] = mean;
            est.variance[p] = std::max(0.0, sum_sq / m - mean * mean);
        }
        return est;
    }

    /// Mean of (v - v0) at m fresh next-states, for every pair.
    BatchEstimate estimate_diff_mean(const ValueVector& v, const ValueVector& v0, long m) {
        if (m <= 0) throw std::invalid_argument("estimate_diff_mean: m must be positive");
        if (v.size() != game_.num_states() || v0.size() != game_.num_states())
            throw std::invalid_argument("estimate_diff_mean: dimension mismatch");
        BatchEstimate est{Eigen::VectorXd(num_pairs()), Eigen::VectorXd(), m};
        for (int p = 0; p < num_pairs(); ++p) {
            double sum = 0.0;
            draw_batch(p, m, [&](int t, long count) { sum += count * (v[t] - v0[t]); });
            est.mean[p] = sum / m;
        }
        return est;
    }

    long total_samples() const { return total_; }
    const std::vector<long>& samples_per_pair() const { return per_pair_; }

private:
    void check_pair(int s, int a) const {
        if (s < 0 || s >= game_.num_states() || a < 0 || a >= game_.num_actions(s))
            throw std::invalid_argument("sample_transition: invalid state-action pair");
    }

    template <class Rng>
    int draw_one(int p, Rng& rng) const {
        const int s = game_.pair_state(p);
        const auto& tr = game_.transition(s, game_.pair_action(p));
        if (tr.uniform) return std::uniform_int_distribution<int>(0, game_.num_states() - 1)(rng);
        const auto& cdf = cdf_[p];
        const double u = std::uniform_real_distribution<double>(0.0, cdf.back())(rng);
        auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
        return tr.entries[k].first;
    }

    /// Draws m next-states for pair p and reports them as (state, count) groups.
    template <class Sink>
    void draw_batch(int p, long m, Sink&& sink) {
        std::mt19937_64 rng(detail::substream_seed(seed_, p, batches_[p]++));
        per_pair_[p] += m;
        total_ += m;
        const auto& tr = game_.transition(game_.pair_state(p), game_.pair_action(p));
        const long support = tr.uniform ? game_.num_states() : static_cast<long>(tr.entries.size());
        if (m < 4 * support) {
            for (long j = 0; j < m; ++j) sink(draw_one(p, rng), 1);
            return;
        }
        long remaining = m;
        double mass = 1.0;
        for (long k = 0; k < support && remaining > 0; ++k) {
            const int t = tr.uniform ? static_cast<int>(k) : tr.entries[k].first;
            const double pk = tr.uniform ? 1.0 / support : tr.entries[k].second;
            long c;
            if (k == support - 1 || pk >= mass) {
                c = remaining;
            } else {
                c = std::binomial_distribution<long>(remaining, std::clamp(pk / mass, 0.0, 1.0))(rng);
            }
            if (c > 0) sink(t, c);
            remaining -= c;
            mass -= pk;
        }
    }

    const StochasticGame& game_;
    std::uint64_t seed_;
    std::vector<long> per_pair_;
    std::vector<long> batches_;
    long total_ = 0;
    std::vector<std::vector<double>> cdf_;
};

}  // namespace sg
