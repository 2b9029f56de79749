#include "sg/checks.hpp"
#include "sg/exact.hpp"
#include "sg/qvi.hpp"
#include "sg/random_games.hpp"
#include "sg/sampler.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace sg;

namespace {

StochasticGame two_point_game() {
    // State 0 splits evenly between states 1 and 2; their values are set by the test.
    Transition half{{{1, 0.5}, {2, 0.5}}, false};
    std::vector<State> states{{Owner::Min, {{0.0, half}}},
                              {Owner::Min, {{0.0, Transition::point(1)}}},
                              {Owner::Max, {{0.0, Transition::point(2)}}}};
    return StochasticGame(0.5, std::move(states), 1.0);
}

/// Sequence sitting at the equilibrium: every property holds with equality.
VSSequence fixed_point_sequence(const StochasticGame& g, const ValueVector& v_star, const Strategy& sigma,
                                Direction dir, int length) {
    VSSequence seq;
    seq.direction = dir;
    for (int i = 0; i < length; ++i)
        seq.entries.push_back({v_star, q_from_v(g, v_star), sigma, Eigen::VectorXd::Zero(g.num_pairs())});
    return seq;
}

struct Fixture {
    StochasticGame game;
    ValueVector v_star;
    Strategy sigma_star;
};

Fixture solved(const RandomGameSpec& spec, std::uint64_t seed) {
    StochasticGame g = random_game(spec, seed);
    auto si = strategy_iteration(g, Strategy(g.num_states(), 0));
    return {g, si.value, si.strategy};
}

}  // namespace

TEST(VarianceOfValue, PointMassAndConstantAreZero) {
    auto g = random_game({6, 2, 0.9, 0, true}, 1);
    std::mt19937_64 rng(3);
    EXPECT_EQ(variance_of_value(g, random_vector(6, -5, 5, rng)).maxCoeff(), 0.0);
    auto dense = random_game({6, 2, 0.9}, 1);
    EXPECT_LT(variance_of_value(dense, ValueVector::Constant(6, 2.5)).maxCoeff(), 1e-12);
}

TEST(VarianceOfValue, TwoPointSplit) {
    const double b = 3.0;
    auto g = two_point_game();
    ValueVector v(3);
    v << 7.0, 0.0, b;
    EXPECT_NEAR(variance_of_value(g, v)[0], b * b / 4.0, 1e-12);
}

TEST(VarianceOfValue, RangeBound) {
    std::mt19937_64 rng(9);
    for (int t = 0; t < 20; ++t) {
        auto g = random_game({8, 3, 0.9, 3}, 40 + t);
        ValueVector v = random_vector(8, -2, 4, rng);
        const double range = v.maxCoeff() - v.minCoeff();
        const auto var = variance_of_value(g, v);
        EXPECT_GE(var.minCoeff(), 0.0);
        EXPECT_LE(var.maxCoeff(), range * range / 4.0 + 1e-12);
    }
}

TEST(CheckMdvss, EquilibriumSequencePasses) {
    auto f = solved({10, 3, 0.9}, 2);
    auto seq = fixed_point_sequence(f.game, f.v_star, f.sigma_star, Direction::Decreasing, 4);
    auto rep = check_mdvss(f.game, seq, std::nullopt, f.v_star);
    EXPECT_TRUE(rep.passed);
    EXPECT_TRUE(rep.violations.empty());
    // The default reference value agrees.
    EXPECT_TRUE(check_mdvss(f.game, seq).passed);
}

TEST(CheckMdvss, IncreasingStepBreaksMonotonicity) {
    auto f = solved({10, 3, 0.9}, 2);
    auto seq = fixed_point_sequence(f.game, f.v_star, f.sigma_star, Direction::Decreasing, 3);
    seq.entries[1].v.array() += 1.0;
    auto rep = check_mdvss(f.game, seq, std::nullopt, f.v_star);
    EXPECT_FALSE(rep.passed);
    EXPECT_TRUE(rep.has_property(1));
}

TEST(CheckMdvss, ValueBelowOptimumBreaksLowerBound) {
    auto f = solved({10, 3, 0.9}, 2);
    auto seq = fixed_point_sequence(f.game, f.v_star, f.sigma_star, Direction::Decreasing, 2);
    seq.entries[1].v[4] -= 0.5;
    auto rep = check_mdvss(f.game, seq, std::nullopt, f.v_star);
    EXPECT_TRUE(rep.has_property(1));
    bool at_state = false;
    for (const auto& x : rep.violations) at_state |= x.property == 1 && x.entry == 1 && x.location == 4;
    EXPECT_TRUE(at_state);
}

TEST(CheckMdvss, SuboptimalStrategyBreaksOperatorInequality) {
    auto f = solved({10, 3, 0.9}, 2);
    const Eigen::VectorXd q = q_from_v(f.game, f.v_star);
    int state = -1, worse = -1;
    for (int s = 0; s < 10 && state < 0; ++s) {
        if (f.game.owner(s) != Owner::Min) continue;
        for (int a = 0; a < 3; ++a)
            if (q[f.game.pair_index(s, a)] > f.v_star[s] + 1e-3) {
                state = s;
                worse = a;
                break;
            }
    }
    ASSERT_GE(state, 0);
    auto seq = fixed_point_sequence(f.game, f.v_star, f.sigma_star, Direction::Decreasing, 2);
    seq.entries[0].sigma[state] = worse;
    auto rep = check_mdvss(f.game, seq, std::nullopt, f.v_star);
    EXPECT_TRUE(rep.has_property(2));
    EXPECT_FALSE(rep.has_property(1));
    EXPECT_FALSE(rep.has_property(3));
    EXPECT_FALSE(rep.has_property(4));
}

TEST(CheckMdvss, InflatedQBreaksEstimateBound) {
    auto f = solved({10, 3, 0.9}, 2);
    auto seq = fixed_point_sequence(f.game, f.v_star, f.sigma_star, Direction::Decreasing, 3);
    seq.entries[2].q.array() += 0.1;
    auto rep = check_mdvss(f.game, seq, std::nullopt, f.v_star);
    EXPECT_TRUE(rep.has_property(3));
    EXPECT_FALSE(rep.has_property(4));
    // A matching eps absorbs the shift.
    EXPECT_TRUE(check_mdvss(f.game, seq, Eigen::VectorXd::Constant(f.game.num_pairs(), 0.1), f.v_star).passed);
}

TEST(CheckMdvss, DeflatedQBreaksGreedyDomination) {
    auto f = solved({10, 3, 0.9}, 2);
    auto seq = fixed_point_sequence(f.game, f.v_star, f.sigma_star, Direction::Decreasing, 3);
    seq.entries[1].q.array() -= 0.1;
    auto rep = check_mdvss(f.game, seq, std::nullopt, f.v_star);
    EXPECT_TRUE(rep.has_property(4));
    EXPECT_FALSE(rep.has_property(3));
}

TEST(CheckMdvss, FirstEntryOnlyChecksInputConditions) {
    auto f = solved({10, 3, 0.9}, 2);
    auto seq = fixed_point_sequence(f.game, f.v_star, f.sigma_star, Direction::Decreasing, 1);
    seq.entries[0].q.array() += 100.0;  // Q of entry 0 is not tied to an earlier value.
    EXPECT_TRUE(check_mdvss(f.game, seq, std::nullopt, f.v_star).passed);
}

TEST(CheckMdvss, RejectsMismatchedInput) {
    auto f = solved({6, 2, 0.9}, 2);
    auto seq = fixed_point_sequence(f.game, f.v_star, f.sigma_star, Direction::Increasing, 2);
    EXPECT_THROW(check_mdvss(f.game, seq), std::invalid_argument);
    seq.direction = Direction::Decreasing;
    seq.entries[1].v = ValueVector::Zero(5);
    EXPECT_THROW(check_mdvss(f.game, seq), std::invalid_argument);
    EXPECT_THROW(check_mdvss(f.game, VSSequence{}), std::invalid_argument);
}

TEST(CheckMivss, MirrorsEveryInequality) {
    auto f = solved({10, 3, 0.9}, 5);
    auto seq = fixed_point_sequence(f.game, f.v_star, f.sigma_star, Direction::Increasing, 3);
    EXPECT_TRUE(check_mivss(f.game, seq, std::nullopt, f.v_star).passed);
    EXPECT_THROW(check_mdvss(f.game, seq), std::invalid_argument);

    auto up = seq;
    up.entries[1].v.array() -= 1.0;  // drop below the previous iterate and below v*
    EXPECT_TRUE(check_mivss(f.game, up, std::nullopt, f.v_star).has_property(1));

    auto low_q = seq;
    low_q.entries[2].q.array() -= 0.1;
    auto rep = check_mivss(f.game, low_q, std::nullopt, f.v_star);
    EXPECT_TRUE(rep.has_property(3));
    EXPECT_FALSE(rep.has_property(4));

    auto high_q = seq;
    high_q.entries[2].q.array() += 0.1;
    rep = check_mivss(f.game, high_q, std::nullopt, f.v_star);
    EXPECT_TRUE(rep.has_property(4));
    EXPECT_FALSE(rep.has_property(3));
}

TEST(Implication, HoldsAtEquilibrium) {
    auto f = solved({10, 3, 0.9}, 8);
    for (Direction d : {Direction::Decreasing, Direction::Increasing}) {
        auto seq = fixed_point_sequence(f.game, f.v_star, f.sigma_star, d, 1);
        EXPECT_TRUE(check_eps_optimal_implication(f.game, seq, f.v_star).passed);
    }
}

TEST(Implication, HoldsForCertifiedQviOutputs) {
    for (int t = 0; t < 10; ++t) {
        auto f = solved({10, 2, 0.8}, 70 + t);
        GenerativeModel model(f.game, t);
        auto seq = qvi_mdvss(model, 2.5, 0.1, ValueVector::Constant(10, 5.0), Strategy(10, 0));
        if (!check_mdvss(f.game, seq, std::nullopt, f.v_star).passed) continue;
        EXPECT_TRUE(check_eps_optimal_implication(f.game, seq, f.v_star).passed) << "trial " << t;
        GenerativeModel model2(f.game, 100 + t);
        auto inc = qvi_mivss(model2, 2.5, 0.1, ValueVector::Zero(10), Strategy(10, 0));
        if (!check_mivss(f.game, inc, std::nullopt, f.v_star).passed) continue;
        EXPECT_TRUE(check_eps_optimal_implication(f.game, inc, f.v_star).passed) << "trial " << t;
    }
}

TEST(Implication, BruteForceOnTwoStateGames) {
    // Every one-entry sequence that passes the checker must give an eps-optimal strategy.
    std::mt19937_64 rng(17);
    int certified = 0;
    for (int t = 0; t < 200; ++t) {
        auto f = solved({2, 3, 0.7, 0, false, 0.5}, 300 + t);
        VSSequence seq;
        seq.direction = Direction::Decreasing;
        ValueVector v = f.v_star + random_vector(2, 0.0, 1.0, rng);
        Strategy sigma = random_strategy(f.game, rng);
        seq.entries.push_back({v, q_from_v(f.game, v), sigma, Eigen::VectorXd::Zero(f.game.num_pairs())});
        if (!check_mdvss(f.game, seq, std::nullopt, f.v_star).passed) continue;
        ++certified;
        EXPECT_TRUE(check_eps_optimal_implication(f.game, seq, f.v_star).passed) << "trial " << t;
    }
    EXPECT_GT(certified, 10);
}

TEST(Implication, DetectsBadStrategy) {
    auto f = solved({10, 3, 0.9}, 2);
    const Eigen::VectorXd q = q_from_v(f.game, f.v_star);
    auto seq = fixed_point_sequence(f.game, f.v_star, f.sigma_star, Direction::Decreasing, 1);
    bool changed = false;
    for (int s = 0; s < 10 && !changed; ++s) {
        if (f.game.owner(s) != Owner::Min) continue;
        for (int a = 0; a < 3; ++a)
            if (q[f.game.pair_index(s, a)] > f.v_star[s] + 1e-3) {
                seq.entries[0].sigma[s] = a;
                changed = true;
                break;
            }
    }
    ASSERT_TRUE(changed);
    EXPECT_FALSE(check_eps_optimal_implication(f.game, seq, f.v_star).passed);
}

TEST(MarkovianEvaluate, EmptyPrefixMatchesStationaryValue) {
    auto g = random_game({8, 2, 0.9}, 4);
    std::mt19937_64 rng(1);
    Strategy tail = random_strategy(g, rng);
    auto ev = markovian_evaluate(g, {{}, tail});
    ASSERT_EQ(ev.stage_values.size(), 1u);
    EXPECT_LT((ev.stage_values[0] - evaluate(g, tail)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(MarkovianEvaluate, RepeatedStageEqualsTail) {
    auto g = random_game({8, 2, 0.9}, 4);
    std::mt19937_64 rng(2);
    Strategy tail = random_strategy(g, rng);
    auto a = markovian_evaluate(g, {{tail, tail, tail}, tail});
    auto b = markovian_evaluate(g, {{}, tail});
    for (const auto& v : a.stage_values) EXPECT_LT((v - b.stage_values[0]).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((a.return_variance - b.return_variance).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(MarkovianEvaluate, DeterministicGameHasNoVariance) {
    auto g = random_game({8, 2, 0.9, 0, true}, 6);
    std::mt19937_64 rng(3);
    MarkovianPlan plan{{random_strategy(g, rng), random_strategy(g, rng)}, random_strategy(g, rng)};
    EXPECT_LT(markovian_evaluate(g, plan).return_variance.maxCoeff(), 1e-9);
}

TEST(MarkovianEvaluate, MatchesMonteCarlo) {
    auto g = random_game({5, 2, 0.5, 3}, 12);
    std::mt19937_64 rng(4);
    MarkovianPlan plan{{random_strategy(g, rng), random_strategy(g, rng), random_strategy(g, rng)},
                       random_strategy(g, rng)};
    auto ev = markovian_evaluate(g, plan);
    GenerativeModel model(g, 99);
    const int runs = 40000, horizon = 60;
    for (int start = 0; start < 5; ++start) {
        double sum = 0.0, sum_sq = 0.0;
        for (int k = 0; k < runs; ++k) {
            int s = start;
            double ret = 0.0, disc = 1.0;
            for (int t = 0; t < horizon; ++t) {
                const Strategy& st = t < 3 ? plan.prefix[t] : plan.tail;
                ret += disc * g.reward(s, st[s]);
                disc *= 0.5;
                s = model.sample_transition(s, st[s]);
            }
            sum += ret;
            sum_sq += ret * ret;
        }
        const double mean = sum / runs;
        const double var = sum_sq / runs - mean * mean;
        const double se_mean = std::sqrt(ev.return_variance[start] / runs);
        EXPECT_NEAR(mean, ev.stage_values[0][start], 5 * se_mean + 1e-9) << "state " << start;
        EXPECT_NEAR(var, ev.return_variance[start], 0.05 * ev.return_variance[start] + 1e-6) << "state " << start;
    }
}

TEST(MarkovianEvaluate, RejectsPartialStrategies) {
    auto g = random_game({4, 2, 0.9}, 4);
    EXPECT_THROW(markovian_evaluate(g, {{Strategy{0, 0, -1, 0}}, Strategy(4, 0)}), std::invalid_argument);
    EXPECT_THROW(markovian_evaluate(g, {{}, Strategy(3, 0)}), std::invalid_argument);
}

TEST(VarianceBellman, IdentityHoldsOnRandomPlans) {
    std::mt19937_64 rng(21);
    for (int t = 0; t < 100; ++t) {
        auto g = random_game({6, 2, t % 2 ? 0.9 : 0.7, 3}, 500 + t);
        MarkovianPlan plan;
        const int k = static_cast<int>(rng() % 5);
        for (int j = 0; j < k; ++j) plan.prefix.push_back(random_strategy(g, rng));
        plan.tail = random_strategy(g, rng);
        EXPECT_LE(variance_bellman_residual(g, plan), 1e-6) << "draw " << t;
    }
}

TEST(LogLogFit, RecoversExactPowerLaw) {
    std::vector<ScalingPoint> pts;
    for (long m : {10L, 100L, 1000L, 10000L}) pts.push_back({m, 0, 3.0 * std::pow(double(m), -0.5)});
    auto [slope, intercept] = log_log_fit(pts);
    EXPECT_NEAR(slope, -0.5, 1e-12);
    EXPECT_NEAR(intercept, std::log(3.0), 1e-12);
    EXPECT_THROW(log_log_fit({pts[0]}), std::invalid_argument);
    EXPECT_THROW(log_log_fit({pts[0], pts[0]}), std::invalid_argument);
    EXPECT_THROW(log_log_fit({pts[0], {20, 0, 0.0}}), std::invalid_argument);
}

TEST(ScalingSweep, DeterministicAndShrinking) {
    auto g = random_game({6, 2, 0.5, 2}, 3);
    QviConstants k;
    k.c1 = 20;
    k.C = 1e-3;
    k.m2_override = 100000;
    auto a = scaling_sweep(g, {100, 10000}, 3, 0.5, 0.1, k, 42);
    auto b = scaling_sweep(g, {100, 10000}, 3, 0.5, 0.1, k, 42);
    ASSERT_EQ(a.points.size(), 6u);
    for (std::size_t i = 0; i < a.points.size(); ++i) EXPECT_EQ(a.points[i].error, b.points[i].error);
    EXPECT_LT(a.slope, 0.0);
    EXPECT_THROW(scaling_sweep(g, {100}, 0, 0.5, 0.1, k, 1), std::invalid_argument);
}
