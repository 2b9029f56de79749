#include "sg/exact.hpp"
#include "sg/random_games.hpp"
#include "sg/sampler.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

using namespace sg;

namespace {

StochasticGame point_mass_game() {
    std::vector<State> st(3);
    st[0] = {Owner::Min, {{0.1, Transition::point(2)}}};
    st[1] = {Owner::Max, {{0.2, Transition::point(0)}}};
    st[2] = {Owner::Min, {{0.3, Transition::point(1)}}};
    return StochasticGame(0.9, st);
}

StochasticGame uniform_game(int n) {
    std::vector<State> st(n, State{Owner::Min, {{0.0, Transition::uniform_all()}}});
    return StochasticGame(0.9, st);
}

}  // namespace

TEST(SampleTransition, PointMassIsDeterministic) {
    auto g = point_mass_game();
    GenerativeModel m(g, 1);
    for (int k = 0; k < 50; ++k) EXPECT_EQ(m.sample_transition(0, 0), 2);
    EXPECT_EQ(m.total_samples(), 50);
}

TEST(SampleTransition, UniformRowFrequencies) {
    auto g = uniform_game(4);
    GenerativeModel m(g, 2);
    std::vector<int> counts(4, 0);
    const int n = 100000;
    for (int k = 0; k < n; ++k) ++counts[m.sample_transition(1, 0)];
    for (int c : counts) EXPECT_NEAR(c / double(n), 0.25, 0.01);
}

TEST(SampleTransition, SameSeedSameSequence) {
    auto g = random_game({5, 2, 0.9}, 3);
    GenerativeModel a(g, 77), b(g, 77), c(g, 78);
    std::vector<int> sa, sb, sc;
    for (int k = 0; k < 100; ++k) {
        sa.push_back(a.sample_transition(k % 5, k % 2));
        sb.push_back(b.sample_transition(k % 5, k % 2));
        sc.push_back(c.sample_transition(k % 5, k % 2));
    }
    EXPECT_EQ(sa, sb);
    EXPECT_NE(sa, sc);
}

TEST(SampleTransition, InvalidPairThrows) {
    const auto g = point_mass_game();
    GenerativeModel m(g, 1);
    EXPECT_THROW(m.sample_transition(0, 1), std::invalid_argument);
    EXPECT_THROW(m.sample_transition(3, 0), std::invalid_argument);
}

TEST(EstimateMeanAndVar, PointMassRowsAreExact) {
    auto g = point_mass_game();
    GenerativeModel m(g, 5);
    ValueVector v(3);
    v << 1.5, -2.0, 4.25;
    auto est = m.estimate_mean_and_var(v, 37);
    EXPECT_EQ(est.mean[0], 4.25);
    EXPECT_EQ(est.mean[1], 1.5);
    EXPECT_EQ(est.mean[2], -2.0);
    EXPECT_EQ(est.variance.maxCoeff(), 0.0);
}

TEST(EstimateMeanAndVar, ConstantVectorHasZeroVariance) {
    auto g = random_game({6, 2, 0.9}, 4);
    GenerativeModel m(g, 5);
    auto est = m.estimate_mean_and_var(ValueVector::Constant(6, 0.7), 500);
    for (int p = 0; p < g.num_pairs(); ++p) {
        EXPECT_NEAR(est.mean[p], 0.7, 1e-12);
        EXPECT_NEAR(est.variance[p], 0.0, 1e-12);
    }
}

TEST(EstimateMeanAndVar, IndicatorOnUniformRowWithinBand) {
    const int n = 10;
    auto g = uniform_game(n);
    GenerativeModel m(g, 9);
    ValueVector v = ValueVector::Zero(n);
    v[3] = 1.0;
    const long draws = 100000;
    auto est = m.estimate_mean_and_var(v, draws);
    const double p = 1.0 / n;
    const double band = 3.0 * std::sqrt(p * (1 - p) / draws);
    for (int s = 0; s < n; ++s) {
        EXPECT_NEAR(est.mean[s], p, band);
        EXPECT_NEAR(est.variance[s], p * (1 - p), 0.01);
    }
}

TEST(EstimateMeanAndVar, StatisticsStayInsideRange) {
    auto g = random_game({8, 3, 0.9, 3}, 6);
    GenerativeModel m(g, 10);
    std::mt19937_64 rng(1);
    ValueVector v = random_vector(8, -1.0, 3.0, rng);
    for (long draws : {1L, 5L, 31L, 1000L}) {
        auto est = m.estimate_mean_and_var(v, draws);
        EXPECT_GE(est.variance.minCoeff(), 0.0);
        EXPECT_GE(est.mean.minCoeff(), v.minCoeff() - 1e-12);
        EXPECT_LE(est.mean.maxCoeff(), v.maxCoeff() + 1e-12);
    }
}

TEST(EstimateMeanAndVar, NonPositiveBatchRejected) {
    const auto g = point_mass_game();
    GenerativeModel m(g, 1);
    EXPECT_THROW(m.estimate_mean_and_var(ValueVector::Zero(3), 0), std::invalid_argument);
    EXPECT_THROW(m.estimate_diff_mean(ValueVector::Zero(3), ValueVector::Zero(3), -1), std::invalid_argument);
    EXPECT_THROW(m.estimate_mean_and_var(ValueVector::Zero(2), 3), std::invalid_argument);
}

TEST(EstimateMeanAndVar, UnbiasedAcrossSeeds) {
    // Both the per-draw path (small m) and the multinomial path (large m).
    auto g = random_game({5, 2, 0.9}, 12);
    ValueVector v(5);
    v << 0.0, 1.0, 4.0, 2.0, -1.0;
    const Eigen::VectorXd exact = q_from_v(g, v) - Eigen::VectorXd(q_from_v(g, ValueVector::Zero(5)));
    const Eigen::VectorXd pv = exact / g.gamma();
    for (long draws : {4L, 200L}) {
        const int seeds = 2000;
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(g.num_pairs());
        for (int s = 0; s < seeds; ++s) acc += GenerativeModel(g, 1000 + s).estimate_mean_and_var(v, draws).mean;
        acc /= seeds;
        // Range of v is 5, so per-draw standard deviation <= 2.5.
        const double band = 3.0 * 2.5 / std::sqrt(double(seeds) * draws);
        for (int p = 0; p < g.num_pairs(); ++p) EXPECT_NEAR(acc[p], pv[p], band) << "m = " << draws;
    }
}

TEST(EstimateDiffMean, EqualVectorsGiveZero) {
    auto g = random_game({6, 2, 0.9}, 4);
    GenerativeModel m(g, 5);
    std::mt19937_64 rng(3);
    ValueVector v = random_vector(6, 0.0, 1.0, rng);
    EXPECT_EQ(m.estimate_diff_mean(v, v, 50).mean.cwiseAbs().maxCoeff(), 0.0);
}

TEST(EstimateDiffMean, PointMassRowsAreExact) {
    auto g = point_mass_game();
    GenerativeModel m(g, 5);
    ValueVector v(3), v0(3);
    v << 1.0, 2.0, 3.0;
    v0 << 0.5, 0.25, 1.0;
    auto est = m.estimate_diff_mean(v, v0, 9);
    EXPECT_DOUBLE_EQ(est.mean[0], 2.0);
    EXPECT_DOUBLE_EQ(est.mean[1], 0.5);
    EXPECT_DOUBLE_EQ(est.mean[2], 1.75);
}

TEST(EstimateDiffMean, BoundedByDifferenceRange) {
    auto g = random_game({6, 2, 0.9}, 4);
    GenerativeModel m(g, 5);
    std::mt19937_64 rng(8);
    ValueVector v0 = random_vector(6, 0.0, 1.0, rng);
    ValueVector d = random_vector(6, -0.3, 0.3, rng);
    d[0] = 0.3;
    auto est = m.estimate_diff_mean(v0 + d, v0, 25);
    EXPECT_LE(est.mean.cwiseAbs().maxCoeff(), 0.3 + 1e-12);
}

TEST(EstimateDiffMean, FreshBatchDiffersFromInitialBatch) {
    auto g = uniform_game(20);
    ValueVector v = ValueVector::LinSpaced(20, 0.0, 1.0);
    GenerativeModel a(g, 3);
    auto first = a.estimate_mean_and_var(v, 40).mean;
    auto second = a.estimate_diff_mean(v, ValueVector::Zero(20), 40).mean;
    EXPECT_GT((first - second).cwiseAbs().maxCoeff(), 0.0);
}

TEST(SampleCount, FreshModelIsZero) {
    const auto g = point_mass_game();
    GenerativeModel m(g, 1);
    EXPECT_EQ(m.total_samples(), 0);
    for (long c : m.samples_per_pair()) EXPECT_EQ(c, 0);
}

TEST(SampleCount, BatchAddsMPerPair) {
    const auto g = point_mass_game();
    GenerativeModel m(g, 1);
    m.estimate_mean_and_var(ValueVector::Zero(3), 7);
    EXPECT_EQ(m.total_samples(), 21);
    const auto& per = m.samples_per_pair();
    EXPECT_EQ(std::accumulate(per.begin(), per.end(), 0L), m.total_samples());
    m.estimate_diff_mean(ValueVector::Zero(3), ValueVector::Zero(3), 1000);
    EXPECT_EQ(m.total_samples(), 3021);
}

TEST(Reproducibility, BatchesIndependentOfPairVisitOrder) {
    // A batch depends only on (seed, pair, batch index): single draws on other
    // pairs in between must not change it.
    auto g = random_game({5, 2, 0.9}, 14);
    ValueVector v = ValueVector::LinSpaced(5, 0.0, 4.0);
    GenerativeModel a(g, 21), b(g, 21);
    auto ea = a.estimate_mean_and_var(v, 300);
    b.sample_transition(0, 0);
    b.sample_transition(0, 0);
    auto eb = b.estimate_mean_and_var(v, 300);
    for (int p = 1; p < g.num_pairs(); ++p) EXPECT_EQ(ea.mean[p], eb.mean[p]);
    GenerativeModel c(g, 21);
    auto ec = c.estimate_mean_and_var(v, 300);
    EXPECT_EQ(ea.mean, ec.mean);
    EXPECT_EQ(ea.variance, ec.variance);
}
