#pragma once

#include "sg/game.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <stdexcept>
#include <vector>

namespace sg {

/**
 * Direct solver for the Markov-chain systems (I - g P_sigma) x = b and
 * (I - g P_sigma^T) x = b.
 *
 * P_sigma is split into an explicit sparse part S and the rows marked
 * "uniform over all states", so that P_sigma = S + u 1^T / n where u is the
 * indicator of uniform rows.  The sparse matrix A = I - g S is factorized once
 * with SparseLU and the rank-one term is handled by the Sherman-Morrison
 * formula.  This keeps hard instances with thousands of uniform rows sparse.
 */
class ChainSolver {
public:
    ChainSolver(const StochasticGame& game, const Strategy& sigma, double discount, bool transpose)
        : n_(game.num_states()), discount_(discount), transpose_(transpose), uniform_(n_) {
        require_total(game, sigma);
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(static_cast<std::size_t>(n_) * 2);
        for (int s = 0; s < n_; ++s) {
            trip.emplace_back(s, s, 1.0);
            const auto& tr = game.transition(s, sigma[s]);
            uniform_[s] = tr.uniform ? 1.0 : 0.0;
            if (tr.uniform) continue;
            for (const auto& [t, p] : tr.entries) {
                if (transpose_)
                    trip.emplace_back(t, s, -discount_ * p);
                else
                    trip.emplace_back(s, t, -discount_ * p);
            }
        }
        Eigen::SparseMatrix<double> a(n_, n_);
        a.setFromTriplets(trip.begin(), trip.end());
        a.makeCompressed();
        lu_.analyzePattern(a);
        lu_.factorize(a);
        if (lu_.info() != Eigen::Success) throw std::runtime_error("sparse LU factorization failed");
        has_uniform_ = uniform_.sum() > 0.0;
        if (has_uniform_) {
            // Evaluation: M = A - (g/n) u 1^T.  Transpose: M^T = A^T - (g/n) 1 u^T.
            Eigen::VectorXd left = transpose_ ? Eigen::VectorXd::Ones(n_) : uniform_;
            right_ = transpose_ ? uniform_ : Eigen::VectorXd::Ones(n_);
            z_ = lu_.solve(left);
            if (lu_.info() != Eigen::Success) throw std::runtime_error("sparse LU solve failed");
            denom_ = 1.0 - (discount_ / n_) * right_.dot(z_);
            if (denom_ == 0.0) throw std::runtime_error("singular rank-one update");
        }
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
        Eigen::VectorXd y = lu_.solve(b);
        if (lu_.info() != Eigen::Success) throw std::runtime_error("sparse LU solve failed");
        if (has_uniform_) y += z_ * ((discount_ / n_) * right_.dot(y) / denom_);
        return y;
    }

private:
    int n_;
    double discount_;
    bool transpose_;
    Eigen::VectorXd uniform_;
    Eigen::VectorXd right_;
    Eigen::VectorXd z_;
    double denom_ = 1.0;
    bool has_uniform_ = false;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
};

/// r_sigma: the reward collected at each state under sigma.
inline Eigen::VectorXd strategy_rewards(const StochasticGame& game, const Strategy& sigma) {
    Eigen::VectorXd r(game.num_states());
    for (int s = 0; s < game.num_states(); ++s) r[s] = game.reward(s, sigma[s]);
    return r;
}

/// (P_sigma v)(s) for every state.
inline Eigen::VectorXd apply_chain(const StochasticGame& game, const Strategy& sigma, const Eigen::VectorXd& v) {
    const double mean = v.mean();
    Eigen::VectorXd out(game.num_states());
    for (int s = 0; s < game.num_states(); ++s) out[s] = game.transition(s, sigma[s]).expect(v, mean);
    return out;
}

/// (P_sigma^T mu) for a row vector mu stored as a column.
inline Eigen::VectorXd apply_chain_transpose(const StochasticGame& game, const Strategy& sigma,
                                             const Eigen::VectorXd& mu) {
    const int n = game.num_states();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    double uniform_mass = 0.0;
    for (int s = 0; s < n; ++s) {
        const auto& tr = game.transition(s, sigma[s]);
        if (tr.uniform) {
            uniform_mass += mu[s];
            continue;
        }
        for (const auto& [t, p] : tr.entries) out[t] += p * mu[s];
    }
    if (uniform_mass != 0.0) out.array() += uniform_mass / n;
    return out;
}

}  // namespace sg
