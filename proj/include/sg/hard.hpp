#pragma once

#include "sg/checks.hpp"
#include "sg/exact.hpp"
#include "sg/game.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sg {

// ---------------------------------------------------------------------------
// Policy-iteration instance: T states on a line, one uniform action U
// everywhere, a "move right" action R on the S' states left of the last one,
// and reward 1 only for U at the last state.
// ---------------------------------------------------------------------------

struct Hi1Meta {
    int T = 0;
    int S_prime = 0;
    double beta_factor = 0.0;
    double gamma = 0.0;
    double r_T = 1.0;

    /// 0-based index of the 1-based state k.
    static int state(int k) { return k - 1; }
    /// First 1-based state with an R action (T - S').
    int first_right() const { return T - S_prime; }
    /// All-U policy.
    Strategy pi_zero() const { return Strategy(T, 0); }
    /// R at the last `count` right states T-1, ..., T-count.
    Strategy pi_with_right(int count) const {
        Strategy pi(T, 0);
        for (int k = 1; k <= count; ++k) pi[state(T - k)] = 1;
        return pi;
    }
    /// Every R action taken.
    Strategy pi_all_right() const { return pi_with_right(S_prime); }
};

inline int hi1_s_prime(int T) { return static_cast<int>(std::floor(std::sqrt(T / 12.0) + 1e-12)); }

inline std::pair<StochasticGame, Hi1Meta> build_hi1(int T, double beta_factor = 4.0, double r_T = 1.0) {
    Hi1Meta meta;
    meta.T = T;
    meta.S_prime = hi1_s_prime(T);
    if (T < 48 || meta.S_prime < 2) throw std::invalid_argument("build_hi1: T must be at least 48");
    if (!(beta_factor >= 1.0)) throw std::invalid_argument("build_hi1: beta_factor must be at least 1");
    meta.beta_factor = beta_factor;
    meta.gamma = 1.0 - 1.0 / (beta_factor * T);
    meta.r_T = r_T;
    std::vector<State> states(T);
    for (int k = 1; k <= T; ++k) {
        State& st = states[Hi1Meta::state(k)];
        st.owner = Owner::Max;
        st.actions.push_back({k == T ? r_T : 0.0, Transition::uniform_all()});
        if (k >= meta.first_right() && k <= T - 1) st.actions.push_back({0.0, Transition::point(Hi1Meta::state(k + 1))});
    }
    return {StochasticGame(meta.gamma, std::move(states), std::max(1.0, std::abs(r_T))), meta};
}

struct Hi1PathResult {
    SolveTrace trace;
    CheckReport report;
    long flip_iterations = 0;  ///< Evaluations that changed an action.
    std::vector<double> last_state_values;  ///< v^{pi^(i)}(T) for i = 0..S'.
};

/**
 * Runs policy iteration from the all-U policy and checks that iteration k
 * flips exactly state T-k from U to R for k = 1..S', that nothing else
 * changes, and that v^{pi^(S')}(T) - v^{pi^(i)}(T) > 0.1 r_T for i <= S'/4.
 */
inline Hi1PathResult verify_pi_path_hi1(int T, double beta_factor = 4.0, double r_T = 1.0) {
    auto [game, meta] = build_hi1(T, beta_factor, r_T);
    Hi1PathResult out;
    auto pi = policy_iteration(game, meta.pi_zero());
    out.trace = pi.trace;
    const auto& its = out.trace.iterations;
    for (const auto& rec : its)
        if (!rec.changes.empty()) ++out.flip_iterations;
    auto& rep = out.report;
    if (out.flip_iterations != meta.S_prime) {
        std::ostringstream os;
        os << "expected " << meta.S_prime << " improving iterations, saw " << out.flip_iterations;
        rep.fail(os.str());
    }
    for (std::size_t k = 0; k < its.size(); ++k) {
        const auto& ch = its[k].changes;
        const int step = static_cast<int>(k) + 1;
        if (step <= meta.S_prime) {
            const int want = Hi1Meta::state(T - step);
            if (ch.size() != 1 || ch[0].state != want || ch[0].old_action != 0 || ch[0].new_action != 1) {
                std::ostringstream os;
                os << "iteration " << step << ": expected a single U->R flip at state " << T - step << ", saw "
                   << ch.size() << " flips";
                if (!ch.empty()) os << " (first at state " << ch[0].state + 1 << ")";
                rep.fail(os.str());
            }
        } else if (!ch.empty()) {
            rep.fail("iteration " + std::to_string(step) + ": unexpected flips after the predicted path");
        }
    }
    const int last = Hi1Meta::state(T);
    for (int i = 0; i <= meta.S_prime; ++i) out.last_state_values.push_back(evaluate(game, meta.pi_with_right(i))[last]);
    const double final_value = out.last_state_values.back();
    for (int i = 0; i <= meta.S_prime / 4; ++i) {
        const double gap = final_value - out.last_state_values[i];
        if (!(gap > 0.1 * meta.r_T)) rep.add(5, i, last, gap, 0.1 * meta.r_T, 0.0);
    }
    return out;
}

/**
 * Stationary distributions of the all-U policy, the all-R policy and
 * `num_policies` uniformly random policies, each checked entrywise against
 * [1/(2T), (S'+1)/T].  Non-convergent chains are skipped and noted.
 */
inline CheckReport hi1_distribution_bounds(int T, int num_policies, std::uint64_t seed, double beta_factor = 4.0,
                                           long* checked = nullptr) {
    auto [game, meta] = build_hi1(T, beta_factor);
    std::vector<Strategy> policies{meta.pi_zero(), meta.pi_all_right()};
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(0.5);
    for (int k = 0; k < num_policies; ++k) {
        Strategy pi = meta.pi_zero();
        for (int s = 0; s < T; ++s)
            if (game.num_actions(s) == 2) pi[s] = coin(rng) ? 1 : 0;
        policies.push_back(std::move(pi));
    }
    CheckReport rep;
    const double lo = 1.0 / (2.0 * T);
    const double hi = (meta.S_prime + 1.0) / T;
    long count = 0;
    for (std::size_t k = 0; k < policies.size(); ++k) {
        Eigen::VectorXd lambda;
        try {
            lambda = stationary_distribution(game, policies[k]);
        } catch (const std::runtime_error& e) {
            rep.notes.push_back("policy " + std::to_string(k) + " skipped: " + e.what());
            continue;
        }
        ++count;
        for (int s = 0; s < T; ++s) {
            if (lambda[s] < lo - 1e-12) rep.add(1, static_cast<int>(k), s, lambda[s], lo, 1e-12);
            if (lambda[s] > hi + 1e-12) rep.add(2, static_cast<int>(k), s, lambda[s], hi, 1e-12);
        }
    }
    if (checked) *checked = count;
    return rep;
}

// ---------------------------------------------------------------------------
// Strategy-iteration instance.  Groups, in index order: T dummies; min states
// m_1..m_S'; min boosting chain b_1..b_Sb; goal s_g; max states M_1..M_S';
// max boosting chain B_1..B_Sb'; and the max root s_*.
// ---------------------------------------------------------------------------

struct Hi2Rewards {
    int S_prime = 0;
    int S_b = 0;
    int S_b_prime = 0;
    std::vector<double> r;  ///< r_1..r_S' (stored 0-based).
    double r_delta = 0.0;
    double r_delta_prime = 0.0;
    double r_g = 1.0;
    double gamma = 0.0;
};

inline int hi2_s_prime(int T) { return static_cast<int>(std::floor(std::sqrt(static_cast<double>(T)) + 1e-12)) / 4; }

/**
 * Reward configuration with r_i decreasing linearly from r_hi (i = 1) in
 * steps of (r_hi - r_lo)/S', r_delta = rd / sqrt(T), r_delta' = rdp / sqrt(T),
 * r_g = 1 and gamma = 1 - 1/(8T).
 */
inline Hi2Rewards hi2_rewards(int T, int S_b, int S_b_prime, double r_hi, double r_lo, double rd, double rdp) {
    Hi2Rewards cfg;
    cfg.S_prime = hi2_s_prime(T);
    if (cfg.S_prime < 2) throw std::invalid_argument("hi2_rewards: T too small");
    cfg.S_b = S_b;
    cfg.S_b_prime = S_b_prime;
    for (int i = 1; i <= cfg.S_prime; ++i) cfg.r.push_back(r_hi - (r_hi - r_lo) * (i - 1) / cfg.S_prime);
    cfg.r_delta = rd / std::sqrt(static_cast<double>(T));
    cfg.r_delta_prime = rdp / std::sqrt(static_cast<double>(T));
    cfg.r_g = 1.0;
    cfg.gamma = 1.0 - 1.0 / (8.0 * T);
    return cfg;
}

/**
 * Default configuration: S' = floor(sqrt(T))/4, S_b = S'+1, S_b' = 2S',
 * r_i from 0.6 down in steps of 0.3/S', r_delta = 0.25/sqrt(T),
 * r_delta' = 1.5/sqrt(T).  Chosen so that strategy iteration follows the
 * predicted path at T = 400 and T = 1600.
 */
inline Hi2Rewards default_hi2_rewards(int T) {
    if (T < 400) throw std::invalid_argument("default_hi2_rewards: T must be at least 400");
    const int sp = hi2_s_prime(T);
    return hi2_rewards(T, sp + 1, 2 * sp, 0.6, 0.3, 0.25, 1.5);
}

struct Hi2Meta {
    int T = 0;
    int S_prime = 0;
    int S_b = 0;
    int S_b_prime = 0;
    int num_states = 0;  ///< T' = T + 2S' + S_b + S_b' + 2.
    Hi2Rewards rewards;

    int dummy(int k) const { return k; }  ///< k = 0..T-1
    int m(int j) const { return T + j - 1; }
    int b(int j) const { return T + S_prime + j - 1; }
    int goal() const { return T + S_prime + S_b; }
    int M(int j) const { return goal() + j; }
    int B(int j) const { return goal() + S_prime + j; }
    int star() const { return goal() + S_prime + S_b_prime + 1; }
};

inline void require_hi2_config(const Hi2Rewards& cfg) {
    if (cfg.S_prime < 1 || static_cast<int>(cfg.r.size()) != cfg.S_prime)
        throw std::invalid_argument("hi2: reward list must have S' entries");
    if (cfg.S_b < 1 || cfg.S_b_prime < 1) throw std::invalid_argument("hi2: boosting chains must be non-empty");
    if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0)) throw std::invalid_argument("hi2: gamma must lie in (0,1)");
}

/**
 * Builds the instance.  U actions are uniform over all T' states.  R at m_j
 * leads to m_{j-1} with reward r_delta, and m_1 leads to b_{S_b}.  R at M_j
 * leads to M_{j-1} with reward -r_delta', and M_1 leads to B_{S_b'}.  Each
 * boosting chain walks down to its end (b_1 -> s_g, B_1 -> s_*).  s_g pays
 * -r_g and jumps uniformly; action a_i at s_* pays r_i and moves to m_i.
 */
inline std::pair<StochasticGame, Hi2Meta> build_hi2(int T, const Hi2Rewards& cfg) {
    require_hi2_config(cfg);
    if (T < 1) throw std::invalid_argument("build_hi2: T must be positive");
    Hi2Meta meta;
    meta.T = T;
    meta.S_prime = cfg.S_prime;
    meta.S_b = cfg.S_b;
    meta.S_b_prime = cfg.S_b_prime;
    meta.num_states = T + 2 * cfg.S_prime + cfg.S_b + cfg.S_b_prime + 2;
    meta.rewards = cfg;
    std::vector<State> states(meta.num_states);
    const Transition uni = Transition::uniform_all();
    for (int k = 0; k < T; ++k) states[meta.dummy(k)] = {Owner::Min, {{0.0, uni}}};
    for (int j = 1; j <= meta.S_prime; ++j) {
        const int target = j > 1 ? meta.m(j - 1) : meta.b(meta.S_b);
        states[meta.m(j)] = {Owner::Min, {{0.0, uni}, {cfg.r_delta, Transition::point(target)}}};
    }
    for (int j = 1; j <= meta.S_b; ++j)
        states[meta.b(j)] = {Owner::Min, {{0.0, Transition::point(j > 1 ? meta.b(j - 1) : meta.goal())}}};
    states[meta.goal()] = {Owner::Min, {{-cfg.r_g, uni}}};
    for (int j = 1; j <= meta.S_prime; ++j) {
        const int target = j > 1 ? meta.M(j - 1) : meta.B(meta.S_b_prime);
        states[meta.M(j)] = {Owner::Max, {{0.0, uni}, {-cfg.r_delta_prime, Transition::point(target)}}};
    }
    for (int j = 1; j <= meta.S_b_prime; ++j)
        states[meta.B(j)] = {Owner::Max, {{0.0, Transition::point(j > 1 ? meta.B(j - 1) : meta.star())}}};
    State root{Owner::Max, {}};
    for (int i = 1; i <= meta.S_prime; ++i) root.actions.push_back({cfg.r[i - 1], Transition::point(meta.m(i))});
    states[meta.star()] = std::move(root);
    double bound = 1.0;
    for (const auto& st : states)
        for (const auto& a : st.actions) bound = std::max(bound, std::abs(a.reward));
    return {StochasticGame(cfg.gamma, std::move(states), bound), meta};
}

/**
 * Joint strategy (pi_min^(i), pi_max^(a,z)): R at m_1..m_i, R at M_1..M_z,
 * a_a at s_*, U everywhere else.
 */
inline Strategy hi2_strategy(const Hi2Meta& meta, int i, int a, int z) {
    if (i < 0 || i > meta.S_prime || z < 0 || z > meta.S_prime || a < 1 || a > meta.S_prime)
        throw std::invalid_argument("hi2_strategy: index out of range");
    Strategy sigma(meta.num_states, 0);
    for (int j = 1; j <= i; ++j) sigma[meta.m(j)] = 1;
    for (int j = 1; j <= z; ++j) sigma[meta.M(j)] = 1;
    sigma[meta.star()] = a - 1;
    return sigma;
}

/// (i, a, z) label of a strategy of the hi2_strategy family.
struct Hi2Label {
    int i = 0;
    int a = 0;
    int z = 0;
    bool operator==(const Hi2Label&) const = default;
};

inline std::string to_string(const Hi2Label& l) {
    return "(" + std::to_string(l.i) + "," + std::to_string(l.a) + "," + std::to_string(l.z) + ")";
}

/// Label of sigma if it belongs to the family, otherwise nullopt.
inline std::optional<Hi2Label> hi2_label(const Hi2Meta& meta, const Strategy& sigma) {
    Hi2Label l;
    while (l.i < meta.S_prime && sigma[meta.m(l.i + 1)] == 1) ++l.i;
    while (l.z < meta.S_prime && sigma[meta.M(l.z + 1)] == 1) ++l.z;
    l.a = sigma[meta.star()] + 1;
    if (sigma != hi2_strategy(meta, l.i, l.a, l.z)) return std::nullopt;
    return l;
}

/**
 * Path predicted for strategy iteration from (0, 1, 0): the max player first
 * walks z = 0..S' at a_1; then for i = 1..S'-1 the min update adds m_i,
 * s_* jumps to a_{i+1} with every M back on U, and z walks up again.
 */
inline std::vector<Hi2Label> hi2_predicted_path(int S_prime) {
    std::vector<Hi2Label> path;
    for (int z = 0; z <= S_prime; ++z) path.push_back({0, 1, z});
    for (int i = 1; i < S_prime; ++i) {
        path.push_back({i, i, S_prime});
        for (int z = 0; z <= S_prime; ++z) path.push_back({i, i + 1, z});
    }
    return path;
}

struct Hi2PathResult {
    SolveTrace trace;
    CheckReport report;
    std::vector<std::optional<Hi2Label>> visited;
    long path_evaluations = 0;   ///< Evaluations spent on the predicted path.
    long total_evaluations = 0;  ///< Including the terminating sweep.
    int S_prime = 0;
};

namespace detail {

inline const char* hi2_rule(const Hi2Label& from, int S_prime) {
    if (from.a == from.i) return "max step from (i,i,z) must reach (i,i+1,0)";
    if (from.z < S_prime) return "max step from (i,i+1,z) must reach (i,i+1,z+1)";
    return "min step from (i,i+1,S') must reach (i+1,i+1,S')";
}

}  // namespace detail

/**
 * Runs strategy iteration from (pi_min^(0), pi_max^(1,0)) and compares every
 * evaluated strategy with the predicted path.  Each predicted transition is
 * one of three rules: from (i,i,z) the max player jumps to (i,i+1,0); from
 * (i,i+1,z) with z < S' it adds M_{z+1}; from (i,i+1,S') the max player is
 * done and the min player adds m_{i+1}.  The number of evaluations spent on
 * the path must lie in [S'(S'-1), S'(S'+2)].
 */
inline Hi2PathResult verify_si_path_hi2(int T, const Hi2Rewards& cfg) {
    auto [game, meta] = build_hi2(T, cfg);
    Hi2PathResult out;
    out.S_prime = meta.S_prime;
    auto si = strategy_iteration(game, hi2_strategy(meta, 0, 1, 0), true);
    out.trace = si.trace;
    out.total_evaluations = si.trace.evaluations();
    for (const auto& st : si.visited) out.visited.push_back(hi2_label(meta, st));
    const auto predicted = hi2_predicted_path(meta.S_prime);
    auto& rep = out.report;
    std::size_t k = 0;
    for (; k < predicted.size(); ++k) {
        if (k >= out.visited.size()) {
            rep.fail("run ended after " + std::to_string(k) + " evaluations, before the predicted path");
            break;
        }
        if (!out.visited[k] || !(*out.visited[k] == predicted[k])) {
            std::string seen = out.visited[k] ? to_string(*out.visited[k]) : std::string("outside the family");
            std::string msg = "evaluation " + std::to_string(k + 1) + ": expected " + to_string(predicted[k]) +
                              ", saw " + seen;
            if (k > 0) msg += " [" + std::string(detail::hi2_rule(predicted[k - 1], meta.S_prime)) + "]";
            rep.fail(msg);
            break;
        }
    }
    out.path_evaluations = static_cast<long>(k);
    const long lo = static_cast<long>(meta.S_prime) * (meta.S_prime - 1);
    const long hi = static_cast<long>(meta.S_prime) * (meta.S_prime + 2);
    if (out.path_evaluations < lo || out.path_evaluations > hi) {
        std::ostringstream os;
        os << "path evaluations " << out.path_evaluations << " outside [" << lo << ", " << hi << "]";
        rep.fail(os.str());
    }
    return out;
}

struct Hi2SignRow {
    int i = 0;
    int a = 0;
    int z = 0;
    double scaled_mean = 0.0;  ///< (1-gamma) T' mean(v).
    double predicted = 0.0;    ///< Band centre for the positive cells, NaN otherwise.
};

struct Hi2SignResult {
    CheckReport report;
    std::vector<Hi2SignRow> rows;
};

/**
 * Sign grid of the scaled mean value (1-gamma) T' v-bar for z in {0, S'}:
 * negative at (pi_min^(i), pi_max^(i,z)) for i = 1..S', positive at
 * (pi_min^(i), pi_max^(i+1,z)) for i = 0..S'-1.  The positive cells must also
 * lie within `band` of -(i+S_b+1) r_g + (1+z+S_b') r_{i+1}.
 * Property ids: 1 negative sign, 2 positive sign, 3 band.
 */
inline Hi2SignResult hi2_vbar_signs(int T, const Hi2Rewards& cfg, double band = 10.0) {
    auto [game, meta] = build_hi2(T, cfg);
    Hi2SignResult out;
    const double scale = (1.0 - game.gamma()) * meta.num_states;
    for (int z : {0, meta.S_prime}) {
        for (int i = 1; i <= meta.S_prime; ++i) {
            const double x = scale * evaluate(game, hi2_strategy(meta, i, i, z)).mean();
            out.rows.push_back({i, i, z, x, std::nan("")});
            if (!(x < 0.0)) out.report.add(1, i, z, x, 0.0, 0.0);
        }
        for (int i = 0; i < meta.S_prime; ++i) {
            const double x = scale * evaluate(game, hi2_strategy(meta, i, i + 1, z)).mean();
            const double centre = -(i + cfg.S_b + 1) * cfg.r_g + (1.0 + z + cfg.S_b_prime) * cfg.r[i];
            out.rows.push_back({i, i + 1, z, x, centre});
            if (!(x > 0.0)) out.report.add(2, i, z, x, 0.0, 0.0);
            if (!(std::abs(x - centre) <= band)) out.report.add(3, i, z, x, centre, band);
        }
    }
    return out;
}

}  // namespace sg
