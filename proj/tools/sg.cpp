// Command-line harness: solve games, replay the hard instances, scan flux
// ratios, certify value-strategy sequences and sweep sample sizes.

#include "sg/checks.hpp"
#include "sg/exact.hpp"
#include "sg/hard.hpp"
#include "sg/io.hpp"
#include "sg/qvi.hpp"
#include "sg/random_games.hpp"
#include "sg/sampler.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace {

using namespace sg;

enum class Level { Quiet, Info, Debug };

Level log_level() {
    const char* env = std::getenv("SG_LOG");
    if (!env) return Level::Quiet;
    const std::string s(env);
    if (s == "debug") return Level::Debug;
    if (s == "info") return Level::Info;
    return Level::Quiet;
}

void log_info(const std::string& msg) {
    if (log_level() != Level::Quiet) std::cerr << "[info] " << msg << '\n';
}

void log_debug(const std::string& msg) {
    if (log_level() == Level::Debug) std::cerr << "[debug] " << msg << '\n';
}

/// Signals a failed check; maps to exit code 1.
struct CheckFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GameSource {
    std::string path;
    int hi1 = 0;
    int hi2 = 0;
    double beta_factor = 4.0;

    void attach(CLI::App* cmd) {
        auto* g = cmd->add_option("--game", path, "Game JSON file");
        auto* a = cmd->add_option("--hi1", hi1, "Generate the policy-iteration instance with T states");
        auto* b = cmd->add_option("--hi2", hi2, "Generate the strategy-iteration instance with T dummy states");
        g->excludes(a)->excludes(b);
        a->excludes(b);
        cmd->add_option("--beta-factor", beta_factor, "gamma = 1 - 1/(beta_factor T) for --hi1")->capture_default_str();
    }

    StochasticGame load() const {
        if (!path.empty()) return load_game(path);
        if (hi1 > 0) return build_hi1(hi1, beta_factor).first;
        if (hi2 > 0) return build_hi2(hi2, default_hi2_rewards(hi2)).first;
        throw std::invalid_argument("one of --game, --hi1, --hi2 is required");
    }
};

std::uint64_t require_seed(const std::optional<std::uint64_t>& seed) {
    if (!seed) throw std::invalid_argument("--seed is required for randomized runs");
    return *seed;
}

std::string join(const Strategy& s) {
    std::ostringstream os;
    for (std::size_t k = 0; k < s.size(); ++k) os << (k ? " " : "") << s[k];
    return os.str();
}

std::string join(const Eigen::VectorXd& v) {
    std::ostringstream os;
    os << std::setprecision(10);
    for (Eigen::Index k = 0; k < v.size(); ++k) os << (k ? " " : "") << v[k];
    return os.str();
}

template <class Fn>
void write_output(const std::string& path, Fn&& fn) {
    if (path.empty() || path == "-") {
        fn(std::cout);
        return;
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    fn(out);
}

/// Rewards outside [0,1] are mapped there, which keeps optimal strategies unchanged.
StochasticGame unit_rewards(const StochasticGame& game) {
    if (rewards_in_unit_interval(game)) return game;
    const double b = game.reward_bound();
    log_info("mapping rewards from [-b, b] to [0, 1] with b = " + std::to_string(b));
    return affine_reward_map(game, 2.0 * b, b);
}

struct SolveArgs {
    GameSource src;
    std::string method = "vi";
    double eps = 0.01;
    double delta = 0.1;
    std::optional<std::uint64_t> seed;
    int trials = 1;
    std::string constants;
    std::string out;
    bool certify = false;
};

int run_solve(const SolveArgs& a) {
    const StochasticGame game = a.src.load();
    if (a.method == "vi") {
        auto res = value_iteration(game, a.eps);
        std::cout << "method vi\niterations " << res.trace.iterations.size() << "\nvalue " << join(res.value)
                  << "\nstrategy " << join(res.strategy) << '\n';
        if (!a.out.empty()) write_output(a.out, [&](std::ostream& os) { write_trace_csv(os, res.trace); });
        if (a.certify) {
            const double resid = (bellman(game, res.value) - res.value).cwiseAbs().maxCoeff();
            std::cout << "bellman_residual " << resid << '\n';
            if (resid > a.eps) throw CheckFailure("value iteration residual exceeds eps");
        }
        return 0;
    }
    if (a.method == "pi" || a.method == "si") {
        SolveTrace trace;
        Strategy sigma;
        ValueVector v;
        if (a.method == "pi") {
            auto res = policy_iteration(game, Strategy(game.num_states(), 0));
            trace = res.trace;
            sigma = res.strategy;
            v = res.value;
        } else {
            auto res = strategy_iteration(game, Strategy(game.num_states(), 0));
            trace = res.trace;
            sigma = res.strategy;
            v = res.value;
        }
        std::cout << "method " << a.method << "\niterations " << trace.iterations.size() << "\nevaluations "
                  << trace.evaluations() << "\nvalue " << join(v) << "\nstrategy " << join(sigma) << '\n';
        if (!a.out.empty()) write_output(a.out, [&](std::ostream& os) { write_trace_csv(os, trace); });
        if (a.certify) {
            const double resid = (bellman(game, v) - v).cwiseAbs().maxCoeff();
            std::cout << "bellman_residual " << resid << '\n';
            if (resid > 1e-8) throw CheckFailure("equilibrium residual exceeds 1e-8");
        }
        return 0;
    }
    if (a.method != "qvi") throw std::invalid_argument("unknown method " + a.method);
    if (!(a.eps > 0.0 && a.eps < 1.0)) throw std::invalid_argument("--eps must lie in (0,1)");
    if (!(a.delta > 0.0 && a.delta < 1.0)) throw std::invalid_argument("--delta must lie in (0,1)");
    if (a.trials < 1) throw std::invalid_argument("--trials must be positive");
    const std::uint64_t seed = require_seed(a.seed);
    const StochasticGame unit = unit_rewards(game);
    const QviConstants k = a.constants.empty() ? QviConstants{} : constants_from_json(read_json_file(a.constants));
    std::optional<ValueVector> v_star;
    if (a.certify) v_star = strategy_iteration(unit, Strategy(unit.num_states(), 0)).value;
    int failures = 0;
    std::ostringstream csv;
    csv << "trial,seed,samples,eps_min,eps_max,certified\n";
    for (int t = 0; t < a.trials; ++t) {
        const std::uint64_t trial_seed = seed + static_cast<std::uint64_t>(t);
        GenerativeModel model(unit, trial_seed);
        log_info("trial " + std::to_string(t) + " seed " + std::to_string(trial_seed));
        SolveResult res = solve(model, a.eps, a.delta, k);
        for (const auto& r : res.rounds)
            log_debug("round u=" + std::to_string(r.u) + " R=" + std::to_string(r.constants.R) +
                      " m1=" + std::to_string(r.constants.m1) + " m2=" + std::to_string(r.constants.m2));
        std::cout << "trial " << t << " seed " << trial_seed << " samples " << res.total_samples << "\npi_min "
                  << join(res.pi_min) << "\npi_max " << join(res.pi_max) << "\nv_hat " << join(res.v_hat) << '\n';
        double gap_min = 0.0, gap_max = 0.0;
        bool ok = true;
        if (v_star) {
            gap_min = (best_response_value(unit, res.pi_min, Owner::Min) - *v_star).maxCoeff();
            gap_max = (*v_star - best_response_value(unit, res.pi_max, Owner::Max)).maxCoeff();
            ok = gap_min <= a.eps && gap_max <= a.eps;
            std::cout << "certificate min_gap " << gap_min << " max_gap " << gap_max << (ok ? " ok" : " FAILED") << '\n';
            if (!ok) ++failures;
        }
        csv << t << ',' << trial_seed << ',' << res.total_samples << ',' << csv_number(gap_min) << ','
            << csv_number(gap_max) << ',' << (v_star ? (ok ? "1" : "0") : "") << '\n';
    }
    if (!a.out.empty()) write_output(a.out, [&](std::ostream& os) { os << csv.str(); });
    if (failures > 0) throw CheckFailure(std::to_string(failures) + " trial(s) not eps-optimal");
    return 0;
}

struct HardArgs {
    int T = 0;
    double beta_factor = 4.0;
    std::string out;
    std::string rewards;
    int policies = 0;
    std::optional<std::uint64_t> seed;
    bool signs = false;
    double band = 10.0;
};

Hi2Rewards hi2_config(const HardArgs& a) {
    if (a.rewards.empty()) return default_hi2_rewards(a.T);
    const json j = read_json_file(a.rewards);
    Hi2Rewards cfg = default_hi2_rewards(a.T);
    cfg.S_b = j.value("S_b", cfg.S_b);
    cfg.S_b_prime = j.value("S_b_prime", cfg.S_b_prime);
    if (j.contains("r")) cfg.r = j["r"].get<std::vector<double>>();
    cfg.r_delta = j.value("r_delta", cfg.r_delta);
    cfg.r_delta_prime = j.value("r_delta_prime", cfg.r_delta_prime);
    cfg.r_g = j.value("r_g", cfg.r_g);
    cfg.gamma = j.value("gamma", cfg.gamma);
    require_hi2_config(cfg);
    return cfg;
}

int run_hard_pi(const HardArgs& a) {
    const int T = a.T > 0 ? a.T : 48;
    auto res = verify_pi_path_hi1(T, a.beta_factor);
    write_output(a.out, [&](std::ostream& os) { write_trace_csv(os, res.trace); });
    std::cerr << "improving iterations " << res.flip_iterations << " (S' = " << hi1_s_prime(T) << ")\n"
              << report_summary(res.report) << '\n';
    bool ok = res.report.passed;
    if (a.policies > 0) {
        long checked = 0;
        auto rep = hi1_distribution_bounds(T, a.policies, require_seed(a.seed), a.beta_factor, &checked);
        std::cerr << "stationary bounds over " << checked << " policies: " << report_summary(rep) << '\n';
        ok = ok && rep.passed;
    }
    if (!ok) throw CheckFailure("policy-iteration path check failed");
    return 0;
}

int run_hard_si(const HardArgs& a) {
    const int T = a.T > 0 ? a.T : 400;
    const Hi2Rewards cfg = hi2_config(a);
    auto res = verify_si_path_hi2(T, cfg);
    write_output(a.out, [&](std::ostream& os) { write_trace_csv(os, res.trace); });
    std::cerr << "path evaluations " << res.path_evaluations << ", total " << res.total_evaluations << " (S' = "
              << res.S_prime << ")\n"
              << report_summary(res.report) << '\n';
    bool ok = res.report.passed;
    if (a.signs) {
        auto signs = hi2_vbar_signs(T, cfg, a.band);
        std::cerr << "value signs: " << report_summary(signs.report) << '\n';
        for (const auto& row : signs.rows)
            log_info("(" + std::to_string(row.i) + "," + std::to_string(row.a) + "," + std::to_string(row.z) +
                     ") scaled mean " + std::to_string(row.scaled_mean));
        ok = ok && signs.report.passed;
    }
    if (!ok) throw CheckFailure("strategy-iteration path check failed");
    return 0;
}

struct FluxArgs {
    GameSource src;
    long samples = 0;
    std::optional<std::uint64_t> seed;
    std::string out;
};

int run_flux(const FluxArgs& a) {
    const StochasticGame game = a.src.load();
    const StrategySource source =
        a.samples > 0 ? StrategySource::sample(a.samples, require_seed(a.seed)) : StrategySource::enumerate();
    const RatioReport rep = ratio_scan(game, source);
    if (!a.out.empty()) write_output(a.out, [&](std::ostream& os) { write_ratio_csv(os, rep); });
    const double beta = 1.0 / (1.0 - game.gamma());
    std::cout << std::setprecision(12) << "strategies_scanned " << rep.strategies_scanned << "\nstrategies_skipped "
              << rep.strategies_skipped << "\ndelta_min " << rep.delta_min << "\ndelta_max " << rep.delta_max
              << "\nc_min " << rep.c_min << "\nc_max " << rep.c_max << "\nflux_ratio " << rep.flux_ratio()
              << "\nergodicity_ratio " << rep.ergodicity_ratio() << '\n';
    const double lo = beta * rep.c_min / rep.c_max;
    const double hi = beta * rep.c_max / rep.c_min;
    const bool ok = lo <= rep.delta_min + 1e-9 && rep.delta_max <= hi + 1e-9;
    std::cout << "sandwich " << (ok ? "ok" : "FAILED") << '\n';
    if (!ok) throw CheckFailure("flux sandwich violated");
    return 0;
}

struct CheckArgs {
    std::string game;
    std::string seq;
    std::string out;
    bool implication = false;
};

int run_check(const CheckArgs& a) {
    const StochasticGame game = load_game(a.game);
    const VSSequence seq = sequence_from_json(read_json_file(a.seq));
    CheckReport rep = seq.direction == Direction::Decreasing ? check_mdvss(game, seq) : check_mivss(game, seq);
    if (a.implication) rep.merge(check_eps_optimal_implication(game, seq));
    std::cout << report_summary(rep) << '\n';
    if (!a.out.empty()) write_output(a.out, [&](std::ostream& os) { os << report_to_json(rep).dump(1) << '\n'; });
    if (!rep.passed) throw CheckFailure("sequence check failed");
    return 0;
}

struct ScalingArgs {
    GameSource src;
    std::optional<std::uint64_t> seed;
    std::vector<long> m1 = {100, 1000, 10000, 100000};
    int trials = 10;
    double u_fraction = 0.5;
    double delta = 0.1;
    std::string constants;
    std::string out;
};

int run_scaling(const ScalingArgs& a) {
    const std::uint64_t seed = require_seed(a.seed);
    StochasticGame game = a.src.path.empty() && a.src.hi1 == 0 && a.src.hi2 == 0
                              ? random_game({10, 2, 0.9, 2, false, 0.5}, seed)
                              : unit_rewards(a.src.load());
    QviConstants k = a.constants.empty() ? QviConstants{} : constants_from_json(read_json_file(a.constants));
    const ScalingResult res = scaling_sweep(game, a.m1, a.trials, a.u_fraction, a.delta, k, seed);
    write_output(a.out, [&](std::ostream& os) {
        os << "m1,trial,error,log_m1,log_error\n";
        for (const auto& p : res.points)
            os << p.m1 << ',' << p.trial << ',' << csv_number(p.error) << ','
               << csv_number(std::log(static_cast<double>(p.m1))) << ',' << csv_number(std::log(p.error)) << '\n';
    });
    std::cerr << "slope " << res.slope << " intercept " << res.intercept << '\n';
    return 0;
}

struct GenerateArgs {
    int states = 10;
    int actions = 2;
    double gamma = 0.9;
    int support = 0;
    bool deterministic = false;
    std::optional<std::uint64_t> seed;
    std::string out;
};

int run_generate(const GenerateArgs& a) {
    RandomGameSpec spec{a.states, a.actions, a.gamma, a.support, a.deterministic, 0.5};
    const StochasticGame game = random_game(spec, require_seed(a.seed));
    write_output(a.out, [&](std::ostream& os) { os << game_to_json(game).dump(1) << '\n'; });
    return 0;
}

void error_json(const std::string& kind, const std::string& msg) {
    std::cerr << json{{"error", kind}, {"message", msg}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Solvers, hard instances and certificates for turn-based stochastic games"};
    app.require_subcommand(1);

    SolveArgs solve_args;
    auto* solve_cmd = app.add_subcommand("solve", "Solve a game exactly (vi, pi, si) or from samples (qvi)");
    solve_args.src.attach(solve_cmd);
    solve_cmd->add_option("--method", solve_args.method, "vi | pi | si | qvi")
        ->check(CLI::IsMember({"vi", "pi", "si", "qvi"}))
        ->capture_default_str();
    solve_cmd->add_option("--eps", solve_args.eps, "Target accuracy")->capture_default_str();
    solve_cmd->add_option("--delta", solve_args.delta, "Failure probability (qvi)")->capture_default_str();
    solve_cmd->add_option("--seed", solve_args.seed, "Master seed (required for qvi)");
    solve_cmd->add_option("--trials", solve_args.trials, "Independent qvi runs with seeds seed, seed+1, ...");
    solve_cmd->add_option("--constants", solve_args.constants, "JSON with c1, c2, c3, c, C, m1, m2 overrides");
    solve_cmd->add_option("--out", solve_args.out, "CSV output path");
    solve_cmd->add_flag("--certify", solve_args.certify, "Compare against exact best responses");

    auto* hard_cmd = app.add_subcommand("hard", "Lower-bound instances");
    hard_cmd->require_subcommand(1);
    HardArgs pi_args, si_args;
    auto* pi_cmd = hard_cmd->add_subcommand("pi", "Policy-iteration path on the T-state instance");
    pi_cmd->add_option("--T", pi_args.T, "Number of states (default 48)");
    pi_cmd->add_option("--beta-factor", pi_args.beta_factor, "gamma = 1 - 1/(beta_factor T)")->capture_default_str();
    pi_cmd->add_option("--out", pi_args.out, "Trace CSV path (default stdout)");
    pi_cmd->add_option("--policies", pi_args.policies, "Also check stationary bounds on this many random policies");
    pi_cmd->add_option("--seed", pi_args.seed, "Seed for --policies");
    auto* si_cmd = hard_cmd->add_subcommand("si", "Strategy-iteration path on the T-dummy instance");
    si_cmd->add_option("--T", si_args.T, "Number of dummy states (default 400)");
    si_cmd->add_option("--rewards", si_args.rewards, "Reward configuration JSON");
    si_cmd->add_option("--out", si_args.out, "Trace CSV path (default stdout)");
    si_cmd->add_flag("--signs", si_args.signs, "Also check the mean-value sign grid");
    si_cmd->add_option("--band", si_args.band, "Tolerance of the positive-cell value band")->capture_default_str();

    FluxArgs flux_args;
    auto* flux_cmd = app.add_subcommand("flux", "Flux and stationary-distribution ratios over strategies");
    flux_args.src.attach(flux_cmd);
    flux_cmd->add_option("--samples", flux_args.samples, "Sample this many strategies instead of enumerating");
    flux_cmd->add_option("--seed", flux_args.seed, "Seed for --samples");
    flux_cmd->add_option("--out", flux_args.out, "Per-strategy CSV path");

    CheckArgs check_args;
    auto* check_cmd = app.add_subcommand("check", "Certify a value-strategy sequence against a game");
    check_cmd->add_option("--game", check_args.game, "Game JSON file")->required();
    check_cmd->add_option("--seq", check_args.seq, "Sequence JSON file")->required();
    check_cmd->add_option("--out", check_args.out, "Report JSON path");
    check_cmd->add_flag("--implication", check_args.implication, "Also check eps-optimality of the terminal strategy");

    ScalingArgs scaling_args;
    auto* scaling_cmd = app.add_subcommand("scaling", "Terminal error of one qvi round against m1");
    scaling_args.src.attach(scaling_cmd);
    scaling_cmd->add_option("--seed", scaling_args.seed, "Master seed")->required();
    scaling_cmd->add_option("--m1", scaling_args.m1, "Batch sizes to sweep")->capture_default_str();
    scaling_cmd->add_option("--trials", scaling_args.trials, "Runs per batch size")->capture_default_str();
    scaling_cmd->add_option("--u-fraction", scaling_args.u_fraction, "u as a fraction of beta")->capture_default_str();
    scaling_cmd->add_option("--delta", scaling_args.delta, "Failure probability")->capture_default_str();
    scaling_cmd->add_option("--constants", scaling_args.constants, "JSON with constant overrides");
    scaling_cmd->add_option("--out", scaling_args.out, "CSV path (default stdout)");

    GenerateArgs gen_args;
    auto* gen_cmd = app.add_subcommand("generate", "Write a seeded random game as JSON");
    gen_cmd->add_option("--states", gen_args.states)->capture_default_str();
    gen_cmd->add_option("--actions", gen_args.actions)->capture_default_str();
    gen_cmd->add_option("--gamma", gen_args.gamma)->capture_default_str();
    gen_cmd->add_option("--support", gen_args.support, "Next-state support size (0 = dense)")->capture_default_str();
    gen_cmd->add_flag("--deterministic", gen_args.deterministic, "Point-mass transitions");
    gen_cmd->add_option("--seed", gen_args.seed, "Seed")->required();
    gen_cmd->add_option("--out", gen_args.out, "Output path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        error_json("usage", e.what());
        return 2;
    }

    try {
        if (*solve_cmd) return run_solve(solve_args);
        if (*pi_cmd) return run_hard_pi(pi_args);
        if (*si_cmd) return run_hard_si(si_args);
        if (*flux_cmd) return run_flux(flux_args);
        if (*check_cmd) return run_check(check_args);
        if (*scaling_cmd) return run_scaling(scaling_args);
        if (*gen_cmd) return run_generate(gen_args);
    } catch (const CheckFailure& e) {
        error_json("check_failed", e.what());
        return 1;
    } catch (const std::invalid_argument& e) {
        error_json("invalid_input", e.what());
        return 2;
    } catch (const std::exception& e) {
        error_json("runtime", e.what());
        return 1;
    }
    return 2;
}
