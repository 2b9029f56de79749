#pragma once

#include "sg/checks.hpp"
#include "sg/exact.hpp"
#include "sg/game.hpp"
#include "sg/qvi.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sg {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Game files:
// {"gamma": g, "reward_bound": b (optional),
//  "states": [{"owner": "min"|"max",
//              "actions": [{"reward": r, "next": [{"s": i, "p": p}, ...]}
//                          | {"reward": r, "uniform": true}]}]}
// ---------------------------------------------------------------------------

inline json game_to_json(const StochasticGame& game) {
    json states = json::array();
    for (const auto& st : game.states()) {
        json acts = json::array();
        for (const auto& a : st.actions) {
            json ja{{"reward", a.reward}};
            if (a.next.uniform) {
                ja["uniform"] = true;
            } else {
                json next = json::array();
                for (const auto& [t, p] : a.next.entries) next.push_back({{"s", t}, {"p", p}});
                ja["next"] = std::move(next);
            }
            acts.push_back(std::move(ja));
        }
        states.push_back({{"owner", owner_name(st.owner)}, {"actions", std::move(acts)}});
    }
    return {{"gamma", game.gamma()}, {"reward_bound", game.reward_bound()}, {"states", std::move(states)}};
}

namespace detail {

inline const json& field(const json& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) throw std::invalid_argument("missing \"" + std::string(key) + "\" in " + where);
    return j.at(key);
}

inline double number(const json& j, const std::string& where) {
    if (!j.is_number()) throw std::invalid_argument("expected a number at " + where);
    return j.get<double>();
}

inline int integer(const json& j, const std::string& where) {
    if (!j.is_number_integer()) throw std::invalid_argument("expected an integer at " + where);
    return j.get<int>();
}

}  // namespace detail

/// Parses and validates a game; any malformation raises std::invalid_argument.
inline StochasticGame game_from_json(const json& j) {
    using detail::field;
    const double gamma = detail::number(field(j, "gamma", "game"), "gamma");
    const json& js = field(j, "states", "game");
    if (!js.is_array() || js.empty()) throw std::invalid_argument("\"states\" must be a non-empty array");
    std::vector<State> states;
    for (std::size_t s = 0; s < js.size(); ++s) {
        const std::string where = "state " + std::to_string(s);
        State st;
        const json& owner = field(js[s], "owner", where);
        if (owner == "min")
            st.owner = Owner::Min;
        else if (owner == "max")
            st.owner = Owner::Max;
        else
            throw std::invalid_argument("owner must be \"min\" or \"max\" at " + where);
        const json& ja = field(js[s], "actions", where);
        if (!ja.is_array()) throw std::invalid_argument("\"actions\" must be an array at " + where);
        for (std::size_t a = 0; a < ja.size(); ++a) {
            const std::string wa = where + " action " + std::to_string(a);
            Action act;
            act.reward = detail::number(field(ja[a], "reward", wa), wa + " reward");
            const bool uniform = ja[a].contains("uniform") && ja[a]["uniform"] == true;
            if (uniform) {
                if (ja[a].contains("next")) throw std::invalid_argument("both \"uniform\" and \"next\" at " + wa);
                act.next = Transition::uniform_all();
            } else {
                const json& next = field(ja[a], "next", wa);
                if (!next.is_array()) throw std::invalid_argument("\"next\" must be an array at " + wa);
                for (const auto& e : next)
                    act.next.entries.emplace_back(detail::integer(field(e, "s", wa), wa + " next state"),
                                                  detail::number(field(e, "p", wa), wa + " probability"));
            }
            st.actions.push_back(std::move(act));
        }
        states.push_back(std::move(st));
    }
    std::optional<double> bound;
    if (j.contains("reward_bound")) bound = detail::number(j["reward_bound"], "reward_bound");
    StochasticGame game(gamma, std::move(states), bound);
    require_valid(game);
    return game;
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("malformed JSON in " + path + ": " + e.what());
    }
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

inline StochasticGame load_game(const std::string& path) { return game_from_json(read_json_file(path)); }

inline void save_game(const StochasticGame& game, const std::string& path) {
    write_text_file(path, game_to_json(game).dump(1) + "\n");
}

// ---------------------------------------------------------------------------
// Value-strategy sequences.
// ---------------------------------------------------------------------------

inline json vector_to_json(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

inline Eigen::VectorXd vector_from_json(const json& j, const std::string& where) {
    if (!j.is_array()) throw std::invalid_argument("expected an array at " + where);
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t k = 0; k < j.size(); ++k) v[static_cast<Eigen::Index>(k)] = detail::number(j[k], where);
    return v;
}

inline json sequence_to_json(const VSSequence& seq) {
    json entries = json::array();
    for (const auto& e : seq.entries)
        entries.push_back({{"v", vector_to_json(e.v)}, {"q", vector_to_json(e.q)}, {"sigma", e.sigma},
                           {"xi", vector_to_json(e.xi)}});
    const auto& c = seq.constants;
    return {{"direction", direction_name(seq.direction)},
            {"constants",
             {{"beta", c.beta}, {"u", c.u}, {"delta", c.delta}, {"R", c.R}, {"m1", c.m1}, {"m2", c.m2}, {"L", c.L},
              {"alpha1", c.alpha1}}},
            {"samples", seq.samples},
            {"entries", std::move(entries)}};
}

inline VSSequence sequence_from_json(const json& j) {
    using detail::field;
    VSSequence seq;
    const json& dir = field(j, "direction", "sequence");
    if (dir == "decreasing")
        seq.direction = Direction::Decreasing;
    else if (dir == "increasing")
        seq.direction = Direction::Increasing;
    else
        throw std::invalid_argument("direction must be \"decreasing\" or \"increasing\"");
    if (j.contains("constants")) {
        const json& c = j["constants"];
        auto& d = seq.constants;
        d.beta = c.value("beta", 0.0);
        d.u = c.value("u", 0.0);
        d.delta = c.value("delta", 0.0);
        d.R = c.value("R", 0L);
        d.m1 = c.value("m1", 0L);
        d.m2 = c.value("m2", 0L);
        d.L = c.value("L", 0.0);
        d.alpha1 = c.value("alpha1", 0.0);
    }
    seq.samples = j.value("samples", 0L);
    const json& entries = field(j, "entries", "sequence");
    if (!entries.is_array() || entries.empty()) throw std::invalid_argument("\"entries\" must be a non-empty array");
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const std::string where = "entry " + std::to_string(i);
        VSEntry e;
        e.v = vector_from_json(field(entries[i], "v", where), where + " v");
        e.q = vector_from_json(field(entries[i], "q", where), where + " q");
        e.xi = vector_from_json(field(entries[i], "xi", where), where + " xi");
        const json& sigma = field(entries[i], "sigma", where);
        if (!sigma.is_array()) throw std::invalid_argument("expected an array at " + where + " sigma");
        for (const auto& a : sigma) e.sigma.push_back(detail::integer(a, where + " sigma"));
        seq.entries.push_back(std::move(e));
    }
    return seq;
}

// ---------------------------------------------------------------------------
// Reports and CSV traces.
// ---------------------------------------------------------------------------

inline json report_to_json(const CheckReport& rep) {
    json v = json::array();
    for (const auto& x : rep.violations)
        v.push_back({{"property", x.property}, {"entry", x.entry}, {"location", x.location}, {"lhs", x.lhs},
                     {"rhs", x.rhs}, {"slack", x.slack}});
    return {{"passed", rep.passed}, {"violations", std::move(v)}, {"notes", rep.notes}};
}

inline std::string report_summary(const CheckReport& rep, std::size_t max_lines = 20) {
    std::ostringstream os;
    os << (rep.passed ? "PASS" : "FAIL") << ": " << rep.violations.size() << " violation(s)";
    for (const auto& n : rep.notes) os << "\n  " << n;
    for (std::size_t k = 0; k < rep.violations.size() && k < max_lines; ++k) {
        const auto& x = rep.violations[k];
        os << "\n  property " << x.property << " entry " << x.entry << " at " << x.location << ": lhs "
           << std::setprecision(12) << x.lhs << " rhs " << x.rhs << " slack " << x.slack;
    }
    if (rep.violations.size() > max_lines) os << "\n  ...";
    return os.str();
}

/// Writes doubles with round-trip precision so repeated runs compare byte for byte.
inline std::string csv_number(double x) {
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

/// Header: iter,residual,evaluations,num_changes,changes (changes as state:old>new separated by ';').
inline void write_trace_csv(std::ostream& os, const SolveTrace& trace) {
    os << "iter,residual,evaluations,num_changes,changes\n";
    for (const auto& rec : trace.iterations) {
        os << rec.iter << ',' << csv_number(rec.residual) << ',' << rec.evaluations << ',' << rec.changes.size() << ',';
        for (std::size_t k = 0; k < rec.changes.size(); ++k) {
            const auto& f = rec.changes[k];
            os << (k ? ";" : "") << f.state << ':' << f.old_action << '>' << f.new_action;
        }
        os << '\n';
    }
}

/// Header: strategy,flux_min,flux_max,lambda_min,lambda_max (one row per scanned strategy).
inline void write_ratio_csv(std::ostream& os, const RatioReport& rep) {
    os << "strategy,flux_min,flux_max,lambda_min,lambda_max\n";
    for (const auto& row : rep.rows) {
        os << row.index << ',' << csv_number(row.flux_min) << ',' << csv_number(row.flux_max) << ',' << csv_number(row.lambda_min)
           << ',' << csv_number(row.lambda_max) << '\n';
    }
}

/// Header: round,u,R,m1,m2,alpha1,samples (one row per halving round).
inline void write_rounds_csv(std::ostream& os, const std::vector<RoundInfo>& rounds) {
    os << "round,u,R,m1,m2,alpha1,samples\n";
    for (std::size_t j = 0; j < rounds.size(); ++j) {
        const auto& r = rounds[j];
        os << j << ',' << csv_number(r.u) << ',' << r.constants.R << ',' << r.constants.m1 << ',' << r.constants.m2 << ','
           << csv_number(r.constants.alpha1) << ',' << r.samples << '\n';
    }
}

/// Reads QVI constant overrides from {"c1":..,"c2":..,"c3":..,"c":..,"C":..,"m1":..,"m2":..}.
inline QviConstants constants_from_json(const json& j) {
    QviConstants k;
    if (!j.is_object()) throw std::invalid_argument("constants must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        if (key == "m1")
            k.m1_override = it->get<long>();
        else if (key == "m2")
            k.m2_override = it->get<long>();
        else {
            const double x = detail::number(*it, key);
            if (!(x > 0.0)) throw std::invalid_argument("constant " + key + " must be positive");
            if (key == "c1")
                k.c1 = x;
            else if (key == "c2")
                k.c2 = x;
            else if (key == "c3")
                k.c3 = x;
            else if (key == "c")
                k.c = x;
            else if (key == "C")
                k.C = x;
            else
                throw std::invalid_argument("unknown constant " + key);
        }
    }
    return k;
}

}  // namespace sg
