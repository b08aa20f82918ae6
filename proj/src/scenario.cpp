#include "delayfb/scenario.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace delayfb::cli {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

double parse_num(const std::string& tok, const std::string& where) {
    try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("scenario: bad number '" + tok + "' in " + where);
    }
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

simcore::Signal parse_signal(const std::string& value, const std::string& key) {
    const std::vector<std::string> toks = split_ws(value);
    if (toks.empty()) throw ConfigError("scenario: empty signal for " + key);
    const std::string& kind = toks[0];
    auto need = [&](std::size_t cnt) {
        if (toks.size() != cnt + 1)
            throw ConfigError("scenario: signal '" + kind + "' for " + key + " needs " +
                              std::to_string(cnt) + " parameters");
    };
    if (kind == "zero") {
        need(0);
        return simcore::Signal::zero();
    }
    if (kind == "constant") {
        need(1);
        return simcore::Signal::constant(parse_num(toks[1], key));
    }
    if (kind == "sinusoid") {
        need(3);
        return simcore::Signal::sinusoid(parse_num(toks[1], key), parse_num(toks[2], key),
                                         parse_num(toks[3], key));
    }
    if (kind == "state-sign") {
        need(1);
        return simcore::Signal::state_sign(static_cast<std::size_t>(parse_num(toks[1], key)));
    }
    if (kind == "pwl" || kind == "table") {
        if (toks.size() < 3 || toks.size() % 2 == 0)
            throw ConfigError("scenario: '" + kind + "' for " + key +
                              " needs time/value pairs");
        std::vector<std::pair<double, double>> pts;
        for (std::size_t i = 1; i + 1 < toks.size(); i += 2)
            pts.emplace_back(parse_num(toks[i], key), parse_num(toks[i + 1], key));
        return kind == "pwl" ? simcore::Signal::piecewise_linear(std::move(pts))
                             : simcore::Signal::table(std::move(pts));
    }
    throw ConfigError("scenario: unknown signal kind '" + kind + "' for " + key);
}

std::string signal_text(const simcore::Signal& s) {
    using Kind = simcore::Signal::Kind;
    std::ostringstream out;
    switch (s.kind()) {
        case Kind::Zero: out << "zero"; break;
        case Kind::Constant: out << "constant " << fmt(s.value()); break;
        case Kind::Sinusoid:
            out << "sinusoid " << fmt(s.amplitude()) << ' ' << fmt(s.omega()) << ' '
                << fmt(s.phase());
            break;
        case Kind::StateSign: out << "state-sign " << s.index(); break;
        case Kind::PiecewiseLinear:
        case Kind::Table:
            out << (s.kind() == Kind::PiecewiseLinear ? "pwl" : "table");
            for (const auto& [t, v] : s.points()) out << ' ' << fmt(t) << ' ' << fmt(v);
            break;
    }
    return out.str();
}

// Grows a channel list so channel index (1-based) exists, zero-filling.
void ensure_channel(std::vector<simcore::Signal>& chans, std::size_t idx) {
    if (chans.size() < idx) chans.resize(idx);
}

std::size_t channel_index(const std::string& key, char prefix) {
    const std::string digits = key.substr(1);
    if (key.empty() || key[0] != prefix || digits.empty() || digits.size() > 2)
        throw ConfigError("scenario: bad channel key '" + key + "'");
    for (char c : digits)
        if (!std::isdigit(static_cast<unsigned char>(c)))
            throw ConfigError("scenario: bad channel key '" + key + "'");
    const std::size_t idx = std::stoul(digits);
    if (idx < 1) throw ConfigError("scenario: channel keys are 1-based");
    return idx;
}

} // namespace

Scenario parse_scenario(const std::string& text) {
    Scenario s;
    s.plant_kind.clear();  // must be set explicitly
    std::string section;
    std::istringstream in(text);
    std::string raw;
    std::size_t lineno = 0;
    bool saw_plant = false;

    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = raw;
        const std::size_t hash = line.find_first_of("#;");
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("scenario: malformed section at line " + std::to_string(lineno));
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("scenario: expected key = value at line " + std::to_string(lineno));
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const std::string where = section + "." + key;

        if (section == "plant") {
            if (key == "kind") { s.plant_kind = value; saw_plant = true; }
            else if (key == "n") s.n = static_cast<std::size_t>(parse_num(value, where));
            else throw ConfigError("scenario: unknown key " + where);
        } else if (section == "gain") {
            if (key == "k") {
                if (value == "default") { s.use_default_gain = true; s.k.clear(); }
                else {
                    s.use_default_gain = false;
                    s.k.clear();
                    for (const std::string& tok : split_ws(value))
                        s.k.push_back(parse_num(tok, where));
                }
            } else if (key == "mu") s.mu = parse_num(value, where);
            else if (key == "alpha") s.alpha = parse_num(value, where);
            else if (key == "beta") s.beta = parse_num(value, where);
            else if (key == "lyapunov") s.lyapunov = value;
            else throw ConfigError("scenario: unknown key " + where);
        } else if (section == "step") {
            if (key == "h") {
                if (value == "certify") s.certify_step = true;
                else { s.certify_step = false; s.h = parse_num(value, where); }
            } else throw ConfigError("scenario: unknown key " + where);
        } else if (section == "cascade") {
            if (key == "z0") {
                s.z0.clear();
                for (const std::string& tok : split_ws(value))
                    s.z0.push_back(parse_num(tok, where));
            } else if (key == "gamma") s.gamma = parse_num(value, where);
            else if (key == "lhyp") s.Lhyp = parse_num(value, where);
            else if (key == "cz") s.cz = parse_num(value, where);
            else if (key == "r") s.r = parse_num(value, where);
            else throw ConfigError("scenario: unknown key " + where);
        } else if (section == "signals") {
            if (key == "e") s.e = parse_signal(value, where);
            else if (key.size() >= 2 && key[0] == 'v') {
                const std::size_t idx = channel_index(key, 'v');
                ensure_channel(s.v, idx);
                s.v[idx - 1] = parse_signal(value, where);
            } else if (key.size() >= 2 && key[0] == 'd') {
                const std::size_t idx = channel_index(key, 'd');
                ensure_channel(s.d, idx);
                s.d[idx - 1] = parse_signal(value, where);
            } else throw ConfigError("scenario: unknown key " + where);
        } else if (section == "history") {
            if (key.size() >= 2 && key[0] == 'x') {
                const std::size_t idx = channel_index(key, 'x');
                ensure_channel(s.history, idx);
                s.history[idx - 1] = parse_signal(value, where);
            } else throw ConfigError("scenario: unknown key " + where);
        } else if (section == "run") {
            if (key == "tend") s.t_end = parse_num(value, where);
            else if (key == "dt_div") s.dt_div = static_cast<int>(parse_num(value, where));
            else throw ConfigError("scenario: unknown key " + where);
        } else {
            throw ConfigError("scenario: unknown section [" + section + "]");
        }
    }
    if (!saw_plant) throw ConfigError("scenario: missing [plant] kind");

    if (s.plant_kind == "example31" || s.plant_kind == "example32") s.n = 3;
    if (!s.use_default_gain && s.k.empty())
        throw ConfigError("scenario: [gain] k is required (vector or 'default')");
    if (!s.use_default_gain && s.k.size() != s.n)
        throw ConfigError("scenario: gain vector length != n");
    if (!s.v.empty() && s.v.size() > s.n)
        throw ConfigError("scenario: more v channels than states");
    if (!s.v.empty()) s.v.resize(s.n);
    if (!s.history.empty() && s.history.size() != s.n)
        throw ConfigError("scenario: history must cover all state components");
    if (s.is_cascade() && s.z0.empty())
        throw ConfigError("scenario: cascade needs z0");
    return s;
}

std::string serialize_scenario(const Scenario& s) {
    std::ostringstream out;
    out << "[plant]\n";
    out << "kind = " << s.plant_kind << "\n";
    out << "n = " << s.n << "\n";

    out << "\n[gain]\n";
    if (s.use_default_gain) out << "k = default\n";
    else {
        out << "k =";
        for (double v : s.k) out << ' ' << fmt(v);
        out << "\n";
    }
    out << "mu = " << fmt(s.mu) << "\n";
    out << "alpha = " << fmt(s.alpha) << "\n";
    out << "beta = " << fmt(s.beta) << "\n";
    out << "lyapunov = " << s.lyapunov << "\n";

    out << "\n[step]\n";
    if (s.certify_step) out << "h = certify\n";
    else out << "h = " << fmt(s.h) << "\n";

    if (s.is_cascade()) {
        out << "\n[cascade]\n";
        out << "z0 =";
        for (double v : s.z0) out << ' ' << fmt(v);
        out << "\n";
        out << "gamma = " << fmt(s.gamma) << "\n";
        out << "lhyp = " << fmt(s.Lhyp) << "\n";
        out << "cz = " << fmt(s.cz) << "\n";
        out << "r = " << fmt(s.r) << "\n";
    }

    out << "\n[signals]\n";
    for (std::size_t i = 0; i < s.v.size(); ++i)
        out << 'v' << (i + 1) << " = " << signal_text(s.v[i]) << "\n";
    out << "e = " << signal_text(s.e) << "\n";
    for (std::size_t i = 0; i < s.d.size(); ++i)
        out << 'd' << (i + 1) << " = " << signal_text(s.d[i]) << "\n";

    out << "\n[history]\n";
    for (std::size_t i = 0; i < s.history.size(); ++i)
        out << 'x' << (i + 1) << " = " << signal_text(s.history[i]) << "\n";

    out << "\n[run]\n";
    out << "tend = " << fmt(s.t_end) << "\n";
    out << "dt_div = " << s.dt_div << "\n";
    return out.str();
}

namespace {

std::vector<simcore::Signal> ramp_history(std::size_t n) {
    std::vector<simcore::Signal> h;
    h.push_back(simcore::Signal::piecewise_linear({{-0.2, 0.0}, {-0.1, 0.0}, {0.0, 1.0}}));
    for (std::size_t i = 1; i < n; ++i) h.push_back(simcore::Signal::constant(1.0));
    return h;
}

} // namespace

Scenario builtin_scenario(const std::string& name) {
    if (name == "example31") {
        Scenario s;
        s.plant_kind = "example31";
        s.n = 3;
        s.k = {-3.0, -5.0, -3.0};
        s.mu = 0.25;
        s.lyapunov = "example31";
        s.h = 0.1;
        s.history = ramp_history(3);
        s.t_end = 10.0;
        return s;
    }
    if (name == "example32") {
        Scenario s;
        s.plant_kind = "example32";
        s.n = 3;
        s.k = {-3.0, -5.0, -3.0};
        s.mu = 0.25;
        s.lyapunov = "example31";
        s.h = 0.1;
        s.z0 = {2.0};
        s.gamma = 0.5;
        s.Lhyp = 2.0;
        s.cz = 1.0;
        s.r = 1.0;
        s.d.push_back(simcore::Signal::state_sign(2));
        s.d.push_back(simcore::Signal::constant(1.0));
        s.history = ramp_history(3);
        s.t_end = 15.0;
        return s;
    }
    if (name.rfind("chain", 0) == 0 && name.size() == 6 && std::isdigit(name[5])) {
        const std::size_t n = static_cast<std::size_t>(name[5] - '0');
        if (n >= 2 && n <= 8) {
            Scenario s;
            s.plant_kind = "chain";
            s.n = n;
            s.use_default_gain = true;
            s.lyapunov = "auto";
            s.h = 0.1;
            s.history = ramp_history(n);
            s.t_end = 10.0;
            return s;
        }
    }
    throw ConfigError("unknown built-in scenario '" + name + "'");
}

bool is_builtin_scenario(const std::string& name) {
    try {
        builtin_scenario(name);
        return true;
    } catch (const ConfigError&) {
        return false;
    }
}

Scenario load_scenario(const std::string& name_or_path) {
    if (is_builtin_scenario(name_or_path)) return builtin_scenario(name_or_path);
    std::ifstream in(name_or_path);
    if (!in) throw ConfigError("cannot read scenario file '" + name_or_path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

gains::GainCertificate certificate_for(const Scenario& s) {
    const linalg::Vec k =
        s.use_default_gain ? gains::default_gain(s.n, s.alpha, s.beta) : s.k;
    if (s.lyapunov == "example31") {
        if (s.n != 3)
            throw ConfigError("scenario: the example31 Lyapunov preset is 3-dimensional");
        gains::GainCertificate gc =
            gains::verify_gain(3, k, s.alpha, s.beta, gains::example31_lyapunov(), s.mu);
        const linalg::Vec preset_k{-3.0, -5.0, -3.0};
        if (k == preset_k && s.mu == 0.25 && s.alpha == 1.0 && s.beta == 1.0) {
            gc.M0 = std::sqrt(190.0);
            gc.M[2] = 2.0 * std::sqrt(5.0);
        }
        return gc;
    }
    if (s.lyapunov == "auto") return gains::auto_certificate(s.n, k, s.alpha, s.beta);
    throw ConfigError("scenario: unknown lyapunov choice '" + s.lyapunov + "'");
}

delayop::EstimatorConstants constants_for(const Scenario& s) {
    return s.n == 3 ? delayop::example31_constants() : delayop::estimator_constants(s.n);
}

namespace {

simcore::InitialHistory history_for(const Scenario& s) {
    if (!s.history.empty()) return simcore::InitialHistory(s.history);
    return simcore::InitialHistory(ramp_history(s.n));
}

linalg::Vec gain_for(const Scenario& s) {
    return s.use_default_gain ? gains::default_gain(s.n, s.alpha, s.beta) : s.k;
}

} // namespace

simcore::ChainScenario chain_setup(const Scenario& s) {
    if (s.is_cascade()) throw ConfigError("scenario: cascade plant has no chain setup");
    simcore::ChainScenario cs{simcore::chain_plant(s.n), gain_for(s), s.h,
                              history_for(s),           s.v,         s.e,
                              s.d,                      s.t_end,     s.dt_div};
    return cs;
}

simcore::CascadeScenario cascade_setup(const Scenario& s) {
    if (!s.is_cascade()) throw ConfigError("scenario: not a cascade plant");
    gains::ScaledDesign design;
    if (s.r == 1.0) {
        design = gains::unchecked_design(gain_for(s), s.n, s.h, 1.0, s.gamma, s.Lhyp, s.cz, s.mu);
    } else {
        design = gains::scaled_design(certificate_for(s), constants_for(s), s.h, s.gamma,
                                      s.Lhyp, s.cz, s.r);
    }
    simcore::CascadeScenario cs{simcore::example32_plant(), std::move(design), s.z0,
                                history_for(s),             s.v,               s.e,
                                s.d,                        s.t_end,           s.dt_div};
    return cs;
}

std::string trajectory_csv(const simcore::Trajectory& traj) {
    std::ostringstream out;
    out << 't';
    for (std::size_t c = 1; c <= traj.n; ++c) out << ",x" << c;
    for (std::size_t c = 1; c <= traj.kz; ++c) out << ",z" << c;
    out << ",u,y\n";
    char buf[40];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << buf;
    };
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        put(traj.times[i]);
        for (std::size_t c = 0; c < traj.n; ++c) { out << ','; put(traj.x[i][c]); }
        for (std::size_t c = 0; c < traj.kz; ++c) { out << ','; put(traj.z[i][c]); }
        out << ','; put(traj.u[i]);
        out << ','; put(traj.y[i]);
        out << '\n';
    }
    return out.str();
}

} // namespace delayfb::cli
