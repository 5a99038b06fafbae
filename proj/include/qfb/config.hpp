#pragma once

#include "qfb/evolve.hpp"
#include "qfb/models.hpp"

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace qfb {

class ConfigError : public Error {
  public:
    using Error::Error;
};

namespace detail {

enum class Kind { Number, Integer, String, Bool, NumberOrList, Matrix, MatrixOrList, NumberList };

// Accepted sections and keys. Anything else is rejected.
inline const std::map<std::string, std::map<std::string, Kind>>& config_schema() {
    static const std::map<std::string, std::map<std::string, Kind>> s = {
        {"model",
         {{"kind", Kind::String},
          {"delta", Kind::Number},
          {"omega", Kind::Number},
          {"kappa", Kind::Number},
          {"kappa1", Kind::Number},
          {"kappa2", Kind::Number},
          {"H", Kind::Matrix},
          {"jumps", Kind::MatrixOrList}}},
        {"scheme",
         {{"kind", Kind::String},
          {"nu", Kind::NumberOrList},
          {"phi", Kind::NumberOrList},
          {"lambda", Kind::Number},
          {"F", Kind::MatrixOrList},
          {"Y", Kind::Matrix}}},
        {"state", {{"initial", Kind::String}, {"rho", Kind::Matrix}}},
        {"grid",
         {{"tau", Kind::Number},
          {"tau_min", Kind::Number},
          {"tau_max", Kind::Number},
          {"n", Kind::Integer},
          {"spacing", Kind::String},
          {"method", Kind::String},
          {"quad_n", Kind::Integer},
          {"nu_values", Kind::NumberList},
          {"nu_min", Kind::Number},
          {"nu_max", Kind::Number},
          {"nu_n", Kind::Integer}}},
        {"trajectories",
         {{"dt", Kind::Number},
          {"n_traj", Kind::Integer},
          {"seed", Kind::Integer},
          {"threads", Kind::Integer},
          {"samples", Kind::Integer},
          {"p", Kind::NumberList},
          {"record_jumps", Kind::Bool}}},
        {"sweep",
         {{"draws", Kind::Integer},
          {"param_min", Kind::Number},
          {"param_max", Kind::Number},
          {"nu", Kind::NumberList},
          {"tau_min", Kind::Number},
          {"tau_max", Kind::Number}}},
        {"output", {{"prefix", Kind::String}}},
    };
    return s;
}

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline int bracket_depth(std::string_view s) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (in_string) {
            if (c == '\\') ++i;
            else if (c == '"') in_string = false;
        } else if (c == '"') in_string = true;
        else if (c == '[' || c == '{') ++depth;
        else if (c == ']' || c == '}') --depth;
    }
    return depth;
}

// Drops a '#' comment that starts outside a quoted string.
inline std::string strip_comment(const std::string& s) {
    bool in_string = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (in_string) {
            if (c == '\\') ++i;
            else if (c == '"') in_string = false;
        } else if (c == '"') in_string = true;
        else if (c == '#') return s.substr(0, i);
    }
    return s;
}

inline bool is_bare_word(const std::string& s) {
    if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
    for (const char c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.' || c == '/')) return false;
    return true;
}

inline bool is_number_list(const nlohmann::json& v) {
    if (!v.is_array()) return false;
    for (const auto& x : v)
        if (!x.is_number()) return false;
    return true;
}

inline bool is_entry(const nlohmann::json& v) {
    return v.is_number() || (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number());
}

inline bool is_matrix(const nlohmann::json& v) {
    if (!v.is_array() || v.empty()) return false;
    const std::size_t n = v.size();
    for (const auto& row : v) {
        if (!row.is_array() || row.size() != n) return false;
        for (const auto& e : row)
            if (!is_entry(e)) return false;
    }
    return true;
}

inline bool is_matrix_list(const nlohmann::json& v) {
    if (!v.is_array() || v.empty()) return false;
    for (const auto& m : v)
        if (!is_matrix(m)) return false;
    return true;
}

inline bool kind_matches(Kind k, const nlohmann::json& v) {
    switch (k) {
        case Kind::Number: return v.is_number();
        case Kind::Integer: return v.is_number_integer();
        case Kind::String: return v.is_string();
        case Kind::Bool: return v.is_boolean();
        case Kind::NumberOrList: return v.is_number() || (is_number_list(v) && !v.empty());
        case Kind::Matrix: return is_matrix(v);
        case Kind::MatrixOrList: return is_matrix(v) || is_matrix_list(v);
        case Kind::NumberList: return is_number_list(v) && !v.empty();
    }
    return false;
}

}  // namespace detail

/// Parses "[section]" headers and "key = value" lines; values are JSON, bare words become strings.
/// A value with open brackets continues on the following lines. '#' starts a comment anywhere outside
/// a string; ';' starts a comment line.
inline nlohmann::json parse_config_text(std::string_view text) {
    nlohmann::json doc = nlohmann::json::object();
    std::istringstream in{std::string(text)};
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = detail::trim(detail::strip_comment(line));
        if (t.empty() || t[0] == ';') continue;
        const std::string where = "line " + std::to_string(line_no) + ": ";
        if (t.front() == '[') {
            if (t.back() != ']') throw ConfigError(where + "malformed section header");
            section = detail::trim(std::string_view(t).substr(1, t.size() - 2));
            if (!detail::config_schema().contains(section)) throw ConfigError(where + "unknown section [" + section + "]");
            if (doc.contains(section)) throw ConfigError(where + "duplicate section [" + section + "]");
            doc[section] = nlohmann::json::object();
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
        if (section.empty()) throw ConfigError(where + "key outside any section");
        const std::string key = detail::trim(std::string_view(t).substr(0, eq));
        std::string value = detail::trim(std::string_view(t).substr(eq + 1));
        while (detail::bracket_depth(value) > 0 && std::getline(in, line)) {
            ++line_no;
            value += " " + detail::trim(detail::strip_comment(line));
        }
        const auto& keys = detail::config_schema().at(section);
        const auto it = keys.find(key);
        if (it == keys.end()) throw ConfigError(where + "unknown key '" + key + "' in [" + section + "]");
        if (doc[section].contains(key)) throw ConfigError(where + "duplicate key '" + key + "'");
        nlohmann::json v;
        if (detail::is_bare_word(value) && value != "true" && value != "false") {
            v = value;
        } else {
            try {
                v = nlohmann::json::parse(value);
            } catch (const nlohmann::json::parse_error&) {
                throw ConfigError(where + "cannot parse value for '" + key + "'");
            }
        }
        if (!detail::kind_matches(it->second, v)) throw ConfigError(where + "wrong type for '" + key + "'");
        doc[section][key] = std::move(v);
    }
    return doc;
}

/// Checks an already assembled document (for example after flag overrides) against the schema.
inline void validate_config(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ConfigError("config: top level must be an object");
    for (const auto& [section, body] : doc.items()) {
        const auto s = detail::config_schema().find(section);
        if (s == detail::config_schema().end()) throw ConfigError("config: unknown section [" + section + "]");
        for (const auto& [key, v] : body.items()) {
            const auto k = s->second.find(key);
            if (k == s->second.end()) throw ConfigError("config: unknown key '" + key + "' in [" + section + "]");
            if (!detail::kind_matches(k->second, v)) throw ConfigError("config: wrong type for '" + key + "'");
        }
    }
}

inline nlohmann::json load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config: cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str());
}

/// FNV-1a 64-bit over the canonical (key-sorted, compact) JSON dump, as 16 hex digits.
/// Keys that cannot change results (output.prefix, trajectories.threads) are left out.
inline std::string config_digest(const nlohmann::json& doc) {
    nlohmann::json view = doc;
    view.erase("output");
    if (view.contains("trajectories")) view["trajectories"].erase("threads");
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : view.dump()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline Operator matrix_from_json(const nlohmann::json& v) {
    if (!detail::is_matrix(v)) throw ConfigError("config: expected a square matrix of [re, im] entries");
    const auto n = static_cast<Index>(v.size());
    Operator m(n, n);
    for (Index r = 0; r < n; ++r)
        for (Index c = 0; c < n; ++c) {
            const auto& e = v[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
            m(r, c) = e.is_number() ? cplx(e.get<double>(), 0.0) : cplx(e[0].get<double>(), e[1].get<double>());
        }
    return m;
}

inline std::vector<Operator> matrices_from_json(const nlohmann::json& v) {
    if (detail::is_matrix(v)) return {matrix_from_json(v)};
    std::vector<Operator> out;
    for (const auto& m : v) out.push_back(matrix_from_json(m));
    return out;
}

inline std::vector<double> numbers_from_json(const nlohmann::json& v) {
    if (v.is_number()) return {v.get<double>()};
    return v.get<std::vector<double>>();
}

/// Typed view over a validated config document.
struct RunConfig {
    nlohmann::json doc = nlohmann::json::object();

    const nlohmann::json* find(const std::string& section, const std::string& key) const {
        const auto s = doc.find(section);
        if (s == doc.end()) return nullptr;
        const auto k = s->find(key);
        return k == s->end() ? nullptr : &*k;
    }

    template <class T>
    T get(const std::string& section, const std::string& key, T fallback) const {
        const auto* v = find(section, key);
        return v ? v->get<T>() : fallback;
    }

    bool has(const std::string& section, const std::string& key) const { return find(section, key) != nullptr; }

    void set(const std::string& section, const std::string& key, nlohmann::json value) {
        doc[section][key] = std::move(value);
        validate_config(doc);
    }

    std::string digest() const { return config_digest(doc); }
};

inline RunConfig make_run_config(nlohmann::json doc) {
    validate_config(doc);
    return RunConfig{std::move(doc)};
}

/// The configured open system. Gaussian runs use the Hamiltonian part only.
struct ConfiguredModel {
    OpenSystem system;
    std::optional<QecModel> qec;
};

inline ConfiguredModel configured_model(const RunConfig& cfg) {
    const std::string kind = cfg.get<std::string>("model", "kind", "two_level");
    ConfiguredModel out;
    if (kind == "two_level") {
        TwoLevelAtomParams p;
        p.delta = cfg.get("model", "delta", p.delta);
        p.omega = cfg.get("model", "omega", p.omega);
        p.kappa = cfg.get("model", "kappa", p.kappa);
        out.system = two_level_atom(p);
    } else if (kind == "qec") {
        QecParams p;
        p.kappa1 = cfg.get("model", "kappa1", p.kappa1);
        p.kappa2 = cfg.get("model", "kappa2", p.kappa2);
        out.qec = qec_two_qubit(p);
        out.system = out.qec->system;
    } else if (kind == "custom") {
        const auto* H = cfg.find("model", "H");
        if (!H) throw ConfigError("config: custom model needs model.H");
        const auto* L = cfg.find("model", "jumps");
        out.system = make_system(matrix_from_json(*H), L ? matrices_from_json(*L) : std::vector<Operator>{});
    } else {
        throw ConfigError("config: unknown model.kind '" + kind + "'");
    }
    try {
        out.system.validate();
    } catch (const Error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return out;
}

inline std::vector<double> broadcast(std::vector<double> v, std::size_t n, const char* what) {
    if (v.size() == 1 && n > 1) v.assign(n, v[0]);
    if (v.size() != n) throw ConfigError(std::string("config: ") + what + " must have one entry per channel");
    return v;
}

/// Builds the feedback scheme. `nu_override` replaces the feedback strength (used by nu sweeps).
inline FeedbackScheme configured_scheme(const RunConfig& cfg, const ConfiguredModel& m,
                                        std::optional<double> nu_override = std::nullopt) {
    const std::string kind = cfg.get<std::string>("scheme", "kind", "none");
    const OpenSystem& sys = m.system;
    const Index d = sys.dim();
    const std::size_t nch = sys.channels();
    auto default_F = [&]() -> Operator {
        if (d == 2) return atom_feedback_operator();
        throw ConfigError("config: scheme.F is required for this model");
    };
    FeedbackScheme out = NoFeedback{};
    if (kind == "none") {
        out = NoFeedback{};
    } else if (kind == "jump") {
        std::vector<Operator> F;
        std::vector<double> nu(nch, 1.0);
        if (m.qec && !cfg.has("scheme", "F")) {
            F = m.qec->feedback.F;
            nu = m.qec->feedback.nu;
        } else {
            F = cfg.has("scheme", "F") ? matrices_from_json(*cfg.find("scheme", "F"))
                                       : std::vector<Operator>{default_F()};
            if (F.size() == 1 && nch > 1) F.assign(nch, F[0]);
        }
        if (cfg.has("scheme", "nu")) nu = broadcast(numbers_from_json(*cfg.find("scheme", "nu")), nch, "scheme.nu");
        if (nu_override) nu.assign(nch, *nu_override);
        out = JumpFB{nu, F};
    } else if (kind == "homodyne") {
        const Operator F = cfg.has("scheme", "F") ? matrix_from_json(*cfg.find("scheme", "F")) : default_F();
        const std::vector<double> phi =
            broadcast(cfg.has("scheme", "phi") ? numbers_from_json(*cfg.find("scheme", "phi"))
                                               : std::vector<double>{0.5 * std::numbers::pi},
                      nch, "scheme.phi");
        double nu = cfg.has("scheme", "nu") ? numbers_from_json(*cfg.find("scheme", "nu")).at(0) : 1.0;
        if (nu_override) nu = *nu_override;
        out = HomodyneFB{phi, nu * F};
    } else if (kind == "gaussian") {
        const Operator Y = cfg.has("scheme", "Y") ? matrix_from_json(*cfg.find("scheme", "Y"))
                                                  : (d == 2 ? pauli_z() : throw ConfigError("config: scheme.Y required"));
        const Operator F = cfg.has("scheme", "F") ? matrix_from_json(*cfg.find("scheme", "F")) : default_F();
        double nu = cfg.has("scheme", "nu") ? numbers_from_json(*cfg.find("scheme", "nu")).at(0) : 1.0;
        if (nu_override) nu = *nu_override;
        out = GaussianFB{Y, cfg.get("scheme", "lambda", 0.5), nu * F};
    } else {
        throw ConfigError("config: unknown scheme.kind '" + kind + "'");
    }
    return out;
}

/// System matching the scheme: a Gaussian measurement replaces the jump channels by the measured observable.
inline OpenSystem scheme_system(const ConfiguredModel& m, const FeedbackScheme& s) {
    if (std::holds_alternative<GaussianFB>(s)) return make_system(m.system.H);
    return m.system;
}

/// Initial state: ground, excited, logical0, logical1, basis0, mixed, steady, or an explicit state.rho.
inline DensityMatrix configured_state(const RunConfig& cfg, const ConfiguredModel& m, const OpenSystem& sys,
                                      const FeedbackScheme& scheme) {
    if (const auto* rho = cfg.find("state", "rho")) {
        try {
            return DensityMatrix(matrix_from_json(*rho));
        } catch (const Error& e) {
            throw ConfigError(std::string("config: state.rho: ") + e.what());
        }
    }
    const Index d = sys.dim();
    const std::string init = cfg.get<std::string>("state", "initial", m.qec ? "logical0" : "ground");
    if (init == "steady") return steady_state(generator(sys, scheme));
    if (init == "mixed") return DensityMatrix::maximally_mixed(d);
    if ((init == "ground" || init == "excited") && d == 2)
        return DensityMatrix::pure(init == "ground" ? ground() : excited());
    if ((init == "logical0" || init == "logical1") && m.qec)
        return DensityMatrix::pure(init == "logical0" ? m.qec->logical0 : m.qec->logical1);
    if (init == "basis0") return DensityMatrix::pure(ket(d, 0));
    throw ConfigError("config: state.initial '" + init + "' does not fit the model");
}

}  // namespace qfb
