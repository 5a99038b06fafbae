// qfb: command-line driver for activity curves, speed limits, TUR sweeps and trajectory runs.

#include "qfb/config.hpp"
#include "qfb/sweeps.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace {

using nlohmann::json;
using namespace qfb;

constexpr const char* kVersion = "1.0.0";

enum Exit { kOk = 0, kConfigError = 2, kNumericError = 3 };

std::string num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.16e", x);
    return buf;
}

std::string num(std::int64_t x) { return std::to_string(x); }

// Single writer; each file starts with a comment line carrying the config digest.
class Csv {
  public:
    Csv(const std::string& path, const std::string& digest, const std::vector<std::string>& header) : f_(path) {
        if (!f_) throw ConfigError("cannot open output file " + path);
        f_ << "# config_digest=" << digest << '\n';
        row(header);
    }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) f_ << (i ? "," : "") << cells[i];
        f_ << '\n';
    }

  private:
    std::ofstream f_;
};

struct Run {
    std::string command;
    RunConfig cfg;
    std::string prefix;
    int threads = 0;
    std::vector<std::string> files;
    json summary = json::object();

    std::string path(const std::string& suffix) {
        files.push_back(prefix + suffix);
        return files.back();
    }

    void write_sidecar() {
        const json side = {{"tool", "qfb"},        {"version", kVersion},       {"command", command},
                           {"config", cfg.doc},    {"digest", cfg.digest()},    {"outputs", files},
                           {"summary", summary}};
        std::ofstream f(prefix + ".json");
        if (!f) throw ConfigError("cannot open output file " + prefix + ".json");
        f << side.dump(2) << '\n';
    }
};

std::vector<double> spaced(double lo, double hi, std::int64_t n, const std::string& spacing) {
    if (n < 1) throw ConfigError("grid: n must be >= 1");
    if (!(hi >= lo)) throw ConfigError("grid: max must be >= min");
    if (n == 1) return {hi};
    std::vector<double> v;
    for (std::int64_t k = 0; k < n; ++k) {
        const double x = static_cast<double>(k) / static_cast<double>(n - 1);
        if (spacing == "log") {
            if (!(lo > 0.0)) throw ConfigError("grid: log spacing needs a positive minimum");
            v.push_back(lo * std::pow(hi / lo, x));
        } else if (spacing == "linear") {
            v.push_back(lo + (hi - lo) * x);
        } else {
            throw ConfigError("grid: spacing must be log or linear");
        }
    }
    return v;
}

std::vector<double> tau_grid(const RunConfig& c) {
    if (c.has("grid", "tau")) return {c.get("grid", "tau", 1.0)};
    return spaced(c.get("grid", "tau_min", 1e-3), c.get("grid", "tau_max", 10.0), c.get<std::int64_t>("grid", "n", 50),
                  c.get<std::string>("grid", "spacing", "log"));
}

std::optional<std::vector<double>> nu_grid(const RunConfig& c) {
    if (const auto* v = c.find("grid", "nu_values")) return v->get<std::vector<double>>();
    if (!c.has("grid", "nu_n")) return std::nullopt;
    return spaced(c.get("grid", "nu_min", 0.0), c.get("grid", "nu_max", 8.0), c.get<std::int64_t>("grid", "nu_n", 101),
                  "linear");
}

QuadratureSpec quad_spec(const RunConfig& c) {
    QuadratureSpec q;
    q.n = c.get<std::int64_t>("grid", "quad_n", q.n);
    try {
        q.validate();
    } catch (const InputError& e) {
        throw ConfigError(e.what());
    }
    return q;
}

TrajectoryConfig traj_config(const Run& r) {
    TrajectoryConfig t;
    t.dt = r.cfg.get("trajectories", "dt", t.dt);
    t.n_traj = r.cfg.get<std::int64_t>("trajectories", "n_traj", 20000);
    t.seed = r.cfg.get<std::uint64_t>("trajectories", "seed", 1);
    t.threads = r.threads;
    if (const auto* p = r.cfg.find("trajectories", "p")) {
        t.p_values = {1.0};
        for (const double x : p->get<std::vector<double>>()) t.p_values.push_back(x);
    }
    t.record_jumps = r.cfg.get("trajectories", "record_jumps", false);
    if (t.n_traj < 2) throw ConfigError("trajectories.n_traj must be >= 2 (variance undefined)");
    if (!(t.dt > 0.0)) throw ConfigError("trajectories.dt must be positive");
    return t;
}

void cmd_activity(Run& r) {
    const ConfiguredModel m = configured_model(r.cfg);
    const std::string method = r.cfg.get<std::string>("grid", "method", "exact");
    const std::vector<double> taus = tau_grid(r.cfg);
    const auto nus = nu_grid(r.cfg);
    const QuadratureSpec quad = quad_spec(r.cfg);

    std::vector<std::string> header;
    if (nus) header.push_back("nu");
    for (const char* h : {"tau", "B_total", "A_term", "cross_term", "mean_sq_term", "method", "alpha"})
        header.emplace_back(h);
    Csv csv(r.path(".csv"), r.cfg.digest(), header);

    const std::vector<std::optional<double>> runs =
        nus ? std::vector<std::optional<double>>(nus->begin(), nus->end()) : std::vector<std::optional<double>>{std::nullopt};
    for (const auto& nu : runs) {
        const FeedbackScheme scheme = configured_scheme(r.cfg, m, nu);
        const OpenSystem sys = scheme_system(m, scheme);
        std::vector<ActivityBreakdown> rows;
        if (method == "exact") {
            rows = activity_curve(sys, scheme, configured_state(r.cfg, m, sys, scheme), taus);
        } else {
            for (const double tau : taus) {
                if (method == "stationary") {
                    rows.push_back(qda_stationary(sys, scheme, tau));
                } else if (method == "nh" || method == "nu") {
                    const DensityMatrix rho0 = configured_state(r.cfg, m, sys, scheme);
                    rows.push_back(method == "nh" ? qda_nh(sys, scheme, rho0, tau, quad)
                                                  : qda_nu(sys, scheme, rho0, tau, quad));
                } else if (method == "fd") {
                    ActivityBreakdown b;
                    b.tau = tau;
                    b.method = Method::FD;
                    b.total = qda_fd_oracle(sys, scheme, configured_state(r.cfg, m, sys, scheme), tau);
                    b.a_term = b.cross_term = b.mean_sq_term = std::nan("");
                    rows.push_back(b);
                } else {
                    throw ConfigError("grid.method must be exact, nh, nu, fd or stationary");
                }
            }
        }
        std::vector<double> alpha(taus.size(), std::nan(""));
        std::vector<double> totals;
        for (const auto& b : rows) totals.push_back(b.total);
        const bool positive = std::all_of(totals.begin(), totals.end(), [](double b) { return b > 0.0; });
        if (taus.size() >= 3 && positive && std::adjacent_find(taus.begin(), taus.end()) == taus.end())
            alpha = scaling_exponent(taus, totals);
        for (std::size_t k = 0; k < rows.size(); ++k) {
            const auto& b = rows[k];
            std::vector<std::string> cells;
            if (nu) cells.push_back(num(*nu));
            for (const double x : {b.tau, b.total, b.a_term, b.cross_term, b.mean_sq_term}) cells.push_back(num(x));
            cells.emplace_back(method_name(b.method));
            cells.push_back(num(alpha[k]));
            csv.row(cells);
        }
    }
    r.summary = {{"rows", taus.size() * runs.size()}, {"method", method}};
}

void cmd_qsl(Run& r) {
    const ConfiguredModel m = configured_model(r.cfg);
    const FeedbackScheme scheme = configured_scheme(r.cfg, m);
    const OpenSystem sys = scheme_system(m, scheme);
    const DensityMatrix rho0 = configured_state(r.cfg, m, sys, scheme);
    const double tau = r.cfg.get("grid", "tau_max", r.cfg.get("grid", "tau", 3.0));
    const QuadratureSpec quad = quad_spec(r.cfg);
    const QslCurve fb = qsl_curve(sys, scheme, rho0, tau, quad.n);
    const QslCurve nofb = qsl_curve(sys, NoFeedback{}, rho0, tau, quad.n);
    Csv csv(r.path(".csv"), r.cfg.digest(), {"t", "lhs_bures", "rhs_fb", "rhs_nofb"});
    std::int64_t crossings = 0;
    double worst = 0.0;
    for (std::size_t k = 0; k < fb.t.size(); ++k) {
        csv.row({num(fb.t[k]), num(fb.lhs[k]), num(fb.rhs[k]), num(nofb.rhs[k])});
        worst = std::min(worst, fb.rhs[k] - fb.lhs[k]);
        if (nofb.rhs[k] < fb.lhs[k]) ++crossings;
    }
    r.summary = {{"scheme", scheme_name(scheme)},
                 {"report", to_json(qsl_check(sys, scheme, rho0, tau, quad))},
                 {"min_margin", worst},
                 {"nofb_rhs_below_lhs_nodes", crossings}};
}

void cmd_tur(Run& r) {
    const std::string kind = r.cfg.get<std::string>("scheme", "kind", "jump");
    if (kind != "jump" && kind != "homodyne") throw ConfigError("tur: scheme must be jump or homodyne");
    if (r.cfg.get<std::string>("model", "kind", "two_level") != "two_level")
        throw ConfigError("tur: the sweep samples two-level atom parameters");
    const TurScheme s = kind == "jump" ? TurScheme::Jump : TurScheme::Homodyne;
    TurRanges ranges;
    ranges.lo = r.cfg.get("sweep", "param_min", ranges.lo);
    ranges.hi = r.cfg.get("sweep", "param_max", ranges.hi);
    ranges.nu = r.cfg.get("sweep", "nu", ranges.nu);
    ranges.tau_lo = r.cfg.get("sweep", "tau_min", ranges.tau_lo);
    ranges.tau_hi = r.cfg.get("sweep", "tau_max", ranges.tau_hi);
    const TrajectoryConfig base = traj_config(r);
    const auto draws = tur_draws(ranges, r.cfg.get<std::int64_t>("sweep", "draws", 200), base.seed);
    Csv csv(r.path(".csv"), r.cfg.digest(),
            {"scheme", "delta", "omega", "kappa", "nu", "phi", "tau", "B_fb", "B_nofb", "precision_lhs", "bound_rhs",
             "satisfied", "stderr", "within_3sigma", "bound_rhs_nofb", "satisfied_nofb"});
    std::int64_t fb_viol = 0, nofb_viol = 0;
    for (std::size_t i = 0; i < draws.size(); ++i) {
        TrajectoryConfig c = base;
        c.seed = point_seed(base.seed, static_cast<std::int64_t>(i));
        const TurPoint p = tur_point(s, draws[i], c);
        fb_viol += p.fb.consistent(3.0) ? 0 : 1;
        nofb_viol += p.nofb.satisfied ? 0 : 1;
        const auto& d = p.draw;
        csv.row({std::string(tur_scheme_name(s)), num(d.atom.delta), num(d.atom.omega), num(d.atom.kappa), num(d.nu),
                 num(d.phi), num(d.tau), num(p.b_fb.total), num(p.b_nofb.total), num(p.fb.lhs), num(p.fb.rhs),
                 p.fb.satisfied ? "1" : "0", num(p.fb.std_error), p.fb.consistent(3.0) ? "1" : "0", num(p.nofb.rhs),
                 p.nofb.satisfied ? "1" : "0"});
    }
    r.summary = {{"points", draws.size()}, {"fb_violations_3sigma", fb_viol}, {"nofb_violations", nofb_viol}};
}

void cmd_qec(Run& r) {
    QecRanges ranges;
    ranges.lo = r.cfg.get("sweep", "param_min", ranges.lo);
    ranges.hi = r.cfg.get("sweep", "param_max", ranges.hi);
    ranges.tau_lo = r.cfg.get("sweep", "tau_min", ranges.tau_lo);
    ranges.tau_hi = r.cfg.get("sweep", "tau_max", ranges.tau_hi);
    const TrajectoryConfig base = traj_config(r);
    const auto draws = qec_draws(ranges, r.cfg.get<std::int64_t>("sweep", "draws", 100), base.seed);
    Csv csv(r.path(".csv"), r.cfg.digest(),
            {"kappa1", "kappa2", "tau", "dN_dtau", "B_fb", "B_nofb", "precision_lhs", "bound_rhs", "satisfied", "stderr",
             "within_3sigma", "bound_rhs_nofb", "satisfied_nofb"});
    std::int64_t fb_viol = 0, nofb_viol = 0;
    for (std::size_t i = 0; i < draws.size(); ++i) {
        TrajectoryConfig c = base;
        c.seed = point_seed(base.seed, static_cast<std::int64_t>(i));
        const QecPoint p = qec_point(draws[i], c);
        fb_viol += p.fb.consistent(3.0) ? 0 : 1;
        nofb_viol += p.nofb.satisfied ? 0 : 1;
        csv.row({num(p.draw.rates.kappa1), num(p.draw.rates.kappa2), num(p.draw.tau), num(p.dndt), num(p.b_fb.total),
                 num(p.b_nofb.total), num(p.fb.lhs), num(p.fb.rhs), p.fb.satisfied ? "1" : "0", num(p.fb.std_error),
                 p.fb.consistent(3.0) ? "1" : "0", num(p.nofb.rhs), p.nofb.satisfied ? "1" : "0"});
    }
    r.summary = {{"points", draws.size()}, {"fb_violations_3sigma", fb_viol}, {"nofb_violations", nofb_viol}};
}

void cmd_traj(Run& r) {
    const ConfiguredModel m = configured_model(r.cfg);
    const FeedbackScheme scheme = configured_scheme(r.cfg, m);
    const OpenSystem sys = scheme_system(m, scheme);
    const DensityMatrix rho0 = configured_state(r.cfg, m, sys, scheme);
    TrajectoryConfig tc = traj_config(r);
    tc.t_end = r.cfg.get("grid", "tau", 1.0);
    const auto samples = r.cfg.get<std::int64_t>("trajectories", "samples", 10);
    if (samples < 1) throw ConfigError("trajectories.samples must be >= 1");
    for (std::int64_t k = 1; k < samples; ++k)
        tc.sample_times.push_back(tc.t_end * static_cast<double>(k) / static_cast<double>(samples));

    TrajectoryStats st;
    if (const auto* j = std::get_if<JumpFB>(&scheme)) st = run_jump_ensemble(sys, *j, rho0, tc);
    else if (const auto* h = std::get_if<HomodyneFB>(&scheme)) st = run_homodyne_ensemble(sys, *h, rho0, tc);
    else if (const auto* g = std::get_if<GaussianFB>(&scheme)) st = run_gaussian_ensemble(sys, *g, rho0, tc);
    else st = run_jump_ensemble(sys, rho0, tc);

    const SuperOperator gen = generator(sys, scheme);
    Csv csv(r.path(".csv"), r.cfg.digest(), {"t", "mean", "stderr", "trace_distance_to_master"});
    const CVector v0 = vectorize(rho0.op());
    for (std::size_t k = 0; k < st.sample_times.size(); ++k) {
        const CVector v = expm(gen.matrix(), st.sample_times[k]) * v0;
        const double td = trace_distance(st.mean_states[k], devectorize(v, sys.dim()));
        csv.row({num(st.sample_times[k]), num(st.sample_means[k]), num(st.sample_stderr[k]), num(td)});
    }
    if (tc.record_jumps) {
        Csv jumps(r.path("_jumps.csv"), r.cfg.digest(), {"trajectory", "t", "channel", "n_running"});
        for (const auto& j : st.records)
            jumps.row({num(j.trajectory), num(j.t), std::to_string(j.channel), num(j.n_running)});
    }
    json norms = json::object();
    for (const auto& [p, v] : st.p_norms) norms[num(p)] = v;
    r.summary = {{"scheme", scheme_name(scheme)},
                 {"n", st.n},
                 {"mean", st.mean},
                 {"variance", st.variance},
                 {"precision", st.precision()},
                 {"precision_stderr", st.precision_stderr()},
                 {"p_norms", norms},
                 {"per_channel_counts", st.per_channel_counts}};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quantum feedback activity, speed-limit and uncertainty-relation tool"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::string out;
    std::string scheme;
    app.add_option("--config", config_path, "Config file (INI sections, JSON values)")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "Override trajectories.seed");
    app.add_option("--out", out, "Output prefix (default: output.prefix or the subcommand name)");
    app.add_option("--threads", threads, "Worker threads (default: QFB_THREADS or hardware concurrency)")
        ->check(CLI::PositiveNumber);
    app.add_option("--scheme", scheme, "Override scheme.kind")->check(CLI::IsMember({"none", "jump", "homodyne", "gaussian"}));

    const std::vector<std::pair<const char*, void (*)(Run&)>> commands = {
        {"activity", cmd_activity}, {"qsl", cmd_qsl}, {"tur", cmd_tur}, {"qec", cmd_qec}, {"traj", cmd_traj}};
    const std::map<std::string, std::string> help = {
        {"activity", "Quantum dynamical activity versus tau (optionally swept over nu)"},
        {"qsl", "Bures distance against the speed-limit integral with and without feedback"},
        {"tur", "Steady-state TUR sweep over random two-level atom parameters"},
        {"qec", "Non-steady TUR sweep for the two-qubit error-correcting code"},
        {"traj", "Trajectory ensemble for one configuration"}};
    for (const auto& [name, fn] : commands) app.add_subcommand(name, help.at(name));

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfigError;
    }

    Run run;
    try {
        json doc = config_path.empty() ? json::object() : load_config_file(config_path);
        run.cfg = make_run_config(std::move(doc));
        if (seed) run.cfg.set("trajectories", "seed", *seed);
        if (!scheme.empty()) run.cfg.set("scheme", "kind", scheme);
        for (const auto& [name, fn] : commands) {
            if (!app.got_subcommand(name)) continue;
            run.command = name;
            run.prefix = !out.empty() ? out : run.cfg.get<std::string>("output", "prefix", name);
            run.threads = threads ? *threads : run.cfg.get("trajectories", "threads", 0);
            fn(run);
        }
        run.write_sidecar();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const InputError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const DimensionError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return kNumericError;
    }
    std::cout << "wrote";
    for (const auto& f : run.files) std::cout << ' ' << f;
    std::cout << ' ' << run.prefix << ".json\n";
    return kOk;
}
