#pragma once

#include "qfb/activity.hpp"
#include "qfb/trajectories.hpp"

#include <json.hpp>

#include <string_view>
#include <vector>

namespace qfb {

enum class BoundKind { QSL, TURSteady, TURNonsteady, TURConcentration };

inline std::string_view bound_name(BoundKind k) {
    constexpr std::string_view names[] = {"QSL", "TUR_steady", "TUR_nonsteady", "TUR_concentration"};
    return names[static_cast<int>(k)];
}

/// One evaluated inequality. margin > 0 means the inequality holds with room to spare.
struct BoundReport {
    BoundKind kind = BoundKind::QSL;
    double lhs = 0.0;
    double rhs = 0.0;
    double margin = 0.0;
    double std_error = 0.0;  // Monte Carlo error on lhs (0 for deterministic bounds)
    bool satisfied = false;
    bool in_domain = true;
    nlohmann::json inputs = nlohmann::json::object();

    /// Holds within k standard errors.
    bool consistent(double k_sigma) const { return in_domain && margin >= -k_sigma * std_error - 1e-9; }
};

inline nlohmann::json to_json(const BoundReport& r) {
    return {{"kind", bound_name(r.kind)}, {"lhs", r.lhs},           {"rhs", r.rhs},
            {"margin", r.margin},         {"stderr", r.std_error},  {"satisfied", r.satisfied},
            {"in_domain", r.in_domain},   {"inputs", r.inputs}};
}

namespace detail {

inline BoundReport make_report(BoundKind kind, double lhs, double rhs, double margin, double se) {
    BoundReport r;
    r.kind = kind;
    r.lhs = lhs;
    r.rhs = rhs;
    r.margin = margin;
    r.std_error = se;
    r.satisfied = margin >= -1e-9;
    return r;
}

}  // namespace detail

/// Bures distance from rho0 and the speed-limit integral 1/2 int_0^t sqrt(B(s))/s ds at each node.
struct QslCurve {
    std::vector<double> t;
    std::vector<double> lhs;
    std::vector<double> rhs;
    std::vector<double> activity;
};

/// Nodes t_k = u_k^2 with u uniform on [0, sqrt(tau)]. With t = u^2 the integral becomes
/// int_0^u sqrt(B(v^2))/v dv, whose integrand tends to sqrt(B'(0)) = sqrt(Tr[rate rho0]).
inline QslCurve qsl_curve(const OpenSystem& sys, const FeedbackScheme& scheme, const DensityMatrix& rho0, double tau,
                          Index n = 401) {
    if (!(tau > 0.0)) throw InputError("qsl_curve: tau must be positive");
    if (n < 3 || n % 2 == 0) throw InputError("qsl_curve: need an odd node count >= 3");
    const double umax = std::sqrt(tau);
    const double h = umax / static_cast<double>(n - 1);
    QslCurve c;
    for (Index k = 0; k < n; ++k) {
        const double u = h * static_cast<double>(k);
        c.t.push_back(k + 1 == n ? tau : u * u);
    }
    const auto b = activity_curve(sys, scheme, rho0, c.t);
    const SchemeParts parts = scheme_parts(sys, scheme);
    std::vector<double> g(static_cast<std::size_t>(n));
    g[0] = std::sqrt(std::max(0.0, trace_product(parts.rate, rho0.op()).real()));
    for (Index k = 1; k < n; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        g[kk] = std::sqrt(b[kk].total) / (h * static_cast<double>(k));
        c.activity.push_back(b[kk].total);
    }
    c.activity.insert(c.activity.begin(), 0.0);
    c.rhs = cumulative_integral(g, h, Rule::Simpson);

    const SuperOperator gen = generator(sys, scheme);
    CVector v = vectorize(rho0.op());
    double t_prev = 0.0;
    for (const double t : c.t) {
        if (t > t_prev) v = expm(gen.matrix(), t - t_prev) * v;
        t_prev = t;
        c.lhs.push_back(bures_distance(rho0, state_from_vector(v, sys.dim())));
    }
    return c;
}

/// Speed-limit angle Theta(tau) = 1/2 int_0^tau sqrt(B(t))/t dt.
inline double qsl_angle(const OpenSystem& sys, const FeedbackScheme& scheme, const DensityMatrix& rho0, double tau,
                        Index n = 401) {
    return qsl_curve(sys, scheme, rho0, tau, n).rhs.back();
}

inline BoundReport qsl_check(const OpenSystem& sys, const FeedbackScheme& scheme, const DensityMatrix& rho0,
                             double tau, const QuadratureSpec& quad = {}) {
    quad.validate();
    const QslCurve c = qsl_curve(sys, scheme, rho0, tau, quad.n);
    double worst = c.rhs[0] - c.lhs[0];
    for (std::size_t k = 0; k < c.t.size(); ++k) worst = std::min(worst, c.rhs[k] - c.lhs[k]);
    auto r = detail::make_report(BoundKind::QSL, c.lhs.back(), c.rhs.back(), c.rhs.back() - c.lhs.back(), 0.0);
    r.inputs = {{"scheme", scheme_name(scheme)}, {"tau", tau}, {"nodes", quad.n}, {"min_margin_over_curve", worst}};
    return r;
}

enum class Readout { Counting, Diffusive };

inline Readout readout_of(const FeedbackScheme& s) {
    return std::holds_alternative<HomodyneFB>(s) || std::holds_alternative<GaussianFB>(s) ? Readout::Diffusive
                                                                                           : Readout::Counting;
}

/// Var/mean^2 >= 1/B (counting) or 1/(4B) (diffusive), for stationary runs.
inline BoundReport tur_check_steady(const TrajectoryStats& stats, const ActivityBreakdown& b, Readout readout) {
    if (stats.mean == 0.0) throw InputError("tur_check_steady: zero mean current");
    if (!(b.total > 0.0)) throw InputError("tur_check_steady: activity must be positive");
    const double lhs = stats.precision();
    const double rhs = readout == Readout::Counting ? 1.0 / b.total : 1.0 / (4.0 * b.total);
    auto r = detail::make_report(BoundKind::TURSteady, lhs, rhs, lhs - rhs, stats.precision_stderr());
    r.inputs = {{"tau", b.tau},   {"activity", b.total}, {"mean", stats.mean}, {"variance", stats.variance},
                {"n", stats.n}, {"readout", readout == Readout::Counting ? "counting" : "diffusive"}};
    return r;
}

/// Var / (tau dN/dtau)^2 >= 1/B.
inline BoundReport tur_check_nonsteady(const TrajectoryStats& stats, double dndt, double tau,
                                       const ActivityBreakdown& b) {
    if (dndt == 0.0) throw InputError("tur_check_nonsteady: zero derivative of the mean count");
    if (!(b.total > 0.0)) throw InputError("tur_check_nonsteady: activity must be positive");
    const double denom = tau * tau * dndt * dndt;
    const double lhs = stats.variance / denom;
    const double rhs = 1.0 / b.total;
    std::vector<double> inf(stats.values.size());
    for (std::size_t i = 0; i < inf.size(); ++i) {
        const double c = stats.values[i] - stats.mean;
        inf[i] = (c * c - stats.variance) / denom;
    }
    auto r = detail::make_report(BoundKind::TURNonsteady, lhs, rhs, lhs - rhs, influence_stderr(inf));
    r.inputs = {{"tau", tau}, {"dN_dtau", dndt}, {"activity", b.total}, {"variance", stats.variance}, {"n", stats.n}};
    return r;
}

/// ||N||_p / ||N||_1 >= sin(theta)^(-2(p-1)/p), defined for theta in [0, pi/2].
inline BoundReport tur_concentration(const TrajectoryStats& stats, double theta, double p) {
    if (!(p > 1.0)) throw InputError("tur_concentration: p must exceed 1");
    const double n1 = p_norm(stats.values, 1.0);
    if (n1 == 0.0) throw InputError("tur_concentration: ||N||_1 is zero");
    const double lhs = p_norm(stats.values, p) / n1;
    BoundReport r;
    if (!(theta >= 0.0 && theta <= 0.5 * std::numbers::pi)) {
        r = detail::make_report(BoundKind::TURConcentration, lhs, 0.0, 0.0, 0.0);
        r.satisfied = false;
        r.in_domain = false;
    } else {
        const double rhs = std::pow(std::sin(theta), -2.0 * (p - 1.0) / p);
        r = detail::make_report(BoundKind::TURConcentration, lhs, rhs, lhs - rhs,
                                p_norm_ratio_stderr(stats.values, p));
    }
    r.inputs = {{"p", p}, {"theta", theta}, {"n", stats.n}};
    return r;
}

inline BoundReport tur_concentration(const TrajectoryStats& stats, const OpenSystem& sys, const JumpFB& fb,
                                     const DensityMatrix& rho0, double tau, double p, Index n = 401) {
    return tur_concentration(stats, qsl_angle(sys, fb, rho0, tau, n), p);
}

}  // namespace qfb
