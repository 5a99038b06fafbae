#pragma once

#include "qfb/bounds.hpp"
#include "qfb/models.hpp"

#include <numbers>
#include <string>
#include <vector>

namespace qfb {

enum class TurScheme { Jump, Homodyne };

inline std::string_view tur_scheme_name(TurScheme s) { return s == TurScheme::Jump ? "jump" : "homodyne"; }

struct TurRanges {
    double lo = 0.1;                           // delta, omega, kappa lower end
    double hi = 3.0;                           // delta, omega, kappa upper end
    std::vector<double> nu{0.2, 0.4, 1.0};     // feedback strengths
    double tau_lo = 0.1;
    double tau_hi = 3.0;
};

struct TurDraw {
    TwoLevelAtomParams atom;
    double nu = 1.0;
    double phi = 0.0;
    double tau = 1.0;
};

struct TurPoint {
    TurScheme scheme = TurScheme::Jump;
    TurDraw draw;
    ActivityBreakdown b_fb;
    ActivityBreakdown b_nofb;
    BoundReport fb;    // precision scored against the feedback activity
    BoundReport nofb;  // same precision scored against the no-feedback activity
};

/// Parameter draws are a fixed function of the seed, independent of the trajectory streams.
inline std::vector<TurDraw> tur_draws(const TurRanges& r, std::int64_t count, std::uint64_t seed) {
    if (count < 1) throw InputError("tur_draws: count must be >= 1");
    if (r.nu.empty()) throw InputError("tur_draws: empty nu set");
    detail::Xoshiro256 rng = detail::trajectory_rng(seed, -1);
    auto uni = [&](double a, double b) { return a + (b - a) * rng.uniform(); };
    std::vector<TurDraw> out;
    for (std::int64_t i = 0; i < count; ++i) {
        TurDraw d;
        d.atom.delta = uni(r.lo, r.hi);
        d.atom.omega = uni(r.lo, r.hi);
        d.atom.kappa = uni(r.lo, r.hi);
        const auto k = std::min(static_cast<std::size_t>(rng.uniform() * static_cast<double>(r.nu.size())),
                                r.nu.size() - 1);
        d.nu = r.nu[k];
        d.phi = uni(0.0, 2.0 * std::numbers::pi);
        d.tau = uni(r.tau_lo, r.tau_hi);
        out.push_back(d);
    }
    return out;
}

inline FeedbackScheme tur_feedback(TurScheme s, const TurDraw& d) {
    const Operator X = atom_feedback_operator();
    if (s == TurScheme::Jump) return JumpFB{{d.nu}, {X}};
    return HomodyneFB{{d.phi}, d.nu * X};
}

/// Steady-state TUR point on the two-level atom. Trajectories start in the feedback steady state.
inline TurPoint tur_point(TurScheme s, const TurDraw& d, const TrajectoryConfig& base) {
    const OpenSystem sys = two_level_atom(d.atom);
    const FeedbackScheme fb = tur_feedback(s, d);
    const DensityMatrix ss = steady_state(generator(sys, fb));
    TrajectoryConfig cfg = base;
    cfg.t_end = d.tau;
    const TrajectoryStats stats = s == TurScheme::Jump ? run_jump_ensemble(sys, std::get<JumpFB>(fb), ss, cfg)
                                                       : run_homodyne_ensemble(sys, std::get<HomodyneFB>(fb), ss, cfg);
    TurPoint p;
    p.scheme = s;
    p.draw = d;
    p.b_fb = qda_stationary(sys, fb, d.tau);
    p.b_nofb = qda_stationary(sys, NoFeedback{}, d.tau);
    const Readout ro = readout_of(fb);
    p.fb = tur_check_steady(stats, p.b_fb, ro);
    p.nofb = tur_check_steady(stats, p.b_nofb, ro);
    return p;
}

struct QecRanges {
    double lo = 0.1;
    double hi = 2.0;
    double tau_lo = 0.1;
    double tau_hi = 1.0;
};

struct QecDraw {
    QecParams rates;
    double tau = 1.0;
};

struct QecPoint {
    QecDraw draw;
    double dndt = 0.0;
    ActivityBreakdown b_fb;
    ActivityBreakdown b_nofb;
    BoundReport fb;
    BoundReport nofb;
};

inline std::vector<QecDraw> qec_draws(const QecRanges& r, std::int64_t count, std::uint64_t seed) {
    if (count < 1) throw InputError("qec_draws: count must be >= 1");
    detail::Xoshiro256 rng = detail::trajectory_rng(seed, -2);
    auto uni = [&](double a, double b) { return a + (b - a) * rng.uniform(); };
    std::vector<QecDraw> out;
    for (std::int64_t i = 0; i < count; ++i) {
        QecDraw d;
        d.rates.kappa1 = uni(r.lo, r.hi);
        d.rates.kappa2 = uni(r.lo, r.hi);
        d.tau = uni(r.tau_lo, r.tau_hi);
        out.push_back(d);
    }
    return out;
}

/// Non-steady TUR for the error-correcting code, started in the logical |0>.
inline QecPoint qec_point(const QecDraw& d, const TrajectoryConfig& base) {
    const QecModel m = qec_two_qubit(d.rates);
    const DensityMatrix rho0 = DensityMatrix::pure(m.logical0);
    TrajectoryConfig cfg = base;
    cfg.t_end = d.tau;
    const TrajectoryStats stats = run_jump_ensemble(m.system, m.feedback, rho0, cfg);
    const SuperOperator gen = jump_fb(m.system, m.feedback);
    const CVector v = expm(gen.matrix(), d.tau) * vectorize(rho0.op());
    QecPoint p;
    p.draw = d;
    p.dndt = dN_dtau(m.system, m.feedback, state_from_vector(v, m.system.dim()));
    const double t[] = {d.tau};
    p.b_fb = activity_curve(m.system, m.feedback, rho0, t).back();
    p.b_nofb = activity_curve(m.system, NoFeedback{}, rho0, t).back();
    p.fb = tur_check_nonsteady(stats, p.dndt, d.tau, p.b_fb);
    p.nofb = tur_check_nonsteady(stats, p.dndt, d.tau, p.b_nofb);
    return p;
}

/// Seed for point i of a sweep; keeps points independent of each other and of the draw stream.
inline std::uint64_t point_seed(std::uint64_t seed, std::int64_t i) {
    std::uint64_t x = seed ^ (0xd1b54a32d192ed03ULL * static_cast<std::uint64_t>(i + 1));
    return detail::Xoshiro256::splitmix(x);
}

}  // namespace qfb
