#pragma once

#include "qfb/evolve.hpp"
#include "qfb/quadrature.hpp"

#include <span>
#include <string_view>
#include <vector>

namespace qfb {

enum class Method { NU, NH, FD, Stationary, Exact };

inline std::string_view method_name(Method m) {
    constexpr std::string_view names[] = {"NU", "NH", "FD", "stationary", "exact"};
    return names[static_cast<int>(m)];
}

struct ActivityBreakdown {
    double tau = 0.0;
    double total = 0.0;
    double a_term = 0.0;
    double cross_term = 0.0;
    double mean_sq_term = 0.0;
    Method method = Method::NH;
};

namespace detail {

inline void check_rho0(const OpenSystem& sys, const DensityMatrix& rho0) {
    if (rho0.dim() != sys.dim()) throw DimensionError("activity: state and system dimensions differ");
}

inline void check_tau(double tau) {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw InputError("activity: tau must be positive");
}

// Small negative totals are quadrature noise; anything beyond -1e-6 is a real failure.
inline ActivityBreakdown finish(ActivityBreakdown b, bool recompute_total = true) {
    if (recompute_total) b.total = b.a_term + b.cross_term - b.mean_sq_term;
    if (!std::isfinite(b.total)) throw NumericalError("activity: non-finite result");
    if (b.total < 0.0) {
        if (b.total < -1e-6) throw NumericalError("activity: negative dynamical activity");
        warning_sink()("activity: clamping small negative total to zero");
        b.total = 0.0;
    }
    return b;
}

struct Lattice {
    double h = 0.0;
    Eigen::MatrixXcd rho;  // column j holds vec(rho(j h))
};

inline Lattice forward_lattice(const SuperOperator& gen, const DensityMatrix& rho0, double tau, Index n) {
    Lattice lat{tau / static_cast<double>(n - 1), Eigen::MatrixXcd(gen.matrix().rows(), n)};
    const Eigen::MatrixXcd P = expm(gen.matrix(), lat.h);
    lat.rho.col(0) = vectorize(rho0.op());
    for (Index j = 1; j < n; ++j) lat.rho.col(j) = P * lat.rho.col(j - 1);
    return lat;
}

// Columns e^{A k h} v for k = 0..n-1.
inline Eigen::MatrixXcd power_series(const Eigen::MatrixXcd& A, const CVector& v, double h, Index n) {
    Eigen::MatrixXcd out(v.size(), n);
    const Eigen::MatrixXcd P = expm(A, h);
    out.col(0) = v;
    for (Index k = 1; k < n; ++k) out.col(k) = P * out.col(k - 1);
    return out;
}

inline std::vector<double> observable_on_lattice(const Operator& obs, const Lattice& lat) {
    const RowVector r = observable_row(obs);
    std::vector<double> out(static_cast<std::size_t>(lat.rho.cols()));
    for (Index j = 0; j < lat.rho.cols(); ++j) out[static_cast<std::size_t>(j)] = (r * lat.rho.col(j))(0).real();
    return out;
}

/// int_0^tau ds1 int_0^{s1} ds2 f(i, j) on the lattice, inner rule on nodes 0..i.
template <class F>
double double_integral(Index n, double h, Rule rule, F&& f) {
    std::vector<double> inner(static_cast<std::size_t>(n), 0.0);
    std::vector<double> w;
    for (Index i = 1; i < n; ++i) {
        add_panel_weights(w, i, h, rule);
        double acc = 0.0;
        for (Index j = 0; j <= i; ++j) acc += w[static_cast<std::size_t>(j)] * f(i, j);
        inner[static_cast<std::size_t>(i)] = acc;
    }
    return integrate(inner, h, rule);
}

// Re Tr[H_eff^dag X(s1-s2) rho(s2)] with X(u) = e^{adj u} X evolved on the difference lattice.
inline double heisenberg_cross(const Eigen::MatrixXcd& adj, const Operator& X, const Operator& H_eff,
                               const Lattice& lat, Rule rule) {
    const Index n = lat.rho.cols();
    const Index d = H_eff.rows();
    const Eigen::MatrixXcd xs = power_series(adj, vectorize(X), lat.h, n);
    // q_j = vec((rho_j H_eff^dag)^T), so Tr[X rho_j H_eff^dag] = x . q_j
    Eigen::MatrixXcd q(d * d, n);
    for (Index j = 0; j < n; ++j) {
        const Operator r = devectorize(lat.rho.col(j), d) * H_eff.adjoint();
        q.col(j) = vectorize(r.transpose());
    }
    return double_integral(n, lat.h, rule,
                           [&](Index i, Index j) { return xs.col(i - j).cwiseProduct(q.col(j)).sum().real(); });
}

template <class Compute>
ActivityBreakdown with_refine_check(const QuadratureSpec& quad, Compute&& compute) {
    quad.validate();
    ActivityBreakdown b = compute(quad);
    if (quad.refine_check) {
        const ActivityBreakdown fine = compute(quad.refined());
        if (std::abs(fine.total - b.total) > 1e-6 * std::max(1.0, std::abs(fine.total)))
            throw NumericalError("activity: quadrature did not converge (refine check)");
    }
    return b;
}

}  // namespace detail

/// Time-integrated activity rate along the scheme's own trajectory (plain jump count for jump schemes).
inline double classical_activity(const OpenSystem& sys, const FeedbackScheme& scheme, const DensityMatrix& rho0,
                                 double tau, const QuadratureSpec& quad = {}) {
    detail::check_rho0(sys, rho0);
    detail::check_tau(tau);
    const SuperOperator gen = generator(sys, scheme);
    const Operator rate = scheme_parts(sys, scheme).rate;
    const auto b = detail::with_refine_check(quad, [&](const QuadratureSpec& q) {
        const auto lat = detail::forward_lattice(gen, rho0, tau, q.n);
        ActivityBreakdown r;
        r.tau = tau;
        r.a_term = integrate(detail::observable_on_lattice(rate, lat), lat.h, q.rule);
        r.total = r.a_term;
        return r;
    });
    return b.a_term;
}

/// Activity from the K-map double integrals.
inline ActivityBreakdown qda_nu(const OpenSystem& sys, const FeedbackScheme& scheme, const DensityMatrix& rho0,
                                double tau, const QuadratureSpec& quad = {}) {
    detail::check_rho0(sys, rho0);
    detail::check_tau(tau);
    const SuperOperator gen = generator(sys, scheme);
    const SchemeParts parts = scheme_parts(sys, scheme);
    const KMaps K = kmaps(sys, scheme);
    auto compute = [&](const QuadratureSpec& q) {
        const auto lat = detail::forward_lattice(gen, rho0, tau, q.n);
        const Index n = q.n;
        const RowVector one = trace_row(sys.dim());
        const Eigen::MatrixXcd v1 = K.K1.matrix() * lat.rho;
        const Eigen::MatrixXcd v2 = K.K2.matrix() * lat.rho;
        // row k: <<1| K e^{L k h}
        const Eigen::MatrixXcd Pt = expm(gen.matrix(), lat.h).transpose();
        Eigen::MatrixXcd rows1(one.size(), n), rows2(one.size(), n);
        rows1.col(0) = (one * K.K1.matrix()).transpose();
        rows2.col(0) = (one * K.K2.matrix()).transpose();
        for (Index k = 1; k < n; ++k) {
            rows1.col(k) = Pt * rows1.col(k - 1);
            rows2.col(k) = Pt * rows2.col(k - 1);
        }
        const double cross = 4.0 * detail::double_integral(n, lat.h, q.rule, [&](Index i, Index j) {
            const Index u = i - j;
            return (rows2.col(u).cwiseProduct(v1.col(j)).sum() + rows1.col(u).cwiseProduct(v2.col(j)).sum()).real();
        });
        std::vector<cplx> m1(static_cast<std::size_t>(n)), m2(static_cast<std::size_t>(n));
        for (Index j = 0; j < n; ++j) {
            m1[static_cast<std::size_t>(j)] = (one * v1.col(j))(0);
            m2[static_cast<std::size_t>(j)] = (one * v2.col(j))(0);
        }
        ActivityBreakdown b;
        b.tau = tau;
        b.method = Method::NU;
        b.a_term = integrate(detail::observable_on_lattice(parts.rate, lat), lat.h, q.rule);
        b.cross_term = cross;
        b.mean_sq_term = 4.0 * (integrate(m1, lat.h, q.rule) * integrate(m2, lat.h, q.rule)).real();
        return detail::finish(b);
    };
    return detail::with_refine_check(quad, compute);
}

/// Activity from Heisenberg-evolved generator observables (production path).
inline ActivityBreakdown qda_nh(const OpenSystem& sys, const FeedbackScheme& scheme, const DensityMatrix& rho0,
                                double tau, const QuadratureSpec& quad = {}) {
    detail::check_rho0(sys, rho0);
    detail::check_tau(tau);
    const SuperOperator gen = generator(sys, scheme);
    const SuperOperator adj = adjoint_generator(sys, scheme);
    const SchemeParts parts = scheme_parts(sys, scheme);
    auto compute = [&](const QuadratureSpec& q) {
        const auto lat = detail::forward_lattice(gen, rho0, tau, q.n);
        ActivityBreakdown b;
        b.tau = tau;
        b.method = Method::NH;
        b.a_term = integrate(detail::observable_on_lattice(parts.rate, lat), lat.h, q.rule);
        b.cross_term = 8.0 * detail::heisenberg_cross(adj.matrix(), parts.G, parts.H_eff, lat, q.rule);
        const double m = integrate(detail::observable_on_lattice(parts.G, lat), lat.h, q.rule);
        b.mean_sq_term = 4.0 * m * m;
        return detail::finish(b);
    };
    return detail::with_refine_check(quad, compute);
}

/// 4[d_theta d_phi C - d_theta C d_phi C] at theta = phi = 0, C = Tr e^{L(theta,phi) tau} rho0,
/// central differences with one Richardson step (h, h/2).
inline double qda_fd_oracle(const OpenSystem& sys, const FeedbackScheme& scheme, const DensityMatrix& rho0,
                            double tau, double h = 1e-3) {
    detail::check_rho0(sys, rho0);
    detail::check_tau(tau);
    if (!(h >= 1e-4 && h <= 1e-2)) throw InputError("qda_fd_oracle: step must lie in [1e-4, 1e-2]");
    const RowVector one = trace_row(sys.dim());
    const CVector v0 = vectorize(rho0.op());
    auto C = [&](double th, double ph) {
        const auto g = two_sided(sys, scheme, th, ph);
        return (one * (expm(g.matrix.matrix(), tau) * v0))(0);
    };
    auto B = [&](double s) {
        const cplx mixed = (C(s, s) - C(s, -s) - C(-s, s) + C(-s, -s)) / (4.0 * s * s);
        const cplx dth = (C(s, 0) - C(-s, 0)) / (2.0 * s);
        const cplx dph = (C(0, s) - C(0, -s)) / (2.0 * s);
        return 4.0 * (mixed - dth * dph).real();
    };
    return (4.0 * B(0.5 * h) - B(h)) / 3.0;
}

/// Closed form for rho0 = steady state of the scheme, valid for any tau (no quadrature).
inline ActivityBreakdown qda_stationary(const OpenSystem& sys, const FeedbackScheme& scheme, double tau) {
    detail::check_tau(tau);
    const SuperOperator gen = generator(sys, scheme);
    const DensityMatrix ss = steady_state(gen);
    const SchemeParts parts = scheme_parts(sys, scheme);
    const Index d = sys.dim();
    const Index N = d * d;
    const Operator& rho = ss.op();
    const CVector one = vectorize(identity(d));
    // Projector onto the stationary component of Heisenberg operators: O -> I Tr[rho_ss O].
    const Eigen::MatrixXcd P = one * observable_row(rho);
    const Eigen::MatrixXcd M = adjoint_generator(sys, scheme).matrix() - P;
    Eigen::MatrixXcd Z = Eigen::MatrixXcd::Zero(3 * N, 3 * N);
    Z.block(0, 0, N, N) = M;
    Z.block(0, N, N, N).setIdentity();
    Z.block(N, 2 * N, N, N).setIdentity();
    const Eigen::MatrixXcd R = expm(Z, tau).block(0, 2 * N, N, N);  // int_0^tau (tau-u) e^{Mu} du

    const double m_rate = trace_product(parts.G, rho).real();
    const double h_rate = trace_product(parts.H_eff.adjoint(), rho).real();
    const CVector g_perp = vectorize(parts.G) - m_rate * one;
    const Operator X = devectorize(R * g_perp, d);
    const double fluct = 8.0 * trace_product(parts.H_eff.adjoint() * X, rho).real();

    ActivityBreakdown b;
    b.tau = tau;
    b.method = Method::Stationary;
    b.a_term = tau * trace_product(parts.rate, rho).real();
    b.cross_term = fluct + 4.0 * tau * tau * h_rate * m_rate;
    b.mean_sq_term = 4.0 * tau * tau * m_rate * m_rate;
    b.total = b.a_term + fluct + 4.0 * tau * tau * m_rate * (h_rate - m_rate);
    return detail::finish(b, false);
}

/// Exact activity at each requested time (nondecreasing, >= 0) from one initial state.
/// Integrates the linear system for (rho, W, a, D, m):
///   rho' = L rho,  W' = L W + rho H_eff^dag,  a' = Tr[rate rho],  D' = Tr[G W],  m' = Tr[G rho]
/// so that B = a + 8 Re D - 4 m^2.
inline std::vector<ActivityBreakdown> activity_curve(const OpenSystem& sys, const FeedbackScheme& scheme,
                                                     const DensityMatrix& rho0, std::span<const double> times) {
    detail::check_rho0(sys, rho0);
    const SuperOperator gen = generator(sys, scheme);
    const SchemeParts parts = scheme_parts(sys, scheme);
    const Index d = sys.dim();
    const Index N = d * d;
    const Index S = 2 * N + 3;
    const Index ia = 2 * N, iD = 2 * N + 1, im = 2 * N + 2;
    Eigen::MatrixXcd Z = Eigen::MatrixXcd::Zero(S, S);
    Z.block(0, 0, N, N) = gen.matrix();
    Z.block(N, N, N, N) = gen.matrix();
    Z.block(N, 0, N, N) = spost(parts.H_eff.adjoint()).matrix();
    Z.block(ia, 0, 1, N) = observable_row(parts.rate);
    Z.block(iD, N, 1, N) = observable_row(parts.G);
    Z.block(im, 0, 1, N) = observable_row(parts.G);

    CVector z = CVector::Zero(S);
    z.head(N) = vectorize(rho0.op());
    std::vector<ActivityBreakdown> out;
    out.reserve(times.size());
    double t_prev = 0.0;
    double dt_cached = -1.0;
    Eigen::MatrixXcd step;
    for (const double t : times) {
        if (!(t >= t_prev) || !std::isfinite(t)) throw InputError("activity_curve: times must be nondecreasing");
        const double dt = t - t_prev;
        if (dt > 0.0) {
            if (std::abs(dt - dt_cached) > 1e-15 * std::max(1.0, dt)) {
                step = expm(Z, dt);
                dt_cached = dt;
            }
            z = step * z;
        }
        t_prev = t;
        ActivityBreakdown b;
        b.tau = t;
        b.method = Method::Exact;
        b.a_term = z(ia).real();
        b.cross_term = 8.0 * z(iD).real();
        b.mean_sq_term = 4.0 * z(im).real() * z(im).real();
        out.push_back(detail::finish(b));
    }
    return out;
}

struct TaylorCorrection {
    double correction = 0.0;  // 8 int int Re Tr[H_eff^dag K(s1-s2) rho(s2)], K = sum i nu L^dag [F, H] L
    double baseline = 0.0;    // no-feedback Heisenberg form evaluated along the feedback trajectory
};

/// First-order (in nu) feedback correction for the jump scheme. Both terms use the feedback
/// trajectory rho(s2) and Heisenberg operators evolved without feedback.
inline TaylorCorrection taylor_jump_correction(const OpenSystem& sys, const JumpFB& fb, const DensityMatrix& rho0,
                                               double tau, const QuadratureSpec& quad = {}) {
    detail::check_rho0(sys, rho0);
    detail::check_tau(tau);
    quad.validate();
    validate(sys, fb);
    const auto lat = detail::forward_lattice(jump_fb(sys, fb), rho0, tau, quad.n);
    const SuperOperator adj0 = adjoint_generator(sys, NoFeedback{});
    const SchemeParts parts = scheme_parts(sys, NoFeedback{});
    Operator K = Operator::Zero(sys.dim(), sys.dim());
    for (std::size_t z = 0; z < sys.channels(); ++z) {
        const Operator& L = sys.jumps[z];
        K += cplx(0, fb.nu[z]) * L.adjoint() * commutator(fb.F[z], sys.H) * L;
    }
    TaylorCorrection out;
    out.correction = 8.0 * detail::heisenberg_cross(adj0.matrix(), K, parts.H_eff, lat, quad.rule);
    const double a = integrate(detail::observable_on_lattice(parts.rate, lat), lat.h, quad.rule);
    const double m = integrate(detail::observable_on_lattice(sys.H, lat), lat.h, quad.rule);
    out.baseline = a + 8.0 * detail::heisenberg_cross(adj0.matrix(), sys.H, parts.H_eff, lat, quad.rule) - 4.0 * m * m;
    return out;
}

/// d ln B / d ln tau by centered differences (one-sided at the ends).
inline std::vector<double> scaling_exponent(std::span<const double> taus, std::span<const double> values) {
    const std::size_t n = taus.size();
    if (n < 3 || values.size() != n) throw InputError("scaling_exponent: need >= 3 matching points");
    std::vector<double> lt(n), lb(n);
    for (std::size_t k = 0; k < n; ++k) {
        if (!(taus[k] > 0.0)) throw InputError("scaling_exponent: tau must be positive");
        if (!(values[k] > 0.0)) throw InputError("scaling_exponent: nonpositive activity");
        lt[k] = std::log(taus[k]);
        lb[k] = std::log(values[k]);
    }
    std::vector<double> alpha(n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t lo = k == 0 ? 0 : k - 1;
        const std::size_t hi = k + 1 == n ? n - 1 : k + 1;
        alpha[k] = (lb[hi] - lb[lo]) / (lt[hi] - lt[lo]);
    }
    return alpha;
}

/// Scaling exponent of the stationary activity of a scheme.
inline std::vector<double> scaling_exponent(const OpenSystem& sys, const FeedbackScheme& scheme,
                                            std::span<const double> taus) {
    std::vector<double> b;
    b.reserve(taus.size());
    for (const double t : taus) b.push_back(qda_stationary(sys, scheme, t).total);
    return scaling_exponent(taus, b);
}

}  // namespace qfb
