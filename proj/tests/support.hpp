#pragma once

// Random operators, states and systems shared by the unit tests and the acceptance run.

#include "qfb/models.hpp"

#include <random>
#include <vector>

namespace qfb::testing {

using Rng = std::mt19937_64;

inline Operator random_matrix(Rng& rng, Index d, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    Operator m(d, d);
    for (Index r = 0; r < d; ++r)
        for (Index c = 0; c < d; ++c) m(r, c) = cplx(g(rng), g(rng));
    return m;
}

inline Operator random_hermitian(Rng& rng, Index d, double scale = 1.0) {
    return hermitize(random_matrix(rng, d, scale));
}

inline DensityMatrix random_state(Rng& rng, Index d) {
    const Operator a = random_matrix(rng, d);
    Operator r = a * a.adjoint();
    r /= r.trace().real();
    return DensityMatrix(hermitize(r));
}

inline CVector random_ket(Rng& rng, Index d) {
    std::normal_distribution<double> g;
    CVector v(d);
    for (Index k = 0; k < d; ++k) v(k) = cplx(g(rng), g(rng));
    return v.normalized();
}

inline Operator random_unitary(Rng& rng, Index d) {
    Eigen::HouseholderQR<Operator> qr(random_matrix(rng, d));
    return qr.householderQ() * Operator::Identity(d, d);
}

/// One entry of the random battery: a system, a scheme, a start state.
struct Case {
    OpenSystem sys;
    FeedbackScheme scheme;
    DensityMatrix rho0;
    std::string name;
};

/// Random case of the given scheme kind (0 none, 1 jump, 2 homodyne, 3 Gaussian), dims 2-3, 1-2 jumps.
inline Case random_case(Rng& rng, int kind) {
    std::uniform_int_distribution<int> dim(2, 3), nj(1, 2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Index d = dim(rng);
    const Operator H = random_hermitian(rng, d, 0.7);
    const auto rho0 = random_state(rng, d);
    if (kind == 3) {
        const GaussianFB fb{random_hermitian(rng, d, 0.5), 0.2 + u(rng), random_hermitian(rng, d, 0.5)};
        return {make_system(H), fb, rho0, "gaussian"};
    }
    std::vector<Operator> jumps;
    const int n = nj(rng);
    for (int k = 0; k < n; ++k) jumps.push_back(random_matrix(rng, d, 0.5));
    OpenSystem sys = make_system(H, jumps);
    if (kind == 0) return {sys, NoFeedback{}, rho0, "none"};
    if (kind == 1) {
        JumpFB fb;
        for (int k = 0; k < n; ++k) {
            fb.nu.push_back(0.3 + 1.5 * u(rng));
            fb.F.push_back(random_hermitian(rng, d));
        }
        return {sys, fb, rho0, "jump"};
    }
    HomodyneFB fb;
    for (int k = 0; k < n; ++k) fb.phi.push_back(2.0 * std::numbers::pi * u(rng));
    fb.F = random_hermitian(rng, d, 0.5);
    return {sys, fb, rho0, "homodyne"};
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace qfb::testing
