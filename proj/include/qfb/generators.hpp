#pragma once

#include "qfb/linops.hpp"

#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace qfb {

/// Hamiltonian H plus jump operators L_z (rates folded into L_z).
struct OpenSystem {
    Operator H;
    std::vector<Operator> jumps;
    std::vector<std::string> labels;

    Index dim() const { return H.rows(); }
    std::size_t channels() const { return jumps.size(); }

    void validate() const {
        require_hermitian(H, "OpenSystem.H");
        for (const auto& l : jumps)
            if (l.rows() != H.rows() || l.cols() != H.cols())
                throw DimensionError("OpenSystem: jump operator dimension differs from H");
        if (!labels.empty() && labels.size() != jumps.size())
            throw DimensionError("OpenSystem: label count differs from channel count");
    }
};

inline OpenSystem make_system(Operator H, std::vector<Operator> jumps = {},
                              std::vector<std::string> labels = {}) {
    OpenSystem s{std::move(H), std::move(jumps), std::move(labels)};
    s.validate();
    return s;
}

struct NoFeedback {};

/// Per-channel feedback e^{-i nu_z F_z} applied after each detected jump in channel z.
struct JumpFB {
    std::vector<double> nu;
    std::vector<Operator> F;
};

/// Wiseman-Milburn homodyne feedback; the feedback strength is folded into F.
struct HomodyneFB {
    std::vector<double> phi;
    Operator F;
};

/// Weak measurement of Y with strength lambda and feedback F.
struct GaussianFB {
    Operator Y;
    double lambda = 1.0;
    Operator F;
};

using FeedbackScheme = std::variant<NoFeedback, JumpFB, HomodyneFB, GaussianFB>;

inline std::string_view scheme_name(const FeedbackScheme& s) {
    constexpr std::string_view names[] = {"none", "jump", "homodyne", "gaussian"};
    return names[s.index()];
}

inline void validate(const OpenSystem& sys, const JumpFB& fb) {
    if (fb.nu.size() != sys.channels() || fb.F.size() != sys.channels())
        throw DimensionError("JumpFB: nu/F count differs from channel count");
    for (const auto& f : fb.F) {
        require_hermitian(f, "JumpFB.F");
        if (f.rows() != sys.dim()) throw DimensionError("JumpFB: F dimension mismatch");
    }
}

inline void validate(const OpenSystem& sys, const HomodyneFB& fb) {
    if (fb.phi.size() != sys.channels())
        throw DimensionError("HomodyneFB: phase count differs from channel count");
    require_hermitian(fb.F, "HomodyneFB.F");
    if (fb.F.rows() != sys.dim()) throw DimensionError("HomodyneFB: F dimension mismatch");
}

inline void validate(Index dim, const GaussianFB& fb) {
    require_hermitian(fb.Y, "GaussianFB.Y");
    require_hermitian(fb.F, "GaussianFB.F");
    if (fb.Y.rows() != dim || fb.F.rows() != dim) throw DimensionError("GaussianFB: dimension mismatch");
    if (!(fb.lambda > 0.0)) throw InputError("GaussianFB: lambda must be positive");
}

inline void validate(const OpenSystem& sys, const FeedbackScheme& scheme) {
    sys.validate();
    std::visit(
        [&](const auto& fb) {
            using T = std::decay_t<decltype(fb)>;
            if constexpr (std::is_same_v<T, GaussianFB>) {
                if (!sys.jumps.empty())
                    throw InputError("GaussianFB: the system must not carry jump operators");
                validate(sys.dim(), fb);
            } else if constexpr (!std::is_same_v<T, NoFeedback>) {
                validate(sys, fb);
            }
        },
        scheme);
}

/// X -> -i[H, X]
inline SuperOperator hamiltonian_part(const Operator& H) {
    return cplx(0, -1) * (spre(H) - spost(H));
}

/// X -> L X L^dag - {L^dag L, X}/2
inline SuperOperator dissipator(const Operator& L) {
    const Operator LdL = L.adjoint() * L;
    return sandwich(L, L.adjoint()) - 0.5 * (spre(LdL) + spost(LdL));
}

inline SuperOperator lindblad(const OpenSystem& sys) {
    sys.validate();
    SuperOperator g = hamiltonian_part(sys.H);
    for (const auto& L : sys.jumps) g += dissipator(L);
    return g;
}

inline Operator feedback_unitary(const Operator& F, double nu) {
    return expm(Operator(cplx(0, -nu) * F));
}

inline SuperOperator jump_fb(const OpenSystem& sys, const JumpFB& fb) {
    sys.validate();
    validate(sys, fb);
    SuperOperator g = hamiltonian_part(sys.H);
    for (std::size_t z = 0; z < sys.channels(); ++z) {
        const Operator& L = sys.jumps[z];
        const Operator UL = feedback_unitary(fb.F[z], fb.nu[z]) * L;
        const Operator LdL = L.adjoint() * L;
        g += sandwich(UL, UL.adjoint()) - 0.5 * (spre(LdL) + spost(LdL));
    }
    return g;
}

/// X -> -i[F, X]
inline SuperOperator feedback_commutator(const Operator& F) { return hamiltonian_part(F); }

inline SuperOperator homodyne_fb(const OpenSystem& sys, const HomodyneFB& fb) {
    sys.validate();
    validate(sys, fb);
    const SuperOperator calF = feedback_commutator(fb.F);
    const SuperOperator calF2 = calF * calF;
    SuperOperator g = hamiltonian_part(sys.H);
    for (std::size_t z = 0; z < sys.channels(); ++z) {
        const Operator& L = sys.jumps[z];
        const cplx ph = std::exp(cplx(0, -fb.phi[z]));
        g += dissipator(L);
        g += calF * (ph * spre(L) + std::conj(ph) * spost(L.adjoint()));
        g += 0.5 * calF2;
    }
    return g;
}

inline SuperOperator gaussian_fb(Index dim, const Operator& H, const GaussianFB& fb) {
    require_hermitian(H, "gaussian_fb.H");
    if (H.rows() != dim) throw DimensionError("gaussian_fb: H dimension mismatch");
    validate(dim, fb);
    const SuperOperator calF = feedback_commutator(fb.F);
    SuperOperator g = hamiltonian_part(H);
    g += fb.lambda * dissipator(fb.Y);
    g += 0.5 * (calF * (spre(fb.Y) + spost(fb.Y)));
    g += (1.0 / (8.0 * fb.lambda)) * (calF * calF);
    return g;
}

inline SuperOperator generator(const OpenSystem& sys, const FeedbackScheme& scheme) {
    validate(sys, scheme);
    return std::visit(
        [&](const auto& fb) -> SuperOperator {
            using T = std::decay_t<decltype(fb)>;
            if constexpr (std::is_same_v<T, NoFeedback>) return lindblad(sys);
            else if constexpr (std::is_same_v<T, JumpFB>) return jump_fb(sys, fb);
            else if constexpr (std::is_same_v<T, HomodyneFB>) return homodyne_fb(sys, fb);
            else return gaussian_fb(sys.dim(), sys.H, fb);
        },
        scheme);
}

/// Heisenberg-picture generator, built from the adjoint expressions directly.
inline SuperOperator adjoint_generator(const OpenSystem& sys, const FeedbackScheme& scheme) {
    validate(sys, scheme);
    const cplx i(0, 1);
    // O -> L^dag O L - {L^dag L, O}/2
    auto adj_dissipator = [](const Operator& L) {
        const Operator LdL = L.adjoint() * L;
        return sandwich(L.adjoint(), L) - 0.5 * (spre(LdL) + spost(LdL));
    };
    SuperOperator g = i * (spre(sys.H) - spost(sys.H));
    std::visit(
        [&](const auto& fb) {
            using T = std::decay_t<decltype(fb)>;
            if constexpr (std::is_same_v<T, NoFeedback>) {
                for (const auto& L : sys.jumps) g += adj_dissipator(L);
            } else if constexpr (std::is_same_v<T, JumpFB>) {
                for (std::size_t z = 0; z < sys.channels(); ++z) {
                    const Operator& L = sys.jumps[z];
                    const Operator U = feedback_unitary(fb.F[z], fb.nu[z]);
                    const Operator LdL = L.adjoint() * L;
                    g += sandwich(L.adjoint() * U.adjoint(), U * L) - 0.5 * (spre(LdL) + spost(LdL));
                }
            } else if constexpr (std::is_same_v<T, HomodyneFB>) {
                const SuperOperator calFd = i * (spre(fb.F) - spost(fb.F));
                for (std::size_t z = 0; z < sys.channels(); ++z) {
                    const Operator& L = sys.jumps[z];
                    const cplx ph = std::exp(cplx(0, -fb.phi[z]));
                    g += adj_dissipator(L);
                    g += (ph * spost(L) + std::conj(ph) * spre(L.adjoint())) * calFd;
                    g += 0.5 * (calFd * calFd);
                }
            } else {
                const SuperOperator calFd = i * (spre(fb.F) - spost(fb.F));
                g += fb.lambda * adj_dissipator(fb.Y);
                g += 0.5 * ((spost(fb.Y) + spre(fb.Y)) * calFd);
                g += (1.0 / (8.0 * fb.lambda)) * (calFd * calFd);
            }
        },
        scheme);
    return g;
}

/// Operators shared by the activity formulas of one scheme.
///   K1 = -i H_eff X + J(X),  K2 = i X H_eff^dag + J(X)
///   Tr[K1 X] = -i Tr[G X],   Tr[K2 X] = i Tr[G X]
///   activity rate (the a-term integrand) = Tr[rate rho]
struct SchemeParts {
    Operator H_eff;
    Operator G;
    Operator rate;
    SuperOperator J;
};

inline SchemeParts scheme_parts(const OpenSystem& sys, const FeedbackScheme& scheme) {
    validate(sys, scheme);
    const Index d = sys.dim();
    const cplx i(0, 1);
    SchemeParts p{sys.H, sys.H, Operator::Zero(d, d), SuperOperator::zero(d)};
    std::visit(
        [&](const auto& fb) {
            using T = std::decay_t<decltype(fb)>;
            if constexpr (std::is_same_v<T, NoFeedback> || std::is_same_v<T, JumpFB>) {
                for (std::size_t z = 0; z < sys.channels(); ++z) {
                    const Operator& L = sys.jumps[z];
                    Operator UL = L;
                    if constexpr (std::is_same_v<T, JumpFB>) UL = feedback_unitary(fb.F[z], fb.nu[z]) * L;
                    p.H_eff -= 0.5 * i * L.adjoint() * L;
                    p.rate += L.adjoint() * L;
                    p.J += 0.5 * sandwich(UL, UL.adjoint());
                }
            } else if constexpr (std::is_same_v<T, HomodyneFB>) {
                const Operator& F = fb.F;
                for (std::size_t z = 0; z < sys.channels(); ++z) {
                    const Operator& L = sys.jumps[z];
                    const Operator Ld = L.adjoint();
                    const cplx ph = std::exp(cplx(0, -fb.phi[z]));
                    const cplx phc = std::conj(ph);
                    p.H_eff += -0.5 * i * Ld * L + ph * F * L - 0.5 * i * F * F;
                    p.G += 0.5 * (ph * F * L + phc * Ld * F);
                    p.rate += Ld * L + i * ph * F * L - i * phc * Ld * F + F * F;
                    p.J += 0.5 * sandwich(L, Ld) - 0.5 * i * phc * sandwich(F, Ld) +
                           0.5 * i * ph * sandwich(L, F) + 0.5 * sandwich(F, F);
                }
            } else {
                const Operator& F = fb.F;
                const Operator& Y = fb.Y;
                const double lam = fb.lambda;
                p.H_eff += -0.5 * i * lam * Y * Y + 0.5 * F * Y - (i / (8.0 * lam)) * F * F;
                p.G += 0.25 * (Y * F + F * Y);
                p.rate += lam * Y * Y + 0.5 * i * F * Y - 0.5 * i * Y * F + (0.25 / lam) * F * F;
                p.J += 0.5 * lam * sandwich(Y, Y) - 0.25 * i * sandwich(F, Y) + 0.25 * i * sandwich(Y, F) +
                       (0.125 / lam) * sandwich(F, F);
            }
        },
        scheme);
    p.G = hermitize(p.G);
    p.rate = hermitize(p.rate);
    return p;
}

struct KMaps {
    SuperOperator K1;
    SuperOperator K2;
};

/// First-order responses of the two-sided generator to the left and right parameters.
inline KMaps kmaps(const OpenSystem& sys, const FeedbackScheme& scheme) {
    const SchemeParts p = scheme_parts(sys, scheme);
    const cplx i(0, 1);
    return {cplx(0, -1) * spre(p.H_eff) + p.J, i * spost(p.H_eff.adjoint()) + p.J};
}

struct TwoSidedGenerator {
    OpenSystem base;
    FeedbackScheme scheme;
    double theta = 0.0;
    double phi_p = 0.0;
    SuperOperator matrix;
};

/// Generator with H, L (and F for diffusive schemes) scaled by theta on the left and phi_p on the right.
inline TwoSidedGenerator two_sided(const OpenSystem& sys, const FeedbackScheme& scheme, double theta,
                                   double phi_p) {
    validate(sys, scheme);
    if (!(std::abs(theta) < 1.0 && std::abs(phi_p) < 1.0))
        throw InputError("two_sided: parameters must lie in (-1, 1)");
    const double sa = std::sqrt(1.0 + theta);
    const double sb = std::sqrt(1.0 + phi_p);
    SuperOperator g = cplx(0, -1) * ((1.0 + theta) * spre(sys.H) - (1.0 + phi_p) * spost(sys.H));
    // X -> A_l X A_r^dag - (A_l^dag A_l X + X A_r^dag A_r)/2
    auto two_sided_dissipator = [](const Operator& Al, const Operator& Ar) {
        return sandwich(Al, Ar.adjoint()) - 0.5 * (spre(Al.adjoint() * Al) + spost(Ar.adjoint() * Ar));
    };
    std::visit(
        [&](const auto& fb) {
            using T = std::decay_t<decltype(fb)>;
            if constexpr (std::is_same_v<T, NoFeedback>) {
                for (const auto& L : sys.jumps) g += two_sided_dissipator(sa * L, sb * L);
            } else if constexpr (std::is_same_v<T, JumpFB>) {
                for (std::size_t z = 0; z < sys.channels(); ++z) {
                    const Operator& L = sys.jumps[z];
                    const Operator U = feedback_unitary(fb.F[z], fb.nu[z]);
                    g += sandwich(U * (sa * L), (sb * L).adjoint() * U.adjoint()) -
                         0.5 * (1.0 + theta) * spre(L.adjoint() * L) - 0.5 * (1.0 + phi_p) * spost(L.adjoint() * L);
                }
            } else if constexpr (std::is_same_v<T, HomodyneFB>) {
                const SuperOperator calF = cplx(0, -1) * (sa * spre(fb.F) - sb * spost(fb.F));
                for (std::size_t z = 0; z < sys.channels(); ++z) {
                    const Operator& L = sys.jumps[z];
                    const cplx ph = std::exp(cplx(0, -fb.phi[z]));
                    g += two_sided_dissipator(sa * L, sb * L);
                    g += calF * (ph * sa * spre(L) + std::conj(ph) * sb * spost(L.adjoint()));
                    g += 0.5 * (calF * calF);
                }
            } else {
                const SuperOperator calF = cplx(0, -1) * (sa * spre(fb.F) - sb * spost(fb.F));
                g += fb.lambda * two_sided_dissipator(sa * fb.Y, sb * fb.Y);
                g += 0.5 * (calF * (sa * spre(fb.Y) + sb * spost(fb.Y)));
                g += (1.0 / (8.0 * fb.lambda)) * (calF * calF);
            }
        },
        scheme);
    return {sys, scheme, theta, phi_p, std::move(g)};
}

}  // namespace qfb
