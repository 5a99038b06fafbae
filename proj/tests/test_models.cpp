#include "support.hpp"

#include "qfb/evolve.hpp"

#include <gtest/gtest.h>

using namespace qfb;
using namespace qfb::testing;

namespace {

CVector act(const Operator& a, const CVector& v) { return a * v; }

}  // namespace

TEST(PauliConvention, LoweringDirection) {
    const Operator lower = pauli_x() + cplx(0, 1) * pauli_y();
    EXPECT_LT((act(lower, ket(2, 1)) - 2.0 * ket(2, 0)).norm(), 1e-15);
    EXPECT_LT(act(lower, ket(2, 0)).norm(), 1e-15);
}

TEST(PauliConvention, AtomBasis) {
    EXPECT_EQ(excited(), ket(2, 0));
    EXPECT_EQ(ground(), ket(2, 1));
    EXPECT_LT(max_abs(atom_feedback_operator() - (excited() * ground().adjoint() + ground() * excited().adjoint())),
              1e-15);
}

TEST(TwoLevelAtom, ZeroDriveIsPureDecay) {
    const OpenSystem s = two_level_atom({0.0, 0.0, 0.8});
    EXPECT_LT(max_abs(s.H), 1e-15);
    ASSERT_EQ(s.channels(), 1u);
    EXPECT_LT(max_abs(s.jumps[0] - std::sqrt(0.8) * ground() * excited().adjoint()), 1e-15);
}

TEST(TwoLevelAtom, HamiltonianEigenvalues) {
    const OpenSystem s = two_level_atom({1.0, 1.0, 0.5});
    Eigen::SelfAdjointEigenSolver<Operator> es(s.H);
    EXPECT_NEAR(es.eigenvalues()(0), (1.0 - std::sqrt(2.0)) / 2.0, 1e-14);
    EXPECT_NEAR(es.eigenvalues()(1), (1.0 + std::sqrt(2.0)) / 2.0, 1e-14);
}

TEST(TwoLevelAtom, SteadyExcitedPopulationFormula) {
    // rho_ee = (Omega^2/4) / (Delta^2 + kappa^2/4 + Omega^2/2)
    for (const TwoLevelAtomParams p : {TwoLevelAtomParams{1.0, 1.0, 0.5}, TwoLevelAtomParams{0.3, 2.0, 1.7}}) {
        const auto ss = steady_state(lindblad(two_level_atom(p)));
        const double expected =
            0.25 * p.omega * p.omega / (p.delta * p.delta + 0.25 * p.kappa * p.kappa + 0.5 * p.omega * p.omega);
        EXPECT_NEAR(ss.op()(0, 0).real(), expected, 1e-10);
    }
}

TEST(TwoLevelAtom, RejectsNegativeRate) { EXPECT_THROW(two_level_atom({1.0, 1.0, -0.1}), InputError); }

TEST(Qec, FeedbackUnitariesAreHermitianAndGenerated) {
    const QecModel m = qec_two_qubit({0.7, 1.3});
    for (const Operator& U : {m.U1, m.U2}) {
        EXPECT_TRUE(is_unitary(U, 1e-12));
        EXPECT_TRUE(is_hermitian(U, 1e-12));
    }
    EXPECT_LT(max_abs(expm(cplx(0, -1) * m.feedback.F[0]) - m.U1), 1e-12);
    EXPECT_LT(max_abs(expm(cplx(0, -1) * m.feedback.F[1]) - m.U2), 1e-12);
    EXPECT_EQ(m.feedback.nu, (std::vector<double>{1.0, 1.0}));
}

TEST(Qec, LogGeneratorMatchesClosedForm) {
    const QecModel m = qec_two_qubit({});
    const Operator I4 = identity(4);
    EXPECT_LT(max_abs(m.feedback.F[0] - 0.5 * std::numbers::pi * (I4 - m.U1)), 1e-12);
    EXPECT_LT(max_abs(m.feedback.F[1] - 0.5 * std::numbers::pi * (I4 - m.U2)), 1e-12);
}

TEST(Qec, CodeWordsAreNormalizedAndOrthogonal) {
    const QecModel m = qec_two_qubit({});
    EXPECT_NEAR(m.logical0.norm(), 1.0, 1e-15);
    EXPECT_NEAR(m.logical1.norm(), 1.0, 1e-15);
    EXPECT_NEAR(std::abs(m.logical0.dot(m.logical1)), 0.0, 1e-15);
}

TEST(Qec, SystemStructure) {
    const QecParams p{0.4, 1.1};
    const QecModel m = qec_two_qubit(p);
    const Operator X = pauli_x(), Y = pauli_y(), I = identity(2);
    const Operator lower = X + cplx(0, 1) * Y;
    EXPECT_EQ(m.system.dim(), 4);
    EXPECT_LT(max_abs(m.system.H - (p.kappa1 * kron(Y, X) + p.kappa2 * kron(X, Y))), 1e-14);
    EXPECT_LT(max_abs(m.system.jumps[0] - std::sqrt(p.kappa1) * kron(lower, I)), 1e-14);
    EXPECT_LT(max_abs(m.system.jumps[1] - std::sqrt(p.kappa2) * kron(I, lower)), 1e-14);
    EXPECT_THROW(qec_two_qubit({-1.0, 1.0}), InputError);
}

TEST(Qec, CorrectionRoundTrip) {
    const QecModel m = qec_two_qubit({});
    for (const CVector& code : {m.logical0, m.logical1}) {
        for (std::size_t z = 0; z < 2; ++z) {
            const CVector hit = (m.system.jumps[z] * code).normalized();
            const CVector fixed = (z == 0 ? m.U1 : m.U2) * hit;
            EXPECT_NEAR(fidelity(DensityMatrix::pure(fixed), DensityMatrix::pure(code)), 1.0, 1e-12);
        }
    }
}

TEST(Qec, ErrorMovesOutOfCodeSpace) {
    const QecModel m = qec_two_qubit({});
    const CVector hit = (m.system.jumps[0] * m.logical0).normalized();
    EXPECT_LT((hit - ket(4, 1)).norm(), 1e-14);  // |0>_L -> |01>
}

TEST(Qec, DriftAnnihilatesCodeWords) {
    const QecModel m = qec_two_qubit({});
    const Operator X = pauli_x();
    const Operator M = identity(4) - kron(X, X);
    EXPECT_LT((M * m.logical0).norm(), 1e-15);
    EXPECT_LT((M * m.logical1).norm(), 1e-15);
}

TEST(Qec, OneStepKeepsCodeSpaceFidelity) {
    // Drift step plus a detected jump with its correction, applied to a random code-space state.
    Rng rng(41);
    const QecModel m = qec_two_qubit({0.8, 1.2});
    const double dt = 1e-3;
    const CVector psi = (random_ket(rng, 2)(0) * m.logical0 + random_ket(rng, 2)(1) * m.logical1).normalized();
    const Operator P = m.logical0 * m.logical0.adjoint() + m.logical1 * m.logical1.adjoint();
    Operator drift = identity(4);
    for (const auto& L : m.system.jumps) drift -= 0.5 * dt * L.adjoint() * L;
    const Operator UH = expm(cplx(0, -dt) * m.system.H);
    const CVector no_jump = (UH * drift * psi).normalized();
    EXPECT_GE((no_jump.adjoint() * P * no_jump)(0).real(), 1.0 - 10.0 * dt * dt);
    for (std::size_t z = 0; z < 2; ++z) {
        const CVector jumped = (UH * (z == 0 ? m.U1 : m.U2) * m.system.jumps[z] * psi).normalized();
        EXPECT_GE((jumped.adjoint() * P * jumped)(0).real(), 1.0 - 10.0 * dt * dt);
    }
}
