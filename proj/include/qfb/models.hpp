#pragma once

#include "qfb/generators.hpp"

#include <cmath>

namespace qfb {

// Basis conventions: atom |e> = (1,0), |g> = (0,1); qubits |0>, |1> in computational order.

inline Operator pauli_x() { return (Operator(2, 2) << 0, 1, 1, 0).finished(); }
inline Operator pauli_y() { return (Operator(2, 2) << 0, cplx(0, -1), cplx(0, 1), 0).finished(); }
inline Operator pauli_z() { return (Operator(2, 2) << 1, 0, 0, -1).finished(); }

inline CVector ket(Index d, Index k) {
    CVector v = CVector::Zero(d);
    v(k) = 1.0;
    return v;
}

inline CVector excited() { return ket(2, 0); }
inline CVector ground() { return ket(2, 1); }

struct TwoLevelAtomParams {
    double delta = 1.0;
    double omega = 1.0;
    double kappa = 0.5;
};

/// H = delta |e><e| + (omega/2)(|e><g| + |g><e|), L = sqrt(kappa) |g><e|.
inline OpenSystem two_level_atom(const TwoLevelAtomParams& p) {
    if (!(p.kappa >= 0.0)) throw InputError("two_level_atom: kappa must be >= 0");
    Operator H(2, 2);
    H << p.delta, 0.5 * p.omega, 0.5 * p.omega, 0.0;
    const Operator L = std::sqrt(p.kappa) * (ground() * excited().adjoint());
    return make_system(H, {L}, {"emission"});
}

/// Feedback operator used with the atom: X = |e><g| + |g><e|.
inline Operator atom_feedback_operator() { return pauli_x(); }

struct QecParams {
    double kappa1 = 1.0;
    double kappa2 = 1.0;
};

struct QecModel {
    OpenSystem system;
    JumpFB feedback;
    CVector logical0;
    CVector logical1;
    Operator U1;
    Operator U2;
};

inline QecModel qec_two_qubit(const QecParams& p) {
    if (!(p.kappa1 >= 0.0 && p.kappa2 >= 0.0)) throw InputError("qec_two_qubit: rates must be >= 0");
    const Operator X = pauli_x(), Y = pauli_y(), Z = pauli_z(), I2 = identity(2);
    const Operator lower = X + cplx(0, 1) * Y;  // 2|0><1|
    const double s = 1.0 / std::sqrt(2.0);
    QecModel m;
    const Operator H = p.kappa1 * kron(Y, X) + p.kappa2 * kron(X, Y);
    m.system = make_system(H, {std::sqrt(p.kappa1) * kron(lower, I2), std::sqrt(p.kappa2) * kron(I2, lower)},
                           {"qubit1", "qubit2"});
    m.U1 = s * (kron(X, I2) + kron(Z, X));
    m.U2 = s * (kron(I2, X) + kron(X, Z));
    m.feedback = JumpFB{{1.0, 1.0}, {hermitian_unitary_log(m.U1), hermitian_unitary_log(m.U2)}};
    m.logical0 = s * (ket(4, 0) + ket(4, 3));
    m.logical1 = s * (ket(4, 1) + ket(4, 2));
    return m;
}

}  // namespace qfb
