#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <iostream>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

namespace qfb {

using cplx = std::complex<double>;
using Index = Eigen::Index;
using Operator = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RowVector = Eigen::RowVectorXcd;

inline constexpr cplx I_unit{0.0, 1.0};

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Inconsistent shapes or channel counts.
class DimensionError : public Error {
  public:
    using Error::Error;
};

/// Input violating a documented precondition (non-Hermitian, non-PSD, out of range).
class InputError : public Error {
  public:
    using Error::Error;
};

/// Overflow, non-convergence, degenerate solves.
class NumericalError : public Error {
  public:
    using Error::Error;
};

/// Receives non-fatal diagnostics; defaults to stderr.
inline std::function<void(std::string_view)>& warning_sink() {
    static std::function<void(std::string_view)> sink = [](std::string_view msg) {
        std::cerr << "warning: " << msg << '\n';
    };
    return sink;
}

inline Operator identity(Index d) { return Operator::Identity(d, d); }

inline Operator dagger(const Operator& a) { return a.adjoint(); }

inline Operator commutator(const Operator& a, const Operator& b) { return a * b - b * a; }

inline Operator anticommutator(const Operator& a, const Operator& b) { return a * b + b * a; }

inline Operator kron(const Operator& a, const Operator& b) {
    return Eigen::kroneckerProduct(a, b).eval();
}

inline double max_abs(const Operator& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

inline bool is_hermitian(const Operator& a, double tol = 1e-10) {
    return a.rows() == a.cols() && max_abs(a - a.adjoint()) <= tol;
}

inline void require_square(const Operator& a, const char* what) {
    if (a.rows() != a.cols() || a.rows() == 0)
        throw DimensionError(std::string(what) + ": operator must be square and non-empty");
}

inline void require_hermitian(const Operator& a, const char* what, double tol = 1e-10) {
    require_square(a, what);
    if (!is_hermitian(a, tol)) throw InputError(std::string(what) + ": operator is not Hermitian");
}

/// Hermitian part, used to strip round-off after products of Hermitian factors.
inline Operator hermitize(const Operator& a) { return 0.5 * (a + a.adjoint()); }

// Tr[A B] without forming the product.
inline cplx trace_product(const Operator& a, const Operator& b) {
    return a.cwiseProduct(b.transpose()).sum();
}

/// A validated density matrix. Construction checks Hermiticity, positivity and unit trace.
class DensityMatrix {
  public:
    explicit DensityMatrix(Operator op, double tol = 1e-10) : op_(std::move(op)) {
        require_square(op_, "DensityMatrix");
        if (!op_.allFinite()) throw InputError("DensityMatrix: non-finite entries");
        if (max_abs(op_ - op_.adjoint()) > tol) throw InputError("DensityMatrix: not Hermitian");
        if (std::abs(op_.trace() - cplx(1.0)) > tol) throw InputError("DensityMatrix: trace is not 1");
        Eigen::SelfAdjointEigenSolver<Operator> es(op_, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -tol) throw InputError("DensityMatrix: negative eigenvalue");
    }

    static DensityMatrix pure(const CVector& psi) {
        const double n = psi.norm();
        if (n == 0.0) throw InputError("DensityMatrix::pure: zero vector");
        const CVector v = psi / n;
        return DensityMatrix(v * v.adjoint());
    }

    static DensityMatrix maximally_mixed(Index d) {
        return DensityMatrix(identity(d) / static_cast<double>(d));
    }

    const Operator& op() const { return op_; }
    Index dim() const { return op_.rows(); }

  private:
    Operator op_;
};

/// Column stacking: element (i, j) lands at index i + j*d, so vec(ABC) = (C^T kron A) vec(B).
inline CVector vectorize(const Operator& a) {
    return Eigen::Map<const CVector>(a.data(), a.size());
}

inline Operator devectorize(const CVector& v, Index d) {
    if (v.size() != d * d) throw DimensionError("devectorize: length is not d^2");
    return Eigen::Map<const Operator>(v.data(), d, d);
}

inline Index dim_from_liouville(Index n) {
    const auto d = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(n))));
    if (d * d != n) throw DimensionError("superoperator side is not a perfect square");
    return d;
}

/// Dense d^2 x d^2 matrix acting on column-stacked operators.
class SuperOperator {
  public:
    SuperOperator() = default;
    explicit SuperOperator(Eigen::MatrixXcd m) : m_(std::move(m)) {
        if (m_.rows() != m_.cols()) throw DimensionError("SuperOperator: matrix must be square");
        d_ = dim_from_liouville(m_.rows());
    }

    static SuperOperator zero(Index d) { return SuperOperator(Eigen::MatrixXcd::Zero(d * d, d * d)); }
    static SuperOperator identity(Index d) {
        return SuperOperator(Eigen::MatrixXcd::Identity(d * d, d * d));
    }

    const Eigen::MatrixXcd& matrix() const { return m_; }
    Index dim() const { return d_; }

    Operator apply(const Operator& x) const { return devectorize(m_ * vectorize(x), d_); }
    CVector apply(const CVector& v) const { return m_ * v; }

    /// Matrix adjoint; for a superoperator this is the Hilbert-Schmidt adjoint.
    SuperOperator adjoint() const { return SuperOperator(m_.adjoint()); }

    SuperOperator& operator+=(const SuperOperator& o) {
        check(o);
        m_ += o.m_;
        return *this;
    }
    SuperOperator& operator-=(const SuperOperator& o) {
        check(o);
        m_ -= o.m_;
        return *this;
    }
    SuperOperator& operator*=(cplx s) {
        m_ *= s;
        return *this;
    }

    friend SuperOperator operator+(SuperOperator a, const SuperOperator& b) { return a += b; }
    friend SuperOperator operator-(SuperOperator a, const SuperOperator& b) { return a -= b; }
    friend SuperOperator operator*(cplx s, SuperOperator a) { return a *= s; }
    friend SuperOperator operator*(double s, SuperOperator a) { return a *= cplx(s); }
    friend SuperOperator operator*(const SuperOperator& a, const SuperOperator& b) {
        a.check(b);
        return SuperOperator(a.m_ * b.m_);
    }

  private:
    void check(const SuperOperator& o) const {
        if (o.d_ != d_) throw DimensionError("SuperOperator: dimension mismatch");
    }

    Eigen::MatrixXcd m_;
    Index d_ = 0;
};

/// A X C as a superoperator: C^T kron A.
inline SuperOperator sandwich(const Operator& a, const Operator& c) {
    require_square(a, "sandwich");
    require_square(c, "sandwich");
    if (a.rows() != c.rows()) throw DimensionError("sandwich: operand dimensions differ");
    return SuperOperator(kron(c.transpose(), a));
}

/// X -> A X
inline SuperOperator spre(const Operator& a) { return sandwich(a, identity(a.rows())); }

/// X -> X C
inline SuperOperator spost(const Operator& c) { return sandwich(identity(c.rows()), c); }

/// <<1| as a row: <<1|v = Tr[devectorize(v)].
inline RowVector trace_row(Index d) { return vectorize(identity(d)).transpose(); }

/// Row r with r . vec(X) = Tr[O X].
inline RowVector observable_row(const Operator& o) { return vectorize(o.transpose()).transpose(); }

namespace detail {

inline bool is_normal(const Eigen::MatrixXcd& m) {
    const double scale = std::max(1.0, m.cwiseAbs2().sum());
    return max_abs(m * m.adjoint() - m.adjoint() * m) <= 1e-13 * scale;
}

inline void check_result(const Eigen::MatrixXcd& r) {
    if (!r.allFinite()) throw NumericalError("expm: overflow");
}

}  // namespace detail

/// e^{m t} by scaling and squaring with a Pade approximant.
inline Eigen::MatrixXcd expm_pade(const Eigen::MatrixXcd& m, double t = 1.0) {
    if (!m.allFinite() || !std::isfinite(t)) throw InputError("expm: non-finite input");
    Eigen::MatrixXcd r = (m * t).exp();
    detail::check_result(r);
    return r;
}

/// e^{m t} via the Schur form, exact for normal matrices (the Schur factor is then diagonal).
inline Eigen::MatrixXcd expm_normal(const Eigen::MatrixXcd& m, double t = 1.0) {
    if (!m.allFinite() || !std::isfinite(t)) throw InputError("expm: non-finite input");
    Eigen::ComplexSchur<Eigen::MatrixXcd> schur(m);
    const auto& u = schur.matrixU();
    const Eigen::VectorXcd ev = schur.matrixT().diagonal();
    Eigen::VectorXcd e(ev.size());
    for (Index i = 0; i < ev.size(); ++i) e(i) = std::exp(ev(i) * t);
    Eigen::MatrixXcd r = u * e.asDiagonal() * u.adjoint();
    detail::check_result(r);
    return r;
}

inline Eigen::MatrixXcd expm(const Eigen::MatrixXcd& m, double t = 1.0) {
    if (m.rows() != m.cols()) throw DimensionError("expm: matrix must be square");
    if (m.size() == 0) return m;
    return detail::is_normal(m) ? expm_normal(m, t) : expm_pade(m, t);
}

inline SuperOperator expm(const SuperOperator& s, double t = 1.0) {
    return SuperOperator(expm(s.matrix(), t));
}

/// Principal square root of a Hermitian PSD matrix; eigenvalues in [-1e-12, 0) clamp to zero.
inline Operator psd_sqrt(const Operator& a) {
    Eigen::SelfAdjointEigenSolver<Operator> es(hermitize(a));
    Eigen::VectorXd ev = es.eigenvalues();
    // Eigenvalues at round-off level are zero; their square roots would be far above it.
    const double floor = 4.0 * static_cast<double>(ev.size()) * std::numeric_limits<double>::epsilon() *
                         ev.cwiseAbs().maxCoeff();
    for (Index i = 0; i < ev.size(); ++i) {
        if (ev(i) < -1e-10) throw InputError("psd_sqrt: matrix is not positive semidefinite");
        ev(i) = ev(i) > floor ? std::sqrt(ev(i)) : 0.0;
    }
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

/// Uhlmann fidelity (Tr sqrt(sqrt(r1) r2 sqrt(r1)))^2.
inline double fidelity(const DensityMatrix& r1, const DensityMatrix& r2) {
    if (r1.dim() != r2.dim()) throw DimensionError("fidelity: dimension mismatch");
    const Operator s = psd_sqrt(r1.op());
    Eigen::SelfAdjointEigenSolver<Operator> es(hermitize(s * r2.op() * s), Eigen::EigenvaluesOnly);
    const Eigen::VectorXd& ev = es.eigenvalues();
    const double floor = 4.0 * static_cast<double>(ev.size()) * std::numeric_limits<double>::epsilon() *
                         ev.cwiseAbs().maxCoeff();
    double acc = 0.0;
    for (Index i = 0; i < ev.size(); ++i) {
        if (ev(i) < -1e-10) throw InputError("fidelity: non-PSD intermediate");
        if (ev(i) > floor) acc += std::sqrt(ev(i));
    }
    return std::clamp(acc * acc, 0.0, 1.0);
}

inline double bures_distance(const DensityMatrix& r1, const DensityMatrix& r2) {
    return std::acos(std::sqrt(fidelity(r1, r2)));
}

inline double trace_distance(const Operator& a, const Operator& b) {
    Eigen::SelfAdjointEigenSolver<Operator> es(hermitize(a - b), Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

inline bool is_unitary(const Operator& u, double tol = 1e-10) {
    return u.rows() == u.cols() && max_abs(u.adjoint() * u - identity(u.rows())) <= tol;
}

/// Hermitian F with e^{-iF} = u. Eigenphases lie in (-pi, pi]; -pi is mapped to pi.
inline Operator hermitian_unitary_log(const Operator& u) {
    require_square(u, "hermitian_unitary_log");
    if (!is_unitary(u)) throw InputError("hermitian_unitary_log: input is not unitary");
    Eigen::ComplexSchur<Operator> schur(u);
    const auto& v = schur.matrixU();
    Eigen::VectorXd f(u.rows());
    for (Index i = 0; i < u.rows(); ++i) {
        double theta = -std::arg(schur.matrixT()(i, i));
        if (theta <= -std::numbers::pi + 1e-12) theta += 2.0 * std::numbers::pi;
        f(i) = theta;
    }
    return hermitize(v * f.asDiagonal() * v.adjoint());
}

}  // namespace qfb
