#pragma once

#include "qfb/generators.hpp"

#include <optional>
#include <vector>

namespace qfb {

enum class GridMode { Uniform, Graded };

/// Nodes on [0, t_end]. Graded nodes follow t = t_end (k/(n-1))^2, dense near 0.
class TimeGrid {
  public:
    static TimeGrid uniform(double t_end, Index n) { return TimeGrid(t_end, n, GridMode::Uniform); }
    static TimeGrid graded(double t_end, Index n) { return TimeGrid(t_end, n, GridMode::Graded); }

    const std::vector<double>& nodes() const { return nodes_; }
    double t_end() const { return nodes_.back(); }
    Index size() const { return static_cast<Index>(nodes_.size()); }
    GridMode mode() const { return mode_; }
    double step() const { return nodes_.size() > 1 ? nodes_[1] - nodes_[0] : 0.0; }

  private:
    TimeGrid(double t_end, Index n, GridMode mode) : mode_(mode) {
        if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw InputError("TimeGrid: t_end must be >= 0");
        if (t_end == 0.0) {
            nodes_ = {0.0};
            return;
        }
        if (n < 2) throw InputError("TimeGrid: need at least 2 nodes");
        nodes_.resize(static_cast<std::size_t>(n));
        for (Index k = 0; k < n; ++k) {
            const double x = static_cast<double>(k) / static_cast<double>(n - 1);
            nodes_[static_cast<std::size_t>(k)] = mode == GridMode::Uniform ? t_end * x : t_end * x * x;
        }
        nodes_.back() = t_end;
    }

    std::vector<double> nodes_;
    GridMode mode_;
};

struct Propagation {
    TimeGrid grid;
    std::vector<DensityMatrix> states;
    std::optional<SuperOperator> step_propagator;
};

/// Density matrix from a propagated vector; symmetrized, tolerance as in DensityMatrix.
inline DensityMatrix state_from_vector(const CVector& v, Index d) {
    return DensityMatrix(hermitize(devectorize(v, d)));
}

inline Propagation propagate(const SuperOperator& gen, const DensityMatrix& rho0, const TimeGrid& grid) {
    const Index d = rho0.dim();
    if (gen.dim() != d) throw DimensionError("propagate: generator and state dimensions differ");
    Propagation out{grid, {}, std::nullopt};
    const auto& t = grid.nodes();
    out.states.reserve(t.size());
    out.states.push_back(rho0);
    CVector v = vectorize(rho0.op());
    if (grid.mode() == GridMode::Uniform && t.size() > 1) {
        out.step_propagator = expm(gen, grid.step());
        const auto& P = out.step_propagator->matrix();
        for (std::size_t k = 1; k < t.size(); ++k) {
            v = P * v;
            out.states.push_back(state_from_vector(v, d));
        }
    } else {
        const CVector v0 = v;
        for (std::size_t k = 1; k < t.size(); ++k) {
            v = expm(gen.matrix(), t[k]) * v0;
            out.states.push_back(state_from_vector(v, d));
        }
    }
    return out;
}

/// Unique null vector of the generator, normalized to a density matrix.
inline DensityMatrix steady_state(const SuperOperator& gen) {
    const Index d = gen.dim();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(gen.matrix(), Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    const Index n = s.size();
    if (n >= 2 && s(n - 2) <= 1e-8)
        throw NumericalError("steady_state: null space is degenerate (no unique steady state)");
    CVector v = svd.matrixV().col(n - 1);
    Operator rho = devectorize(v, d);
    const cplx tr = rho.trace();
    if (std::abs(tr) < 1e-12) throw NumericalError("steady_state: null vector is traceless");
    rho = hermitize(rho / tr);
    rho /= rho.trace().real();
    if ((gen.matrix() * vectorize(rho)).norm() > 1e-10 * std::max(1.0, gen.matrix().norm()))
        throw NumericalError("steady_state: residual too large");
    return DensityMatrix(rho);
}

inline std::vector<double> expectation_series(const Propagation& prop, const Operator& obs) {
    require_hermitian(obs, "expectation_series");
    std::vector<double> out;
    out.reserve(prop.states.size());
    for (const auto& s : prop.states) {
        const cplx e = trace_product(obs, s.op());
        if (std::abs(e.imag()) > 1e-10) throw NumericalError("expectation_series: complex expectation");
        out.push_back(e.real());
    }
    return out;
}

}  // namespace qfb
