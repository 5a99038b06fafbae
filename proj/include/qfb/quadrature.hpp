#pragma once

#include "qfb/linops.hpp"

#include <span>
#include <vector>

namespace qfb {

enum class Rule { Trapezoid, Simpson };

struct QuadratureSpec {
    Index n = 401;
    Rule rule = Rule::Simpson;
    bool refine_check = false;

    void validate() const {
        if (n < 3) throw InputError("QuadratureSpec: need at least 3 nodes");
        if (rule == Rule::Simpson && n % 2 == 0) throw InputError("QuadratureSpec: Simpson needs odd n");
    }

    /// Same rule on the lattice with every interval halved.
    QuadratureSpec refined() const { return {2 * n - 1, rule, false}; }
};

/// Weights for nodes 0..m of a uniform lattice with spacing h.
/// Simpson for even m; Simpson plus a closing 3/8 panel for odd m >= 3; trapezoid for m = 1.
inline void add_panel_weights(std::vector<double>& w, Index m, double h, Rule rule) {
    w.assign(static_cast<std::size_t>(m + 1), 0.0);
    if (m == 0) return;
    if (rule == Rule::Trapezoid || m == 1) {
        for (Index k = 0; k <= m; ++k) w[static_cast<std::size_t>(k)] = (k == 0 || k == m) ? 0.5 * h : h;
        return;
    }
    const Index simpson_end = (m % 2 == 0) ? m : m - 3;
    for (Index k = 0; k + 2 <= simpson_end; k += 2) {
        w[static_cast<std::size_t>(k)] += h / 3.0;
        w[static_cast<std::size_t>(k + 1)] += 4.0 * h / 3.0;
        w[static_cast<std::size_t>(k + 2)] += h / 3.0;
    }
    if (simpson_end != m) {
        const double c = 3.0 * h / 8.0;
        w[static_cast<std::size_t>(m - 3)] += c;
        w[static_cast<std::size_t>(m - 2)] += 3.0 * c;
        w[static_cast<std::size_t>(m - 1)] += 3.0 * c;
        w[static_cast<std::size_t>(m)] += c;
    }
}

inline std::vector<double> quadrature_weights(Index n, double h, Rule rule) {
    std::vector<double> w;
    add_panel_weights(w, n - 1, h, rule);
    return w;
}

inline double integrate(std::span<const double> f, double h, Rule rule) {
    const auto w = quadrature_weights(static_cast<Index>(f.size()), h, rule);
    double acc = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) acc += w[k] * f[k];
    return acc;
}

inline cplx integrate(std::span<const cplx> f, double h, Rule rule) {
    const auto w = quadrature_weights(static_cast<Index>(f.size()), h, rule);
    cplx acc = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) acc += w[k] * f[k];
    return acc;
}

/// Running integral from node 0 to every node, same panel layout as add_panel_weights.
inline std::vector<double> cumulative_integral(std::span<const double> f, double h, Rule rule) {
    const std::size_t n = f.size();
    std::vector<double> out(n, 0.0);
    if (n < 2) return out;
    if (rule == Rule::Trapezoid) {
        for (std::size_t k = 1; k < n; ++k) out[k] = out[k - 1] + 0.5 * h * (f[k - 1] + f[k]);
        return out;
    }
    out[1] = 0.5 * h * (f[0] + f[1]);
    for (std::size_t k = 2; k < n; k += 2) out[k] = out[k - 2] + h / 3.0 * (f[k - 2] + 4.0 * f[k - 1] + f[k]);
    for (std::size_t k = 3; k < n; k += 2)
        out[k] = out[k - 3] + 3.0 * h / 8.0 * (f[k - 3] + 3.0 * f[k - 2] + 3.0 * f[k - 1] + f[k]);
    return out;
}

}  // namespace qfb
