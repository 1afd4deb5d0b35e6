#pragma once

#include <stdexcept>
#include <vector>

#include "lmkan/grid.hpp"

namespace lmkan {

/// One trainable 2D function: a (G+1) x (G+1) sheet of node coefficients over
/// a SigmaGrid. coeffs[i1][i2] is the function value at grid node (i1, i2);
/// the coefficients at indices 0 and G sit on the ghost points and control
/// the edge slopes.
struct Func2D {
    int G = 0;
    std::vector<double> coeffs;  // (G+1)*(G+1), row-major [i1*(G+1) + i2]

    Func2D() = default;
    explicit Func2D(int G_, double fill = 0.0)
        : G(G_), coeffs(static_cast<std::size_t>(G_ + 1) * (G_ + 1), fill) {}

    double& at(int i1, int i2) { return coeffs[static_cast<std::size_t>(i1) * (G + 1) + i2]; }
    double at(int i1, int i2) const { return coeffs[static_cast<std::size_t>(i1) * (G + 1) + i2]; }
};

/// Value of the 1D basis function with index i in [0, G] at x: the hat that
/// is 1 at points[i] and 0 at points[i +- 1]. The two segments living on the
/// unbounded edge intervals keep their slope out to infinity, which is what
/// the ghost-point extrapolation in the lookup path produces. Evaluated
/// directly from the point geometry (no sigma lookup) so it can serve as an
/// independent reference.
inline double basis_weight_1d(const SigmaGrid& grid, int i, double x) {
    const int G = grid.G;
    if (i < 0 || i > G) throw std::out_of_range("basis_weight_1d: index outside [0, G]");
    const std::vector<double>& p = grid.points;
    if (i == 0)
        return x < p[1] ? (p[1] - x) / (p[1] - p[0]) : 0.0;
    if (i == G)
        return x > p[G - 1] ? (x - p[G - 1]) / (p[G] - p[G - 1]) : 0.0;
    if (x < p[i]) {
        // rising segment; unbounded on the left when i == 1
        if (i == 1 || x >= p[i - 1]) return (x - p[i - 1]) / (p[i] - p[i - 1]);
        return 0.0;
    }
    // falling segment; unbounded on the right when i == G-1
    if (i == G - 1 || x <= p[i + 1]) return (p[i + 1] - x) / (p[i + 1] - p[i]);
    return 0.0;
}

/// O(1) evaluation: four-term bilinear lookup per Preamble.
inline double eval2d(const SigmaGrid& grid, const Func2D& f, double x1, double x2) {
    const Preamble pr = preamble(grid, x1, x2);
    const int s = grid.G + 1;
    const double* p = f.coeffs.data() + static_cast<std::size_t>(pr.i1) * s + pr.i2;
    return pr.w00 * p[0] + pr.w01 * p[1] + pr.w10 * p[s] + pr.w11 * p[s + 1];
}

/// Reference semantics for eval2d: the full O(G^2) double sum over all basis
/// products. Kept in the library so fast-path refactors can be revalidated
/// in place.
inline double eval2d_dense_oracle(const SigmaGrid& grid, const Func2D& f, double x1, double x2) {
    const int G = grid.G;
    double acc = 0.0;
    for (int i1 = 0; i1 <= G; ++i1) {
        const double b1 = basis_weight_1d(grid, i1, x1);
        if (b1 == 0.0) continue;
        for (int i2 = 0; i2 <= G; ++i2) {
            const double b2 = basis_weight_1d(grid, i2, x2);
            acc += f.at(i1, i2) * b1 * b2;
        }
    }
    return acc;
}

/// Analytic derivative of the bilinear cell form. Coefficient gradients are
/// exactly the four preamble weights at the active nodes; at a cell boundary
/// the cell selected by the floor index is used (right-continuous, matching
/// ReLU's subgradient convention).
struct Grad2D {
    double df_dx1 = 0, df_dx2 = 0;
    int i1 = 0, i2 = 0;                      // active cell
    double w00 = 0, w10 = 0, w01 = 0, w11 = 0;  // d f / d coeffs at the 4 nodes
};

inline Grad2D grad2d(const SigmaGrid& grid, const Func2D& f, double x1, double x2) {
    const Preamble pr = preamble(grid, x1, x2);
    Grad2D g;
    g.i1 = pr.i1;
    g.i2 = pr.i2;
    g.w00 = pr.w00;
    g.w10 = pr.w10;
    g.w01 = pr.w01;
    g.w11 = pr.w11;
    const double p00 = f.at(pr.i1, pr.i2);
    const double p10 = f.at(pr.i1 + 1, pr.i2);
    const double p01 = f.at(pr.i1, pr.i2 + 1);
    const double p11 = f.at(pr.i1 + 1, pr.i2 + 1);
    const double inv = grid.inv_area(pr.i1, pr.i2);
    g.df_dx1 = ((p10 - p00) * (grid.points[pr.i2 + 1] - x2) + (p11 - p01) * (x2 - grid.points[pr.i2])) * inv;
    g.df_dx2 = ((p01 - p00) * (grid.points[pr.i1 + 1] - x1) + (p11 - p10) * (x1 - grid.points[pr.i1])) * inv;
    return g;
}

}  // namespace lmkan
