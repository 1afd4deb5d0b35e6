#pragma once

#include <stdexcept>
#include <vector>

#include "lmkan/func2d.hpp"
#include "lmkan/grid.hpp"

namespace lmkan {

// Finite-difference curvature penalty on a coefficient sheet: the mean over
// stencil-valid nodes of
//   H_ij = Dx1x1^2 + 2*Dx1x2^2 + Dx2x2^2,
// the squared Frobenius norm of the Hessian estimated with non-uniform
// three-point stencils. Spacings come straight from grid.points (ghosts
// included), one code path for every grid. Centers run over i, j in [1, G-1]
// of the coefficient indices 0..G: the maximal range where all three
// stencils exist; ghost coefficients participate as neighbors only.
//
// The stencils are exact on quadratics, so the penalty is zero iff the sheet
// is of the form a*points[i] + b*points[j] + c.

namespace detail {

struct StencilAxis {
    // For center index k: second difference
    //   D = cl[k]*p[k-1] + cc[k]*p[k] + cr[k]*p[k+1]
    std::vector<double> cl, cc, cr;
    // Cross stencil uses 1 / (points[k+1] - points[k-1]) per axis.
    std::vector<double> inv_span;
};

inline StencilAxis make_stencil_axis(const SigmaGrid& grid) {
    const int G = grid.G;
    StencilAxis s;
    s.cl.assign(G + 1, 0.0);
    s.cc.assign(G + 1, 0.0);
    s.cr.assign(G + 1, 0.0);
    s.inv_span.assign(G + 1, 0.0);
    for (int k = 1; k <= G - 1; ++k) {
        const double hl = grid.points[k] - grid.points[k - 1];
        const double hr = grid.points[k + 1] - grid.points[k];
        const double denom = hl * hr * (hl + hr);
        s.cl[k] = 2.0 * hr / denom;
        s.cc[k] = -2.0 * (hl + hr) / denom;
        s.cr[k] = 2.0 * hl / denom;
        s.inv_span[k] = 1.0 / (grid.points[k + 1] - grid.points[k - 1]);
    }
    return s;
}

inline void check_sheet(const SigmaGrid& grid, const Func2D& f) {
    if (f.G != grid.G || f.coeffs.size() != static_cast<std::size_t>(grid.G + 1) * (grid.G + 1))
        throw std::invalid_argument("hessian penalty: coefficient sheet does not match grid");
}

inline double penalty_core(const StencilAxis& ax, int G, const double* p) {
    const int n = G + 1;
    double sum = 0.0;
    for (int i = 1; i <= G - 1; ++i) {
        for (int j = 1; j <= G - 1; ++j) {
            const double* c = p + static_cast<std::size_t>(i) * n + j;
            const double d11 = ax.cl[i] * c[-n] + ax.cc[i] * c[0] + ax.cr[i] * c[n];
            const double d22 = ax.cl[j] * c[-1] + ax.cc[j] * c[0] + ax.cr[j] * c[1];
            const double d12 = (c[n + 1] - c[n - 1] - c[-n + 1] + c[-n - 1]) *
                               ax.inv_span[i] * ax.inv_span[j];
            sum += d11 * d11 + 2.0 * d12 * d12 + d22 * d22;
        }
    }
    return sum / (static_cast<double>(G - 1) * (G - 1));
}

// out += scale * d penalty / d p, laid out like the sheet.
inline void penalty_grad_accum(const StencilAxis& ax, int G, const double* p, double* out,
                               double scale) {
    const int n = G + 1;
    const double k = scale / (static_cast<double>(G - 1) * (G - 1));
    for (int i = 1; i <= G - 1; ++i) {
        for (int j = 1; j <= G - 1; ++j) {
            const std::size_t c0 = static_cast<std::size_t>(i) * n + j;
            const double* c = p + c0;
            const double d11 = ax.cl[i] * c[-n] + ax.cc[i] * c[0] + ax.cr[i] * c[n];
            const double d22 = ax.cl[j] * c[-1] + ax.cc[j] * c[0] + ax.cr[j] * c[1];
            const double cross = ax.inv_span[i] * ax.inv_span[j];
            const double d12 = (c[n + 1] - c[n - 1] - c[-n + 1] + c[-n - 1]) * cross;
            double* o = out + c0;
            const double a11 = 2.0 * k * d11;
            o[-n] += a11 * ax.cl[i];
            o[0] += a11 * ax.cc[i];
            o[n] += a11 * ax.cr[i];
            const double a22 = 2.0 * k * d22;
            o[-1] += a22 * ax.cl[j];
            o[0] += a22 * ax.cc[j];
            o[1] += a22 * ax.cr[j];
            const double a12 = 4.0 * k * d12 * cross;
            o[n + 1] += a12;
            o[n - 1] -= a12;
            o[-n + 1] -= a12;
            o[-n - 1] += a12;
        }
    }
}

}  // namespace detail

inline double hessian_penalty(const SigmaGrid& grid, const Func2D& f) {
    detail::check_sheet(grid, f);
    return detail::penalty_core(detail::make_stencil_axis(grid), grid.G, f.coeffs.data());
}

/// Gradient of hessian_penalty with respect to every coefficient, ghost
/// nodes included (they are reached as stencil neighbors).
inline Func2D hessian_penalty_grad(const SigmaGrid& grid, const Func2D& f) {
    detail::check_sheet(grid, f);
    Func2D g(grid.G, 0.0);
    detail::penalty_grad_accum(detail::make_stencil_axis(grid), grid.G, f.coeffs.data(),
                               g.coeffs.data(), 1.0);
    return g;
}

/// Least-squares fit of a * points[i] + b * points[j] + c to the sheet,
/// reported as residual RMS over coefficient RMS. Zero iff the sheet is an
/// exact plane in node coordinates. The grid's symmetry about 0 makes the
/// normal equations diagonal, so the fit has a closed form.
inline double plane_fit_relative_residual(const SigmaGrid& grid, const Func2D& f) {
    detail::check_sheet(grid, f);
    const int G = grid.G;
    const int n = G + 1;
    double gg = 0.0;
    for (int i = 0; i <= G; ++i) gg += grid.points[i] * grid.points[i];
    double sa = 0.0, sb = 0.0, sc = 0.0, ss = 0.0;
    for (int i = 0; i <= G; ++i)
        for (int j = 0; j <= G; ++j) {
            const double p = f.at(i, j);
            sa += p * grid.points[i];
            sb += p * grid.points[j];
            sc += p;
            ss += p * p;
        }
    const double a = sa / (gg * n);
    const double b = sb / (gg * n);
    const double c = sc / (static_cast<double>(n) * n);
    double res = 0.0;
    for (int i = 0; i <= G; ++i)
        for (int j = 0; j <= G; ++j) {
            const double d = f.at(i, j) - (a * grid.points[i] + b * grid.points[j] + c);
            res += d * d;
        }
    const double rms = std::sqrt(ss / (static_cast<double>(n) * n));
    if (rms == 0.0) return 0.0;
    return std::sqrt(res / (static_cast<double>(n) * n)) / rms;
}

}  // namespace lmkan
