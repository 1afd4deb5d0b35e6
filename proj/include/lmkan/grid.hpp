#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace lmkan {

/// Fast sigmoid-like generator of the percentile grid:
///   sigma(x) = 0.5 e^x      for x <= 0
///            = 1 - 0.5 e^-x for x >  0
/// One exponential call per evaluation; NaN propagates.
inline double sigma(double x) {
    const double t = std::exp(-std::fabs(x));
    return x > 0.0 ? 1.0 - 0.5 * t : 0.5 * t;
}

/// Analytic inverse of sigma on (0, 1).
inline double sigma_inv(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw std::domain_error("sigma_inv: p must lie in (0, 1)");
    return p <= 0.5 ? std::log(2.0 * p) : -std::log(2.0 * (1.0 - p));
}

/// Unbounded static percentile grid with G intervals per dimension.
///
/// points has G+1 entries: points[k] = sigma_inv(k/G) for k = 1..G-1 are the
/// real grid points; points[0] and points[G] are ghost points extrapolated
/// with the outermost real spacing. Interval i (i = 0..G-1) spans
/// [points[i], points[i+1]], with intervals 0 and G-1 extending to -inf/+inf.
/// inv_areas[i1][i2] is the inverse cell area used by the bilinear preamble.
struct SigmaGrid {
    int G = 0;
    std::vector<double> points;     // size G+1
    std::vector<double> inv_areas;  // size G*G, row-major [i1*G + i2]

    double inv_area(int i1, int i2) const { return inv_areas[static_cast<std::size_t>(i1) * G + i2]; }
};

/// Build the grid for G >= 3. Interior points are mirrored about 0 so the
/// symmetry points[k] == -points[G-k] holds exactly; for even G the middle
/// point is exactly 0.
inline SigmaGrid build_grid(int G) {
    if (G < 3)
        throw std::invalid_argument("build_grid: G must be >= 3 (ghost rule needs two interior points)");
    SigmaGrid g;
    g.G = G;
    g.points.assign(static_cast<std::size_t>(G) + 1, 0.0);
    for (int k = 1; 2 * k < G; ++k) {
        const double v = std::log(2.0 * k / G);  // sigma_inv(k/G) on the lower half
        g.points[k] = v;
        g.points[G - k] = -v;
    }
    if (G % 2 == 0) g.points[G / 2] = 0.0;
    g.points[0] = 2.0 * g.points[1] - g.points[2];
    g.points[G] = 2.0 * g.points[G - 1] - g.points[G - 2];

    g.inv_areas.assign(static_cast<std::size_t>(G) * G, 0.0);
    for (int i1 = 0; i1 < G; ++i1) {
        const double h1 = g.points[i1 + 1] - g.points[i1];
        for (int i2 = 0; i2 < G; ++i2) {
            const double h2 = g.points[i2 + 1] - g.points[i2];
            g.inv_areas[static_cast<std::size_t>(i1) * G + i2] = 1.0 / (h1 * h2);
        }
    }
    return g;
}

/// Interval index i = floor(sigma(x) * G), clamped into [0, G-1]. The clamp
/// guards the sigma -> 1 floating limit on the right tail.
inline int interval_index(const SigmaGrid& grid, double x) {
    const int i = static_cast<int>(std::floor(sigma(x) * grid.G));
    return i < 0 ? 0 : (i >= grid.G ? grid.G - 1 : i);
}

/// Cell indices and the four bilinear weights for one 2D argument pair.
/// Weight order matches the node order (i1,i2), (i1+1,i2), (i1,i2+1),
/// (i1+1,i2+1). On the two unbounded edge intervals the weights extrapolate
/// linearly through the ghost points and may fall outside [0, 1]; they always
/// sum to 1 in exact arithmetic.
struct Preamble {
    int i1 = 0, i2 = 0;
    double w00 = 0, w10 = 0, w01 = 0, w11 = 0;
};

inline Preamble preamble(const SigmaGrid& grid, double x1, double x2) {
    Preamble r;
    r.i1 = interval_index(grid, x1);
    r.i2 = interval_index(grid, x2);
    const double a = grid.points[r.i1 + 1] - x1;  // right gap, axis 1
    const double b = x1 - grid.points[r.i1];      // left gap, axis 1
    const double c = grid.points[r.i2 + 1] - x2;
    const double d = x2 - grid.points[r.i2];
    const double inv = grid.inv_area(r.i1, r.i2);
    r.w00 = a * c * inv;
    r.w10 = b * c * inv;
    r.w01 = a * d * inv;
    r.w11 = b * d * inv;
    return r;
}

}  // namespace lmkan
