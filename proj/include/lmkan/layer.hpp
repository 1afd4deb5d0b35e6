#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "lmkan/func2d.hpp"
#include "lmkan/grid.hpp"
#include "lmkan/matrix.hpp"
#include "lmkan/rng.hpp"
#include "lmkan/threading.hpp"

namespace lmkan {

/// A batched 2D lookup layer mapping n_in inputs to n_out outputs through
/// (n_in/2) * n_out trainable 2D functions:
///
///   y_q = gamma * sum_p f_qp(x_{2p}, x_{2p+1})
///
/// P holds the node coefficients with index order [i1][i2][pair][out], out
/// fastest, so the four node slices touched by one argument pair are
/// contiguous n_out-vectors. gamma is the lookup-branch weight driven by the
/// training schedule (0 at init, 1 after fusion).
struct LmKanLayer {
    int n_in = 0;
    int n_out = 0;
    SigmaGrid grid;
    std::vector<double> P;  // (G+1)^2 * (n_in/2) * n_out
    double gamma = 0.0;

    int pairs() const { return n_in / 2; }
    std::size_t param_count() const { return P.size(); }

    std::size_t node_offset(int i1, int i2) const {
        const std::size_t per_node = static_cast<std::size_t>(pairs()) * n_out;
        return (static_cast<std::size_t>(i1) * (grid.G + 1) + i2) * per_node;
    }

    /// Contiguous n_out slice for node (i1, i2) and a given pair.
    double* node_slice(int i1, int i2, int pair) {
        return P.data() + node_offset(i1, i2) + static_cast<std::size_t>(pair) * n_out;
    }
    const double* node_slice(int i1, int i2, int pair) const {
        return P.data() + node_offset(i1, i2) + static_cast<std::size_t>(pair) * n_out;
    }

    /// Extract one coefficient sheet (for the Hessian penalty and tests).
    Func2D sheet(int pair, int out) const {
        Func2D f(grid.G);
        for (int i1 = 0; i1 <= grid.G; ++i1)
            for (int i2 = 0; i2 <= grid.G; ++i2)
                f.at(i1, i2) = node_slice(i1, i2, pair)[out];
        return f;
    }

    void set_sheet(int pair, int out, const Func2D& f) {
        for (int i1 = 0; i1 <= grid.G; ++i1)
            for (int i2 = 0; i2 <= grid.G; ++i2)
                node_slice(i1, i2, pair)[out] = f.at(i1, i2);
    }
};

inline double default_init_scale(int n_in) {
    return 1.0 / std::sqrt(static_cast<double>(n_in / 2));
}

/// Coefficients i.i.d. N(0, init_scale^2); gamma starts at 0. The default
/// scale (n_in/2)^{-1/2} keeps the pre-ramp output variance O(1).
inline LmKanLayer init_layer(int n_in, int n_out, int G, std::uint64_t seed,
                             double init_scale = -1.0) {
    if (n_in <= 0 || n_in % 2 != 0)
        throw std::invalid_argument("init_layer: n_in must be a positive even number");
    if (n_out <= 0) throw std::invalid_argument("init_layer: n_out must be positive");
    LmKanLayer layer;
    layer.n_in = n_in;
    layer.n_out = n_out;
    layer.grid = build_grid(G);
    if (init_scale < 0.0) init_scale = default_init_scale(n_in);
    const std::size_t count =
        static_cast<std::size_t>(G + 1) * (G + 1) * (n_in / 2) * n_out;
    layer.P.assign(count, 0.0);
    RandomStream rs(seed, "lmkan.layer.init");
    for (double& v : layer.P) v = init_scale * rs.normal();
    layer.gamma = 0.0;
    return layer;
}

namespace detail {

// Per-pair preamble cache for one row.
struct PairCell {
    int i1, i2;
    double w00, w10, w01, w11;
};

inline void row_preambles(const LmKanLayer& layer, const double* x, PairCell* cells) {
    for (int p = 0; p < layer.pairs(); ++p) {
        const Preamble pr = preamble(layer.grid, x[2 * p], x[2 * p + 1]);
        cells[p] = {pr.i1, pr.i2, pr.w00, pr.w10, pr.w01, pr.w11};
    }
}

}  // namespace detail

/// Batched forward pass. One preamble per input pair per row; the four
/// weights are reused across all n_out outputs. Accumulation runs in a fixed
/// order, so results are bitwise reproducible run to run.
inline void lmkan_forward(const LmKanLayer& layer, const Matrix& X, Matrix& Y,
                          std::size_t workers = 0) {
    require_width(X, layer.n_in, "lmkan_forward");
    if (Y.rows() != X.rows() || Y.cols() != static_cast<std::size_t>(layer.n_out))
        Y = Matrix(X.rows(), layer.n_out);
    const int n_out = layer.n_out;
    const int pairs = layer.pairs();
    const double gamma = layer.gamma;
    parallel_for(X.rows(), [&](std::size_t rb, std::size_t re, std::size_t) {
        std::vector<detail::PairCell> cells(pairs);
        for (std::size_t r = rb; r < re; ++r) {
            detail::row_preambles(layer, X.row(r), cells.data());
            double* y = Y.row(r);
            for (int q = 0; q < n_out; ++q) y[q] = 0.0;
            for (int p = 0; p < pairs; ++p) {
                const detail::PairCell& c = cells[p];
                const double* p00 = layer.node_slice(c.i1, c.i2, p);
                const double* p10 = layer.node_slice(c.i1 + 1, c.i2, p);
                const double* p01 = layer.node_slice(c.i1, c.i2 + 1, p);
                const double* p11 = layer.node_slice(c.i1 + 1, c.i2 + 1, p);
                for (int q = 0; q < n_out; ++q)
                    y[q] += c.w00 * p00[q] + c.w10 * p10[q] + c.w01 * p01[q] + c.w11 * p11[q];
            }
            for (int q = 0; q < n_out; ++q) y[q] *= gamma;
        }
    }, workers);
}

/// Adjoint of lmkan_forward. dP accumulates gamma * w * dY at the four
/// active nodes of every (row, pair); dX comes from the analytic cell
/// derivatives scaled by gamma. Per-worker dP buffers are merged in worker
/// order, so gradients are bitwise reproducible at a fixed thread count.
/// dP must be zero-initialized to layer.P.size(); dX may be null.
inline void lmkan_backward(const LmKanLayer& layer, const Matrix& X, const Matrix& dY,
                           std::vector<double>& dP, Matrix* dX, std::size_t workers = 0) {
    require_width(X, layer.n_in, "lmkan_backward");
    require_width(dY, layer.n_out, "lmkan_backward");
    if (X.rows() != dY.rows())
        throw std::invalid_argument("lmkan_backward: X and dY row counts differ");
    if (dP.size() != layer.P.size())
        throw std::invalid_argument("lmkan_backward: dP size mismatch");
    if (dX && (dX->rows() != X.rows() || dX->cols() != X.cols())) *dX = Matrix(X.rows(), X.cols());

    if (workers == 0) workers = worker_count();
    workers = std::max<std::size_t>(1, std::min(workers, X.rows() ? X.rows() : 1));
    std::vector<std::vector<double>> partial(workers > 1 ? workers - 1 : 0);
    for (auto& buf : partial) buf.assign(layer.P.size(), 0.0);

    const int n_out = layer.n_out;
    const int pairs = layer.pairs();
    const int G1 = layer.grid.G + 1;
    const double gamma = layer.gamma;
    const std::size_t per_node = static_cast<std::size_t>(pairs) * n_out;

    parallel_for(X.rows(), [&](std::size_t rb, std::size_t re, std::size_t w) {
        double* acc = w == 0 ? dP.data() : partial[w - 1].data();
        std::vector<detail::PairCell> cells(pairs);
        for (std::size_t r = rb; r < re; ++r) {
            detail::row_preambles(layer, X.row(r), cells.data());
            const double* g = dY.row(r);
            double* dx = dX ? dX->row(r) : nullptr;
            for (int p = 0; p < pairs; ++p) {
                const detail::PairCell& c = cells[p];
                const std::size_t base =
                    (static_cast<std::size_t>(c.i1) * G1 + c.i2) * per_node +
                    static_cast<std::size_t>(p) * n_out;
                double* d00 = acc + base;
                double* d10 = acc + base + static_cast<std::size_t>(G1) * per_node;
                double* d01 = acc + base + per_node;
                double* d11 = d10 + per_node;
                const double* p00 = layer.P.data() + base;
                const double* p10 = p00 + static_cast<std::size_t>(G1) * per_node;
                const double* p01 = p00 + per_node;
                const double* p11 = p10 + per_node;
                const double inv = layer.grid.inv_area(c.i1, c.i2);
                const double r2 = layer.grid.points[c.i2 + 1] - X(r, 2 * p + 1);
                const double l2 = X(r, 2 * p + 1) - layer.grid.points[c.i2];
                const double r1 = layer.grid.points[c.i1 + 1] - X(r, 2 * p);
                const double l1 = X(r, 2 * p) - layer.grid.points[c.i1];
                double acc1 = 0.0, acc2 = 0.0;
                for (int q = 0; q < n_out; ++q) {
                    const double gq = gamma * g[q];
                    d00[q] += c.w00 * gq;
                    d10[q] += c.w10 * gq;
                    d01[q] += c.w01 * gq;
                    d11[q] += c.w11 * gq;
                    acc1 += gq * ((p10[q] - p00[q]) * r2 + (p11[q] - p01[q]) * l2);
                    acc2 += gq * ((p01[q] - p00[q]) * r1 + (p11[q] - p10[q]) * l1);
                }
                if (dx) {
                    dx[2 * p] = acc1 * inv;
                    dx[2 * p + 1] = acc2 * inv;
                }
            }
        }
    }, workers);

    for (const auto& buf : partial)
        for (std::size_t i = 0; i < buf.size(); ++i) dP[i] += buf[i];
}

}  // namespace lmkan
