#pragma once

#include <cstdint>
#include <vector>

#include "lmkan/matrix.hpp"
#include "lmkan/rng.hpp"
#include "lmkan/threading.hpp"

namespace lmkan {

/// Dense affine map y = W x + b with W stored row-major [out][in].
struct Linear {
    int n_in = 0;
    int n_out = 0;
    Matrix W;               // n_out x n_in
    std::vector<double> b;  // n_out
};

/// Fan-in uniform init, U(-s, s) with s = 1/sqrt(n_in), for both W and b.
inline Linear init_linear(int n_in, int n_out, RandomStream& rs) {
    Linear lin;
    lin.n_in = n_in;
    lin.n_out = n_out;
    lin.W = Matrix(n_out, n_in);
    lin.b.assign(n_out, 0.0);
    const double s = 1.0 / std::sqrt(static_cast<double>(n_in));
    for (int q = 0; q < n_out; ++q)
        for (int j = 0; j < n_in; ++j) lin.W(q, j) = s * (2.0 * rs.uniform() - 1.0);
    for (int q = 0; q < n_out; ++q) lin.b[q] = s * (2.0 * rs.uniform() - 1.0);
    return lin;
}

inline void linear_forward(const Linear& lin, const Matrix& X, Matrix& Y,
                           std::size_t workers = 0) {
    require_width(X, lin.n_in, "linear_forward");
    if (Y.rows() != X.rows() || Y.cols() != static_cast<std::size_t>(lin.n_out))
        Y = Matrix(X.rows(), lin.n_out);
    parallel_for(X.rows(), [&](std::size_t rb, std::size_t re, std::size_t) {
        for (std::size_t r = rb; r < re; ++r) {
            const double* x = X.row(r);
            double* y = Y.row(r);
            for (int q = 0; q < lin.n_out; ++q) {
                const double* w = lin.W.row(q);
                double acc = lin.b[q];
                for (int j = 0; j < lin.n_in; ++j) acc += w[j] * x[j];
                y[q] = acc;
            }
        }
    }, workers);
}

/// Adjoint: accumulates dW, db; writes dX when non-null.
inline void linear_backward(const Linear& lin, const Matrix& X, const Matrix& dY,
                            Matrix& dW, std::vector<double>& db, Matrix* dX) {
    require_width(X, lin.n_in, "linear_backward");
    require_width(dY, lin.n_out, "linear_backward");
    if (dW.rows() != lin.W.rows() || dW.cols() != lin.W.cols()) dW = Matrix(lin.n_out, lin.n_in);
    if (db.size() != static_cast<std::size_t>(lin.n_out)) db.assign(lin.n_out, 0.0);
    if (dX && !dX->same_shape(X)) *dX = Matrix(X.rows(), X.cols());
    for (std::size_t r = 0; r < X.rows(); ++r) {
        const double* x = X.row(r);
        const double* g = dY.row(r);
        for (int q = 0; q < lin.n_out; ++q) {
            const double gq = g[q];
            db[q] += gq;
            double* dw = dW.row(q);
            for (int j = 0; j < lin.n_in; ++j) dw[j] += gq * x[j];
        }
        if (dX) {
            double* dx = dX->row(r);
            for (int j = 0; j < lin.n_in; ++j) dx[j] = 0.0;
            for (int q = 0; q < lin.n_out; ++q) {
                const double gq = g[q];
                const double* w = lin.W.row(q);
                for (int j = 0; j < lin.n_in; ++j) dx[j] += gq * w[j];
            }
        }
    }
}

}  // namespace lmkan
