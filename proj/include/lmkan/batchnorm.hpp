#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "lmkan/matrix.hpp"

namespace lmkan {

/// Batch normalization state. lmKAN blocks always use affine = false (plain
/// standardization, no scale/shift); the MLP baseline enables affine. Running
/// stats follow the usual convention: normalization uses biased batch
/// variance, the running-variance update uses the unbiased estimate.
struct BatchNorm {
    int dim = 0;
    std::vector<double> running_mean;
    std::vector<double> running_var;
    double momentum = 0.1;
    double epsilon = 1e-5;
    bool affine = false;
    std::vector<double> scale;  // affine only
    std::vector<double> shift;  // affine only
    long batches_seen = 0;

    static BatchNorm make(int dim, bool affine = false, double momentum = 0.1,
                          double epsilon = 1e-5) {
        BatchNorm bn;
        bn.dim = dim;
        bn.running_mean.assign(dim, 0.0);
        bn.running_var.assign(dim, 1.0);
        bn.momentum = momentum;
        bn.epsilon = epsilon;
        bn.affine = affine;
        if (affine) {
            bn.scale.assign(dim, 1.0);
            bn.shift.assign(dim, 0.0);
        }
        return bn;
    }
};

/// Per-batch cache needed by the backward pass.
struct BatchNormCache {
    std::vector<double> mean, var, inv_std;  // batch stats (training mode)
    Matrix x_hat;
    bool training = false;
};

inline void batchnorm_forward(BatchNorm& bn, const Matrix& X, Matrix& Y, bool training,
                              BatchNormCache* cache = nullptr) {
    require_width(X, bn.dim, "batchnorm_forward");
    const std::size_t n = X.rows();
    if (training && n < 2)
        throw std::invalid_argument("batchnorm_forward: training needs batch size >= 2");
    if (!Y.same_shape(X)) Y = Matrix(X.rows(), X.cols());
    if (cache && !cache->x_hat.same_shape(X)) cache->x_hat = Matrix(X.rows(), X.cols());

    std::vector<double> mean(bn.dim, 0.0), var(bn.dim, 0.0), inv_std(bn.dim, 0.0);
    if (training) {
        for (std::size_t r = 0; r < n; ++r) {
            const double* x = X.row(r);
            for (int c = 0; c < bn.dim; ++c) mean[c] += x[c];
        }
        for (int c = 0; c < bn.dim; ++c) mean[c] /= static_cast<double>(n);
        for (std::size_t r = 0; r < n; ++r) {
            const double* x = X.row(r);
            for (int c = 0; c < bn.dim; ++c) {
                const double d = x[c] - mean[c];
                var[c] += d * d;
            }
        }
        for (int c = 0; c < bn.dim; ++c) var[c] /= static_cast<double>(n);  // biased
        for (int c = 0; c < bn.dim; ++c) {
            const double unbiased = var[c] * static_cast<double>(n) / static_cast<double>(n - 1);
            bn.running_mean[c] = (1.0 - bn.momentum) * bn.running_mean[c] + bn.momentum * mean[c];
            bn.running_var[c] = (1.0 - bn.momentum) * bn.running_var[c] + bn.momentum * unbiased;
        }
        bn.batches_seen++;
    } else {
        mean = bn.running_mean;
        var = bn.running_var;
    }
    for (int c = 0; c < bn.dim; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + bn.epsilon);

    for (std::size_t r = 0; r < n; ++r) {
        const double* x = X.row(r);
        double* y = Y.row(r);
        for (int c = 0; c < bn.dim; ++c) {
            double h = (x[c] - mean[c]) * inv_std[c];
            if (cache) cache->x_hat(r, c) = h;
            y[c] = bn.affine ? bn.scale[c] * h + bn.shift[c] : h;
        }
    }
    if (cache) {
        cache->mean = std::move(mean);
        cache->var = std::move(var);
        cache->inv_std = std::move(inv_std);
        cache->training = training;
    }
}

/// Backward through training-mode batch norm. Accumulates dscale/dshift when
/// affine; writes dX.
inline void batchnorm_backward(const BatchNorm& bn, const BatchNormCache& cache,
                               const Matrix& dY, Matrix& dX,
                               std::vector<double>* dscale, std::vector<double>* dshift) {
    const std::size_t n = dY.rows();
    if (!dX.same_shape(dY)) dX = Matrix(dY.rows(), dY.cols());
    std::vector<double> sum_g(bn.dim, 0.0), sum_gh(bn.dim, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        const double* g = dY.row(r);
        for (int c = 0; c < bn.dim; ++c) {
            const double gh = bn.affine ? g[c] * bn.scale[c] : g[c];
            sum_g[c] += gh;
            sum_gh[c] += gh * cache.x_hat(r, c);
        }
    }
    if (bn.affine && dscale && dshift) {
        for (std::size_t r = 0; r < n; ++r) {
            const double* g = dY.row(r);
            for (int c = 0; c < bn.dim; ++c) {
                (*dscale)[c] += g[c] * cache.x_hat(r, c);
                (*dshift)[c] += g[c];
            }
        }
    }
    if (!cache.training) {
        // inference mode: plain per-column affine map
        for (std::size_t r = 0; r < n; ++r) {
            const double* g = dY.row(r);
            double* dx = dX.row(r);
            for (int c = 0; c < bn.dim; ++c) {
                const double gh = bn.affine ? g[c] * bn.scale[c] : g[c];
                dx[c] = gh * cache.inv_std[c];
            }
        }
        return;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) {
        const double* g = dY.row(r);
        double* dx = dX.row(r);
        for (int c = 0; c < bn.dim; ++c) {
            const double gh = bn.affine ? g[c] * bn.scale[c] : g[c];
            dx[c] = cache.inv_std[c] *
                    (gh - inv_n * sum_g[c] - cache.x_hat(r, c) * inv_n * sum_gh[c]);
        }
    }
}

}  // namespace lmkan
