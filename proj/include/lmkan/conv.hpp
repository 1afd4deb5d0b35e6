#pragma once

#include <stdexcept>
#include <vector>

#include "lmkan/matrix.hpp"

namespace lmkan {

/// H x W x C image stored row-major with channels fastest:
/// value(y, x, c) = data[(y * W + x) * C + c].
struct Image {
    int h = 0, w = 0, c = 0;
    std::vector<double> data;

    Image() = default;
    Image(int h_, int w_, int c_)
        : h(h_), w(w_), c(c_), data(static_cast<std::size_t>(h_) * w_ * c_, 0.0) {}

    double& at(int y, int x, int ch) {
        return data[(static_cast<std::size_t>(y) * w + x) * c + ch];
    }
    double at(int y, int x, int ch) const {
        return data[(static_cast<std::size_t>(y) * w + x) * c + ch];
    }
};

struct UnfoldResult {
    Matrix patches;  // (out_h * out_w) rows, k*k*C columns
    int out_h = 0;
    int out_w = 0;
};

/// Lower a strided k x k convolution input to a dense batch: each output
/// position becomes one row (row-major over positions), each column one
/// (dy, dx, channel) tap with column index (dy * k + dx) * C + channel.
/// Applying any layer to the rows and reshaping back to (out_h, out_w,
/// n_out) reproduces the strided convolution.
inline UnfoldResult unfold_conv(const Image& img, int k, int s) {
    if (k < 1 || s < 1) throw std::invalid_argument("unfold_conv: k and s must be positive");
    if (k > img.h || k > img.w)
        throw std::invalid_argument("unfold_conv: kernel larger than image");
    if ((img.h - k) % s != 0 || (img.w - k) % s != 0)
        throw std::invalid_argument("unfold_conv: (H-k) and (W-k) must be divisible by the stride");
    UnfoldResult r;
    r.out_h = (img.h - k) / s + 1;
    r.out_w = (img.w - k) / s + 1;
    r.patches = Matrix(static_cast<std::size_t>(r.out_h) * r.out_w,
                       static_cast<std::size_t>(k) * k * img.c);
    for (int oy = 0; oy < r.out_h; ++oy)
        for (int ox = 0; ox < r.out_w; ++ox) {
            double* row = r.patches.row(static_cast<std::size_t>(oy) * r.out_w + ox);
            std::size_t col = 0;
            for (int dy = 0; dy < k; ++dy)
                for (int dx = 0; dx < k; ++dx)
                    for (int ch = 0; ch < img.c; ++ch)
                        row[col++] = img.at(oy * s + dy, ox * s + dx, ch);
        }
    return r;
}

/// Reshape a (out_h * out_w) x n_out batch back into an image.
inline Image fold_output(const Matrix& rows, int out_h, int out_w) {
    Image img(out_h, out_w, static_cast<int>(rows.cols()));
    for (int y = 0; y < out_h; ++y)
        for (int x = 0; x < out_w; ++x) {
            const double* r = rows.row(static_cast<std::size_t>(y) * out_w + x);
            for (int ch = 0; ch < img.c; ++ch) img.at(y, x, ch) = r[ch];
        }
    return img;
}

}  // namespace lmkan
