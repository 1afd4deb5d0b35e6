#pragma once

#include <cstdint>
#include <stdexcept>

#include "lmkan/model.hpp"

namespace lmkan {

/// Fused multiply-add count of the dominant O(N^2) term for a d-dimensional
/// lookup layer with order-k splines: (k^d / d) * n_in * n_out. For the
/// implemented d = k = 2 case this is 2 * n_in * n_out, twice a linear layer
/// of the same shape. Layers with d != 2 exist only through this calculator.
inline std::uint64_t flops_main_term(std::uint64_t n_in, std::uint64_t n_out, unsigned d = 2,
                                     unsigned k = 2) {
    if (d < 1) throw std::invalid_argument("flops_main_term: d must be >= 1");
    if (k < 2) throw std::invalid_argument("flops_main_term: spline order k must be >= 2");
    if (n_in % d != 0)
        throw std::invalid_argument("flops_main_term: d must divide n_in");
    std::uint64_t kd = 1;
    for (unsigned i = 0; i < d; ++i) kd *= k;
    return kd * (n_in / d) * n_out;
}

/// Trainable coefficients of a 2D lookup layer: (G+1)^2 * (n_in/2) * n_out.
inline std::uint64_t param_count(const LmKanLayer& layer) {
    return static_cast<std::uint64_t>(layer.grid.G + 1) * (layer.grid.G + 1) *
           layer.pairs() * layer.n_out;
}

/// Parameters per main-term FLOP relative to a linear layer: (G+1)^2 / 2.
inline double param_ratio_vs_linear(int G) {
    if (G < 1) throw std::invalid_argument("param_ratio_vs_linear: G must be >= 1");
    return static_cast<double>(G + 1) * (G + 1) / 2.0;
}

/// Main-term FLOPs of one block. An unabsorbed linear branch adds its own
/// n_in * n_out (relu_last stays at 3x a linear layer; relu_first drops to
/// 2x after fusion).
inline std::uint64_t block_main_term_flops(const Block& block) {
    if (const auto* k = std::get_if<LmKanBlock>(&block)) {
        std::uint64_t f = flops_main_term(k->pre.layer.n_in, k->pre.layer.n_out);
        if (k->pre.mode != PrecondMode::none)
            f += static_cast<std::uint64_t>(k->pre.layer.n_in) * k->pre.layer.n_out;
        return f;
    }
    if (const auto* m = std::get_if<MlpBlock>(&block))
        return static_cast<std::uint64_t>(m->lin.n_in) * m->lin.n_out;
    return 0;  // standalone batch norm is an O(N) term
}

inline std::uint64_t model_main_term_flops(const Model& model) {
    std::uint64_t f = 0;
    for (const auto& b : model.blocks) f += block_main_term_flops(b);
    return f;
}

/// Trainable parameter count of one block (biases and affine BN included;
/// lookup layers carry no bias, their constants live in the coefficients).
inline std::uint64_t block_param_count(const Block& block) {
    if (const auto* k = std::get_if<LmKanBlock>(&block)) {
        std::uint64_t n = param_count(k->pre.layer);
        if (k->pre.mode != PrecondMode::none)
            n += k->pre.lin.W.size() + k->pre.lin.b.size();
        if (k->bn && k->bn->affine) n += 2 * static_cast<std::uint64_t>(k->bn->dim);
        return n;
    }
    if (const auto* m = std::get_if<MlpBlock>(&block)) {
        std::uint64_t n = m->lin.W.size() + m->lin.b.size();
        if (m->bn && m->bn->affine) n += 2 * static_cast<std::uint64_t>(m->bn->dim);
        return n;
    }
    const auto& s = std::get<BnBlock>(block);
    return s.bn.affine ? 2 * static_cast<std::uint64_t>(s.bn.dim) : 0;
}

inline std::uint64_t model_param_count(const Model& model) {
    std::uint64_t n = 0;
    for (const auto& b : model.blocks) n += block_param_count(b);
    return n;
}

/// Main-term FLOPs of a dense network in_dim -> width x n_hidden -> out_dim.
inline std::uint64_t mlp_main_term_flops(int in_dim, int out_dim, int width, int n_hidden) {
    std::uint64_t f = static_cast<std::uint64_t>(in_dim) * width;
    for (int i = 1; i < n_hidden; ++i) f += static_cast<std::uint64_t>(width) * width;
    f += static_cast<std::uint64_t>(width) * out_dim;
    return f;
}

/// Width of the dense baseline whose main-term FLOPs are closest to the
/// target (ties resolved toward the wider, i.e. more generous, baseline).
inline int matched_mlp_width(int in_dim, int out_dim, int n_hidden, std::uint64_t target_flops) {
    int best = 1;
    std::uint64_t best_diff = UINT64_MAX;
    for (int w = 1;; ++w) {
        const std::uint64_t f = mlp_main_term_flops(in_dim, out_dim, w, n_hidden);
        const std::uint64_t diff = f > target_flops ? f - target_flops : target_flops - f;
        if (diff <= best_diff) {
            best = w;
            best_diff = diff;
        }
        if (f >= target_flops) break;
    }
    return best;
}

}  // namespace lmkan
