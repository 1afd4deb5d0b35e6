#pragma once

#include <cmath>

#include "lmkan/errors.hpp"
#include "lmkan/model.hpp"

namespace lmkan {

/// Absorb the linear branch and gamma of a preconditioned block into a single
/// lookup layer with gamma = 1.
///
/// relu_first requires even G: ReLU kinks at the origin, which is a grid node
/// exactly when G is even, so ReLU(x) is representable on the grid and the
/// absorption is exact for every input, tails included. The branch bias is
/// spread uniformly over the n_in/2 functions feeding each output (any split
/// sums to the same value). `linear` branches absorb on any grid; `none`
/// just folds gamma. relu_last cannot be absorbed.
inline LmKanLayer fuse_relu_first(const PrecondBlock& block) {
    const LmKanLayer& src = block.layer;
    if (block.mode == PrecondMode::relu_last)
        throw FusionError("fuse_relu_first: relu_last branches cannot be absorbed");
    if (block.mode == PrecondMode::relu_first && src.grid.G % 2 != 0)
        throw FusionError("fuse_relu_first: G must be even so that 0 is a grid node");

    LmKanLayer out = src;
    out.gamma = 1.0;
    const int G = src.grid.G;
    const int pairs = src.pairs();
    const double bias_share = 1.0 / static_cast<double>(pairs);
    const bool relu = block.mode == PrecondMode::relu_first;
    for (int i1 = 0; i1 <= G; ++i1) {
        const double g1 = src.grid.points[i1];
        const double v1 = relu ? (g1 > 0.0 ? g1 : 0.0) : g1;
        for (int i2 = 0; i2 <= G; ++i2) {
            const double g2 = src.grid.points[i2];
            const double v2 = relu ? (g2 > 0.0 ? g2 : 0.0) : g2;
            for (int p = 0; p < pairs; ++p) {
                const double* sp = src.node_slice(i1, i2, p);
                double* op = out.node_slice(i1, i2, p);
                if (block.mode == PrecondMode::none) {
                    for (int q = 0; q < src.n_out; ++q) op[q] = src.gamma * sp[q];
                } else {
                    for (int q = 0; q < src.n_out; ++q)
                        op[q] = src.gamma * sp[q] + block.lin.W(q, 2 * p) * v1 +
                                block.lin.W(q, 2 * p + 1) * v2 + block.lin.b[q] * bias_share;
                }
            }
        }
    }
    return out;
}

/// Absorb an inference-mode output batch norm into the layer coefficients:
/// every sheet feeding output q is divided by s_q = sqrt(var_q + eps) and
/// shifted by its share of -mean_q / s_q. Exact for all inputs by partition
/// of unity.
inline LmKanLayer fuse_output_batchnorm(const LmKanLayer& layer, const BatchNorm& bn) {
    if (bn.dim != layer.n_out)
        throw FusionError("fuse_output_batchnorm: batch norm width does not match layer output");
    if (bn.batches_seen <= 0)
        throw FusionError("fuse_output_batchnorm: running statistics never populated");
    const int G = layer.grid.G;
    const int pairs = layer.pairs();
    LmKanLayer out = layer;
    std::vector<double> inv_s(layer.n_out), offset(layer.n_out);
    for (int q = 0; q < layer.n_out; ++q) {
        const double s = std::sqrt(bn.running_var[q] + bn.epsilon);
        const double scale = bn.affine ? bn.scale[q] / s : 1.0 / s;
        inv_s[q] = scale;
        const double shift = bn.affine ? bn.shift[q] : 0.0;
        offset[q] = (shift - bn.running_mean[q] * scale) / static_cast<double>(pairs);
    }
    for (int i1 = 0; i1 <= G; ++i1)
        for (int i2 = 0; i2 <= G; ++i2)
            for (int p = 0; p < pairs; ++p) {
                double* op = out.node_slice(i1, i2, p);
                for (int q = 0; q < layer.n_out; ++q) op[q] = op[q] * inv_s[q] + offset[q];
            }
    return out;
}

/// Fold an inference-mode batch norm into the preceding dense layer:
/// W' = diag(scale/s) W, b' = scale (b - mean)/s + shift.
inline Linear fold_mlp_batchnorm(const Linear& lin, const BatchNorm& bn) {
    if (bn.dim != lin.n_out)
        throw FusionError("fold_mlp_batchnorm: batch norm width does not match layer output");
    if (bn.batches_seen <= 0)
        throw FusionError("fold_mlp_batchnorm: running statistics never populated");
    Linear out = lin;
    for (int q = 0; q < lin.n_out; ++q) {
        const double s = std::sqrt(bn.running_var[q] + bn.epsilon);
        const double scale = (bn.affine ? bn.scale[q] : 1.0) / s;
        for (int j = 0; j < lin.n_in; ++j) out.W(q, j) = lin.W(q, j) * scale;
        out.b[q] = (lin.b[q] - bn.running_mean[q]) * scale + (bn.affine ? bn.shift[q] : 0.0);
    }
    return out;
}

/// Fuse a whole model for inference. Lookup blocks become pure layers
/// (mode none, gamma 1, no batch norm); dense blocks get their batch norms
/// folded into the weights. relu_last blocks propagate FusionError unless
/// allow_partial is set, in which case only gamma and the output batch norm
/// are absorbed and the linear branch is kept.
inline Model fuse_model(const Model& model, bool allow_partial = false) {
    Model out;
    out.blocks.reserve(model.blocks.size());
    for (const auto& block : model.blocks) {
        if (const auto* k = std::get_if<LmKanBlock>(&block)) {
            if (k->pre.mode == PrecondMode::relu_last) {
                if (!allow_partial)
                    throw FusionError("fuse_model: relu_last block cannot be fully absorbed");
                PrecondBlock pb = k->pre;
                for (double& v : pb.layer.P) v *= pb.layer.gamma;
                pb.layer.gamma = 1.0;
                if (k->bn) {
                    // keep the batch norm separate: it acts after the ReLU branch
                    out.blocks.push_back(LmKanBlock{std::move(pb), k->bn});
                } else {
                    out.blocks.push_back(LmKanBlock{std::move(pb), std::nullopt});
                }
                continue;
            }
            LmKanLayer fused = fuse_relu_first(k->pre);
            if (k->bn) fused = fuse_output_batchnorm(fused, *k->bn);
            out.blocks.push_back(LmKanBlock{PrecondBlock{std::move(fused), PrecondMode::none, {}},
                                            std::nullopt});
        } else if (const auto* m = std::get_if<MlpBlock>(&block)) {
            MlpBlock fused;
            fused.lin = m->bn ? fold_mlp_batchnorm(m->lin, *m->bn) : m->lin;
            fused.bn = std::nullopt;
            fused.act = m->act;
            out.blocks.push_back(std::move(fused));
        } else {
            // standalone input standardization stays; it is an O(N) term
            out.blocks.push_back(block);
        }
    }
    return out;
}

}  // namespace lmkan
