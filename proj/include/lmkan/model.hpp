#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "lmkan/batchnorm.hpp"
#include "lmkan/hessian.hpp"
#include "lmkan/layer.hpp"
#include "lmkan/linear.hpp"
#include "lmkan/matrix.hpp"

namespace lmkan {

/// Preconditioning of a lookup layer with an additive linear branch:
///   relu_first : y = gamma * lmKAN(x) + Linear(ReLU(x))
///   relu_last  : y = gamma * lmKAN(x) + ReLU(Linear(x))
///   linear     : y = gamma * lmKAN(x) + Linear(x)
///   none       : y = gamma * lmKAN(x)   (pure lookup; fused models)
/// Under the relu-first scheme the first layer of a network carries the
/// `linear` variant (no ReLU on the raw inputs); under relu-last the last
/// layer does.
enum class PrecondMode { relu_first, relu_last, linear, none };

inline const char* to_string(PrecondMode m) {
    switch (m) {
        case PrecondMode::relu_first: return "relu_first";
        case PrecondMode::relu_last: return "relu_last";
        case PrecondMode::linear: return "linear";
        case PrecondMode::none: return "none";
    }
    return "?";
}

inline PrecondMode precond_mode_from_string(const std::string& s) {
    if (s == "relu_first") return PrecondMode::relu_first;
    if (s == "relu_last") return PrecondMode::relu_last;
    if (s == "linear") return PrecondMode::linear;
    if (s == "none") return PrecondMode::none;
    throw std::invalid_argument("unknown precond mode: " + s);
}

struct PrecondBlock {
    LmKanLayer layer;
    PrecondMode mode = PrecondMode::none;
    Linear lin;  // unused when mode == none
};

struct PrecondCache {
    Matrix input;
    Matrix branch_in;   // relu_first: ReLU(X)
    Matrix branch_pre;  // relu_last: Linear(X) before ReLU
};

inline void precond_forward(const PrecondBlock& block, const Matrix& X, Matrix& Y,
                            PrecondCache* cache = nullptr, std::size_t workers = 0) {
    require_width(X, block.layer.n_in, "precond_forward");
    lmkan_forward(block.layer, X, Y, workers);
    if (block.mode == PrecondMode::none) {
        if (cache) cache->input = X;
        return;
    }
    Matrix branch;
    switch (block.mode) {
        case PrecondMode::relu_first: {
            Matrix rx(X.rows(), X.cols());
            for (std::size_t i = 0; i < X.size(); ++i)
                rx.data()[i] = X.data()[i] > 0.0 ? X.data()[i] : 0.0;
            linear_forward(block.lin, rx, branch, workers);
            if (cache) cache->branch_in = std::move(rx);
            break;
        }
        case PrecondMode::relu_last: {
            linear_forward(block.lin, X, branch, workers);
            if (cache) cache->branch_pre = branch;
            for (std::size_t i = 0; i < branch.size(); ++i)
                if (branch.data()[i] < 0.0) branch.data()[i] = 0.0;
            break;
        }
        case PrecondMode::linear:
            linear_forward(block.lin, X, branch, workers);
            break;
        case PrecondMode::none: break;
    }
    for (std::size_t i = 0; i < Y.size(); ++i) Y.data()[i] += branch.data()[i];
    if (cache) cache->input = X;
}

struct PrecondGrads {
    std::vector<double> dP;
    Matrix dW;
    std::vector<double> db;
};

inline PrecondGrads make_precond_grads(const PrecondBlock& block) {
    PrecondGrads g;
    g.dP.assign(block.layer.P.size(), 0.0);
    if (block.mode != PrecondMode::none) {
        g.dW = Matrix(block.lin.n_out, block.lin.n_in);
        g.db.assign(block.lin.n_out, 0.0);
    }
    return g;
}

inline void precond_backward(const PrecondBlock& block, const PrecondCache& cache,
                             const Matrix& dY, PrecondGrads& grads, Matrix* dX,
                             std::size_t workers = 0) {
    lmkan_backward(block.layer, cache.input, dY, grads.dP, dX, workers);
    if (block.mode == PrecondMode::none) return;
    Matrix dBranchIn;
    switch (block.mode) {
        case PrecondMode::relu_first: {
            linear_backward(block.lin, cache.branch_in, dY, grads.dW, grads.db, dX ? &dBranchIn : nullptr);
            if (dX)
                for (std::size_t i = 0; i < dX->size(); ++i)
                    dX->data()[i] += cache.input.data()[i] > 0.0 ? dBranchIn.data()[i] : 0.0;
            break;
        }
        case PrecondMode::relu_last: {
            Matrix masked = dY;
            for (std::size_t i = 0; i < masked.size(); ++i)
                if (cache.branch_pre.data()[i] <= 0.0) masked.data()[i] = 0.0;
            linear_backward(block.lin, cache.input, masked, grads.dW, grads.db, dX ? &dBranchIn : nullptr);
            if (dX)
                for (std::size_t i = 0; i < dX->size(); ++i) dX->data()[i] += dBranchIn.data()[i];
            break;
        }
        case PrecondMode::linear: {
            linear_backward(block.lin, cache.input, dY, grads.dW, grads.db, dX ? &dBranchIn : nullptr);
            if (dX)
                for (std::size_t i = 0; i < dX->size(); ++i) dX->data()[i] += dBranchIn.data()[i];
            break;
        }
        case PrecondMode::none: break;
    }
}

// ---------------------------------------------------------------------------
// Whole-network blocks
// ---------------------------------------------------------------------------

enum class Activation { none, relu, tanh_ };

inline const char* to_string(Activation a) {
    switch (a) {
        case Activation::none: return "none";
        case Activation::relu: return "relu";
        case Activation::tanh_: return "tanh";
    }
    return "?";
}

inline Activation activation_from_string(const std::string& s) {
    if (s == "none") return Activation::none;
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh_;
    throw std::invalid_argument("unknown activation: " + s);
}

/// Lookup block per the student layout: preconditioned lmKAN layer followed
/// by an optional affine-free batch norm.
struct LmKanBlock {
    PrecondBlock pre;
    std::optional<BatchNorm> bn;
};

/// Dense block: Linear -> optional BatchNorm -> optional activation.
struct MlpBlock {
    Linear lin;
    std::optional<BatchNorm> bn;
    Activation act = Activation::none;
};

/// Standalone batch norm, used for optional input standardization.
struct BnBlock {
    BatchNorm bn;
};

using Block = std::variant<LmKanBlock, MlpBlock, BnBlock>;

inline int block_in_dim(const Block& b) {
    if (const auto* k = std::get_if<LmKanBlock>(&b)) return k->pre.layer.n_in;
    if (const auto* m = std::get_if<MlpBlock>(&b)) return m->lin.n_in;
    return std::get<BnBlock>(b).bn.dim;
}

inline int block_out_dim(const Block& b) {
    if (const auto* k = std::get_if<LmKanBlock>(&b)) return k->pre.layer.n_out;
    if (const auto* m = std::get_if<MlpBlock>(&b)) return m->lin.n_out;
    return std::get<BnBlock>(b).bn.dim;
}

struct Model {
    std::vector<Block> blocks;

    int in_dim() const { return blocks.empty() ? 0 : block_in_dim(blocks.front()); }
    int out_dim() const { return blocks.empty() ? 0 : block_out_dim(blocks.back()); }
};

struct BlockCache {
    PrecondCache pre;
    BatchNormCache bn;
    Matrix mlp_input;
    Matrix pre_act;  // value entering the activation (post-BN)
    Matrix act_out;  // tanh output, kept for its derivative
};

struct Tape {
    std::vector<BlockCache> blocks;
};

struct BlockGrads {
    PrecondGrads pre;           // lmKAN blocks
    Matrix dW;                  // MLP blocks
    std::vector<double> db;
    std::vector<double> dscale;  // affine BN only
    std::vector<double> dshift;
};

struct ModelGrads {
    std::vector<BlockGrads> blocks;
};

inline ModelGrads make_grads(const Model& model) {
    ModelGrads g;
    g.blocks.resize(model.blocks.size());
    for (std::size_t b = 0; b < model.blocks.size(); ++b) {
        if (const auto* k = std::get_if<LmKanBlock>(&model.blocks[b])) {
            g.blocks[b].pre = make_precond_grads(k->pre);
            if (k->bn && k->bn->affine) {
                g.blocks[b].dscale.assign(k->bn->dim, 0.0);
                g.blocks[b].dshift.assign(k->bn->dim, 0.0);
            }
        } else if (const auto* m = std::get_if<MlpBlock>(&model.blocks[b])) {
            g.blocks[b].dW = Matrix(m->lin.n_out, m->lin.n_in);
            g.blocks[b].db.assign(m->lin.n_out, 0.0);
            if (m->bn && m->bn->affine) {
                g.blocks[b].dscale.assign(m->bn->dim, 0.0);
                g.blocks[b].dshift.assign(m->bn->dim, 0.0);
            }
        } else {
            const auto& s = std::get<BnBlock>(model.blocks[b]);
            if (s.bn.affine) {
                g.blocks[b].dscale.assign(s.bn.dim, 0.0);
                g.blocks[b].dshift.assign(s.bn.dim, 0.0);
            }
        }
    }
    return g;
}

inline void zero_grads(ModelGrads& g) {
    for (auto& b : g.blocks) {
        std::fill(b.pre.dP.begin(), b.pre.dP.end(), 0.0);
        b.pre.dW.fill(0.0);
        std::fill(b.pre.db.begin(), b.pre.db.end(), 0.0);
        b.dW.fill(0.0);
        std::fill(b.db.begin(), b.db.end(), 0.0);
        std::fill(b.dscale.begin(), b.dscale.end(), 0.0);
        std::fill(b.dshift.begin(), b.dshift.end(), 0.0);
    }
}

/// Forward through the whole model. BN layers update running stats when
/// training is true; pass a tape to enable backward().
inline Matrix model_forward(Model& model, const Matrix& X, bool training, Tape* tape = nullptr,
                            std::size_t workers = 0) {
    if (tape) tape->blocks.resize(model.blocks.size());
    Matrix cur = X;
    for (std::size_t b = 0; b < model.blocks.size(); ++b) {
        BlockCache* cache = tape ? &tape->blocks[b] : nullptr;
        if (auto* k = std::get_if<LmKanBlock>(&model.blocks[b])) {
            Matrix y;
            precond_forward(k->pre, cur, y, cache ? &cache->pre : nullptr, workers);
            if (k->bn) {
                Matrix z;
                batchnorm_forward(*k->bn, y, z, training, cache ? &cache->bn : nullptr);
                cur = std::move(z);
            } else {
                cur = std::move(y);
            }
        } else if (auto* m = std::get_if<MlpBlock>(&model.blocks[b])) {
            if (cache) cache->mlp_input = cur;
            Matrix y;
            linear_forward(m->lin, cur, y, workers);
            if (m->bn) {
                Matrix z;
                batchnorm_forward(*m->bn, y, z, training, cache ? &cache->bn : nullptr);
                y = std::move(z);
            }
            if (cache) cache->pre_act = y;
            if (m->act == Activation::relu) {
                for (std::size_t i = 0; i < y.size(); ++i)
                    if (y.data()[i] < 0.0) y.data()[i] = 0.0;
            } else if (m->act == Activation::tanh_) {
                for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] = std::tanh(y.data()[i]);
                if (cache) cache->act_out = y;
            }
            cur = std::move(y);
        } else {
            auto& s = std::get<BnBlock>(model.blocks[b]);
            Matrix y;
            batchnorm_forward(s.bn, cur, y, training, cache ? &cache->bn : nullptr);
            cur = std::move(y);
        }
    }
    return cur;
}

/// Inference-only forward (running-stat batch norms, no mutation).
inline Matrix model_infer(const Model& model, const Matrix& X, std::size_t workers = 0) {
    return model_forward(const_cast<Model&>(model), X, /*training=*/false, nullptr, workers);
}

/// Reverse pass over a recorded tape. Parameter gradients are accumulated
/// into grads; pass dX0 to also get the gradient with respect to the inputs.
inline void model_backward(Model& model, const Tape& tape, const Matrix& dY, ModelGrads& grads,
                           Matrix* dX0 = nullptr, std::size_t workers = 0) {
    Matrix cur = dY;
    for (std::size_t bi = model.blocks.size(); bi-- > 0;) {
        const BlockCache& cache = tape.blocks[bi];
        BlockGrads& bg = grads.blocks[bi];
        const bool need_dx = bi > 0 || dX0 != nullptr;
        if (auto* k = std::get_if<LmKanBlock>(&model.blocks[bi])) {
            Matrix d = cur;
            if (k->bn) {
                Matrix dpre;
                batchnorm_backward(*k->bn, cache.bn, cur, dpre,
                                   bg.dscale.empty() ? nullptr : &bg.dscale,
                                   bg.dshift.empty() ? nullptr : &bg.dshift);
                d = std::move(dpre);
            }
            Matrix dx;
            precond_backward(k->pre, cache.pre, d, bg.pre, need_dx ? &dx : nullptr, workers);
            cur = std::move(dx);
        } else if (auto* m = std::get_if<MlpBlock>(&model.blocks[bi])) {
            Matrix d = cur;
            if (m->act == Activation::relu) {
                for (std::size_t i = 0; i < d.size(); ++i)
                    if (cache.pre_act.data()[i] <= 0.0) d.data()[i] = 0.0;
            } else if (m->act == Activation::tanh_) {
                for (std::size_t i = 0; i < d.size(); ++i) {
                    const double t = cache.act_out.data()[i];
                    d.data()[i] *= 1.0 - t * t;
                }
            }
            if (m->bn) {
                Matrix dpre;
                batchnorm_backward(*m->bn, cache.bn, d, dpre,
                                   bg.dscale.empty() ? nullptr : &bg.dscale,
                                   bg.dshift.empty() ? nullptr : &bg.dshift);
                d = std::move(dpre);
            }
            Matrix dx;
            linear_backward(m->lin, cache.mlp_input, d, bg.dW, bg.db, need_dx ? &dx : nullptr);
            cur = std::move(dx);
        } else {
            auto& s = std::get<BnBlock>(model.blocks[bi]);
            Matrix dx;
            batchnorm_backward(s.bn, cache.bn, cur, dx,
                               bg.dscale.empty() ? nullptr : &bg.dscale,
                               bg.dshift.empty() ? nullptr : &bg.dshift);
            cur = std::move(dx);
        }
    }
    if (dX0) *dX0 = std::move(cur);
}

// ---------------------------------------------------------------------------
// Parameter enumeration (single source of ordering for the optimizer)
// ---------------------------------------------------------------------------

struct ParamRef {
    double* value;
    double* grad;
    std::size_t size;
};

template <class F>
inline void for_each_param(Model& model, ModelGrads& grads, F&& fn) {
    for (std::size_t b = 0; b < model.blocks.size(); ++b) {
        BlockGrads& bg = grads.blocks[b];
        if (auto* k = std::get_if<LmKanBlock>(&model.blocks[b])) {
            fn(ParamRef{k->pre.layer.P.data(), bg.pre.dP.data(), k->pre.layer.P.size()});
            if (k->pre.mode != PrecondMode::none) {
                fn(ParamRef{k->pre.lin.W.data(), bg.pre.dW.data(), k->pre.lin.W.size()});
                fn(ParamRef{k->pre.lin.b.data(), bg.pre.db.data(), k->pre.lin.b.size()});
            }
            if (k->bn && k->bn->affine) {
                fn(ParamRef{k->bn->scale.data(), bg.dscale.data(), k->bn->scale.size()});
                fn(ParamRef{k->bn->shift.data(), bg.dshift.data(), k->bn->shift.size()});
            }
        } else if (auto* m = std::get_if<MlpBlock>(&model.blocks[b])) {
            fn(ParamRef{m->lin.W.data(), bg.dW.data(), m->lin.W.size()});
            fn(ParamRef{m->lin.b.data(), bg.db.data(), m->lin.b.size()});
            if (m->bn && m->bn->affine) {
                fn(ParamRef{m->bn->scale.data(), bg.dscale.data(), m->bn->scale.size()});
                fn(ParamRef{m->bn->shift.data(), bg.dshift.data(), m->bn->shift.size()});
            }
        } else {
            auto& s = std::get<BnBlock>(model.blocks[b]);
            if (s.bn.affine) {
                fn(ParamRef{s.bn.scale.data(), bg.dscale.data(), s.bn.scale.size()});
                fn(ParamRef{s.bn.shift.data(), bg.dshift.data(), s.bn.shift.size()});
            }
        }
    }
}

inline std::size_t total_param_count(const Model& model) {
    std::size_t n = 0;
    for (const auto& block : model.blocks) {
        if (const auto* k = std::get_if<LmKanBlock>(&block)) {
            n += k->pre.layer.P.size();
            if (k->pre.mode != PrecondMode::none) n += k->pre.lin.W.size() + k->pre.lin.b.size();
            if (k->bn && k->bn->affine) n += 2 * static_cast<std::size_t>(k->bn->dim);
        } else if (const auto* m = std::get_if<MlpBlock>(&block)) {
            n += m->lin.W.size() + m->lin.b.size();
            if (m->bn && m->bn->affine) n += 2 * static_cast<std::size_t>(m->bn->dim);
        } else {
            const auto& s = std::get<BnBlock>(block);
            if (s.bn.affine) n += 2 * static_cast<std::size_t>(s.bn.dim);
        }
    }
    return n;
}

// ---------------------------------------------------------------------------
// Hessian penalty over a whole model
// ---------------------------------------------------------------------------

/// Unscaled sum of per-sheet curvature penalties over all lookup layers.
inline double model_penalty_sum(const Model& model) {
    double sum = 0.0;
    for (const auto& block : model.blocks) {
        const auto* k = std::get_if<LmKanBlock>(&block);
        if (!k) continue;
        const LmKanLayer& layer = k->pre.layer;
        const detail::StencilAxis ax = detail::make_stencil_axis(layer.grid);
        Func2D sheet(layer.grid.G);
        for (int p = 0; p < layer.pairs(); ++p)
            for (int q = 0; q < layer.n_out; ++q) {
                for (int i1 = 0; i1 <= layer.grid.G; ++i1)
                    for (int i2 = 0; i2 <= layer.grid.G; ++i2)
                        sheet.at(i1, i2) = layer.node_slice(i1, i2, p)[q];
                sum += detail::penalty_core(ax, layer.grid.G, sheet.coeffs.data());
            }
    }
    return sum;
}

/// lambda * sum of sheet penalties: the additive loss contribution.
inline double model_penalty(const Model& model, double lambda) {
    return lambda == 0.0 ? 0.0 : lambda * model_penalty_sum(model);
}

/// Accumulate lambda * d(penalty sum)/dP into the gradient buffers.
inline void add_model_penalty_grad(const Model& model, ModelGrads& grads, double lambda) {
    if (lambda == 0.0) return;
    for (std::size_t b = 0; b < model.blocks.size(); ++b) {
        const auto* k = std::get_if<LmKanBlock>(&model.blocks[b]);
        if (!k) continue;
        const LmKanLayer& layer = k->pre.layer;
        const int G = layer.grid.G;
        const detail::StencilAxis ax = detail::make_stencil_axis(layer.grid);
        Func2D sheet(G), gsheet(G);
        for (int p = 0; p < layer.pairs(); ++p)
            for (int q = 0; q < layer.n_out; ++q) {
                for (int i1 = 0; i1 <= G; ++i1)
                    for (int i2 = 0; i2 <= G; ++i2)
                        sheet.at(i1, i2) = layer.node_slice(i1, i2, p)[q];
                std::fill(gsheet.coeffs.begin(), gsheet.coeffs.end(), 0.0);
                detail::penalty_grad_accum(ax, G, sheet.coeffs.data(), gsheet.coeffs.data(), lambda);
                double* dP = grads.blocks[b].pre.dP.data();
                const std::size_t per_node = static_cast<std::size_t>(layer.pairs()) * layer.n_out;
                for (int i1 = 0; i1 <= G; ++i1)
                    for (int i2 = 0; i2 <= G; ++i2)
                        dP[(static_cast<std::size_t>(i1) * (G + 1) + i2) * per_node +
                           static_cast<std::size_t>(p) * layer.n_out + q] += gsheet.at(i1, i2);
            }
    }
}

}  // namespace lmkan
