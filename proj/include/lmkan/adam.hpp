#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "lmkan/model.hpp"

namespace lmkan {

/// Standard bias-corrected Adam over the model's parameter tensors. Moment
/// buffers are laid out per tensor in for_each_param order.
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double lr = 1e-3;
    long step = 0;
    std::vector<std::vector<double>> m;  // first moments, one per tensor
    std::vector<std::vector<double>> v;  // second moments
};

inline AdamState make_adam(Model& model, ModelGrads& grads, double lr = 1e-3,
                           double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8) {
    AdamState st;
    st.lr = lr;
    st.beta1 = beta1;
    st.beta2 = beta2;
    st.epsilon = epsilon;
    for_each_param(model, grads, [&](const ParamRef& p) {
        st.m.emplace_back(p.size, 0.0);
        st.v.emplace_back(p.size, 0.0);
    });
    return st;
}

inline void adam_step(AdamState& st, Model& model, ModelGrads& grads) {
    st.step++;
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    std::size_t t = 0;
    for_each_param(model, grads, [&](const ParamRef& p) {
        if (t >= st.m.size() || st.m[t].size() != p.size)
            throw std::invalid_argument("adam_step: moment buffers do not match parameters");
        double* m = st.m[t].data();
        double* v = st.v[t].data();
        for (std::size_t i = 0; i < p.size; ++i) {
            const double g = p.grad[i];
            m[i] = st.beta1 * m[i] + (1.0 - st.beta1) * g;
            v[i] = st.beta2 * v[i] + (1.0 - st.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p.value[i] -= st.lr * mhat / (std::sqrt(vhat) + st.epsilon);
        }
        ++t;
    });
}

}  // namespace lmkan
