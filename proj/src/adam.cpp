#include "advdet/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace advdet {

namespace {
void step_one(std::span<float> p, std::span<const float> g,
              std::vector<float>& m, std::vector<float>& v,
              const AdamState& s, float lr) {
    const float b1 = s.beta1, b2 = s.beta2;
    const float bc1 = 1.0f - std::pow(b1, static_cast<float>(s.step_count));
    const float bc2 = 1.0f - std::pow(b2, static_cast<float>(s.step_count));
    for (size_t i = 0; i < p.size(); ++i) {
        m[i] = b1 * m[i] + (1.0f - b1) * g[i];
        v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
        const float mhat = m[i] / bc1;
        const float vhat = v[i] / bc2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + s.eps);
    }
}
} // namespace

void adam_step(std::span<Tensor> params, std::span<const Tensor> grads,
               AdamState& state, float lr) {
    if (lr <= 0.0f) throw std::invalid_argument("adam_step: lr must be positive");
    if (params.size() != grads.size())
        throw std::invalid_argument("adam_step: params/grads count mismatch");
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i) {
            state.m[i].assign(params[i].numel(), 0.0f);
            state.v[i].assign(params[i].numel(), 0.0f);
        }
    }
    if (state.m.size() != params.size())
        throw std::invalid_argument("adam_step: state does not match parameter count");
    for (size_t i = 0; i < params.size(); ++i) {
        if (params[i].shape() != grads[i].shape())
            throw std::invalid_argument("adam_step: param " + shape_str(params[i].shape()) +
                                        " vs grad " + shape_str(grads[i].shape()));
        if (state.m[i].size() != static_cast<size_t>(params[i].numel()))
            throw std::invalid_argument("adam_step: state shape mismatch at parameter " +
                                        std::to_string(i));
    }
    ++state.step_count;
    for (size_t i = 0; i < params.size(); ++i)
        step_one(params[i].data(), grads[i].data(), state.m[i], state.v[i], state, lr);
}

void adam_step_inplace(std::span<Tensor> params, AdamState& state, float lr) {
    if (lr <= 0.0f) throw std::invalid_argument("adam_step: lr must be positive");
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i) {
            state.m[i].assign(params[i].numel(), 0.0f);
            state.v[i].assign(params[i].numel(), 0.0f);
        }
    }
    if (state.m.size() != params.size())
        throw std::invalid_argument("adam_step: state does not match parameter count");
    ++state.step_count;
    for (size_t i = 0; i < params.size(); ++i) {
        if (state.m[i].size() != static_cast<size_t>(params[i].numel()))
            throw std::invalid_argument("adam_step: state shape mismatch at parameter " +
                                        std::to_string(i));
        step_one(params[i].data(), params[i].grad(), state.m[i], state.v[i], state, lr);
        params[i].zero_grad();
    }
}

} // namespace advdet
