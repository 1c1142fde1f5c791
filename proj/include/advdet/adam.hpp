#pragma once

#include <span>
#include <vector>

#include "advdet/tensor.hpp"

namespace advdet {

// First/second moment accumulators, one pair per parameter, in parameter
// order. Created empty; shapes are fixed on the first step.
struct AdamState {
    int64_t step_count = 0;
    std::vector<std::vector<float>> m;
    std::vector<std::vector<float>> v;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
};

// One Adam update over matched (params, grads) lists; state is advanced by
// one step. Rejects any shape mismatch between params, grads, and state.
void adam_step(std::span<Tensor> params, std::span<const Tensor> grads,
               AdamState& state, float lr);

// Convenience wrapper that consumes the gradients accumulated on the
// parameters themselves and zeroes them afterwards.
void adam_step_inplace(std::span<Tensor> params, AdamState& state, float lr);

} // namespace advdet
