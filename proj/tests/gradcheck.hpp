#pragma once

// Central finite-difference oracle for gradient checks. Evaluates the loss
// with autodiff disabled on the parameter, so the numeric side stays
// independent of the tape machinery it is checking.

#include <cmath>
#include <functional>
#include <vector>

#include "advdet/tensor.hpp"

namespace gradcheck {

using LossFn = std::function<float()>;

inline std::vector<double> numeric_grad(advdet::Tensor& param, const LossFn& loss,
                                        float step = 1e-3f) {
    const bool saved = param.requires_grad();
    param.set_requires_grad(false);
    std::vector<double> g(param.numel());
    auto data = param.data();
    for (int64_t i = 0; i < param.numel(); ++i) {
        const float orig = data[i];
        data[i] = orig + step;
        const double hi = loss();
        data[i] = orig - step;
        const double lo = loss();
        data[i] = orig;
        g[i] = (hi - lo) / (2.0 * step);
    }
    param.set_requires_grad(saved);
    return g;
}

// |a - n| <= abs_tol + rel_tol * max(|a|, |n|), elementwise.
inline bool grads_close(std::span<const float> autodiff, const std::vector<double>& numeric,
                        double rel_tol = 1e-3, double abs_tol = 1e-5,
                        double* worst = nullptr) {
    bool ok = true;
    double w = 0.0;
    for (size_t i = 0; i < numeric.size(); ++i) {
        const double a = autodiff[i], n = numeric[i];
        const double err = std::abs(a - n);
        const double bound = abs_tol + rel_tol * std::max(std::abs(a), std::abs(n));
        w = std::max(w, err - bound);
        if (err > bound) ok = false;
    }
    if (worst) *worst = w;
    return ok;
}

} // namespace gradcheck
