#pragma once

#include <functional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "advdet/tensor.hpp"

namespace advdet {

// Reverse-mode autodiff over a linear tape. Ops append nodes in execution
// order (inputs always precede their consumers); backward() walks the tape in
// reverse and accumulates gradients into every tensor that requires them.
//
// A tape is single-threaded. Tensors with requires_grad=false are never
// written to and may be shared across tapes on different threads.
class Tape {
public:
    // Elementwise, with numpy-style broadcasting.
    Tensor add(const Tensor& a, const Tensor& b);
    Tensor sub(const Tensor& a, const Tensor& b);
    Tensor mul(const Tensor& a, const Tensor& b);
    Tensor max_elementwise(const Tensor& a, const Tensor& b);

    Tensor matmul(const Tensor& a, const Tensor& b);

    // NHWC input, (kh, kw, ci, co) kernel, optional bias of length co
    // (pass an undefined Tensor for none), symmetric zero padding.
    Tensor conv2d(const Tensor& in, const Tensor& kernel, const Tensor& bias,
                  int stride, int padding);

    Tensor relu(const Tensor& x);
    Tensor maxpool2d(const Tensor& x, int window_h, int window_w,
                     int stride_h, int stride_w);

    // Reductions over all elements, to a scalar.
    Tensor sum(const Tensor& x);
    Tensor mean(const Tensor& x);

    // Softmax over the last axis; rank 1 or 2.
    Tensor softmax(const Tensor& x);

    Tensor log(const Tensor& x);
    Tensor exp(const Tensor& x);
    Tensor square(const Tensor& x);
    Tensor clamp(const Tensor& x, float lo, float hi);

    // Zero padding; one (before, after) pair per axis.
    Tensor pad(const Tensor& x, const std::vector<std::pair<int, int>>& widths);

    // Resample a (h, w, c) image at grid (h, w, 2) source coordinates
    // (row, col) in pixel units, zero outside. Differentiable in the image;
    // the grid must not require gradients.
    Tensor bilinear_sample(const Tensor& img, const Tensor& grid);

    Tensor reshape(const Tensor& x, Shape new_shape);

    // Uniform quantization to 2^bits levels with a straight-through backward.
    Tensor bit_quantize(const Tensor& x, int bits);

    // Name-based dispatcher over the primitive vocabulary; rejects unknown
    // kinds. Ops with parameters use their defaults (conv2d stride 1 / pad 0,
    // maxpool2d 2x2 stride 2, clamp [0,1], pad 1 per axis).
    Tensor record_and_eval(std::string_view op_kind, std::span<const Tensor> inputs);

    // Populates grad for everything reachable from a scalar loss, then
    // clears the tape.
    void backward(const Tensor& loss);

    size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        std::function<void()> backward_fn;
    };
    std::vector<Node> nodes_;

    void record(std::function<void()> fn) { nodes_.push_back({std::move(fn)}); }
    static bool needs_grad(std::initializer_list<const Tensor*> ts);
};

} // namespace advdet
