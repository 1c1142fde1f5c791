#include "advdet/tape.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

#include "advdet/kernels.hpp"

namespace advdet {

namespace {

[[noreturn]] void shape_error(const std::string& op, const Tensor& a, const Tensor& b) {
    throw std::invalid_argument(op + ": incompatible shapes " + shape_str(a.shape()) +
                                " and " + shape_str(b.shape()));
}

// Broadcast plan for a binary elementwise op: per-output-axis strides into
// each operand, 0 on broadcast axes.
struct BcastPlan {
    Shape out_shape;
    std::vector<int64_t> a_stride, b_stride, out_stride;
    int64_t n = 1;

    int64_t offset_a(int64_t oi) const { return offset(oi, a_stride); }
    int64_t offset_b(int64_t oi) const { return offset(oi, b_stride); }

private:
    int64_t offset(int64_t oi, const std::vector<int64_t>& strides) const {
        int64_t off = 0;
        for (size_t d = 0; d < out_stride.size(); ++d) {
            const int64_t idx = oi / out_stride[d];
            oi -= idx * out_stride[d];
            off += idx * strides[d];
        }
        return off;
    }
};

BcastPlan make_bcast_plan(const std::string& op, const Tensor& a, const Tensor& b) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    const size_t rank = std::max(sa.size(), sb.size());
    BcastPlan p;
    p.out_shape.resize(rank);
    for (size_t d = 0; d < rank; ++d) {
        const int ea = d < rank - sa.size() ? 1 : sa[d - (rank - sa.size())];
        const int eb = d < rank - sb.size() ? 1 : sb[d - (rank - sb.size())];
        if (ea != eb && ea != 1 && eb != 1) shape_error(op, a, b);
        p.out_shape[d] = std::max(ea, eb);
    }
    p.n = shape_numel(p.out_shape);
    p.a_stride.assign(rank, 0);
    p.b_stride.assign(rank, 0);
    p.out_stride.assign(rank, 0);
    int64_t acc_a = 1, acc_b = 1, acc_o = 1;
    for (int d = static_cast<int>(rank) - 1; d >= 0; --d) {
        const int ea = static_cast<size_t>(d) < rank - sa.size() ? 1 : sa[d - (rank - sa.size())];
        const int eb = static_cast<size_t>(d) < rank - sb.size() ? 1 : sb[d - (rank - sb.size())];
        p.a_stride[d] = ea == 1 ? 0 : acc_a;
        p.b_stride[d] = eb == 1 ? 0 : acc_b;
        p.out_stride[d] = acc_o;
        acc_a *= ea;
        acc_b *= eb;
        acc_o *= p.out_shape[d];
    }
    return p;
}

bool same_shape(const Tensor& a, const Tensor& b) { return a.shape() == b.shape(); }

void transpose_copy(const float* src, float* dst, int rows, int cols) {
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            dst[static_cast<int64_t>(c) * rows + r] = src[static_cast<int64_t>(r) * cols + c];
}

} // namespace

bool Tape::needs_grad(std::initializer_list<const Tensor*> ts) {
    for (const Tensor* t : ts)
        if (t->defined() && t->requires_grad()) return true;
    return false;
}

// ---------------------------------------------------------------------------
// Elementwise binary ops

Tensor Tape::add(const Tensor& a, const Tensor& b) {
    if (same_shape(a, b)) {
        Tensor out = Tensor::zeros(a.shape());
        auto ad = a.data(), bd = b.data();
        auto od = out.data();
        for (int64_t i = 0; i < out.numel(); ++i) od[i] = ad[i] + bd[i];
        if (needs_grad({&a, &b})) {
            out.set_requires_grad(true);
            Tensor ac = a, bc = b, oc = out;
            record([ac, bc, oc]() mutable {
                if (!oc.has_grad()) return;
                auto g = oc.grad();
                if (ac.requires_grad()) {
                    auto ga = ac.grad();
                    for (int64_t i = 0; i < oc.numel(); ++i) ga[i] += g[i];
                }
                if (bc.requires_grad()) {
                    auto gb = bc.grad();
                    for (int64_t i = 0; i < oc.numel(); ++i) gb[i] += g[i];
                }
            });
        }
        return out;
    }
    BcastPlan p = make_bcast_plan("add", a, b);
    Tensor out = Tensor::zeros(p.out_shape);
    {
        auto ad = a.data(), bd = b.data();
        auto od = out.data();
        for (int64_t i = 0; i < p.n; ++i) od[i] = ad[p.offset_a(i)] + bd[p.offset_b(i)];
    }
    if (needs_grad({&a, &b})) {
        out.set_requires_grad(true);
        Tensor ac = a, bc = b, oc = out;
        record([ac, bc, oc, p]() mutable {
            if (!oc.has_grad()) return;
            auto g = oc.grad();
            if (ac.requires_grad()) {
                auto ga = ac.grad();
                for (int64_t i = 0; i < p.n; ++i) ga[p.offset_a(i)] += g[i];
            }
            if (bc.requires_grad()) {
                auto gb = bc.grad();
                for (int64_t i = 0; i < p.n; ++i) gb[p.offset_b(i)] += g[i];
            }
        });
    }
    return out;
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
    BcastPlan p = make_bcast_plan("sub", a, b);
    Tensor out = Tensor::zeros(p.out_shape);
    {
        auto ad = a.data(), bd = b.data();
        auto od = out.data();
        for (int64_t i = 0; i < p.n; ++i) od[i] = ad[p.offset_a(i)] - bd[p.offset_b(i)];
    }
    if (needs_grad({&a, &b})) {
        out.set_requires_grad(true);
        Tensor ac = a, bc = b, oc = out;
        record([ac, bc, oc, p]() mutable {
            if (!oc.has_grad()) return;
            auto g = oc.grad();
            if (ac.requires_grad()) {
                auto ga = ac.grad();
                for (int64_t i = 0; i < p.n; ++i) ga[p.offset_a(i)] += g[i];
            }
            if (bc.requires_grad()) {
                auto gb = bc.grad();
                for (int64_t i = 0; i < p.n; ++i) gb[p.offset_b(i)] -= g[i];
            }
        });
    }
    return out;
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
    BcastPlan p = make_bcast_plan("mul", a, b);
    Tensor out = Tensor::zeros(p.out_shape);
    {
        auto ad = a.data(), bd = b.data();
        auto od = out.data();
        for (int64_t i = 0; i < p.n; ++i) od[i] = ad[p.offset_a(i)] * bd[p.offset_b(i)];
    }
    if (needs_grad({&a, &b})) {
        out.set_requires_grad(true);
        Tensor ac = a, bc = b, oc = out;
        record([ac, bc, oc, p]() mutable {
            if (!oc.has_grad()) return;
            auto g = oc.grad();
            auto ad = ac.data(), bd = bc.data();
            if (ac.requires_grad()) {
                auto ga = ac.grad();
                for (int64_t i = 0; i < p.n; ++i) ga[p.offset_a(i)] += g[i] * bd[p.offset_b(i)];
            }
            if (bc.requires_grad()) {
                auto gb = bc.grad();
                for (int64_t i = 0; i < p.n; ++i) gb[p.offset_b(i)] += g[i] * ad[p.offset_a(i)];
            }
        });
    }
    return out;
}

Tensor Tape::max_elementwise(const Tensor& a, const Tensor& b) {
    BcastPlan p = make_bcast_plan("max_elementwise", a, b);
    Tensor out = Tensor::zeros(p.out_shape);
    {
        auto ad = a.data(), bd = b.data();
        auto od = out.data();
        for (int64_t i = 0; i < p.n; ++i) {
            const float av = ad[p.offset_a(i)], bv = bd[p.offset_b(i)];
            od[i] = av >= bv ? av : bv;
        }
    }
    if (needs_grad({&a, &b})) {
        out.set_requires_grad(true);
        Tensor ac = a, bc = b, oc = out;
        record([ac, bc, oc, p]() mutable {
            if (!oc.has_grad()) return;
            auto g = oc.grad();
            auto ad = ac.data(), bd = bc.data();
            for (int64_t i = 0; i < p.n; ++i) {
                const int64_t ia = p.offset_a(i), ib = p.offset_b(i);
                if (ad[ia] >= bd[ib]) {
                    if (ac.requires_grad()) ac.grad()[ia] += g[i];
                } else {
                    if (bc.requires_grad()) bc.grad()[ib] += g[i];
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Linear algebra

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0])
        shape_error("matmul", a, b);
    const int m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    Tensor out = Tensor::zeros({m, n});
    kernels::matmul(a.data().data(), b.data().data(), out.data().data(), m, k, n);
    if (needs_grad({&a, &b})) {
        out.set_requires_grad(true);
        Tensor ac = a, bc = b, oc = out;
        record([ac, bc, oc, m, k, n]() mutable {
            if (!oc.has_grad()) return;
            const float* g = oc.grad().data();
            if (ac.requires_grad()) {
                std::vector<float> bt(static_cast<size_t>(k) * n);
                transpose_copy(bc.data().data(), bt.data(), k, n);
                std::vector<float> tmp(static_cast<size_t>(m) * k);
                kernels::matmul(g, bt.data(), tmp.data(), m, n, k);
                auto ga = ac.grad();
                for (int64_t i = 0; i < ac.numel(); ++i) ga[i] += tmp[i];
            }
            if (bc.requires_grad()) {
                std::vector<float> at(static_cast<size_t>(m) * k);
                transpose_copy(ac.data().data(), at.data(), m, k);
                std::vector<float> tmp(static_cast<size_t>(k) * n);
                kernels::matmul(at.data(), g, tmp.data(), k, m, n);
                auto gb = bc.grad();
                for (int64_t i = 0; i < bc.numel(); ++i) gb[i] += tmp[i];
            }
        });
    }
    return out;
}

Tensor Tape::conv2d(const Tensor& in, const Tensor& kernel, const Tensor& bias,
                    int stride, int padding) {
    if (in.rank() != 4 || kernel.rank() != 4 || in.shape()[3] != kernel.shape()[2])
        shape_error("conv2d", in, kernel);
    if (bias.defined() && (bias.rank() != 1 || bias.shape()[0] != kernel.shape()[3]))
        shape_error("conv2d bias", bias, kernel);
    if (stride < 1 || padding < 0)
        throw std::invalid_argument("conv2d: bad stride/padding");
    kernels::Conv2dDims d{in.shape()[0], in.shape()[1], in.shape()[2], in.shape()[3],
                          kernel.shape()[0], kernel.shape()[1], kernel.shape()[3],
                          stride, padding};
    if (d.oh() < 1 || d.ow() < 1)
        throw std::invalid_argument("conv2d: kernel " + shape_str(kernel.shape()) +
                                    " larger than padded input " + shape_str(in.shape()));
    Tensor out = Tensor::zeros({d.n, d.oh(), d.ow(), d.co});
    kernels::conv2d_forward(in.data().data(), kernel.data().data(),
                            bias.defined() ? bias.data().data() : nullptr,
                            out.data().data(), d);
    if (needs_grad({&in, &kernel, &bias})) {
        out.set_requires_grad(true);
        Tensor ic = in, kc = kernel, bc = bias, oc = out;
        record([ic, kc, bc, oc, d]() mutable {
            if (!oc.has_grad()) return;
            kernels::conv2d_backward(
                ic.data().data(), kc.data().data(), oc.grad().data(),
                ic.requires_grad() ? ic.grad().data() : nullptr,
                kc.requires_grad() ? kc.grad().data() : nullptr,
                bc.defined() && bc.requires_grad() ? bc.grad().data() : nullptr, d);
        });
    }
    return out;
}

Tensor Tape::maxpool2d(const Tensor& x, int window_h, int window_w,
                       int stride_h, int stride_w) {
    if (x.rank() != 4)
        throw std::invalid_argument("maxpool2d: expected rank-4 input, got " + shape_str(x.shape()));
    const int n = x.shape()[0], h = x.shape()[1], w = x.shape()[2], c = x.shape()[3];
    if (window_h < 1 || window_w < 1 || window_h > h || window_w > w || stride_h < 1 || stride_w < 1)
        throw std::invalid_argument("maxpool2d: window does not fit input " + shape_str(x.shape()));
    const int oh = (h - window_h) / stride_h + 1, ow = (w - window_w) / stride_w + 1;
    Tensor out = Tensor::zeros({n, oh, ow, c});
    auto argmax = std::make_shared<std::vector<int32_t>>(static_cast<size_t>(n) * oh * ow * c);
    kernels::maxpool_forward(x.data().data(), out.data().data(), argmax->data(),
                             n, h, w, c, window_h, window_w, stride_h, stride_w);
    if (needs_grad({&x})) {
        out.set_requires_grad(true);
        Tensor xc = x, oc = out;
        record([xc, oc, argmax, n, h, w, c, window_h, window_w, stride_h, stride_w]() mutable {
            if (!oc.has_grad()) return;
            kernels::maxpool_backward(oc.grad().data(), argmax->data(), xc.grad().data(),
                                      n, h, w, c, window_h, window_w, stride_h, stride_w);
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reductions and pointwise maps

Tensor Tape::sum(const Tensor& x) {
    double acc = 0.0;
    for (float v : x.data()) acc += v;
    Tensor out = Tensor::scalar(static_cast<float>(acc));
    if (needs_grad({&x})) {
        out.set_requires_grad(true);
        Tensor xc = x, oc = out;
        record([xc, oc]() mutable {
            if (!oc.has_grad()) return;
            const float g = oc.grad()[0];
            auto gx = xc.grad();
            for (int64_t i = 0; i < xc.numel(); ++i) gx[i] += g;
        });
    }
    return out;
}

Tensor Tape::mean(const Tensor& x) {
    if (x.numel() == 0) throw std::invalid_argument("mean of empty tensor");
    double acc = 0.0;
    for (float v : x.data()) acc += v;
    const float inv = 1.0f / static_cast<float>(x.numel());
    Tensor out = Tensor::scalar(static_cast<float>(acc / x.numel()));
    if (needs_grad({&x})) {
        out.set_requires_grad(true);
        Tensor xc = x, oc = out;
        record([xc, oc, inv]() mutable {
            if (!oc.has_grad()) return;
            const float g = oc.grad()[0] * inv;
            auto gx = xc.grad();
            for (int64_t i = 0; i < xc.numel(); ++i) gx[i] += g;
        });
    }
    return out;
}

Tensor Tape::relu(const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape());
    auto xd = x.data();
    auto od = out.data();
    for (int64_t i = 0; i < x.numel(); ++i) od[i] = xd[i] > 0.0f ? xd[i] : 0.0f;
    if (needs_grad({&x})) {
        out.set_requires_grad(true);
        Tensor xc = x, oc = out;
        record([xc, oc]() mutable {
            if (!oc.has_grad()) return;
            auto g = oc.grad();
            auto xd = xc.data();
            auto gx = xc.grad();
            for (int64_t i = 0; i < xc.numel(); ++i)
                if (xd[i] > 0.0f) gx[i] += g[i];
        });
    }
    return out;
}

Tensor Tape::softmax(const Tensor& x) {
    if (x.rank() != 1 && x.rank() != 2)
        throw std::invalid_argument("softmax: expected rank 1 or 2, got " + shape_str(x.shape()));
    const int rows = x.rank() == 2 ? x.shape()[0] : 1;
    const int cols = x.rank() == 2 ? x.shape()[1] : x.shape()[0];
    Tensor out = Tensor::zeros(x.shape());
    auto xd = x.data();
    auto od = out.data();
    for (int r = 0; r < rows; ++r) {
        const float* row = xd.data() + static_cast<int64_t>(r) * cols;
        float* orow = od.data() + static_cast<int64_t>(r) * cols;
        float mx = row[0];
        for (int j = 1; j < cols; ++j) mx = std::max(mx, row[j]);
        double denom = 0.0;
        for (int j = 0; j < cols; ++j) {
            orow[j] = std::exp(row[j] - mx);
            denom += orow[j];
        }
        const float inv = static_cast<float>(1.0 / denom);
        for (int j = 0; j < cols; ++j) orow[j] *= inv;
    }
    if (needs_grad({&x})) {
        out.set_requires_grad(true);
        Tensor xc = x, oc = out;
        record([xc, oc, rows, cols]() mutable {
            if (!oc.has_grad()) return;
            auto g = oc.grad();
            auto y = oc.data();
            auto gx = xc.grad();
            for (int r = 0; r < rows; ++r) {
                const int64_t off = static_cast<int64_t>(r) * cols;
                double dot = 0.0;
                for (int j = 0; j < cols; ++j) dot += static_cast<double>(g[off + j]) * y[off + j];
                for (int j = 0; j < cols; ++j)
                    gx[off + j] += y[off + j] * (g[off + j] - static_cast<float>(dot));
            }
        });
    }
    return out;
}

Tensor Tape::log(const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape());
    auto xd = x.data();
    auto od = out.data();
    for (int64_t i = 0; i < x.numel(); ++i) od[i] = std::log(xd[i]);
    if (needs_grad({&x})) {
        out.set_requires_grad(true);
        Tensor xc = x, oc = out;
        record([xc, oc]() mutable {
            if (!oc.has_grad()) return;
            auto g = oc.grad();
            auto xd = xc.data();
            auto gx = xc.grad();
            for (int64_t i = 0; i < xc.numel(); ++i) gx[i] += g[i] / xd[i];
        });
    }
    return out;
}

Tensor Tape::exp(const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape());
    auto xd = x.data();
    auto od = out.data();
    for (int64_t i = 0; i < x.numel(); ++i) od[i] = std::exp(xd[i]);
    if (needs_grad({&x})) {
        out.set_requires_grad(true);
        Tensor xc = x, oc = out;
        record([xc, oc]() mutable {
            if (!oc.has_grad()) return;
            auto g = oc.grad();
            auto y = oc.data();
            auto gx = xc.grad();
            for (int64_t i = 0; i < xc.numel(); ++i) gx[i] += g[i] * y[i];
        });
    }
    return out;
}

Tensor Tape::square(const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape());
    auto xd = x.data();
    auto od = out.data();
    for (int64_t i = 0; i < x.numel(); ++i) od[i] = xd[i] * xd[i];
    if (needs_grad({&x})) {
        out.set_requires_grad(true);
        Tensor xc = x, oc = out;
        record([xc, oc]() mutable {
            if (!oc.has_grad()) return;
            auto g = oc.grad();
            auto xd = xc.data();
            auto gx = xc.grad();
            for (int64_t i = 0; i < xc.numel(); ++i) gx[i] += 2.0f * g[i] * xd[i];
        });
    }
    return out;
}

Tensor Tape::clamp(const Tensor& x, float lo, float hi) {
    if (!(lo < hi)) throw std::invalid_argument("clamp: lo must be < hi");
    Tensor out = Tensor::zeros(x.shape());
    auto xd = x.data();
    auto od = out.data();
    for (int64_t i = 0; i < x.numel(); ++i)
        od[i] = xd[i] < lo ? lo : (xd[i] > hi ? hi : xd[i]);
    if (needs_grad({&x})) {
        out.set_requires_grad(true);
        Tensor xc = x, oc = out;
        // Identity inside the interval, zero outside and at the boundary.
        record([xc, oc, lo, hi]() mutable {
            if (!oc.has_grad()) return;
            auto g = oc.grad();
            auto xd = xc.data();
            auto gx = xc.grad();
            for (int64_t i = 0; i < xc.numel(); ++i)
                if (xd[i] > lo && xd[i] < hi) gx[i] += g[i];
        });
    }
    return out;
}

Tensor Tape::pad(const Tensor& x, const std::vector<std::pair<int, int>>& widths) {
    if (widths.size() != static_cast<size_t>(x.rank()))
        throw std::invalid_argument("pad: need one width pair per axis of " + shape_str(x.shape()));
    Shape out_shape = x.shape();
    for (size_t d = 0; d < widths.size(); ++d) {
        if (widths[d].first < 0 || widths[d].second < 0)
            throw std::invalid_argument("pad: negative width");
        out_shape[d] += widths[d].first + widths[d].second;
    }
    Tensor out = Tensor::zeros(out_shape);

    const int rank = x.rank();
    std::vector<int64_t> in_stride(rank, 1), out_stride(rank, 1);
    for (int d = rank - 2; d >= 0; --d) {
        in_stride[d] = in_stride[d + 1] * x.shape()[d + 1];
        out_stride[d] = out_stride[d + 1] * out_shape[d + 1];
    }
    auto map_index = [&](int64_t i) {
        int64_t off = 0;
        for (int d = 0; d < rank; ++d) {
            const int64_t idx = i / in_stride[d];
            i -= idx * in_stride[d];
            off += (idx + widths[d].first) * out_stride[d];
        }
        return off;
    };
    {
        auto xd = x.data();
        auto od = out.data();
        for (int64_t i = 0; i < x.numel(); ++i) od[map_index(i)] = xd[i];
    }
    if (needs_grad({&x})) {
        out.set_requires_grad(true);
        Tensor xc = x, oc = out;
        record([xc, oc, map_index]() mutable {
            if (!oc.has_grad()) return;
            auto g = oc.grad();
            auto gx = xc.grad();
            for (int64_t i = 0; i < xc.numel(); ++i) gx[i] += g[map_index(i)];
        });
    }
    return out;
}

Tensor Tape::bilinear_sample(const Tensor& img, const Tensor& grid) {
    if (img.rank() != 3)
        throw std::invalid_argument("bilinear_sample: expected (h,w,c) image, got " + shape_str(img.shape()));
    if (grid.rank() != 3 || grid.shape()[0] != img.shape()[0] ||
        grid.shape()[1] != img.shape()[1] || grid.shape()[2] != 2)
        shape_error("bilinear_sample", img, grid);
    if (grid.requires_grad())
        throw std::invalid_argument("bilinear_sample: gradients w.r.t. the grid are not supported");
    const int h = img.shape()[0], w = img.shape()[1], c = img.shape()[2];
    Tensor out = Tensor::zeros(img.shape());
    kernels::bilinear_forward(img.data().data(), grid.data().data(), out.data().data(), h, w, c);
    if (needs_grad({&img})) {
        out.set_requires_grad(true);
        Tensor ic = img, gc = grid, oc = out;
        record([ic, gc, oc, h, w, c]() mutable {
            if (!oc.has_grad()) return;
            kernels::bilinear_backward(gc.data().data(), oc.grad().data(), ic.grad().data(), h, w, c);
        });
    }
    return out;
}

Tensor Tape::reshape(const Tensor& x, Shape new_shape) {
    if (shape_numel(new_shape) != x.numel())
        throw std::invalid_argument("reshape: " + shape_str(x.shape()) + " to " +
                                    shape_str(new_shape) + " changes element count");
    Tensor out = Tensor::from_data(new_shape, {x.data().begin(), x.data().end()});
    if (needs_grad({&x})) {
        out.set_requires_grad(true);
        Tensor xc = x, oc = out;
        record([xc, oc]() mutable {
            if (!oc.has_grad()) return;
            auto g = oc.grad();
            auto gx = xc.grad();
            for (int64_t i = 0; i < xc.numel(); ++i) gx[i] += g[i];
        });
    }
    return out;
}

Tensor Tape::bit_quantize(const Tensor& x, int bits) {
    if (bits < 1 || bits > 16) throw std::invalid_argument("bit_quantize: bits out of range");
    const float levels = static_cast<float>((1 << bits) - 1);
    Tensor out = Tensor::zeros(x.shape());
    auto xd = x.data();
    auto od = out.data();
    for (int64_t i = 0; i < x.numel(); ++i) od[i] = std::round(xd[i] * levels) / levels;
    if (needs_grad({&x})) {
        out.set_requires_grad(true);
        // Straight-through estimator.
        Tensor xc = x, oc = out;
        record([xc, oc]() mutable {
            if (!oc.has_grad()) return;
            auto g = oc.grad();
            auto gx = xc.grad();
            for (int64_t i = 0; i < xc.numel(); ++i) gx[i] += g[i];
        });
    }
    return out;
}

// ---------------------------------------------------------------------------

Tensor Tape::record_and_eval(std::string_view op_kind, std::span<const Tensor> inputs) {
    auto want = [&](size_t n) {
        if (inputs.size() != n)
            throw std::invalid_argument(std::string(op_kind) + ": expected " + std::to_string(n) +
                                        " inputs, got " + std::to_string(inputs.size()));
    };
    if (op_kind == "add") { want(2); return add(inputs[0], inputs[1]); }
    if (op_kind == "sub") { want(2); return sub(inputs[0], inputs[1]); }
    if (op_kind == "mul") { want(2); return mul(inputs[0], inputs[1]); }
    if (op_kind == "max_elementwise") { want(2); return max_elementwise(inputs[0], inputs[1]); }
    if (op_kind == "matmul") { want(2); return matmul(inputs[0], inputs[1]); }
    if (op_kind == "conv2d") {
        if (inputs.size() == 2) return conv2d(inputs[0], inputs[1], Tensor(), 1, 0);
        want(3);
        return conv2d(inputs[0], inputs[1], inputs[2], 1, 0);
    }
    if (op_kind == "relu") { want(1); return relu(inputs[0]); }
    if (op_kind == "maxpool2d") { want(1); return maxpool2d(inputs[0], 2, 2, 2, 2); }
    if (op_kind == "mean") { want(1); return mean(inputs[0]); }
    if (op_kind == "sum") { want(1); return sum(inputs[0]); }
    if (op_kind == "softmax") { want(1); return softmax(inputs[0]); }
    if (op_kind == "log") { want(1); return log(inputs[0]); }
    if (op_kind == "exp") { want(1); return exp(inputs[0]); }
    if (op_kind == "square") { want(1); return square(inputs[0]); }
    if (op_kind == "clamp") { want(1); return clamp(inputs[0], 0.0f, 1.0f); }
    if (op_kind == "pad") {
        want(1);
        std::vector<std::pair<int, int>> widths(inputs[0].rank(), {1, 1});
        return pad(inputs[0], widths);
    }
    if (op_kind == "bilinear_sample") { want(2); return bilinear_sample(inputs[0], inputs[1]); }
    throw std::invalid_argument("unknown op kind '" + std::string(op_kind) + "'");
}

void Tape::backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1)
        throw std::invalid_argument("backward: loss must be a scalar, got " +
                                    (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
    if (nodes_.empty())
        throw std::runtime_error("backward: empty tape");
    Tensor l = loss;
    l.grad()[0] = 1.0f;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->backward_fn();
    nodes_.clear();
}

} // namespace advdet
