#include "advdet/kernels.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include <omp.h>

namespace advdet::kernels {

namespace {
Backend g_backend = Backend::parallel;

// Scratch for im2col matrices, reused across calls on the same thread.
std::vector<float>& scratch() {
    thread_local std::vector<float> buf;
    return buf;
}

// Row r of the column matrix holds the receptive field of output pixel r,
// flattened in (ky, kx, ci) order to match the kernel layout.
void im2col(const float* in, float* col, const Conv2dDims& d) {
    const int oh = d.oh(), ow = d.ow();
    const int patch = d.kh * d.kw * d.ci;
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < static_cast<int64_t>(d.n) * oh * ow; ++r) {
        const int img = static_cast<int>(r / (oh * ow));
        const int oy = static_cast<int>((r / ow) % oh);
        const int ox = static_cast<int>(r % ow);
        const float* src = in + static_cast<int64_t>(img) * d.h * d.w * d.ci;
        float* dst = col + r * patch;
        for (int ky = 0; ky < d.kh; ++ky) {
            const int iy = oy * d.stride + ky - d.pad;
            for (int kx = 0; kx < d.kw; ++kx) {
                const int ix = ox * d.stride + kx - d.pad;
                if (iy < 0 || iy >= d.h || ix < 0 || ix >= d.w) {
                    for (int ci = 0; ci < d.ci; ++ci) *dst++ = 0.0f;
                } else {
                    const float* px = src + (static_cast<int64_t>(iy) * d.w + ix) * d.ci;
                    for (int ci = 0; ci < d.ci; ++ci) *dst++ = px[ci];
                }
            }
        }
    }
}
} // namespace

Backend backend() { return g_backend; }
void set_backend(Backend b) { g_backend = b; }

namespace par {

void matmul(const float* a, const float* b, float* c, int m, int k, int n) {
    std::memset(c, 0, sizeof(float) * static_cast<size_t>(m) * n);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        const float* arow = a + static_cast<int64_t>(i) * k;
        float* crow = c + static_cast<int64_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const float av = arow[p];
            const float* brow = b + static_cast<int64_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void conv2d_forward(const float* in, const float* kernel, const float* bias,
                    float* out, const Conv2dDims& d) {
    const int oh = d.oh(), ow = d.ow();
    const int64_t rows = static_cast<int64_t>(d.n) * oh * ow;
    const int patch = d.kh * d.kw * d.ci;
    auto& col = scratch();
    col.resize(static_cast<size_t>(rows) * patch);
    im2col(in, col.data(), d);
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < rows; ++r) {
        const float* arow = col.data() + r * patch;
        float* crow = out + r * d.co;
        if (bias)
            std::memcpy(crow, bias, sizeof(float) * d.co);
        else
            std::memset(crow, 0, sizeof(float) * d.co);
        for (int p = 0; p < patch; ++p) {
            const float av = arow[p];
            const float* brow = kernel + static_cast<int64_t>(p) * d.co;
            for (int j = 0; j < d.co; ++j) crow[j] += av * brow[j];
        }
    }
}

void conv2d_backward(const float* in, const float* kernel, const float* dout,
                     float* din, float* dkernel, float* dbias, const Conv2dDims& d) {
    const int oh = d.oh(), ow = d.ow();
    const int64_t rows = static_cast<int64_t>(d.n) * oh * ow;
    const int patch = d.kh * d.kw * d.ci;

    if (dbias) {
#pragma omp parallel for schedule(static)
        for (int co = 0; co < d.co; ++co) {
            float acc = 0.0f;
            for (int64_t r = 0; r < rows; ++r) acc += dout[r * d.co + co];
            dbias[co] += acc;
        }
    }

    if (dkernel) {
        auto& col = scratch();
        col.resize(static_cast<size_t>(rows) * patch);
        im2col(in, col.data(), d);
#pragma omp parallel for schedule(static)
        for (int p = 0; p < patch; ++p) {
            float* drow = dkernel + static_cast<int64_t>(p) * d.co;
            for (int64_t r = 0; r < rows; ++r) {
                const float av = col[r * patch + p];
                const float* grow = dout + r * d.co;
                for (int j = 0; j < d.co; ++j) drow[j] += av * grow[j];
            }
        }
    }

    if (din) {
        // dcol = dout * kernel^T, then fold columns back onto input pixels.
        std::vector<float> kt(static_cast<size_t>(d.co) * patch);
        for (int p = 0; p < patch; ++p)
            for (int j = 0; j < d.co; ++j)
                kt[static_cast<int64_t>(j) * patch + p] = kernel[static_cast<int64_t>(p) * d.co + j];
        std::vector<float> dcol(static_cast<size_t>(rows) * patch);
#pragma omp parallel for schedule(static)
        for (int64_t r = 0; r < rows; ++r) {
            float* crow = dcol.data() + r * patch;
            std::memset(crow, 0, sizeof(float) * patch);
            const float* grow = dout + r * d.co;
            for (int j = 0; j < d.co; ++j) {
                const float gv = grow[j];
                const float* krow = kt.data() + static_cast<int64_t>(j) * patch;
                for (int p = 0; p < patch; ++p) crow[p] += gv * krow[p];
            }
        }
#pragma omp parallel for schedule(static)
        for (int img = 0; img < d.n; ++img) {
            float* dst = din + static_cast<int64_t>(img) * d.h * d.w * d.ci;
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    const int64_t r = (static_cast<int64_t>(img) * oh + oy) * ow + ox;
                    const float* crow = dcol.data() + r * patch;
                    int p = 0;
                    for (int ky = 0; ky < d.kh; ++ky) {
                        const int iy = oy * d.stride + ky - d.pad;
                        for (int kx = 0; kx < d.kw; ++kx) {
                            const int ix = ox * d.stride + kx - d.pad;
                            if (iy < 0 || iy >= d.h || ix < 0 || ix >= d.w) {
                                p += d.ci;
                                continue;
                            }
                            float* px = dst + (static_cast<int64_t>(iy) * d.w + ix) * d.ci;
                            for (int ci = 0; ci < d.ci; ++ci) px[ci] += crow[p++];
                        }
                    }
                }
        }
    }
}

void bilinear_forward(const float* img, const float* grid, float* out,
                      int h, int w, int c) {
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const float sy = grid[(static_cast<int64_t>(y) * w + x) * 2 + 0];
            const float sx = grid[(static_cast<int64_t>(y) * w + x) * 2 + 1];
            const int y0 = static_cast<int>(std::floor(sy));
            const int x0 = static_cast<int>(std::floor(sx));
            const float fy = sy - y0, fx = sx - x0;
            float* dst = out + (static_cast<int64_t>(y) * w + x) * c;
            for (int ch = 0; ch < c; ++ch) dst[ch] = 0.0f;
            const float ws[4] = {(1 - fy) * (1 - fx), (1 - fy) * fx, fy * (1 - fx), fy * fx};
            const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
            const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
            for (int t = 0; t < 4; ++t) {
                if (ys[t] < 0 || ys[t] >= h || xs[t] < 0 || xs[t] >= w) continue;
                const float* src = img + (static_cast<int64_t>(ys[t]) * w + xs[t]) * c;
                for (int ch = 0; ch < c; ++ch) dst[ch] += ws[t] * src[ch];
            }
        }
    }
}

void bilinear_backward(const float* grid, const float* dout, float* dimg,
                       int h, int w, int c) {
    // Scatter races across output pixels; channels are disjoint, so
    // parallelize there.
#pragma omp parallel for schedule(static)
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const float sy = grid[(static_cast<int64_t>(y) * w + x) * 2 + 0];
                const float sx = grid[(static_cast<int64_t>(y) * w + x) * 2 + 1];
                const int y0 = static_cast<int>(std::floor(sy));
                const int x0 = static_cast<int>(std::floor(sx));
                const float fy = sy - y0, fx = sx - x0;
                const float g = dout[(static_cast<int64_t>(y) * w + x) * c + ch];
                const float ws[4] = {(1 - fy) * (1 - fx), (1 - fy) * fx, fy * (1 - fx), fy * fx};
                const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
                const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
                for (int t = 0; t < 4; ++t) {
                    if (ys[t] < 0 || ys[t] >= h || xs[t] < 0 || xs[t] >= w) continue;
                    dimg[(static_cast<int64_t>(ys[t]) * w + xs[t]) * c + ch] += ws[t] * g;
                }
            }
        }
    }
}

void maxpool_forward(const float* in, float* out, int32_t* argmax,
                     int n, int h, int w, int c, int wh, int ww, int sh, int sw) {
    const int oh = (h - wh) / sh + 1, ow = (w - ww) / sw + 1;
#pragma omp parallel for schedule(static)
    for (int img = 0; img < n; ++img) {
        const float* src = in + static_cast<int64_t>(img) * h * w * c;
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox)
                for (int ch = 0; ch < c; ++ch) {
                    float best = -std::numeric_limits<float>::infinity();
                    int32_t best_idx = 0;
                    for (int ky = 0; ky < wh; ++ky)
                        for (int kx = 0; kx < ww; ++kx) {
                            const int iy = oy * sh + ky, ix = ox * sw + kx;
                            const int64_t idx = (static_cast<int64_t>(iy) * w + ix) * c + ch;
                            if (src[idx] > best) {
                                best = src[idx];
                                best_idx = static_cast<int32_t>(idx);
                            }
                        }
                    const int64_t o = ((static_cast<int64_t>(img) * oh + oy) * ow + ox) * c + ch;
                    out[o] = best;
                    argmax[o] = best_idx;
                }
    }
}

void maxpool_backward(const float* dout, const int32_t* argmax, float* din,
                      int n, int h, int w, int c, int wh, int ww, int sh, int sw) {
    const int oh = (h - wh) / sh + 1, ow = (w - ww) / sw + 1;
    // Windows may overlap within an image; images are independent.
#pragma omp parallel for schedule(static)
    for (int img = 0; img < n; ++img) {
        float* dst = din + static_cast<int64_t>(img) * h * w * c;
        const int64_t base = static_cast<int64_t>(img) * oh * ow * c;
        for (int64_t i = 0; i < static_cast<int64_t>(oh) * ow * c; ++i)
            dst[argmax[base + i]] += dout[base + i];
    }
}

} // namespace par

#define ADVDET_DISPATCH(fn, ...)                       \
    do {                                               \
        if (g_backend == Backend::serial)              \
            serial::fn(__VA_ARGS__);                   \
        else                                           \
            par::fn(__VA_ARGS__);                      \
    } while (0)

void matmul(const float* a, const float* b, float* c, int m, int k, int n) {
    ADVDET_DISPATCH(matmul, a, b, c, m, k, n);
}
void conv2d_forward(const float* in, const float* kernel, const float* bias,
                    float* out, const Conv2dDims& d) {
    ADVDET_DISPATCH(conv2d_forward, in, kernel, bias, out, d);
}
void conv2d_backward(const float* in, const float* kernel, const float* dout,
                     float* din, float* dkernel, float* dbias, const Conv2dDims& d) {
    ADVDET_DISPATCH(conv2d_backward, in, kernel, dout, din, dkernel, dbias, d);
}
void bilinear_forward(const float* img, const float* grid, float* out, int h, int w, int c) {
    ADVDET_DISPATCH(bilinear_forward, img, grid, out, h, w, c);
}
void bilinear_backward(const float* grid, const float* dout, float* dimg, int h, int w, int c) {
    ADVDET_DISPATCH(bilinear_backward, grid, dout, dimg, h, w, c);
}
void maxpool_forward(const float* in, float* out, int32_t* argmax,
                     int n, int h, int w, int c, int wh, int ww, int sh, int sw) {
    ADVDET_DISPATCH(maxpool_forward, in, out, argmax, n, h, w, c, wh, ww, sh, sw);
}
void maxpool_backward(const float* dout, const int32_t* argmax, float* din,
                      int n, int h, int w, int c, int wh, int ww, int sh, int sw) {
    ADVDET_DISPATCH(maxpool_backward, dout, argmax, din, n, h, w, c, wh, ww, sh, sw);
}

#undef ADVDET_DISPATCH

} // namespace advdet::kernels
