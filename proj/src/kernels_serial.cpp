#include "advdet/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace advdet::kernels::serial {

void matmul(const float* a, const float* b, float* c, int m, int k, int n) {
    std::memset(c, 0, sizeof(float) * static_cast<size_t>(m) * n);
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
    for (int img = 0; img < d.n; ++img) {
        const float* src = in + static_cast<int64_t>(img) * d.h * d.w * d.ci;
        float* dst = out + static_cast<int64_t>(img) * oh * ow * d.co;
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                for (int co = 0; co < d.co; ++co) {
                    float acc = bias ? bias[co] : 0.0f;
                    for (int ky = 0; ky < d.kh; ++ky) {
                        const int iy = oy * d.stride + ky - d.pad;
                        if (iy < 0 || iy >= d.h) continue;
                        for (int kx = 0; kx < d.kw; ++kx) {
                            const int ix = ox * d.stride + kx - d.pad;
                            if (ix < 0 || ix >= d.w) continue;
                            const float* px = src + (static_cast<int64_t>(iy) * d.w + ix) * d.ci;
                            const float* kp = kernel + ((static_cast<int64_t>(ky) * d.kw + kx) * d.ci) * d.co + co;
                            for (int ci = 0; ci < d.ci; ++ci)
                                acc += px[ci] * kp[static_cast<int64_t>(ci) * d.co];
                        }
                    }
                    dst[(static_cast<int64_t>(oy) * ow + ox) * d.co + co] = acc;
                }
            }
        }
    }
}

void conv2d_backward(const float* in, const float* kernel, const float* dout,
                     float* din, float* dkernel, float* dbias, const Conv2dDims& d) {
    const int oh = d.oh(), ow = d.ow();

    if (dbias) {
        for (int co = 0; co < d.co; ++co) {
            float acc = 0.0f;
            for (int64_t r = 0; r < static_cast<int64_t>(d.n) * oh * ow; ++r)
                acc += dout[r * d.co + co];
            dbias[co] += acc;
        }
    }

    if (dkernel) {
        for (int ky = 0; ky < d.kh; ++ky)
            for (int kx = 0; kx < d.kw; ++kx)
                for (int ci = 0; ci < d.ci; ++ci)
                    for (int co = 0; co < d.co; ++co) {
                        float acc = 0.0f;
                        for (int img = 0; img < d.n; ++img) {
                            const float* src = in + static_cast<int64_t>(img) * d.h * d.w * d.ci;
                            const float* g = dout + static_cast<int64_t>(img) * oh * ow * d.co;
                            for (int oy = 0; oy < oh; ++oy) {
                                const int iy = oy * d.stride + ky - d.pad;
                                if (iy < 0 || iy >= d.h) continue;
                                for (int ox = 0; ox < ow; ++ox) {
                                    const int ix = ox * d.stride + kx - d.pad;
                                    if (ix < 0 || ix >= d.w) continue;
                                    acc += src[(static_cast<int64_t>(iy) * d.w + ix) * d.ci + ci] *
                                           g[(static_cast<int64_t>(oy) * ow + ox) * d.co + co];
                                }
                            }
                        }
                        dkernel[((static_cast<int64_t>(ky) * d.kw + kx) * d.ci + ci) * d.co + co] += acc;
                    }
    }

    if (din) {
        for (int img = 0; img < d.n; ++img) {
            const float* g = dout + static_cast<int64_t>(img) * oh * ow * d.co;
            float* dst = din + static_cast<int64_t>(img) * d.h * d.w * d.ci;
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    const float* grow = g + (static_cast<int64_t>(oy) * ow + ox) * d.co;
                    for (int ky = 0; ky < d.kh; ++ky) {
                        const int iy = oy * d.stride + ky - d.pad;
                        if (iy < 0 || iy >= d.h) continue;
                        for (int kx = 0; kx < d.kw; ++kx) {
                            const int ix = ox * d.stride + kx - d.pad;
                            if (ix < 0 || ix >= d.w) continue;
                            for (int ci = 0; ci < d.ci; ++ci) {
                                const float* kp = kernel + ((static_cast<int64_t>(ky) * d.kw + kx) * d.ci + ci) * d.co;
                                float acc = 0.0f;
                                for (int co = 0; co < d.co; ++co) acc += grow[co] * kp[co];
                                dst[(static_cast<int64_t>(iy) * d.w + ix) * d.ci + ci] += acc;
                            }
                        }
                    }
                }
            }
        }
    }
}

void bilinear_forward(const float* img, const float* grid, float* out,
                      int h, int w, int c) {
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
    for (int img = 0; img < n; ++img) {
        float* dst = din + static_cast<int64_t>(img) * h * w * c;
        const int64_t base = static_cast<int64_t>(img) * oh * ow * c;
        for (int64_t i = 0; i < static_cast<int64_t>(oh) * ow * c; ++i)
            dst[argmax[base + i]] += dout[base + i];
    }
}

} // namespace advdet::kernels::serial
