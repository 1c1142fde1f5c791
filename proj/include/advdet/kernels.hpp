#pragma once

#include <cstdint>

namespace advdet::kernels {

// Two implementations of every heavy kernel: `serial` is the straightforward
// reference used by tests, `par` is the OpenMP build used by default. Both
// accumulate per output element in the same order, so results are expected to
// match bit for bit.
enum class Backend { serial, parallel };

Backend backend();
void set_backend(Backend b);

struct Conv2dDims {
    int n, h, w, ci;     // input NHWC
    int kh, kw, co;      // kernel (kh, kw, ci, co)
    int stride, pad;     // symmetric zero padding
    int oh() const { return (h + 2 * pad - kh) / stride + 1; }
    int ow() const { return (w + 2 * pad - kw) / stride + 1; }
};

namespace serial {

void matmul(const float* a, const float* b, float* c, int m, int k, int n);
void conv2d_forward(const float* in, const float* kernel, const float* bias,
                    float* out, const Conv2dDims& d);
void conv2d_backward(const float* in, const float* kernel, const float* dout,
                     float* din, float* dkernel, float* dbias, const Conv2dDims& d);
void bilinear_forward(const float* img, const float* grid, float* out,
                      int h, int w, int c);
void bilinear_backward(const float* grid, const float* dout, float* dimg,
                       int h, int w, int c);
void maxpool_forward(const float* in, float* out, int32_t* argmax,
                     int n, int h, int w, int c, int wh, int ww, int sh, int sw);
void maxpool_backward(const float* dout, const int32_t* argmax, float* din,
                      int n, int h, int w, int c, int wh, int ww, int sh, int sw);

} // namespace serial

namespace par {

void matmul(const float* a, const float* b, float* c, int m, int k, int n);
void conv2d_forward(const float* in, const float* kernel, const float* bias,
                    float* out, const Conv2dDims& d);
void conv2d_backward(const float* in, const float* kernel, const float* dout,
                     float* din, float* dkernel, float* dbias, const Conv2dDims& d);
void bilinear_forward(const float* img, const float* grid, float* out,
                      int h, int w, int c);
void bilinear_backward(const float* grid, const float* dout, float* dimg,
                       int h, int w, int c);
void maxpool_forward(const float* in, float* out, int32_t* argmax,
                     int n, int h, int w, int c, int wh, int ww, int sh, int sw);
void maxpool_backward(const float* dout, const int32_t* argmax, float* din,
                      int n, int h, int w, int c, int wh, int ww, int sh, int sw);

} // namespace par

// Dispatch through the active backend.
void matmul(const float* a, const float* b, float* c, int m, int k, int n);
void conv2d_forward(const float* in, const float* kernel, const float* bias,
                    float* out, const Conv2dDims& d);
void conv2d_backward(const float* in, const float* kernel, const float* dout,
                     float* din, float* dkernel, float* dbias, const Conv2dDims& d);
void bilinear_forward(const float* img, const float* grid, float* out,
                      int h, int w, int c);
void bilinear_backward(const float* grid, const float* dout, float* dimg,
                       int h, int w, int c);
void maxpool_forward(const float* in, float* out, int32_t* argmax,
                     int n, int h, int w, int c, int wh, int ww, int sh, int sw);
void maxpool_backward(const float* dout, const int32_t* argmax, float* din,
                      int n, int h, int w, int c, int wh, int ww, int sh, int sw);

} // namespace advdet::kernels
