#pragma once

#include <cstddef>
#include <string>

namespace stratus::kern {

// Shape of one same-padded 2D convolution on an NHWC image.
// Kernels are stored [ky][kx][cin][cout]; pad_begin = (k - 1) / 2 so odd
// kernels are centered and even kernels pad one extra cell at bottom/right.
struct ConvShape {
    int height = 0;
    int width = 0;
    int cin = 0;
    int cout = 0;
    int k = 3;

    int pad_begin() const { return (k - 1) / 2; }
};

// Hot float32 loops, provided as a scalar reference and an AVX2 variant
// selected at runtime. SIMD variants may reassociate additions and use FMA,
// so results can differ from scalar in the last bits; equivalence tests pin
// the tolerance.
struct KernelOps {
    // out[y][x][co] = bias[co] + sum_{ky,kx,ci} in[y+ky-pb][x+kx-pb][ci] * k[ky][kx][ci][co]
    void (*conv2d_forward)(const ConvShape&, const float* in, const float* kernel,
                           const float* bias, float* out);
    // din accumulated from dout through the kernel; kernel_t is [ky][kx][cout][cin].
    void (*conv2d_grad_input)(const ConvShape&, const float* dout, const float* kernel_t,
                              float* din);
    // dkernel [ky][kx][cin][cout] and dbias [cout] accumulated (+=).
    void (*conv2d_grad_weights)(const ConvShape&, const float* in, const float* dout,
                                float* dkernel, float* dbias);
    void (*relu_forward)(std::size_t n, const float* x, float* y);
    // dx[i] = x[i] > 0 ? dy[i] : 0
    void (*relu_backward)(std::size_t n, const float* x, const float* dy, float* dx);
    // v = momentum * v - lr * g;  w += v
    void (*sgd_momentum_update)(std::size_t n, float momentum, float lr, const float* g,
                                float* v, float* w);
    // Per-channel sum and sum of squares over npx NHWC pixels (accumulated in double).
    void (*channel_moments)(std::size_t npx, std::size_t c, const float* x, double* sum,
                            double* sumsq);
};

extern const KernelOps scalar_ops;
#if defined(__x86_64__) || defined(_M_X64)
extern const KernelOps avx2_ops;
#endif

// Active table: AVX2 when the CPU supports AVX2+FMA, else scalar.
// STRATUS_KERNELS=scalar|avx2 overrides detection (avx2 silently falls back
// if unsupported).
const KernelOps& active();
const char* active_name();

// Force a table for the current process (tests).
void set_active(const KernelOps& ops, const char* name);

} // namespace stratus::kern
