#include "stratus/kernels.hpp"

namespace stratus::kern {

namespace {

void conv2d_forward_scalar(const ConvShape& s, const float* in, const float* kernel,
                           const float* bias, float* out) {
    const int H = s.height, W = s.width, CI = s.cin, CO = s.cout, K = s.k;
    const int pb = s.pad_begin();
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            float* o = out + (std::size_t(y) * W + x) * CO;
            for (int co = 0; co < CO; ++co) o[co] = bias[co];
            for (int ky = 0; ky < K; ++ky) {
                const int sy = y + ky - pb;
                if (sy < 0 || sy >= H) continue;
                for (int kx = 0; kx < K; ++kx) {
                    const int sx = x + kx - pb;
                    if (sx < 0 || sx >= W) continue;
                    const float* px = in + (std::size_t(sy) * W + sx) * CI;
                    const float* kr = kernel + (std::size_t(ky) * K + kx) * CI * CO;
                    for (int ci = 0; ci < CI; ++ci) {
                        const float v = px[ci];
                        const float* kc = kr + std::size_t(ci) * CO;
                        for (int co = 0; co < CO; ++co) o[co] += v * kc[co];
                    }
                }
            }
        }
    }
}

void conv2d_grad_input_scalar(const ConvShape& s, const float* dout, const float* kernel_t,
                              float* din) {
    const int H = s.height, W = s.width, CI = s.cin, CO = s.cout, K = s.k;
    const int pb = s.pad_begin();
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const float* g = dout + (std::size_t(y) * W + x) * CO;
            for (int ky = 0; ky < K; ++ky) {
                const int sy = y + ky - pb;
                if (sy < 0 || sy >= H) continue;
                for (int kx = 0; kx < K; ++kx) {
                    const int sx = x + kx - pb;
                    if (sx < 0 || sx >= W) continue;
                    float* d = din + (std::size_t(sy) * W + sx) * CI;
                    const float* kr = kernel_t + (std::size_t(ky) * K + kx) * CO * CI;
                    for (int co = 0; co < CO; ++co) {
                        const float gv = g[co];
                        const float* kc = kr + std::size_t(co) * CI;
                        for (int ci = 0; ci < CI; ++ci) d[ci] += gv * kc[ci];
                    }
                }
            }
        }
    }
}

void conv2d_grad_weights_scalar(const ConvShape& s, const float* in, const float* dout,
                                float* dkernel, float* dbias) {
    const int H = s.height, W = s.width, CI = s.cin, CO = s.cout, K = s.k;
    const int pb = s.pad_begin();
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const float* g = dout + (std::size_t(y) * W + x) * CO;
            for (int co = 0; co < CO; ++co) dbias[co] += g[co];
            for (int ky = 0; ky < K; ++ky) {
                const int sy = y + ky - pb;
                if (sy < 0 || sy >= H) continue;
                for (int kx = 0; kx < K; ++kx) {
                    const int sx = x + kx - pb;
                    if (sx < 0 || sx >= W) continue;
                    const float* px = in + (std::size_t(sy) * W + sx) * CI;
                    float* kr = dkernel + (std::size_t(ky) * K + kx) * CI * CO;
                    for (int ci = 0; ci < CI; ++ci) {
                        const float v = px[ci];
                        float* kc = kr + std::size_t(ci) * CO;
                        for (int co = 0; co < CO; ++co) kc[co] += v * g[co];
                    }
                }
            }
        }
    }
}

void relu_forward_scalar(std::size_t n, const float* x, float* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward_scalar(std::size_t n, const float* x, const float* dy, float* dx) {
    for (std::size_t i = 0; i < n; ++i) dx[i] = x[i] > 0.0f ? dy[i] : 0.0f;
}

void sgd_momentum_update_scalar(std::size_t n, float momentum, float lr, const float* g,
                                float* v, float* w) {
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = momentum * v[i] - lr * g[i];
        w[i] += v[i];
    }
}

void channel_moments_scalar(std::size_t npx, std::size_t c, const float* x, double* sum,
                            double* sumsq) {
    for (std::size_t j = 0; j < c; ++j) {
        sum[j] = 0.0;
        sumsq[j] = 0.0;
    }
    for (std::size_t p = 0; p < npx; ++p) {
        const float* px = x + p * c;
        for (std::size_t j = 0; j < c; ++j) {
            const double v = px[j];
            sum[j] += v;
            sumsq[j] += v * v;
        }
    }
}

} // namespace

const KernelOps scalar_ops = {
    conv2d_forward_scalar,    conv2d_grad_input_scalar, conv2d_grad_weights_scalar,
    relu_forward_scalar,      relu_backward_scalar,     sgd_momentum_update_scalar,
    channel_moments_scalar,
};

} // namespace stratus::kern
