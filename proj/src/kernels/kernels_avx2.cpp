#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include "stratus/kernels.hpp"

namespace stratus::kern {

namespace {

void conv2d_forward_avx2(const ConvShape& s, const float* in, const float* kernel,
                         const float* bias, float* out) {
    const int H = s.height, W = s.width, CI = s.cin, CO = s.cout, K = s.k;
    const int pb = s.pad_begin();
    const int co_blocks = CO & ~7;
    for (int y = 0; y < H; ++y) {
        const int ky0 = pb - y > 0 ? pb - y : 0;
        const int ky1 = K < H + pb - y ? K : H + pb - y;
        for (int x = 0; x < W; ++x) {
            const int kx0 = pb - x > 0 ? pb - x : 0;
            const int kx1 = K < W + pb - x ? K : W + pb - x;
            float* o = out + (std::size_t(y) * W + x) * CO;
            for (int co = 0; co < co_blocks; co += 8) {
                __m256 acc = _mm256_loadu_ps(bias + co);
                for (int ky = ky0; ky < ky1; ++ky) {
                    const int sy = y + ky - pb;
                    for (int kx = kx0; kx < kx1; ++kx) {
                        const int sx = x + kx - pb;
                        const float* px = in + (std::size_t(sy) * W + sx) * CI;
                        const float* kr = kernel + ((std::size_t(ky) * K + kx) * CI) * CO + co;
                        for (int ci = 0; ci < CI; ++ci)
                            acc = _mm256_fmadd_ps(_mm256_broadcast_ss(px + ci),
                                                  _mm256_loadu_ps(kr + std::size_t(ci) * CO), acc);
                    }
                }
                _mm256_storeu_ps(o + co, acc);
            }
            for (int co = co_blocks; co < CO; ++co) {
                float acc = bias[co];
                for (int ky = ky0; ky < ky1; ++ky) {
                    const int sy = y + ky - pb;
                    for (int kx = kx0; kx < kx1; ++kx) {
                        const int sx = x + kx - pb;
                        const float* px = in + (std::size_t(sy) * W + sx) * CI;
                        const float* kr = kernel + (std::size_t(ky) * K + kx) * CI * CO;
                        for (int ci = 0; ci < CI; ++ci) acc += px[ci] * kr[std::size_t(ci) * CO + co];
                    }
                }
                o[co] = acc;
            }
        }
    }
}

void conv2d_grad_input_avx2(const ConvShape& s, const float* dout, const float* kernel_t,
                            float* din) {
    const int H = s.height, W = s.width, CI = s.cin, CO = s.cout, K = s.k;
    const int pb = s.pad_begin();
    const int ci_blocks = CI & ~7;
    for (int y = 0; y < H; ++y) {
        const int ky0 = pb - y > 0 ? pb - y : 0;
        const int ky1 = K < H + pb - y ? K : H + pb - y;
        for (int x = 0; x < W; ++x) {
            const int kx0 = pb - x > 0 ? pb - x : 0;
            const int kx1 = K < W + pb - x ? K : W + pb - x;
            const float* g = dout + (std::size_t(y) * W + x) * CO;
            for (int ky = ky0; ky < ky1; ++ky) {
                const int sy = y + ky - pb;
                for (int kx = kx0; kx < kx1; ++kx) {
                    const int sx = x + kx - pb;
                    float* d = din + (std::size_t(sy) * W + sx) * CI;
                    const float* kr = kernel_t + (std::size_t(ky) * K + kx) * CO * CI;
                    for (int ci = 0; ci < ci_blocks; ci += 8) {
                        __m256 acc = _mm256_loadu_ps(d + ci);
                        for (int co = 0; co < CO; ++co)
                            acc = _mm256_fmadd_ps(_mm256_broadcast_ss(g + co),
                                                  _mm256_loadu_ps(kr + std::size_t(co) * CI + ci),
                                                  acc);
                        _mm256_storeu_ps(d + ci, acc);
                    }
                    for (int ci = ci_blocks; ci < CI; ++ci) {
                        float acc = d[ci];
                        for (int co = 0; co < CO; ++co) acc += g[co] * kr[std::size_t(co) * CI + ci];
                        d[ci] = acc;
                    }
                }
            }
        }
    }
}

void conv2d_grad_weights_avx2(const ConvShape& s, const float* in, const float* dout,
                              float* dkernel, float* dbias) {
    const int H = s.height, W = s.width, CI = s.cin, CO = s.cout, K = s.k;
    const int pb = s.pad_begin();
    const int co_blocks = CO & ~7;
    for (int y = 0; y < H; ++y) {
        const int ky0 = pb - y > 0 ? pb - y : 0;
        const int ky1 = K < H + pb - y ? K : H + pb - y;
        for (int x = 0; x < W; ++x) {
            const int kx0 = pb - x > 0 ? pb - x : 0;
            const int kx1 = K < W + pb - x ? K : W + pb - x;
            const float* g = dout + (std::size_t(y) * W + x) * CO;
            for (int co = 0; co < co_blocks; co += 8) {
                __m256 b = _mm256_add_ps(_mm256_loadu_ps(dbias + co), _mm256_loadu_ps(g + co));
                _mm256_storeu_ps(dbias + co, b);
            }
            for (int co = co_blocks; co < CO; ++co) dbias[co] += g[co];
            for (int ky = ky0; ky < ky1; ++ky) {
                const int sy = y + ky - pb;
                for (int kx = kx0; kx < kx1; ++kx) {
                    const int sx = x + kx - pb;
                    const float* px = in + (std::size_t(sy) * W + sx) * CI;
                    float* kr = dkernel + (std::size_t(ky) * K + kx) * CI * CO;
                    for (int ci = 0; ci < CI; ++ci) {
                        const __m256 v = _mm256_broadcast_ss(px + ci);
                        float* kc = kr + std::size_t(ci) * CO;
                        for (int co = 0; co < co_blocks; co += 8) {
                            __m256 acc = _mm256_fmadd_ps(v, _mm256_loadu_ps(g + co),
                                                         _mm256_loadu_ps(kc + co));
                            _mm256_storeu_ps(kc + co, acc);
                        }
                        for (int co = co_blocks; co < CO; ++co) kc[co] += px[ci] * g[co];
                    }
                }
            }
        }
    }
}

void relu_forward_avx2(std::size_t n, const float* x, float* y) {
    const __m256 zero = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) _mm256_storeu_ps(y + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
    for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward_avx2(std::size_t n, const float* x, const float* dy, float* dx) {
    const __m256 zero = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 m = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GT_OQ);
        _mm256_storeu_ps(dx + i, _mm256_and_ps(m, _mm256_loadu_ps(dy + i)));
    }
    for (; i < n; ++i) dx[i] = x[i] > 0.0f ? dy[i] : 0.0f;
}

void sgd_momentum_update_avx2(std::size_t n, float momentum, float lr, const float* g, float* v,
                              float* w) {
    const __m256 mu = _mm256_set1_ps(momentum);
    const __m256 nlr = _mm256_set1_ps(-lr);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 vv = _mm256_fmadd_ps(nlr, _mm256_loadu_ps(g + i),
                                    _mm256_mul_ps(mu, _mm256_loadu_ps(v + i)));
        _mm256_storeu_ps(v + i, vv);
        _mm256_storeu_ps(w + i, _mm256_add_ps(_mm256_loadu_ps(w + i), vv));
    }
    for (; i < n; ++i) {
        v[i] = momentum * v[i] - lr * g[i];
        w[i] += v[i];
    }
}

void channel_moments_avx2(std::size_t npx, std::size_t c, const float* x, double* sum,
                          double* sumsq) {
    std::size_t j = 0;
    for (; j + 8 <= c; j += 8) {
        __m256d s_lo = _mm256_setzero_pd(), s_hi = _mm256_setzero_pd();
        __m256d q_lo = _mm256_setzero_pd(), q_hi = _mm256_setzero_pd();
        for (std::size_t p = 0; p < npx; ++p) {
            const __m256 v = _mm256_loadu_ps(x + p * c + j);
            const __m256d lo = _mm256_cvtps_pd(_mm256_castps256_ps128(v));
            const __m256d hi = _mm256_cvtps_pd(_mm256_extractf128_ps(v, 1));
            s_lo = _mm256_add_pd(s_lo, lo);
            s_hi = _mm256_add_pd(s_hi, hi);
            q_lo = _mm256_fmadd_pd(lo, lo, q_lo);
            q_hi = _mm256_fmadd_pd(hi, hi, q_hi);
        }
        _mm256_storeu_pd(sum + j, s_lo);
        _mm256_storeu_pd(sum + j + 4, s_hi);
        _mm256_storeu_pd(sumsq + j, q_lo);
        _mm256_storeu_pd(sumsq + j + 4, q_hi);
    }
    for (; j < c; ++j) {
        double s = 0.0, q = 0.0;
        for (std::size_t p = 0; p < npx; ++p) {
            const double v = x[p * c + j];
            s += v;
            q += v * v;
        }
        sum[j] = s;
        sumsq[j] = q;
    }
}

} // namespace

const KernelOps avx2_ops = {
    conv2d_forward_avx2,    conv2d_grad_input_avx2, conv2d_grad_weights_avx2,
    relu_forward_avx2,      relu_backward_avx2,     sgd_momentum_update_avx2,
    channel_moments_avx2,
};

} // namespace stratus::kern

#endif // x86_64
