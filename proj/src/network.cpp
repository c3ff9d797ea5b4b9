#include "stratus/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "stratus/kernels.hpp"
#include "stratus/rng.hpp"

namespace stratus {

namespace {
constexpr double kBnEpsilon = 1e-3;
constexpr double kBnMomentum = 0.99;
} // namespace

void NetworkSpec::infer_shapes() {
    if (input_height < 1 || input_width < 1 || input_channels < 1)
        throw std::invalid_argument("network: bad input dims");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        LayerSpec& l = layers[i];
        auto in = [&]() -> const LayerSpec& {
            if (l.input < 0 || l.input >= int(i))
                throw std::invalid_argument("network: node " + std::to_string(i) + " has no valid input");
            return layers[std::size_t(l.input)];
        };
        switch (l.kind) {
            case LayerKind::input_main:
                l.h = input_height; l.w = input_width; l.c = input_channels;
                break;
            case LayerKind::input_late:
                l.h = input_height; l.w = input_width; l.c = late_channels;
                break;
            case LayerKind::conv: {
                const LayerSpec& p = in();
                if (l.out_channels < 1 || l.kernel < 1)
                    throw std::invalid_argument("network: bad conv spec at node " + std::to_string(i));
                l.h = p.h; l.w = p.w; l.c = l.out_channels;
                break;
            }
            case LayerKind::batchnorm:
            case LayerKind::relu:
            case LayerKind::sigmoid: {
                const LayerSpec& p = in();
                l.h = p.h; l.w = p.w; l.c = p.c;
                break;
            }
            case LayerKind::maxpool: {
                const LayerSpec& p = in();
                if (p.h % 2 != 0 || p.w % 2 != 0)
                    throw std::invalid_argument("network: maxpool needs even spatial dims, got " +
                                                std::to_string(p.h) + "x" + std::to_string(p.w));
                l.h = p.h / 2; l.w = p.w / 2; l.c = p.c;
                break;
            }
            case LayerKind::unpool: {
                const LayerSpec& p = in();
                if (l.pool_pair < 0 || l.pool_pair >= int(i) ||
                    layers[std::size_t(l.pool_pair)].kind != LayerKind::maxpool)
                    throw std::invalid_argument("network: unpool must reference an earlier maxpool");
                const LayerSpec& pool = layers[std::size_t(l.pool_pair)];
                if (p.h != pool.h || p.w != pool.w || p.c != pool.c)
                    throw std::invalid_argument("network: unpool input shape differs from its paired pool");
                l.h = pool.h * 2; l.w = pool.w * 2; l.c = p.c;
                break;
            }
            case LayerKind::upsample: {
                const LayerSpec& p = in();
                l.h = p.h * 2; l.w = p.w * 2; l.c = p.c;
                break;
            }
            case LayerKind::concat: {
                if (l.concat_inputs.empty())
                    throw std::invalid_argument("network: concat without inputs");
                int c = 0;
                for (int ref : l.concat_inputs) {
                    if (ref < 0 || ref >= int(i))
                        throw std::invalid_argument("network: concat references a later node");
                    const LayerSpec& p = layers[std::size_t(ref)];
                    if (p.h != layers[std::size_t(l.concat_inputs[0])].h ||
                        p.w != layers[std::size_t(l.concat_inputs[0])].w)
                        throw std::invalid_argument("network: concat inputs differ in spatial dims");
                    c += p.c;
                }
                l.h = layers[std::size_t(l.concat_inputs[0])].h;
                l.w = layers[std::size_t(l.concat_inputs[0])].w;
                l.c = c;
                break;
            }
            case LayerKind::mask_gather: {
                const LayerSpec& p = in();
                if (p.c != 1)
                    throw std::invalid_argument("network: mask_gather expects a single channel");
                l.h = p.h; l.w = p.w; l.c = 1;
                break;
            }
        }
    }
    if (layers.empty() || layers.back().kind != LayerKind::mask_gather)
        throw std::invalid_argument("network: last node must be mask_gather");
}

std::vector<std::int32_t> gather_offsets(const Mask& mask) {
    std::vector<std::int32_t> off;
    off.reserve(mask.valid_count);
    for (int r = 0; r < mask.geometry.height_px; ++r)
        for (int c = 0; c < mask.geometry.width_px; ++c)
            if (mask.at(r, c)) off.push_back(r * mask.geometry.width_px + c);
    return off;
}

template <typename T>
Weights<T> init_weights(const NetworkSpec& net, std::uint64_t seed) {
    Weights<T> w;
    w.layer.resize(net.layers.size());
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const LayerSpec& l = net.layers[i];
        if (l.kind == LayerKind::conv) {
            const int cin = net.layers[std::size_t(l.input)].c;
            const double fan_in = double(l.kernel) * l.kernel * cin;
            const double fan_out = double(l.kernel) * l.kernel * l.out_channels;
            const double limit = std::sqrt(6.0 / (fan_in + fan_out));
            Pcg32 rng(seed, 300 + i);
            auto& p = w.layer[i];
            p.a.resize(std::size_t(l.kernel) * l.kernel * cin * l.out_channels);
            for (auto& v : p.a) v = T(rng.uniform(-limit, limit));
            p.b.assign(std::size_t(l.out_channels), T(0));
        } else if (l.kind == LayerKind::batchnorm) {
            auto& p = w.layer[i];
            p.a.assign(std::size_t(l.c), T(1));
            p.b.assign(std::size_t(l.c), T(0));
            p.rm.assign(std::size_t(l.c), T(0));
            p.rv.assign(std::size_t(l.c), T(1));
        }
    }
    return w;
}

namespace {

template <typename T>
void conv_forward_generic(const kern::ConvShape& s, const T* in, const T* k, const T* bias, T* out) {
    const int pb = s.pad_begin();
    for (int y = 0; y < s.height; ++y)
        for (int x = 0; x < s.width; ++x) {
            T* o = out + (std::size_t(y) * s.width + x) * s.cout;
            for (int co = 0; co < s.cout; ++co) o[co] = bias[co];
            for (int ky = 0; ky < s.k; ++ky) {
                const int sy = y + ky - pb;
                if (sy < 0 || sy >= s.height) continue;
                for (int kx = 0; kx < s.k; ++kx) {
                    const int sx = x + kx - pb;
                    if (sx < 0 || sx >= s.width) continue;
                    const T* px = in + (std::size_t(sy) * s.width + sx) * s.cin;
                    const T* kr = k + (std::size_t(ky) * s.k + kx) * s.cin * s.cout;
                    for (int ci = 0; ci < s.cin; ++ci)
                        for (int co = 0; co < s.cout; ++co)
                            o[co] += px[ci] * kr[std::size_t(ci) * s.cout + co];
                }
            }
        }
}

template <typename T>
void conv_grad_input_generic(const kern::ConvShape& s, const T* dout, const T* kt, T* din) {
    const int pb = s.pad_begin();
    for (int y = 0; y < s.height; ++y)
        for (int x = 0; x < s.width; ++x) {
            const T* g = dout + (std::size_t(y) * s.width + x) * s.cout;
            for (int ky = 0; ky < s.k; ++ky) {
                const int sy = y + ky - pb;
                if (sy < 0 || sy >= s.height) continue;
                for (int kx = 0; kx < s.k; ++kx) {
                    const int sx = x + kx - pb;
                    if (sx < 0 || sx >= s.width) continue;
                    T* d = din + (std::size_t(sy) * s.width + sx) * s.cin;
                    const T* kr = kt + (std::size_t(ky) * s.k + kx) * s.cout * s.cin;
                    for (int co = 0; co < s.cout; ++co)
                        for (int ci = 0; ci < s.cin; ++ci)
                            d[ci] += g[co] * kr[std::size_t(co) * s.cin + ci];
                }
            }
        }
}

template <typename T>
void conv_grad_weights_generic(const kern::ConvShape& s, const T* in, const T* dout, T* dk, T* db) {
    const int pb = s.pad_begin();
    for (int y = 0; y < s.height; ++y)
        for (int x = 0; x < s.width; ++x) {
            const T* g = dout + (std::size_t(y) * s.width + x) * s.cout;
            for (int co = 0; co < s.cout; ++co) db[co] += g[co];
            for (int ky = 0; ky < s.k; ++ky) {
                const int sy = y + ky - pb;
                if (sy < 0 || sy >= s.height) continue;
                for (int kx = 0; kx < s.k; ++kx) {
                    const int sx = x + kx - pb;
                    if (sx < 0 || sx >= s.width) continue;
                    const T* px = in + (std::size_t(sy) * s.width + sx) * s.cin;
                    T* kr = dk + (std::size_t(ky) * s.k + kx) * s.cin * s.cout;
                    for (int ci = 0; ci < s.cin; ++ci)
                        for (int co = 0; co < s.cout; ++co)
                            kr[std::size_t(ci) * s.cout + co] += px[ci] * g[co];
                }
            }
        }
}

template <typename T>
kern::ConvShape conv_shape(const NetworkSpec& net, std::size_t node, const Tensor<T>& in) {
    const LayerSpec& l = net.layers[node];
    kern::ConvShape s;
    s.height = in.h;
    s.width = in.w;
    s.cin = in.c;
    s.cout = l.out_channels;
    s.k = l.kernel;
    return s;
}

} // namespace

template <typename T>
void forward(const NetworkSpec& net, Weights<T>& weights, const Tensor<T>& main_input,
             const Tensor<T>& late_input, const std::vector<std::int32_t>& gather, bool training,
             ForwardCache<T>& cache) {
    const std::size_t n_nodes = net.layers.size();
    cache.act.assign(n_nodes, {});
    cache.pool_index.assign(n_nodes, {});
    cache.bn_mean.assign(n_nodes, {});
    cache.bn_inv_sd.assign(n_nodes, {});

    if (main_input.h != net.input_height || main_input.w != net.input_width ||
        main_input.c != net.input_channels)
        throw std::invalid_argument("forward: main input shape mismatch");
    if (late_input.c != net.late_channels || late_input.h != main_input.h ||
        late_input.w != main_input.w || late_input.b != main_input.b)
        throw std::invalid_argument("forward: late input shape mismatch");

    const int B = main_input.b;
    for (std::size_t i = 0; i < n_nodes; ++i) {
        const LayerSpec& l = net.layers[i];
        switch (l.kind) {
            case LayerKind::input_main: cache.act[i] = main_input; break;
            case LayerKind::input_late: cache.act[i] = late_input; break;

            case LayerKind::conv: {
                const Tensor<T>& in = cache.act[std::size_t(l.input)];
                Tensor<T> out(B, in.h, in.w, l.out_channels);
                const kern::ConvShape s = conv_shape(net, i, in);
                const auto& p = weights.layer[i];
                for (int bi = 0; bi < B; ++bi) {
                    if constexpr (std::is_same_v<T, float>) {
                        kern::active().conv2d_forward(s, in.image(bi), p.a.data(), p.b.data(),
                                                      out.image(bi));
                    } else {
                        conv_forward_generic<T>(s, in.image(bi), p.a.data(), p.b.data(),
                                                out.image(bi));
                    }
                }
                cache.act[i] = std::move(out);
                break;
            }

            case LayerKind::batchnorm: {
                const Tensor<T>& in = cache.act[std::size_t(l.input)];
                Tensor<T> out(B, in.h, in.w, in.c);
                auto& p = weights.layer[i];
                const std::size_t C = std::size_t(in.c);
                const std::size_t npx = in.size() / C;
                std::vector<T> shift(C), scale(C);
                if (training) {
                    std::vector<double> sum(C), sumsq(C);
                    if constexpr (std::is_same_v<T, float>) {
                        kern::active().channel_moments(npx, C, in.data.data(), sum.data(),
                                                       sumsq.data());
                    } else {
                        for (std::size_t j = 0; j < C; ++j) sum[j] = sumsq[j] = 0.0;
                        for (std::size_t px = 0; px < npx; ++px)
                            for (std::size_t j = 0; j < C; ++j) {
                                const double v = in.data[px * C + j];
                                sum[j] += v;
                                sumsq[j] += v * v;
                            }
                    }
                    cache.bn_mean[i].resize(C);
                    cache.bn_inv_sd[i].resize(C);
                    for (std::size_t j = 0; j < C; ++j) {
                        const double mu = sum[j] / double(npx);
                        double var = sumsq[j] / double(npx) - mu * mu;
                        if (var < 0.0) var = 0.0;
                        const double inv = 1.0 / std::sqrt(var + kBnEpsilon);
                        cache.bn_mean[i][j] = T(mu);
                        cache.bn_inv_sd[i][j] = T(inv);
                        p.rm[j] = T(kBnMomentum * double(p.rm[j]) + (1.0 - kBnMomentum) * mu);
                        p.rv[j] = T(kBnMomentum * double(p.rv[j]) + (1.0 - kBnMomentum) * var);
                        scale[j] = T(double(p.a[j]) * inv);
                        shift[j] = T(double(p.b[j]) - mu * double(scale[j]));
                    }
                } else {
                    for (std::size_t j = 0; j < C; ++j) {
                        const double inv = 1.0 / std::sqrt(double(p.rv[j]) + kBnEpsilon);
                        scale[j] = T(double(p.a[j]) * inv);
                        shift[j] = T(double(p.b[j]) - double(p.rm[j]) * double(scale[j]));
                    }
                }
                for (std::size_t px = 0; px < npx; ++px) {
                    const T* src = in.data.data() + px * C;
                    T* dst = out.data.data() + px * C;
                    for (std::size_t j = 0; j < C; ++j) dst[j] = src[j] * scale[j] + shift[j];
                }
                cache.act[i] = std::move(out);
                break;
            }

            case LayerKind::relu: {
                const Tensor<T>& in = cache.act[std::size_t(l.input)];
                Tensor<T> out(B, in.h, in.w, in.c);
                if constexpr (std::is_same_v<T, float>) {
                    kern::active().relu_forward(in.size(), in.data.data(), out.data.data());
                } else {
                    for (std::size_t j = 0; j < in.size(); ++j)
                        out.data[j] = in.data[j] > T(0) ? in.data[j] : T(0);
                }
                cache.act[i] = std::move(out);
                break;
            }

            case LayerKind::maxpool: {
                const Tensor<T>& in = cache.act[std::size_t(l.input)];
                Tensor<T> out(B, in.h / 2, in.w / 2, in.c);
                cache.pool_index[i].resize(out.size());
                for (int bi = 0; bi < B; ++bi)
                    for (int y = 0; y < out.h; ++y)
                        for (int x = 0; x < out.w; ++x)
                            for (int ch = 0; ch < in.c; ++ch) {
                                T best = in.at(bi, 2 * y, 2 * x, ch);
                                int best_pos = (2 * y) * in.w + 2 * x;
                                const int cand[3][2] = {{2 * y, 2 * x + 1},
                                                        {2 * y + 1, 2 * x},
                                                        {2 * y + 1, 2 * x + 1}};
                                for (const auto& yx : cand) {
                                    const T v = in.at(bi, yx[0], yx[1], ch);
                                    if (v > best) {  // ties keep the smallest flat index
                                        best = v;
                                        best_pos = yx[0] * in.w + yx[1];
                                    }
                                }
                                out.at(bi, y, x, ch) = best;
                                cache.pool_index[i][((std::size_t(bi) * out.h + y) * out.w + x) *
                                                        out.c +
                                                    ch] = best_pos;
                            }
                cache.act[i] = std::move(out);
                break;
            }

            case LayerKind::unpool: {
                const Tensor<T>& in = cache.act[std::size_t(l.input)];
                const auto& idx = cache.pool_index[std::size_t(l.pool_pair)];
                if (idx.size() != in.size())
                    throw std::invalid_argument("unpool: index count does not match input");
                Tensor<T> out(B, in.h * 2, in.w * 2, in.c, T(0));
                for (int bi = 0; bi < B; ++bi)
                    for (int y = 0; y < in.h; ++y)
                        for (int x = 0; x < in.w; ++x)
                            for (int ch = 0; ch < in.c; ++ch) {
                                const std::size_t flat =
                                    ((std::size_t(bi) * in.h + y) * in.w + x) * in.c + ch;
                                const std::int32_t pos = idx[flat];
                                if (pos < 0 || pos >= out.h * out.w)
                                    throw std::out_of_range("unpool: recorded index out of range");
                                out.at(bi, pos / out.w, pos % out.w, ch) = in.data[flat];
                            }
                cache.act[i] = std::move(out);
                break;
            }

            case LayerKind::upsample: {
                const Tensor<T>& in = cache.act[std::size_t(l.input)];
                Tensor<T> out(B, in.h * 2, in.w * 2, in.c);
                for (int bi = 0; bi < B; ++bi)
                    for (int y = 0; y < out.h; ++y)
                        for (int x = 0; x < out.w; ++x)
                            for (int ch = 0; ch < in.c; ++ch)
                                out.at(bi, y, x, ch) = in.at(bi, y / 2, x / 2, ch);
                cache.act[i] = std::move(out);
                break;
            }

            case LayerKind::concat: {
                const Tensor<T>& first = cache.act[std::size_t(l.concat_inputs[0])];
                Tensor<T> out(B, first.h, first.w, l.c);
                for (int bi = 0; bi < B; ++bi)
                    for (int y = 0; y < out.h; ++y)
                        for (int x = 0; x < out.w; ++x) {
                            int at = 0;
                            for (int ref : l.concat_inputs) {
                                const Tensor<T>& part = cache.act[std::size_t(ref)];
                                for (int ch = 0; ch < part.c; ++ch)
                                    out.at(bi, y, x, at++) = part.at(bi, y, x, ch);
                            }
                        }
                cache.act[i] = std::move(out);
                break;
            }

            case LayerKind::sigmoid: {
                const Tensor<T>& in = cache.act[std::size_t(l.input)];
                Tensor<T> out(B, in.h, in.w, in.c);
                for (std::size_t j = 0; j < in.size(); ++j)
                    out.data[j] = T(1) / (T(1) + std::exp(-in.data[j]));
                cache.act[i] = std::move(out);
                break;
            }

            case LayerKind::mask_gather: {
                const Tensor<T>& in = cache.act[std::size_t(l.input)];
                for (std::int32_t off : gather)
                    if (off < 0 || off >= in.h * in.w)
                        throw std::invalid_argument("mask_gather: offset outside the grid");
                cache.output.resize(std::size_t(B) * gather.size());
                for (int bi = 0; bi < B; ++bi) {
                    const T* img = in.image(bi);
                    T* dst = cache.output.data() + std::size_t(bi) * gather.size();
                    for (std::size_t g = 0; g < gather.size(); ++g) dst[g] = img[gather[g]];
                }
                cache.act[i] = Tensor<T>(1, 1, 1, 1);  // placeholder; real output is the vector
                break;
            }
        }
    }
}

template <typename T>
T masked_log_loss(const std::vector<T>& probs, const std::vector<std::uint8_t>& labels, T clamp,
                  std::vector<T>* dprobs) {
    if (probs.size() != labels.size() || probs.empty())
        throw std::invalid_argument("masked_log_loss: size mismatch");
    const T lo = clamp, hi = T(1) - clamp;
    double loss = 0.0;
    if (dprobs) dprobs->assign(probs.size(), T(0));
    const double n = double(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const T p = std::min(hi, std::max(lo, probs[i]));
        loss += labels[i] ? -std::log(double(p)) : -std::log(1.0 - double(p));
        if (dprobs && probs[i] > lo && probs[i] < hi) {
            const double g = labels[i] ? -1.0 / double(p) : 1.0 / (1.0 - double(p));
            (*dprobs)[i] = T(g / n);
        }
    }
    return T(loss / n);
}

template <typename T>
void backward(const NetworkSpec& net, const Weights<T>& weights, const ForwardCache<T>& cache,
              const std::vector<std::int32_t>& gather, const std::vector<T>& dprobs,
              Weights<T>& grads) {
    const std::size_t n_nodes = net.layers.size();
    grads.layer.assign(n_nodes, {});
    for (std::size_t i = 0; i < n_nodes; ++i) {
        grads.layer[i].a.assign(weights.layer[i].a.size(), T(0));
        grads.layer[i].b.assign(weights.layer[i].b.size(), T(0));
    }

    std::vector<Tensor<T>> dact(n_nodes);
    auto ensure = [&](int node) -> Tensor<T>& {
        Tensor<T>& d = dact[std::size_t(node)];
        if (d.size() == 0) {
            const Tensor<T>& a = cache.act[std::size_t(node)];
            d = Tensor<T>(a.b, a.h, a.w, a.c, T(0));
        }
        return d;
    };

    for (std::size_t ri = n_nodes; ri-- > 0;) {
        const LayerSpec& l = net.layers[ri];
        switch (l.kind) {
            case LayerKind::input_main:
            case LayerKind::input_late:
                break;

            case LayerKind::mask_gather: {
                const Tensor<T>& in = cache.act[std::size_t(l.input)];
                Tensor<T>& din = ensure(l.input);
                const std::size_t nv = gather.size();
                if (dprobs.size() != std::size_t(in.b) * nv)
                    throw std::invalid_argument("backward: dprobs length mismatch");
                for (int bi = 0; bi < in.b; ++bi) {
                    T* img = din.image(bi);
                    const T* src = dprobs.data() + std::size_t(bi) * nv;
                    for (std::size_t g = 0; g < nv; ++g) img[gather[g]] += src[g];
                }
                break;
            }

            case LayerKind::sigmoid: {
                const Tensor<T>& dout = dact[ri];
                if (dout.size() == 0) break;
                const Tensor<T>& y = cache.act[ri];
                Tensor<T>& din = ensure(l.input);
                for (std::size_t j = 0; j < y.size(); ++j)
                    din.data[j] += dout.data[j] * y.data[j] * (T(1) - y.data[j]);
                break;
            }

            case LayerKind::concat: {
                const Tensor<T>& dout = dact[ri];
                if (dout.size() == 0) break;
                for (int bi = 0; bi < dout.b; ++bi)
                    for (int y = 0; y < dout.h; ++y)
                        for (int x = 0; x < dout.w; ++x) {
                            int at = 0;
                            for (int ref : l.concat_inputs) {
                                Tensor<T>& dpart = ensure(ref);
                                for (int ch = 0; ch < dpart.c; ++ch)
                                    dpart.at(bi, y, x, ch) += dout.at(bi, y, x, at++);
                            }
                        }
                break;
            }

            case LayerKind::upsample: {
                const Tensor<T>& dout = dact[ri];
                if (dout.size() == 0) break;
                Tensor<T>& din = ensure(l.input);
                for (int bi = 0; bi < dout.b; ++bi)
                    for (int y = 0; y < dout.h; ++y)
                        for (int x = 0; x < dout.w; ++x)
                            for (int ch = 0; ch < dout.c; ++ch)
                                din.at(bi, y / 2, x / 2, ch) += dout.at(bi, y, x, ch);
                break;
            }

            case LayerKind::unpool: {
                const Tensor<T>& dout = dact[ri];
                if (dout.size() == 0) break;
                const Tensor<T>& in = cache.act[std::size_t(l.input)];
                const auto& idx = cache.pool_index[std::size_t(l.pool_pair)];
                Tensor<T>& din = ensure(l.input);
                for (int bi = 0; bi < in.b; ++bi)
                    for (int y = 0; y < in.h; ++y)
                        for (int x = 0; x < in.w; ++x)
                            for (int ch = 0; ch < in.c; ++ch) {
                                const std::size_t flat =
                                    ((std::size_t(bi) * in.h + y) * in.w + x) * in.c + ch;
                                const std::int32_t pos = idx[flat];
                                din.data[flat] += dout.at(bi, pos / dout.w, pos % dout.w, ch);
                            }
                break;
            }

            case LayerKind::maxpool: {
                const Tensor<T>& dout = dact[ri];
                if (dout.size() == 0) break;
                Tensor<T>& din = ensure(l.input);
                const auto& idx = cache.pool_index[ri];
                const Tensor<T>& out = cache.act[ri];
                for (int bi = 0; bi < out.b; ++bi)
                    for (int y = 0; y < out.h; ++y)
                        for (int x = 0; x < out.w; ++x)
                            for (int ch = 0; ch < out.c; ++ch) {
                                const std::size_t flat =
                                    ((std::size_t(bi) * out.h + y) * out.w + x) * out.c + ch;
                                const std::int32_t pos = idx[flat];
                                din.at(bi, pos / din.w, pos % din.w, ch) += dout.data[flat];
                            }
                break;
            }

            case LayerKind::relu: {
                const Tensor<T>& dout = dact[ri];
                if (dout.size() == 0) break;
                const Tensor<T>& in = cache.act[std::size_t(l.input)];
                Tensor<T>& din = ensure(l.input);
                if constexpr (std::is_same_v<T, float>) {
                    // accumulate: relu_backward writes, so add via temporary
                    std::vector<float> tmp(in.size());
                    kern::active().relu_backward(in.size(), in.data.data(), dout.data.data(),
                                                 tmp.data());
                    for (std::size_t j = 0; j < in.size(); ++j) din.data[j] += tmp[j];
                } else {
                    for (std::size_t j = 0; j < in.size(); ++j)
                        if (in.data[j] > T(0)) din.data[j] += dout.data[j];
                }
                break;
            }

            case LayerKind::batchnorm: {
                const Tensor<T>& dout = dact[ri];
                if (dout.size() == 0) break;
                if (cache.bn_mean[ri].empty())
                    throw std::logic_error("backward: batchnorm forward was not run in training mode");
                const Tensor<T>& in = cache.act[std::size_t(l.input)];
                Tensor<T>& din = ensure(l.input);
                const auto& p = weights.layer[ri];
                auto& g = grads.layer[ri];
                const std::size_t C = std::size_t(in.c);
                const std::size_t npx = in.size() / C;
                const double n = double(npx);
                std::vector<double> sum_dy(C, 0.0), sum_dy_xhat(C, 0.0);
                for (std::size_t px = 0; px < npx; ++px)
                    for (std::size_t j = 0; j < C; ++j) {
                        const double xhat = (double(in.data[px * C + j]) - double(cache.bn_mean[ri][j])) *
                                            double(cache.bn_inv_sd[ri][j]);
                        const double dy = dout.data[px * C + j];
                        sum_dy[j] += dy;
                        sum_dy_xhat[j] += dy * xhat;
                    }
                for (std::size_t j = 0; j < C; ++j) {
                    g.a[j] = T(sum_dy_xhat[j]);
                    g.b[j] = T(sum_dy[j]);
                }
                for (std::size_t px = 0; px < npx; ++px)
                    for (std::size_t j = 0; j < C; ++j) {
                        const double inv = cache.bn_inv_sd[ri][j];
                        const double xhat =
                            (double(in.data[px * C + j]) - double(cache.bn_mean[ri][j])) * inv;
                        const double dy = dout.data[px * C + j];
                        din.data[px * C + j] += T(double(p.a[j]) * inv *
                                                  (dy - sum_dy[j] / n - xhat * sum_dy_xhat[j] / n));
                    }
                break;
            }

            case LayerKind::conv: {
                const Tensor<T>& dout = dact[ri];
                if (dout.size() == 0) break;
                const Tensor<T>& in = cache.act[std::size_t(l.input)];
                Tensor<T>& din = ensure(l.input);
                const kern::ConvShape s = conv_shape(net, ri, in);
                const auto& p = weights.layer[ri];
                auto& g = grads.layer[ri];
                // kernel transposed to [ky][kx][cout][cin] for the input pass
                std::vector<T> kt(p.a.size());
                for (int ky = 0; ky < s.k; ++ky)
                    for (int kx = 0; kx < s.k; ++kx)
                        for (int ci = 0; ci < s.cin; ++ci)
                            for (int co = 0; co < s.cout; ++co)
                                kt[((std::size_t(ky) * s.k + kx) * s.cout + co) * s.cin + ci] =
                                    p.a[((std::size_t(ky) * s.k + kx) * s.cin + ci) * s.cout + co];
                for (int bi = 0; bi < in.b; ++bi) {
                    if constexpr (std::is_same_v<T, float>) {
                        kern::active().conv2d_grad_input(s, dout.image(bi), kt.data(),
                                                         din.image(bi));
                        kern::active().conv2d_grad_weights(s, in.image(bi), dout.image(bi),
                                                           g.a.data(), g.b.data());
                    } else {
                        conv_grad_input_generic<T>(s, dout.image(bi), kt.data(), din.image(bi));
                        conv_grad_weights_generic<T>(s, in.image(bi), dout.image(bi), g.a.data(),
                                                     g.b.data());
                    }
                }
                break;
            }
        }
        // this node's gradient is consumed; release the memory
        if (l.kind != LayerKind::input_main && l.kind != LayerKind::input_late)
            dact[ri] = Tensor<T>();
    }
}

void save_weights(const std::string& path_prefix, const NetworkSpec& net,
                  const Weights<float>& weights) {
    std::ofstream bin(path_prefix + ".bin", std::ios::binary);
    std::ofstream man(path_prefix + ".manifest");
    if (!bin || !man) throw std::runtime_error("cannot write weights at " + path_prefix);
    std::size_t offset = 0;
    auto dump = [&](const std::string& name, const char* role, const std::vector<float>& v) {
        if (v.empty()) return;
        std::string body;
        body.reserve(v.size() * 4);
        for (float f : v) {
            std::uint32_t bits;
            std::memcpy(&bits, &f, 4);
            for (int s = 0; s < 32; s += 8) body.push_back(char((bits >> s) & 0xff));
        }
        bin.write(body.data(), std::streamsize(body.size()));
        man << name << " " << role << " " << v.size() << " " << offset << "\n";
        offset += v.size() * 4;
    };
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        dump(net.layers[i].name, "a", weights.layer[i].a);
        dump(net.layers[i].name, "b", weights.layer[i].b);
        dump(net.layers[i].name, "rm", weights.layer[i].rm);
        dump(net.layers[i].name, "rv", weights.layer[i].rv);
    }
}

Weights<float> load_weights(const std::string& path_prefix, const NetworkSpec& net) {
    std::ifstream bin(path_prefix + ".bin", std::ios::binary);
    std::ifstream man(path_prefix + ".manifest");
    if (!bin || !man) throw std::runtime_error("cannot read weights at " + path_prefix);
    Weights<float> w;
    w.layer.resize(net.layers.size());
    std::string line;
    while (std::getline(man, line)) {
        std::istringstream ss(line);
        std::string name, role;
        std::size_t count, offset;
        if (!(ss >> name >> role >> count >> offset)) continue;
        int node = -1;
        for (std::size_t i = 0; i < net.layers.size(); ++i)
            if (net.layers[i].name == name) node = int(i);
        if (node < 0) throw std::runtime_error("weights manifest names unknown layer " + name);
        std::vector<float>& dst = role == "a"    ? w.layer[std::size_t(node)].a
                                  : role == "b"  ? w.layer[std::size_t(node)].b
                                  : role == "rm" ? w.layer[std::size_t(node)].rm
                                                 : w.layer[std::size_t(node)].rv;
        dst.resize(count);
        bin.seekg(std::streamoff(offset));
        std::vector<unsigned char> raw(count * 4);
        bin.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size()));
        if (std::size_t(bin.gcount()) != raw.size())
            throw std::runtime_error("weights blob truncated at " + name);
        for (std::size_t j = 0; j < count; ++j) {
            std::uint32_t bits = std::uint32_t(raw[j * 4]) | (std::uint32_t(raw[j * 4 + 1]) << 8) |
                                 (std::uint32_t(raw[j * 4 + 2]) << 16) |
                                 (std::uint32_t(raw[j * 4 + 3]) << 24);
            std::memcpy(&dst[j], &bits, 4);
        }
    }
    return w;
}

template Weights<float> init_weights<float>(const NetworkSpec&, std::uint64_t);
template Weights<double> init_weights<double>(const NetworkSpec&, std::uint64_t);
template void forward<float>(const NetworkSpec&, Weights<float>&, const Tensor<float>&,
                             const Tensor<float>&, const std::vector<std::int32_t>&, bool,
                             ForwardCache<float>&);
template void forward<double>(const NetworkSpec&, Weights<double>&, const Tensor<double>&,
                              const Tensor<double>&, const std::vector<std::int32_t>&, bool,
                              ForwardCache<double>&);
template float masked_log_loss<float>(const std::vector<float>&, const std::vector<std::uint8_t>&,
                                      float, std::vector<float>*);
template double masked_log_loss<double>(const std::vector<double>&,
                                        const std::vector<std::uint8_t>&, double,
                                        std::vector<double>*);
template void backward<float>(const NetworkSpec&, const Weights<float>&, const ForwardCache<float>&,
                              const std::vector<std::int32_t>&, const std::vector<float>&,
                              Weights<float>&);
template void backward<double>(const NetworkSpec&, const Weights<double>&,
                               const ForwardCache<double>&, const std::vector<std::int32_t>&,
                               const std::vector<double>&, Weights<double>&);

} // namespace stratus
