#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace stratus {

// Dense NHWC tensor: shape (batch, height, width, channels).
template <typename T>
struct Tensor {
    int b = 0, h = 0, w = 0, c = 0;
    std::vector<T> data;

    Tensor() = default;
    Tensor(int b_, int h_, int w_, int c_, T fill = T(0))
        : b(b_), h(h_), w(w_), c(c_), data(std::size_t(b_) * h_ * w_ * c_, fill) {
        if (b_ < 1 || h_ < 1 || w_ < 1 || c_ < 1) throw std::invalid_argument("tensor: bad shape");
    }

    std::size_t size() const { return data.size(); }
    std::size_t plane() const { return std::size_t(h) * w * c; }

    T& at(int bi, int y, int x, int ch) {
        return data[((std::size_t(bi) * h + y) * w + x) * c + ch];
    }
    T at(int bi, int y, int x, int ch) const {
        return data[((std::size_t(bi) * h + y) * w + x) * c + ch];
    }

    T* image(int bi) { return data.data() + std::size_t(bi) * plane(); }
    const T* image(int bi) const { return data.data() + std::size_t(bi) * plane(); }

    bool same_shape(const Tensor& o) const { return b == o.b && h == o.h && w == o.w && c == o.c; }
};

} // namespace stratus
