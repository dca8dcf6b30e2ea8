#pragma once

#include <cstddef>
#include <vector>

#include "zoneforge/core/errors.hpp"

namespace zoneforge::unet {

/// Dense (batch, channels, height, width) tensor, row-major with width fastest.
template <typename T>
struct Tensor4 {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<T> v;

    Tensor4() = default;
    Tensor4(int n, int c, int h, int w)
        : n(n), c(c), h(h), w(w),
          v(static_cast<std::size_t>(n) * c * h * w, T(0)) {}

    std::size_t size() const { return v.size(); }
    std::size_t plane() const { return static_cast<std::size_t>(h) * w; }

    std::size_t index(int in, int ic, int iy, int ix) const {
        return ((static_cast<std::size_t>(in) * c + ic) * h + iy) * w + ix;
    }
    T at(int in, int ic, int iy, int ix) const { return v[index(in, ic, iy, ix)]; }
    T& at(int in, int ic, int iy, int ix) { return v[index(in, ic, iy, ix)]; }

    T* sample(int in) { return v.data() + static_cast<std::size_t>(in) * c * plane(); }
    const T* sample(int in) const {
        return v.data() + static_cast<std::size_t>(in) * c * plane();
    }

    bool same_shape(const Tensor4& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }

    void zero() { std::fill(v.begin(), v.end(), T(0)); }

    template <typename U>
    Tensor4<U> cast() const {
        Tensor4<U> out(n, c, h, w);
        for (std::size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<U>(v[i]);
        return out;
    }
};

} // namespace zoneforge::unet
