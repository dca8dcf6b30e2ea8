#include "zoneforge/unet/ops.hpp"

#include <algorithm>
#include <cmath>

namespace zoneforge::unet {

namespace kernels {

namespace {

/// Copies (c, h, w) into (c, h+2p, w+2p) with a zero border.
template <typename T>
const T* pad_copy(const T* x, int c, int h, int w, int pad, std::vector<T>& scratch) {
    if (pad == 0) return x;
    const int hp = h + 2 * pad, wp = w + 2 * pad;
    scratch.assign(static_cast<std::size_t>(c) * hp * wp, T(0));
    for (int ic = 0; ic < c; ++ic)
        for (int y = 0; y < h; ++y) {
            const T* src = x + (static_cast<std::size_t>(ic) * h + y) * w;
            T* dst = scratch.data() + (static_cast<std::size_t>(ic) * hp + y + pad) * wp + pad;
            std::copy(src, src + w, dst);
        }
    return scratch.data();
}

} // namespace

template <typename T>
void conv2d_fwd(const T* x, int in_c, int h, int w, const T* wgt, const T* bias, int out_c,
                int k, int pad, T* y, std::vector<T>& scratch) {
    const T* xp = pad_copy(x, in_c, h, w, pad, scratch);
    const int hp = h + 2 * pad, wp = w + 2 * pad;
    for (int oc = 0; oc < out_c; ++oc) {
        T* ochan = y + static_cast<std::size_t>(oc) * h * w;
        std::fill(ochan, ochan + static_cast<std::size_t>(h) * w, bias ? bias[oc] : T(0));
        for (int ic = 0; ic < in_c; ++ic) {
            const T* wk = wgt + (static_cast<std::size_t>(oc) * in_c + ic) * k * k;
            const T* xchan = xp + static_cast<std::size_t>(ic) * hp * wp;
            if (k == 3) {
                // fused row kernel: one pass over y per (ic, ky)
                for (int ky = 0; ky < 3; ++ky) {
                    const T w0 = wk[3 * ky], w1 = wk[3 * ky + 1], w2 = wk[3 * ky + 2];
                    for (int y0 = 0; y0 < h; ++y0) {
                        const T* __restrict__ xr = xchan + (y0 + ky) * wp;
                        T* __restrict__ yr = ochan + static_cast<std::size_t>(y0) * w;
                        for (int x0 = 0; x0 < w; ++x0)
                            yr[x0] += w0 * xr[x0] + w1 * xr[x0 + 1] + w2 * xr[x0 + 2];
                    }
                }
            } else {
                for (int ky = 0; ky < k; ++ky)
                    for (int kx = 0; kx < k; ++kx) {
                        const T wv = wk[ky * k + kx];
                        for (int y0 = 0; y0 < h; ++y0) {
                            const T* __restrict__ xr = xchan + (y0 + ky) * wp + kx;
                            T* __restrict__ yr = ochan + static_cast<std::size_t>(y0) * w;
                            for (int x0 = 0; x0 < w; ++x0) yr[x0] += wv * xr[x0];
                        }
                    }
            }
        }
    }
}

template <typename T>
void conv2d_bwd(const T* x, int in_c, int h, int w, const T* wgt, int out_c, int k, int pad,
                const T* dy, T* dx, T* dwgt, T* dbias, std::vector<T>& scratch) {
    // dw and db: correlate input with the cotangent. The scratch buffer is
    // reused for the dx pass afterwards; the lifetimes do not overlap.
    if (dwgt || dbias) {
        const T* xp = pad_copy(x, in_c, h, w, pad, scratch);
        const int hp = h + 2 * pad, wp = w + 2 * pad;
        for (int oc = 0; oc < out_c; ++oc) {
            const T* dchan = dy + static_cast<std::size_t>(oc) * h * w;
            if (dbias) {
                T acc = 0;
                for (std::size_t i = 0; i < static_cast<std::size_t>(h) * w; ++i)
                    acc += dchan[i];
                dbias[oc] += acc;
            }
            if (dwgt)
                for (int ic = 0; ic < in_c; ++ic) {
                    const T* xchan = xp + static_cast<std::size_t>(ic) * hp * wp;
                    T* dwk = dwgt + (static_cast<std::size_t>(oc) * in_c + ic) * k * k;
                    if (k == 3) {
                        for (int ky = 0; ky < 3; ++ky) {
                            T a0 = 0, a1 = 0, a2 = 0;
                            for (int y0 = 0; y0 < h; ++y0) {
                                const T* __restrict__ xr = xchan + (y0 + ky) * wp;
                                const T* __restrict__ dr =
                                    dchan + static_cast<std::size_t>(y0) * w;
                                for (int x0 = 0; x0 < w; ++x0) {
                                    a0 += xr[x0] * dr[x0];
                                    a1 += xr[x0 + 1] * dr[x0];
                                    a2 += xr[x0 + 2] * dr[x0];
                                }
                            }
                            dwk[3 * ky] += a0;
                            dwk[3 * ky + 1] += a1;
                            dwk[3 * ky + 2] += a2;
                        }
                    } else {
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx) {
                                T acc = 0;
                                for (int y0 = 0; y0 < h; ++y0) {
                                    const T* __restrict__ xr = xchan + (y0 + ky) * wp + kx;
                                    const T* __restrict__ dr =
                                        dchan + static_cast<std::size_t>(y0) * w;
                                    for (int x0 = 0; x0 < w; ++x0) acc += xr[x0] * dr[x0];
                                }
                                dwk[ky * k + kx] += acc;
                            }
                    }
                }
        }
    }
    // dx: full correlation of dy with the flipped kernel.
    if (dx) {
        const int pad2 = k - 1 - pad;
        const T* dyp = pad_copy(dy, out_c, h, w, pad2, scratch);
        const int hp = h + 2 * pad2, wp = w + 2 * pad2;
        for (int ic = 0; ic < in_c; ++ic) {
            T* dchan = dx + static_cast<std::size_t>(ic) * h * w;
            for (int oc = 0; oc < out_c; ++oc) {
                const T* wk = wgt + (static_cast<std::size_t>(oc) * in_c + ic) * k * k;
                const T* dychan = dyp + static_cast<std::size_t>(oc) * hp * wp;
                if (k == 3) {
                    for (int ky = 0; ky < 3; ++ky) {
                        // flipped kernel row 2-ky, reversed in x
                        const T w0 = wk[3 * (2 - ky) + 2], w1 = wk[3 * (2 - ky) + 1],
                                w2 = wk[3 * (2 - ky)];
                        for (int y0 = 0; y0 < h; ++y0) {
                            const T* __restrict__ dr = dychan + (y0 + ky) * wp;
                            T* __restrict__ xr = dchan + static_cast<std::size_t>(y0) * w;
                            for (int x0 = 0; x0 < w; ++x0)
                                xr[x0] += w0 * dr[x0] + w1 * dr[x0 + 1] + w2 * dr[x0 + 2];
                        }
                    }
                } else {
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx) {
                            const T wv = wk[(k - 1 - ky) * k + (k - 1 - kx)];
                            for (int y0 = 0; y0 < h; ++y0) {
                                const T* __restrict__ dr = dychan + (y0 + ky) * wp + kx;
                                T* __restrict__ xr =
                                    dchan + static_cast<std::size_t>(y0) * w;
                                for (int x0 = 0; x0 < w; ++x0) xr[x0] += wv * dr[x0];
                            }
                        }
                }
            }
        }
    }
}

template void conv2d_fwd<float>(const float*, int, int, int, const float*, const float*, int,
                                int, int, float*, std::vector<float>&);
template void conv2d_fwd<double>(const double*, int, int, int, const double*, const double*,
                                 int, int, int, double*, std::vector<double>&);
template void conv2d_bwd<float>(const float*, int, int, int, const float*, int, int, int,
                                const float*, float*, float*, float*, std::vector<float>&);
template void conv2d_bwd<double>(const double*, int, int, int, const double*, int, int, int,
                                 const double*, double*, double*, double*,
                                 std::vector<double>&);

} // namespace kernels

namespace {

template <typename T>
void check_conv_shapes(const Tensor4<T>& x, const Tensor4<T>& w, std::size_t bias_len) {
    if (w.c != x.c)
        throw ShapeError("conv2d: kernel expects " + std::to_string(w.c) +
                         " input channels, tensor has " + std::to_string(x.c));
    if (w.h != w.w) throw ShapeError("conv2d: only square kernels are supported");
    if (bias_len != static_cast<std::size_t>(w.n))
        throw ShapeError("conv2d: bias length must equal the output channel count");
}

} // namespace

template <typename T>
Tensor4<T> conv2d(const Tensor4<T>& x, const Tensor4<T>& w, const std::vector<T>& b, int pad) {
    check_conv_shapes(x, w, b.size());
    Tensor4<T> y(x.n, w.n, x.h, x.w);
    std::vector<T> scratch;
    for (int in = 0; in < x.n; ++in)
        kernels::conv2d_fwd(x.sample(in), x.c, x.h, x.w, w.v.data(), b.data(), w.n, w.h, pad,
                            y.sample(in), scratch);
    return y;
}

template <typename T>
void conv2d_grads(const Tensor4<T>& x, const Tensor4<T>& w, const Tensor4<T>& dy, int pad,
                  Tensor4<T>* dx, Tensor4<T>* dw, std::vector<T>* db) {
    check_conv_shapes(x, w, static_cast<std::size_t>(w.n));
    if (dy.n != x.n || dy.c != w.n || dy.h != x.h || dy.w != x.w)
        throw ShapeError("conv2d_grads: cotangent shape mismatch");
    if (dx) {
        *dx = Tensor4<T>(x.n, x.c, x.h, x.w);
    }
    if (dw) {
        *dw = Tensor4<T>(w.n, w.c, w.h, w.w);
    }
    if (db) db->assign(w.n, T(0));
    std::vector<T> scratch;
    for (int in = 0; in < x.n; ++in)
        kernels::conv2d_bwd(x.sample(in), x.c, x.h, x.w, w.v.data(), w.n, w.h, pad,
                            dy.sample(in), dx ? dx->sample(in) : nullptr,
                            dw ? dw->v.data() : nullptr, db ? db->data() : nullptr, scratch);
}

template <typename T>
Tensor4<T> relu(const Tensor4<T>& x) {
    Tensor4<T> y = x;
    for (T& v : y.v) v = std::max(v, T(0));
    return y;
}

template <typename T>
Tensor4<T> sigmoid_clamped(const Tensor4<T>& x) {
    constexpr T eps = static_cast<T>(1e-7);
    Tensor4<T> y = x;
    for (T& v : y.v) {
        const T s = T(1) / (T(1) + std::exp(-v));
        v = std::clamp(s, eps, T(1) - eps);
    }
    return y;
}

template <typename T>
Tensor4<T> avg_pool2(const Tensor4<T>& x) {
    if (x.h % 2 != 0 || x.w % 2 != 0)
        throw ShapeError("avg_pool2 needs even spatial dims, got " + std::to_string(x.h) + "x" +
                         std::to_string(x.w));
    Tensor4<T> y(x.n, x.c, x.h / 2, x.w / 2);
    for (int in = 0; in < x.n; ++in)
        for (int ic = 0; ic < x.c; ++ic)
            for (int iy = 0; iy < y.h; ++iy)
                for (int ix = 0; ix < y.w; ++ix)
                    y.at(in, ic, iy, ix) =
                        (x.at(in, ic, 2 * iy, 2 * ix) + x.at(in, ic, 2 * iy, 2 * ix + 1) +
                         x.at(in, ic, 2 * iy + 1, 2 * ix) +
                         x.at(in, ic, 2 * iy + 1, 2 * ix + 1)) /
                        T(4);
    return y;
}

template <typename T>
Tensor4<T> upsample2_nearest(const Tensor4<T>& x) {
    Tensor4<T> y(x.n, x.c, x.h * 2, x.w * 2);
    for (int in = 0; in < x.n; ++in)
        for (int ic = 0; ic < x.c; ++ic)
            for (int iy = 0; iy < x.h; ++iy)
                for (int ix = 0; ix < x.w; ++ix) {
                    const T v = x.at(in, ic, iy, ix);
                    y.at(in, ic, 2 * iy, 2 * ix) = v;
                    y.at(in, ic, 2 * iy, 2 * ix + 1) = v;
                    y.at(in, ic, 2 * iy + 1, 2 * ix) = v;
                    y.at(in, ic, 2 * iy + 1, 2 * ix + 1) = v;
                }
    return y;
}

template <typename T>
Tensor4<T> concat_channels(const Tensor4<T>& a, const Tensor4<T>& b) {
    if (a.n != b.n || a.h != b.h || a.w != b.w)
        throw ShapeError("concat_channels: n/h/w mismatch");
    Tensor4<T> y(a.n, a.c + b.c, a.h, a.w);
    for (int in = 0; in < a.n; ++in) {
        std::copy(a.sample(in), a.sample(in) + static_cast<std::size_t>(a.c) * a.plane(),
                  y.sample(in));
        std::copy(b.sample(in), b.sample(in) + static_cast<std::size_t>(b.c) * b.plane(),
                  y.sample(in) + static_cast<std::size_t>(a.c) * a.plane());
    }
    return y;
}

#define ZONEFORGE_INSTANTIATE(T)                                                               \
    template Tensor4<T> conv2d<T>(const Tensor4<T>&, const Tensor4<T>&, const std::vector<T>&, \
                                  int);                                                        \
    template void conv2d_grads<T>(const Tensor4<T>&, const Tensor4<T>&, const Tensor4<T>&,    \
                                  int, Tensor4<T>*, Tensor4<T>*, std::vector<T>*);             \
    template Tensor4<T> relu<T>(const Tensor4<T>&);                                           \
    template Tensor4<T> sigmoid_clamped<T>(const Tensor4<T>&);                                \
    template Tensor4<T> avg_pool2<T>(const Tensor4<T>&);                                      \
    template Tensor4<T> upsample2_nearest<T>(const Tensor4<T>&);                              \
    template Tensor4<T> concat_channels<T>(const Tensor4<T>&, const Tensor4<T>&);

ZONEFORGE_INSTANTIATE(float)
ZONEFORGE_INSTANTIATE(double)
#undef ZONEFORGE_INSTANTIATE

} // namespace zoneforge::unet
