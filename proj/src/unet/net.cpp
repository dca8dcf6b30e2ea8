#include "zoneforge/unet/net.hpp"

#include <algorithm>
#include <cmath>

namespace zoneforge::unet {

void ArchConfig::validate() const {
    if (in_channels < 1 || in_channels > 6)
        throw ConfigError("in_channels must lie in 1..6");
    if (n_stages < 1) throw ConfigError("n_stages must be >= 1");
    if (convs_per_block != 4)
        throw ConfigError("dense blocks have exactly 4 convolutions");
    if (growth < 1 || stem_channels < 1)
        throw ConfigError("growth and stem_channels must be >= 1");
    if (!(compression > 0.0 && compression <= 1.0))
        throw ConfigError("compression must lie in (0, 1]");
}

ArchConfig ArchConfig::desk(int in_channels) {
    ArchConfig a;
    a.in_channels = in_channels;
    return a;
}

ArchConfig ArchConfig::paper(int in_channels) {
    ArchConfig a;
    a.in_channels = in_channels;
    a.n_stages = 4;
    a.growth = 16;
    a.stem_channels = 32;
    return a;
}

ArchConfig ArchConfig::toy(int in_channels) {
    ArchConfig a;
    a.in_channels = in_channels;
    a.n_stages = 2;
    a.growth = 4;
    a.stem_channels = 8;
    return a;
}

namespace {

int compressed_channels(int c, double theta) {
    return std::max(1, static_cast<int>(std::ceil(theta * c - 1e-9)));
}

} // namespace

Layout build_layout(const ArchConfig& arch) {
    arch.validate();
    Layout lt;
    std::size_t off = 0;
    auto add = [&off](int in_c, int out_c, int k, int pad) {
        ConvSpec s;
        s.in_c = in_c;
        s.out_c = out_c;
        s.k = k;
        s.pad = pad;
        s.w_off = off;
        s.b_off = off + s.w_len();
        off = s.b_off + static_cast<std::size_t>(out_c);
        return s;
    };
    auto add_block = [&](int in_c) {
        std::array<ConvSpec, 4> block;
        for (int l = 0; l < 4; ++l)
            block[l] = add(in_c + l * arch.growth, arch.growth, ArchConfig::kKernel, 1);
        return block;
    };

    const int S = arch.n_stages;
    lt.stem = add(arch.in_channels, arch.stem_channels, ArchConfig::kKernel, 1);
    int cur = arch.stem_channels;
    for (int s = 0; s < S; ++s) {
        lt.enc_in.push_back(cur);
        lt.enc.push_back(add_block(cur));
        lt.enc_out.push_back(cur + 4 * arch.growth);
        const int tdc = compressed_channels(lt.enc_out.back(), arch.compression);
        lt.td.push_back(add(lt.enc_out.back(), tdc, 1, 0));
        lt.td_out.push_back(tdc);
        cur = tdc;
    }
    lt.bottleneck = add_block(cur);
    lt.bottleneck_out = cur + 4 * arch.growth;
    cur = lt.bottleneck_out;

    lt.tu.resize(S);
    lt.dec.resize(S);
    lt.tu_out.resize(S);
    lt.dec_in.resize(S);
    lt.dec_out.resize(S);
    for (int s = S - 1; s >= 0; --s) {
        const int up_c = compressed_channels(cur, arch.compression);
        lt.tu[s] = add(cur, up_c, 1, 0);
        lt.tu_out[s] = up_c;
        lt.dec_in[s] = up_c + lt.enc_out[s];
        lt.dec[s] = add_block(lt.dec_in[s]);
        lt.dec_out[s] = lt.dec_in[s] + 4 * arch.growth;
        cur = lt.dec_out[s];
    }
    lt.head = add(cur, ArchConfig::kOutChannels, 1, 0);
    lt.param_count = off;
    return lt;
}

std::vector<const ConvSpec*> Layout::ordered() const {
    std::vector<const ConvSpec*> out;
    out.push_back(&stem);
    for (const auto& block : enc)
        for (const auto& s : block) out.push_back(&s);
    for (const auto& s : td) out.push_back(&s);
    for (const auto& s : bottleneck) out.push_back(&s);
    for (const auto& s : tu) out.push_back(&s);
    for (const auto& block : dec)
        for (const auto& s : block) out.push_back(&s);
    out.push_back(&head);
    std::sort(out.begin(), out.end(),
              [](const ConvSpec* a, const ConvSpec* b) { return a->w_off < b->w_off; });
    return out;
}

std::size_t param_count(const ArchConfig& arch) { return build_layout(arch).param_count; }

template <typename T>
NetworkParams<T> init_params_t(const ArchConfig& arch, Rng rng) {
    const Layout lt = build_layout(arch);
    NetworkParams<T> net;
    net.arch = arch;
    net.flat.assign(lt.param_count, T(0));
    for (const ConvSpec* s : lt.ordered()) {
        const double sd = std::sqrt(2.0 / (static_cast<double>(s->in_c) * s->k * s->k));
        for (std::size_t i = 0; i < s->w_len(); ++i)
            net.flat[s->w_off + i] = static_cast<T>(rng.normal(0.0, sd));
        // biases stay zero
    }
    return net;
}

template NetworkParams<float> init_params_t<float>(const ArchConfig&, Rng);
template NetworkParams<double> init_params_t<double>(const ArchConfig&, Rng);

NetworkParams<float> init_params(const ArchConfig& arch, Rng rng) {
    return init_params_t<float>(arch, rng);
}

namespace {

template <typename T>
void ensure_shape(Tensor4<T>& t, int n, int c, int h, int w) {
    if (t.n != n || t.c != c || t.h != h || t.w != w) t = Tensor4<T>(n, c, h, w);
}

template <typename T>
void pool2_fwd(const T* x, int c, int h, int w, T* y) {
    const int h2 = h / 2, w2 = w / 2;
    for (int ic = 0; ic < c; ++ic) {
        const T* xc = x + static_cast<std::size_t>(ic) * h * w;
        T* yc = y + static_cast<std::size_t>(ic) * h2 * w2;
        for (int iy = 0; iy < h2; ++iy)
            for (int ix = 0; ix < w2; ++ix)
                yc[iy * w2 + ix] =
                    (xc[(2 * iy) * w + 2 * ix] + xc[(2 * iy) * w + 2 * ix + 1] +
                     xc[(2 * iy + 1) * w + 2 * ix] + xc[(2 * iy + 1) * w + 2 * ix + 1]) /
                    T(4);
    }
}

template <typename T>
void pool2_bwd(const T* dy, int c, int h2, int w2, T* dx) {
    const int h = 2 * h2, w = 2 * w2;
    for (int ic = 0; ic < c; ++ic) {
        const T* dyc = dy + static_cast<std::size_t>(ic) * h2 * w2;
        T* dxc = dx + static_cast<std::size_t>(ic) * h * w;
        for (int iy = 0; iy < h2; ++iy)
            for (int ix = 0; ix < w2; ++ix) {
                const T g = dyc[iy * w2 + ix] / T(4);
                dxc[(2 * iy) * w + 2 * ix] = g;
                dxc[(2 * iy) * w + 2 * ix + 1] = g;
                dxc[(2 * iy + 1) * w + 2 * ix] = g;
                dxc[(2 * iy + 1) * w + 2 * ix + 1] = g;
            }
    }
}

template <typename T>
void up2_fwd(const T* x, int c, int h, int w, T* y) {
    const int w2 = 2 * w;
    for (int ic = 0; ic < c; ++ic) {
        const T* xc = x + static_cast<std::size_t>(ic) * h * w;
        T* yc = y + static_cast<std::size_t>(ic) * 4 * h * w;
        for (int iy = 0; iy < h; ++iy)
            for (int ix = 0; ix < w; ++ix) {
                const T v = xc[iy * w + ix];
                yc[(2 * iy) * w2 + 2 * ix] = v;
                yc[(2 * iy) * w2 + 2 * ix + 1] = v;
                yc[(2 * iy + 1) * w2 + 2 * ix] = v;
                yc[(2 * iy + 1) * w2 + 2 * ix + 1] = v;
            }
    }
}

template <typename T>
void up2_bwd(const T* dy, int c, int h, int w, T* dv) {
    const int w2 = 2 * w;
    for (int ic = 0; ic < c; ++ic) {
        const T* dyc = dy + static_cast<std::size_t>(ic) * 4 * h * w;
        T* dvc = dv + static_cast<std::size_t>(ic) * h * w;
        for (int iy = 0; iy < h; ++iy)
            for (int ix = 0; ix < w; ++ix)
                dvc[iy * w + ix] = dyc[(2 * iy) * w2 + 2 * ix] +
                                   dyc[(2 * iy) * w2 + 2 * ix + 1] +
                                   dyc[(2 * iy + 1) * w2 + 2 * ix] +
                                   dyc[(2 * iy + 1) * w2 + 2 * ix + 1];
    }
}

/// Dense block forward over a concat buffer whose first in_c channels hold the
/// block input; each layer writes its ReLU'd output right after the channels
/// it consumed.
template <typename T>
void block_fwd(const T* params, const std::array<ConvSpec, 4>& specs, Tensor4<T>& buf,
               std::vector<T>& scratch) {
    const std::size_t plane = buf.plane();
    for (int in = 0; in < buf.n; ++in) {
        T* base = buf.sample(in);
        for (const ConvSpec& s : specs) {
            T* out = base + static_cast<std::size_t>(s.in_c) * plane;
            kernels::conv2d_fwd(base, s.in_c, buf.h, buf.w, params + s.w_off,
                                params + s.b_off, s.out_c, s.k, s.pad, out, scratch);
            const std::size_t len = static_cast<std::size_t>(s.out_c) * plane;
            for (std::size_t i = 0; i < len; ++i) out[i] = std::max(out[i], T(0));
        }
    }
}

/// Matching backward: gbuf carries the cotangent of the whole concat buffer
/// and ends with the block-input cotangent in its first in_c channels.
template <typename T>
void block_bwd(const T* params, const std::array<ConvSpec, 4>& specs, const Tensor4<T>& buf,
               Tensor4<T>& gbuf, T* grad, std::vector<T>& scratch) {
    const std::size_t plane = buf.plane();
    for (int in = 0; in < buf.n; ++in) {
        const T* base = buf.sample(in);
        T* gbase = gbuf.sample(in);
        for (int l = 3; l >= 0; --l) {
            const ConvSpec& s = specs[l];
            const std::size_t lo = static_cast<std::size_t>(s.in_c) * plane;
            const std::size_t len = static_cast<std::size_t>(s.out_c) * plane;
            // ReLU mask from the stored activations.
            for (std::size_t i = 0; i < len; ++i)
                if (base[lo + i] <= T(0)) gbase[lo + i] = T(0);
            kernels::conv2d_bwd(base, s.in_c, buf.h, buf.w, params + s.w_off, s.out_c, s.k,
                                s.pad, gbase + lo, gbase, grad + s.w_off, grad + s.b_off,
                                scratch);
        }
    }
}

} // namespace

template <typename T>
DenseUnet<T>::DenseUnet(const ArchConfig& arch) : arch_(arch), layout_(build_layout(arch)) {}

template <typename T>
Tensor4<T> DenseUnet<T>::forward(std::span<const T> params, const Tensor4<T>& x,
                                 Cache<T>& cache) const {
    const Layout& lt = layout_;
    if (params.size() != lt.param_count)
        throw ShapeError("parameter vector length does not match the architecture");
    if (x.c != arch_.in_channels)
        throw ShapeError("forward: expected " + std::to_string(arch_.in_channels) +
                         " input channels, got " + std::to_string(x.c));
    const int f = arch_.pool_factor();
    if (x.h % f != 0 || x.w % f != 0 || x.h < f || x.w < f)
        throw ShapeError("forward: spatial dims must be divisible by " + std::to_string(f));

    const int S = arch_.n_stages;
    const T* p = params.data();
    cache.input = x;
    cache.enc_buf.resize(S);
    cache.dec_buf.resize(S);

    int r_h = x.h, r_w = x.w;
    ensure_shape(cache.enc_buf[0], x.n, lt.enc_out[0], r_h, r_w);
    for (int in = 0; in < x.n; ++in)
        kernels::conv2d_fwd(x.sample(in), x.c, x.h, x.w, p + lt.stem.w_off, p + lt.stem.b_off,
                            lt.stem.out_c, lt.stem.k, lt.stem.pad, cache.enc_buf[0].sample(in),
                            cache.scratch);

    Tensor4<T> tmp;
    for (int s = 0; s < S; ++s) {
        block_fwd(p, lt.enc[s], cache.enc_buf[s], cache.scratch);
        // transition down into the next buffer's input channels
        ensure_shape(tmp, 1, lt.td_out[s], r_h, r_w);
        Tensor4<T>* next;
        if (s + 1 < S) {
            ensure_shape(cache.enc_buf[s + 1], x.n, lt.enc_out[s + 1], r_h / 2, r_w / 2);
            next = &cache.enc_buf[s + 1];
        } else {
            ensure_shape(cache.bott_buf, x.n, lt.bottleneck_out, r_h / 2, r_w / 2);
            next = &cache.bott_buf;
        }
        for (int in = 0; in < x.n; ++in) {
            kernels::conv2d_fwd(cache.enc_buf[s].sample(in), lt.enc_out[s], r_h, r_w,
                                p + lt.td[s].w_off, p + lt.td[s].b_off, lt.td_out[s], 1, 0,
                                tmp.v.data(), cache.scratch);
            pool2_fwd(tmp.v.data(), lt.td_out[s], r_h, r_w, next->sample(in));
        }
        r_h /= 2;
        r_w /= 2;
    }

    block_fwd(p, lt.bottleneck, cache.bott_buf, cache.scratch);

    const Tensor4<T>* cur = &cache.bott_buf;
    int cur_c = lt.bottleneck_out;
    for (int s = S - 1; s >= 0; --s) {
        ensure_shape(cache.dec_buf[s], x.n, lt.dec_out[s], r_h * 2, r_w * 2);
        ensure_shape(tmp, 1, lt.tu_out[s], r_h, r_w);
        const std::size_t skip_len =
            static_cast<std::size_t>(lt.enc_out[s]) * cache.enc_buf[s].plane();
        for (int in = 0; in < x.n; ++in) {
            kernels::conv2d_fwd(cur->sample(in), cur_c, r_h, r_w, p + lt.tu[s].w_off,
                                p + lt.tu[s].b_off, lt.tu_out[s], 1, 0, tmp.v.data(),
                                cache.scratch);
            up2_fwd(tmp.v.data(), lt.tu_out[s], r_h, r_w, cache.dec_buf[s].sample(in));
            std::copy(cache.enc_buf[s].sample(in), cache.enc_buf[s].sample(in) + skip_len,
                      cache.dec_buf[s].sample(in) +
                          static_cast<std::size_t>(lt.tu_out[s]) * cache.dec_buf[s].plane());
        }
        block_fwd(p, lt.dec[s], cache.dec_buf[s], cache.scratch);
        cur = &cache.dec_buf[s];
        cur_c = lt.dec_out[s];
        r_h *= 2;
        r_w *= 2;
    }

    Tensor4<T> logits(x.n, ArchConfig::kOutChannels, x.h, x.w);
    for (int in = 0; in < x.n; ++in)
        kernels::conv2d_fwd(cache.dec_buf[0].sample(in), lt.dec_out[0], x.h, x.w,
                            p + lt.head.w_off, p + lt.head.b_off, ArchConfig::kOutChannels, 1,
                            0, logits.sample(in), cache.scratch);
    cache.sig_out = sigmoid_clamped(logits);
    return cache.sig_out;
}

template <typename T>
void DenseUnet<T>::backward(std::span<const T> params, const Cache<T>& cache,
                            const Tensor4<T>& dy, std::span<T> grad) const {
    const Layout& lt = layout_;
    if (grad.size() != lt.param_count) throw ShapeError("gradient vector length mismatch");
    if (!dy.same_shape(cache.sig_out))
        throw ShapeError("backward: cotangent shape does not match the forward output");
    std::fill(grad.begin(), grad.end(), T(0));
    const T* p = params.data();
    T* g = grad.data();
    const int S = arch_.n_stages;
    const int n = dy.n;
    std::vector<T> scratch;

    // Through the clamped sigmoid.
    Tensor4<T> dz = dy;
    for (std::size_t i = 0; i < dz.v.size(); ++i) {
        const T y = cache.sig_out.v[i];
        dz.v[i] *= y * (T(1) - y);
    }

    std::vector<Tensor4<T>> gdec(S), genc(S);
    Tensor4<T> gbott(cache.bott_buf.n, cache.bott_buf.c, cache.bott_buf.h, cache.bott_buf.w);
    for (int s = 0; s < S; ++s) {
        gdec[s] = Tensor4<T>(n, cache.dec_buf[s].c, cache.dec_buf[s].h, cache.dec_buf[s].w);
        genc[s] = Tensor4<T>(n, cache.enc_buf[s].c, cache.enc_buf[s].h, cache.enc_buf[s].w);
    }

    for (int in = 0; in < n; ++in)
        kernels::conv2d_bwd(cache.dec_buf[0].sample(in), lt.dec_out[0], dz.h, dz.w,
                            p + lt.head.w_off, ArchConfig::kOutChannels, 1, 0, dz.sample(in),
                            gdec[0].sample(in), g + lt.head.w_off, g + lt.head.b_off, scratch);

    Tensor4<T> dv;
    for (int s = 0; s < S; ++s) {
        block_bwd(p, lt.dec[s], cache.dec_buf[s], gdec[s], g, scratch);
        Tensor4<T>& gprev = (s == S - 1) ? gbott : gdec[s + 1];
        const Tensor4<T>& prev = (s == S - 1) ? cache.bott_buf : cache.dec_buf[s + 1];
        const int rl_h = prev.h, rl_w = prev.w;
        ensure_shape(dv, 1, lt.tu_out[s], rl_h, rl_w);
        const std::size_t plane = gdec[s].plane();
        const std::size_t skip_off = static_cast<std::size_t>(lt.tu_out[s]) * plane;
        const std::size_t skip_len = static_cast<std::size_t>(lt.enc_out[s]) * plane;
        for (int in = 0; in < n; ++in) {
            up2_bwd(gdec[s].sample(in), lt.tu_out[s], rl_h, rl_w, dv.v.data());
            kernels::conv2d_bwd(prev.sample(in), prev.c, rl_h, rl_w, p + lt.tu[s].w_off,
                                lt.tu_out[s], 1, 0, dv.v.data(), gprev.sample(in),
                                g + lt.tu[s].w_off, g + lt.tu[s].b_off, scratch);
            const T* src = gdec[s].sample(in) + skip_off;
            T* dst = genc[s].sample(in);
            for (std::size_t i = 0; i < skip_len; ++i) dst[i] += src[i];
        }
    }

    block_bwd(p, lt.bottleneck, cache.bott_buf, gbott, g, scratch);

    Tensor4<T> dtmp;
    for (int s = S - 1; s >= 0; --s) {
        const Tensor4<T>& gsrc = (s == S - 1) ? gbott : genc[s + 1];
        const int rl_h = gsrc.h, rl_w = gsrc.w;
        ensure_shape(dtmp, 1, lt.td_out[s], rl_h * 2, rl_w * 2);
        for (int in = 0; in < n; ++in) {
            pool2_bwd(gsrc.sample(in), lt.td_out[s], rl_h, rl_w, dtmp.v.data());
            kernels::conv2d_bwd(cache.enc_buf[s].sample(in), lt.enc_out[s], rl_h * 2, rl_w * 2,
                                p + lt.td[s].w_off, lt.td_out[s], 1, 0, dtmp.v.data(),
                                genc[s].sample(in), g + lt.td[s].w_off, g + lt.td[s].b_off,
                                scratch);
        }
        block_bwd(p, lt.enc[s], cache.enc_buf[s], genc[s], g, scratch);
    }

    for (int in = 0; in < n; ++in)
        kernels::conv2d_bwd(cache.input.sample(in), arch_.in_channels, cache.input.h,
                            cache.input.w, p + lt.stem.w_off, lt.stem.out_c, lt.stem.k,
                            lt.stem.pad, genc[0].sample(in), static_cast<T*>(nullptr),
                            g + lt.stem.w_off, g + lt.stem.b_off, scratch);
}

template class DenseUnet<float>;
template class DenseUnet<double>;

template <typename T>
Tensor4<T> forward(const NetworkParams<T>& net, const Tensor4<T>& x) {
    DenseUnet<T> engine(net.arch);
    Cache<T> cache;
    return engine.forward(net.flat, x, cache);
}

template Tensor4<float> forward<float>(const NetworkParams<float>&, const Tensor4<float>&);
template Tensor4<double> forward<double>(const NetworkParams<double>&, const Tensor4<double>&);

namespace {

/// Packs stand-alone block weights into the flat layout block_fwd expects.
template <typename T>
std::pair<std::vector<T>, std::array<ConvSpec, 4>> pack_block(const DenseBlockWeights<T>& wb,
                                                              int in_c, int growth) {
    std::array<ConvSpec, 4> specs;
    std::size_t off = 0;
    for (int l = 0; l < 4; ++l) {
        ConvSpec s;
        s.in_c = in_c + l * growth;
        s.out_c = growth;
        s.k = ArchConfig::kKernel;
        s.pad = 1;
        s.w_off = off;
        s.b_off = off + s.w_len();
        off = s.b_off + growth;
        specs[l] = s;
    }
    std::vector<T> flat(off, T(0));
    for (int l = 0; l < 4; ++l) {
        if (wb.w[l].n != growth || wb.w[l].c != in_c + l * growth || wb.w[l].h != 3 ||
            wb.w[l].w != 3)
            throw ShapeError("dense_block: layer " + std::to_string(l) +
                             " kernel shape does not follow the dense pattern");
        if (wb.b[l].size() != static_cast<std::size_t>(growth))
            throw ShapeError("dense_block: bias length mismatch");
        std::copy(wb.w[l].v.begin(), wb.w[l].v.end(), flat.begin() + specs[l].w_off);
        std::copy(wb.b[l].begin(), wb.b[l].end(), flat.begin() + specs[l].b_off);
    }
    return {std::move(flat), specs};
}

} // namespace

template <typename T>
DenseBlockWeights<T> DenseBlockWeights<T>::init(int in_c, int growth, Rng rng) {
    DenseBlockWeights<T> wb;
    for (int l = 0; l < 4; ++l) {
        const int ic = in_c + l * growth;
        Tensor4<T> w(growth, ic, 3, 3);
        const double sd = std::sqrt(2.0 / (9.0 * ic));
        for (T& v : w.v) v = static_cast<T>(rng.normal(0.0, sd));
        wb.w.push_back(std::move(w));
        wb.b.emplace_back(growth, T(0));
    }
    return wb;
}

template struct DenseBlockWeights<float>;
template struct DenseBlockWeights<double>;

template <typename T>
Tensor4<T> dense_block(const Tensor4<T>& x, const DenseBlockWeights<T>& wb) {
    if (wb.w.size() != 4 || wb.b.size() != 4)
        throw ShapeError("dense_block needs exactly 4 conv layers");
    const int growth = wb.w[0].n;
    auto [flat, specs] = pack_block(wb, x.c, growth);
    Tensor4<T> buf(x.n, x.c + 4 * growth, x.h, x.w);
    for (int in = 0; in < x.n; ++in)
        std::copy(x.sample(in), x.sample(in) + static_cast<std::size_t>(x.c) * x.plane(),
                  buf.sample(in));
    std::vector<T> scratch;
    block_fwd(flat.data(), specs, buf, scratch);
    return buf;
}

template Tensor4<float> dense_block<float>(const Tensor4<float>&,
                                           const DenseBlockWeights<float>&);
template Tensor4<double> dense_block<double>(const Tensor4<double>&,
                                             const DenseBlockWeights<double>&);

template <typename T>
void dense_block_grads(const Tensor4<T>& x, const DenseBlockWeights<T>& wb,
                       const Tensor4<T>& dout, Tensor4<T>* dx, DenseBlockWeights<T>* dwb) {
    const int growth = wb.w[0].n;
    auto [flat, specs] = pack_block(wb, x.c, growth);
    Tensor4<T> buf(x.n, x.c + 4 * growth, x.h, x.w);
    for (int in = 0; in < x.n; ++in)
        std::copy(x.sample(in), x.sample(in) + static_cast<std::size_t>(x.c) * x.plane(),
                  buf.sample(in));
    std::vector<T> scratch;
    block_fwd(flat.data(), specs, buf, scratch);
    if (!dout.same_shape(buf)) throw ShapeError("dense_block_grads: cotangent shape mismatch");

    Tensor4<T> gbuf = dout;
    std::vector<T> grad(flat.size(), T(0));
    block_bwd(flat.data(), specs, buf, gbuf, grad.data(), scratch);

    if (dx) {
        *dx = Tensor4<T>(x.n, x.c, x.h, x.w);
        for (int in = 0; in < x.n; ++in)
            std::copy(gbuf.sample(in),
                      gbuf.sample(in) + static_cast<std::size_t>(x.c) * x.plane(),
                      dx->sample(in));
    }
    if (dwb) {
        dwb->w.clear();
        dwb->b.clear();
        for (int l = 0; l < 4; ++l) {
            Tensor4<T> dw(growth, specs[l].in_c, 3, 3);
            std::copy(grad.begin() + specs[l].w_off,
                      grad.begin() + specs[l].w_off + specs[l].w_len(), dw.v.begin());
            dwb->w.push_back(std::move(dw));
            dwb->b.emplace_back(grad.begin() + specs[l].b_off,
                                grad.begin() + specs[l].b_off + growth);
        }
    }
}

template void dense_block_grads<float>(const Tensor4<float>&, const DenseBlockWeights<float>&,
                                       const Tensor4<float>&, Tensor4<float>*,
                                       DenseBlockWeights<float>*);
template void dense_block_grads<double>(const Tensor4<double>&,
                                        const DenseBlockWeights<double>&,
                                        const Tensor4<double>&, Tensor4<double>*,
                                        DenseBlockWeights<double>*);

template <typename T>
Tensor4<T> transition_down(const Tensor4<T>& x, const Tensor4<T>& w1x1,
                           const std::vector<T>& b) {
    if (w1x1.h != 1 || w1x1.w != 1) throw ShapeError("transition_down expects a 1x1 kernel");
    return avg_pool2(conv2d(x, w1x1, b, 0));
}

template Tensor4<float> transition_down<float>(const Tensor4<float>&, const Tensor4<float>&,
                                               const std::vector<float>&);
template Tensor4<double> transition_down<double>(const Tensor4<double>&, const Tensor4<double>&,
                                                 const std::vector<double>&);

template <typename T>
Tensor4<T> transition_up(const Tensor4<T>& x, const Tensor4<T>& skip, const Tensor4<T>& w1x1,
                         const std::vector<T>& b) {
    if (w1x1.h != 1 || w1x1.w != 1) throw ShapeError("transition_up expects a 1x1 kernel");
    if (skip.h != 2 * x.h || skip.w != 2 * x.w)
        throw ShapeError("transition_up: skip dims must be exactly twice the input dims");
    return concat_channels(upsample2_nearest(conv2d(x, w1x1, b, 0)), skip);
}

template Tensor4<float> transition_up<float>(const Tensor4<float>&, const Tensor4<float>&,
                                             const Tensor4<float>&, const std::vector<float>&);
template Tensor4<double> transition_up<double>(const Tensor4<double>&, const Tensor4<double>&,
                                               const Tensor4<double>&,
                                               const std::vector<double>&);

} // namespace zoneforge::unet
