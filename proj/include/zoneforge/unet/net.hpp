#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "zoneforge/core/rng.hpp"
#include "zoneforge/unet/ops.hpp"

namespace zoneforge::unet {

/// Architecture descriptor. Channel widths are configurable; the "desk"
/// preset keeps CPU training tractable while the "paper" preset mirrors a
/// full-size network. Output is always 3 channels (PG, CZ, PZ) behind
/// independent sigmoids.
struct ArchConfig {
    int in_channels = 1;
    int n_stages = 3;
    int convs_per_block = 4; // dense block depth
    int growth = 8;          // feature maps added per dense conv
    int stem_channels = 16;
    double compression = 0.5; // transition 1x1 compression factor, (0, 1]

    static constexpr int kOutChannels = 3;
    static constexpr int kKernel = 3;

    void validate() const;
    int pool_factor() const { return 1 << n_stages; }

    static ArchConfig desk(int in_channels);
    static ArchConfig paper(int in_channels);
    /// Small enough for exhaustive finite-difference checks.
    static ArchConfig toy(int in_channels);

    bool operator==(const ArchConfig&) const = default;
};

/// One convolution's shape and its slice of the flat parameter vector.
struct ConvSpec {
    int in_c = 0, out_c = 0, k = 0, pad = 0;
    std::size_t w_off = 0, b_off = 0;

    std::size_t w_len() const {
        return static_cast<std::size_t>(out_c) * in_c * k * k;
    }
};

/// Every convolution of the network in execution order, plus the channel
/// arithmetic at each stage (exposed for structural tests).
struct Layout {
    ConvSpec stem;
    std::vector<std::array<ConvSpec, 4>> enc;
    std::vector<ConvSpec> td;
    std::array<ConvSpec, 4> bottleneck;
    std::vector<ConvSpec> tu; // indexed by stage, applied highest stage first
    std::vector<std::array<ConvSpec, 4>> dec;
    ConvSpec head;
    std::size_t param_count = 0;

    std::vector<int> enc_in, enc_out, td_out;
    int bottleneck_out = 0;
    std::vector<int> tu_out, dec_in, dec_out;

    std::vector<const ConvSpec*> ordered() const;
};

Layout build_layout(const ArchConfig& arch);

/// Parameter count as a pure function of the architecture.
std::size_t param_count(const ArchConfig& arch);

template <typename T>
struct NetworkParams {
    ArchConfig arch;
    std::vector<T> flat;

    template <typename U>
    NetworkParams<U> cast() const {
        NetworkParams<U> out;
        out.arch = arch;
        out.flat.assign(flat.begin(), flat.end());
        return out;
    }
};

/// He-style initialization: kernel entries ~ N(0, 2/fan_in), biases zero.
/// Deterministic in the rng seed.
NetworkParams<float> init_params(const ArchConfig& arch, Rng rng);

template <typename T>
NetworkParams<T> init_params_t(const ArchConfig& arch, Rng rng);

/// Activation buffers recorded by a forward pass for the matching backward
/// pass; reusable across calls to avoid reallocation.
template <typename T>
struct Cache {
    Tensor4<T> input;
    std::vector<Tensor4<T>> enc_buf;
    Tensor4<T> bott_buf;
    std::vector<Tensor4<T>> dec_buf;
    Tensor4<T> sig_out;
    std::vector<T> scratch;
};

/// The composed encoder-decoder network: stem conv, one dense block +
/// compressive transition per encoder stage, a dense bottleneck, nearest
/// upsampling transitions with skip concatenation, one dense block per
/// decoder stage, and a 1x1 projection to three sigmoid outputs.
template <typename T>
class DenseUnet {
public:
    explicit DenseUnet(const ArchConfig& arch);

    const ArchConfig& arch() const { return arch_; }
    const Layout& layout() const { return layout_; }

    Tensor4<T> forward(std::span<const T> params, const Tensor4<T>& x, Cache<T>& cache) const;

    /// Writes parameter gradients (overwriting grad) for cotangent dy against
    /// the most recent forward recorded in cache.
    void backward(std::span<const T> params, const Cache<T>& cache, const Tensor4<T>& dy,
                  std::span<T> grad) const;

private:
    ArchConfig arch_;
    Layout layout_;
};

/// Convenience single-shot forward matching the op contract.
template <typename T>
Tensor4<T> forward(const NetworkParams<T>& net, const Tensor4<T>& x);

/// Stand-alone dense block: four conv3x3+ReLU layers, each consuming the
/// concatenation of the block input and all previous layer outputs; the
/// result is that whole concatenation (in_c + 4*growth channels).
template <typename T>
struct DenseBlockWeights {
    std::vector<Tensor4<T>> w;           // 4 kernels
    std::vector<std::vector<T>> b;       // 4 biases

    static DenseBlockWeights init(int in_c, int growth, Rng rng);
};

template <typename T>
Tensor4<T> dense_block(const Tensor4<T>& x, const DenseBlockWeights<T>& wb);

/// Analytic gradients of the stand-alone block for a cotangent of its output.
template <typename T>
void dense_block_grads(const Tensor4<T>& x, const DenseBlockWeights<T>& wb,
                       const Tensor4<T>& dout, Tensor4<T>* dx, DenseBlockWeights<T>* dwb);

/// 1x1 compression conv followed by 2x2 average pooling.
template <typename T>
Tensor4<T> transition_down(const Tensor4<T>& x, const Tensor4<T>& w1x1,
                           const std::vector<T>& b);

/// Nearest-neighbor 2x upsampling composed with a 1x1 conv, concatenated with
/// the skip tensor. (Conv and nearest upsampling commute exactly for 1x1
/// kernels; the implementation runs the conv at the lower resolution.)
template <typename T>
Tensor4<T> transition_up(const Tensor4<T>& x, const Tensor4<T>& skip, const Tensor4<T>& w1x1,
                         const std::vector<T>& b);

} // namespace zoneforge::unet
