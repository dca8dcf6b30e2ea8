#pragma once

#include "zoneforge/unet/tensor.hpp"

namespace zoneforge::unet {

/// Single-sample kernels. All backward kernels ACCUMULATE into their output
/// buffers; callers zero them when starting a fresh gradient. Weights are laid
/// out (out_c, in_c, k, k); biases are one value per output channel. Padding
/// is symmetric zero padding.
namespace kernels {

template <typename T>
void conv2d_fwd(const T* x, int in_c, int h, int w, const T* wgt, const T* bias, int out_c,
                int k, int pad, T* y, std::vector<T>& scratch);

/// dx may be null (skip input gradient, e.g. for the stem layer).
template <typename T>
void conv2d_bwd(const T* x, int in_c, int h, int w, const T* wgt, int out_c, int k, int pad,
                const T* dy, T* dx, T* dwgt, T* dbias, std::vector<T>& scratch);

} // namespace kernels

/// y = x W + b, standard cross-correlation with symmetric zero padding.
/// x: (n, in_c, h, w); w: (out_c, in_c, k, k); b: out_c entries.
template <typename T>
Tensor4<T> conv2d(const Tensor4<T>& x, const Tensor4<T>& w, const std::vector<T>& b,
                  int pad = 1);

/// Gradients of conv2d for an upstream cotangent dy. Any of dx/dw/db may be
/// null. Buffers are (re)initialized to zero before accumulation.
template <typename T>
void conv2d_grads(const Tensor4<T>& x, const Tensor4<T>& w, const Tensor4<T>& dy, int pad,
                  Tensor4<T>* dx, Tensor4<T>* dw, std::vector<T>* db);

template <typename T>
Tensor4<T> relu(const Tensor4<T>& x);

/// Numerically clamped logistic: y = clamp(sigmoid(x), eps, 1-eps) with
/// eps = 1e-7, so downstream log-losses stay finite and gradients composed
/// through the clamp reduce to (y - t)/N exactly.
template <typename T>
Tensor4<T> sigmoid_clamped(const Tensor4<T>& x);

/// 2x2 average pooling (halves height and width; both must be even).
template <typename T>
Tensor4<T> avg_pool2(const Tensor4<T>& x);

/// Nearest-neighbor 2x upsampling: each pixel becomes a 2x2 block.
template <typename T>
Tensor4<T> upsample2_nearest(const Tensor4<T>& x);

/// Channel-wise concatenation of two tensors with equal n/h/w.
template <typename T>
Tensor4<T> concat_channels(const Tensor4<T>& a, const Tensor4<T>& b);

} // namespace zoneforge::unet
