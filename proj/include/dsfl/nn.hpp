#pragma once

#include "dsfl/tensor.hpp"

namespace dsfl {

/// Cross-correlation with zero padding.
/// input [N,C,H,W], kernel [K,C,kh,kw] -> [N,K,H',W'],
/// H' = floor((H + 2p - kh)/stride) + 1.
Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, int padding);

/// Exact adjoint of conv2d under the same kernel:
/// input [N,K,H,W], kernel [K,C,kh,kw] -> [N,C,Ho,Wo],
/// Ho = (H - 1)*stride - 2p + kh.
Tensor conv2d_transpose(const Tensor& input, const Tensor& kernel, int stride, int padding);

/// input [N,F], weight [F,G], bias [G] -> [N,G].
Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias);

/// Per-sample, per-channel normalization over the spatial dims, then a
/// learnable channel-wise affine. gamma/beta are [C]. Batch-independent.
Tensor instance_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                     double eps = 1e-5);

/// input [N,C,H,W] + bias [C], broadcast over batch and space.
Tensor add_channel_bias(const Tensor& input, const Tensor& bias);

}  // namespace dsfl
