#pragma once

#include <vector>

#include "stcnn/tensor.hpp"

namespace stcnn {

// ---- elementwise / reduction -------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_const(const Tensor& a, double c);
Tensor neg(const Tensor& a);
Tensor add_n(const std::vector<Tensor>& xs);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh_op(const Tensor& x);
Tensor exp_op(const Tensor& x);
Tensor log_op(const Tensor& x);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// ---- indexing / joining ------------------------------------------------------

/// Contiguous 1-D slice [offset, offset+len) of a rank-1 tensor.
Tensor slice(const Tensor& x, int offset, int len);

/// Single element by flat index, as a scalar tensor.
Tensor pick(const Tensor& x, std::int64_t flat_index);

/// Stacks two [C,H,W] maps along the channel axis; H and W must match.
Tensor concat_channels(const Tensor& a, const Tensor& b);

/// Stacks T equal-shape [C,H,W] maps into [C,T,H,W] (depth = time axis).
Tensor stack_depth(const std::vector<Tensor>& frames);

/// Extracts depth slice t of a [C,D,H,W] tensor as [C,H,W].
Tensor slice_depth(const Tensor& x, int t);

/// Same values, new shape; element count must match.
Tensor reshape(const Tensor& x, Shape shape);

// ---- linear algebra ----------------------------------------------------------

/// y = W x + b with W:[m,n], x:[n], b:[m]. Pass an undefined bias to skip it.
Tensor linear(const Tensor& weight, const Tensor& x, const Tensor& bias = Tensor());

// ---- convolutions ------------------------------------------------------------

/// input [Cin,H,W], kernel [Cout,Cin,kH,kW], bias [Cout] (optional).
/// Zero padding; output H' = floor((H + 2p - kH)/stride) + 1, same for W.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              int stride, int padding);

/// input [C,D,H,W], kernel [Cout,C,kD,kH,kW], bias [Cout] (optional).
/// stride/padding apply to the spatial axes; the depth (time) axis always
/// runs with stride 1 and no padding, so output depth is D - kD + 1.
Tensor conv3d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              int stride, int padding);

/// input [Cin,H,W], kernel [Cin,Cout,kH,kW], bias [Cout] (optional).
/// Output spatial size = (in - 1)*stride - 2*padding + k.
Tensor conv_transpose2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                        int stride, int padding);

// ---- grid heads ---------------------------------------------------------------

/// Numerically stable log-softmax over all cells of an [H,W] logit map.
/// Throws on NaN/Inf logits.
Tensor log_softmax2d(const Tensor& logits);

/// Squared-distance logits of an isotropic Gaussian centred at mu = (row, col),
/// in pixel units: out(r,c) = -((r - mu0)^2 + (c - mu1)^2) * inv_two_sigma_sq.
Tensor gaussian_grid_logits(const Tensor& mu, int height, int width, double inv_two_sigma_sq);

}  // namespace stcnn
