#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "addm/tensor.hpp"

namespace addm {

using NodeId = int32_t;

/// Reverse-mode tape over float tensors. Build a fresh tape per optimization
/// step: add leaves for parameters and constants, compose ops, then call
/// backward() on a scalar node. Gradients accumulate into every node that
/// the loss depends on; callers read the ones they care about.
///
/// Single-threaded and fully deterministic: identical inputs produce
/// bit-identical values and gradients.
class Tape {
public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf holding an input or parameter tensor.
  NodeId leaf(Tensor value);

  const Tensor& value(NodeId id) const;
  /// Gradient of the last backward() target w.r.t. this node (zeros if the
  /// node does not influence it).
  const Tensor& grad(NodeId id);

  // Convolution with square kernel, zero padding. x: (B,Cin,H,W),
  // w: (Cout,Cin,K,K), b: (Cout).
  NodeId conv2d(NodeId x, NodeId w, NodeId b, int stride, int pad);
  // x: (B,F), w: (O,F), b: (O) -> (B,O)
  NodeId linear(NodeId x, NodeId w, NodeId b);
  // Per-(sample, group) normalization with learned per-channel scale/shift.
  NodeId group_norm(NodeId x, NodeId gamma, NodeId beta, int groups, float eps);
  NodeId silu(NodeId x);
  NodeId leaky_relu(NodeId x, float negative_slope);
  NodeId avg_pool2(NodeId x);          // 2x2 mean pooling, stride 2
  NodeId upsample_nearest2(NodeId x);  // 2x nearest-neighbor upsampling
  NodeId concat_channels(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  // x: (B,C,H,W) plus v: (B,C) broadcast over the spatial dims.
  NodeId add_channel_bias(NodeId x, NodeId v);
  NodeId global_avg_pool(NodeId x);  // (B,C,H,W) -> (B,C)

  /// One reverse diffusion step as a function of the predicted noise only,
  /// with independent coefficients per batch item:
  /// out[b] = inv_sqrt_alpha[b] * (x_t[b] - eps_coeff[b] * eps_pred[b]) + sigma[b] * z[b].
  NodeId reverse_combine(const Tensor& x_t, NodeId eps_pred, const Tensor& z,
                         std::span<const float> inv_sqrt_alpha, std::span<const float> eps_coeff,
                         std::span<const float> sigma);

  // Scalar losses; values live in 1-element tensors.
  NodeId mse_vs(NodeId pred, const Tensor& target);
  NodeId mean_softplus_neg(NodeId logits);  // -mean log sigmoid(z), stable
  NodeId bce_logits(NodeId real_logits, NodeId fake_logits);
  NodeId axpy_scalar(NodeId a, double coeff, NodeId b);  // a + coeff*b

  /// Seeds d(loss)/d(loss) = 1 and propagates to every contributing node.
  void backward(NodeId loss);

  size_t size() const { return nodes_.size(); }

private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void()> backfn;
  };

  std::vector<Node> nodes_;

  NodeId push(Tensor value, std::function<void()> backfn);
  Tensor& grad_buffer(NodeId id);
  const Tensor& val(NodeId id) const { return nodes_[static_cast<size_t>(id)].value; }
};

}  // namespace addm
