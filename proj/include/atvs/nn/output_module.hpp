#pragma once

#include <torch/torch.h>

namespace atvs::nn {

struct DisparityEstimate {
  torch::Tensor probability;  // [B,D,H,W], sums to one over D
  torch::Tensor disparity;    // [B,H,W]
};

/// Softmax over the plane axis of `logits` [B,D,H,W] and its expectation over the
/// plane disparities `plane_values` [D].
DisparityEstimate soft_argmax(const torch::Tensor& logits, const torch::Tensor& plane_values);

/// One 3-D convolution down to a single channel, then soft-argmax.
class OutputModuleImpl : public torch::nn::Module {
 public:
  explicit OutputModuleImpl(int in_channels);
  /// `volume` [B,C,D,H,W].
  DisparityEstimate forward(const torch::Tensor& volume, const torch::Tensor& plane_values);
  /// Zeroes the reduction so every output is the uniform distribution.
  void zero_final_layer();

 private:
  torch::nn::Conv3d reduce_{nullptr};
};
TORCH_MODULE(OutputModule);

}  // namespace atvs::nn
