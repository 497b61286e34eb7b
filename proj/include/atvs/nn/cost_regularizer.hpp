#pragma once

#include <optional>
#include <vector>

#include <torch/torch.h>

#include "atvs/nn/config.hpp"

namespace atvs::nn {

/// One 3-D encoder-decoder of the stack. `pre`/`post` are the dense skip tensors
/// exchanged between consecutive hourglasses.
class HourglassImpl : public torch::nn::Module {
 public:
  explicit HourglassImpl(int width);

  struct Output {
    torch::Tensor out;
    torch::Tensor pre;
    torch::Tensor post;
  };
  Output forward(const torch::Tensor& x, const std::optional<torch::Tensor>& presqu,
                 const std::optional<torch::Tensor>& postsqu);

  /// The last transposed convolution (zeroed by zero_final_layers()).
  torch::nn::Module& final_layer() { return *up2_; }

 private:
  torch::nn::Conv3d down1_{nullptr}, conv2_{nullptr}, down3_{nullptr}, conv4_{nullptr};
  torch::nn::ConvTranspose3d up1_{nullptr}, up2_{nullptr};
  torch::nn::GroupNorm norm_down1_{nullptr}, norm2_{nullptr}, norm_down3_{nullptr}, norm4_{nullptr},
      norm_up1_{nullptr};
};
TORCH_MODULE(Hourglass);

struct RegularizedVolume {
  torch::Tensor filtered;                   // [B,W,D,H,W], output of the last stack
  std::vector<torch::Tensor> intermediates;  // one per stack; the last equals `filtered`
};

/// Stacked hourglass cost regularization with dense skip connections between stacks.
class CostRegularizerImpl : public torch::nn::Module {
 public:
  explicit CostRegularizerImpl(const NetworkConfig& config);

  /// `cost` is the [B,2F,D,H,W] concatenation volume.
  RegularizedVolume forward(const torch::Tensor& cost);

  /// Zeroes the last layer of every hourglass so that every stack returns the stem output.
  void zero_final_layers();

 private:
  torch::nn::Sequential stem0_{nullptr}, stem1_{nullptr};
  torch::nn::ModuleList stacks_{nullptr};
};
TORCH_MODULE(CostRegularizer);

}  // namespace atvs::nn
