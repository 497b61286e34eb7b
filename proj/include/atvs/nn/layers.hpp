#pragma once

#include <torch/torch.h>

namespace atvs::nn {

torch::nn::Conv2d conv2d(int in, int out, int kernel, int stride = 1);
torch::nn::Conv3d conv3d(int in, int out, int kernel = 3, int stride = 1);
/// Stride-2 transposed 3-D convolution; pass the target size to forward().
torch::nn::ConvTranspose3d deconv3d(int in, int out);

/// Per-channel normalization over each sample's spatial extent (no batch statistics),
/// with a learned affine map starting at identity.
torch::nn::GroupNorm channel_norm(int channels);

/// He-normal weights, zero biases for every convolution under `module`.
void init_weights(torch::nn::Module& module);

/// Zeroes weight and bias of a convolution-like module.
void zero_parameters(torch::nn::Module& module);

/// Two 3x3 convolutions with a projection shortcut when shape changes.
class ResidualBlockImpl : public torch::nn::Module {
 public:
  ResidualBlockImpl(int in, int out, int stride);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr}, shortcut_{nullptr};
  torch::nn::GroupNorm norm1_{nullptr}, norm2_{nullptr}, norm_shortcut_{nullptr};
};
TORCH_MODULE(ResidualBlock);

}  // namespace atvs::nn
