#include "atvs/nn/layers.hpp"

namespace atvs::nn {

torch::nn::Conv2d conv2d(int in, int out, int kernel, int stride) {
  return torch::nn::Conv2d(
      torch::nn::Conv2dOptions(in, out, kernel).stride(stride).padding(kernel / 2));
}

torch::nn::GroupNorm channel_norm(int channels) {
  return torch::nn::GroupNorm(torch::nn::GroupNormOptions(channels, channels));
}

torch::nn::Conv3d conv3d(int in, int out, int kernel, int stride) {
  return torch::nn::Conv3d(
      torch::nn::Conv3dOptions(in, out, kernel).stride(stride).padding(kernel / 2));
}

torch::nn::ConvTranspose3d deconv3d(int in, int out) {
  return torch::nn::ConvTranspose3d(
      torch::nn::ConvTranspose3dOptions(in, out, 3).stride(2).padding(1).output_padding(1));
}

void init_weights(torch::nn::Module& module) {
  torch::NoGradGuard no_grad;
  for (auto& child : module.modules(/*include_self=*/false)) {
    const bool conv = child->as<torch::nn::Conv2d>() || child->as<torch::nn::Conv3d>() ||
                      child->as<torch::nn::ConvTranspose3d>();
    if (!conv) continue;
    for (auto& p : child->named_parameters(/*recurse=*/false)) {
      if (p.key() == "weight")
        torch::nn::init::kaiming_normal_(p.value(), 0.0, torch::kFanIn, torch::kReLU);
      else
        p.value().zero_();
    }
  }
}

void zero_parameters(torch::nn::Module& module) {
  torch::NoGradGuard no_grad;
  for (auto& p : module.parameters()) p.zero_();
}

ResidualBlockImpl::ResidualBlockImpl(int in, int out, int stride)
    : conv1_(register_module("conv1", conv2d(in, out, 3, stride))),
      conv2_(register_module("conv2", conv2d(out, out, 3))),
      norm1_(register_module("norm1", channel_norm(out))),
      norm2_(register_module("norm2", channel_norm(out))) {
  if (in != out || stride != 1) {
    shortcut_ = register_module("shortcut", conv2d(in, out, 1, stride));
    norm_shortcut_ = register_module("norm_shortcut", channel_norm(out));
  }
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) {
  auto y = norm2_(conv2_(torch::relu(norm1_(conv1_(x)))));
  return torch::relu(y + (shortcut_ ? norm_shortcut_(shortcut_(x)) : x));
}

}  // namespace atvs::nn
