#pragma once

#include <vector>

#include <torch/torch.h>

#include "atvs/geometry/warp.hpp"
#include "atvs/nn/config.hpp"
#include "atvs/nn/layers.hpp"

namespace atvs::nn {

/// Average pools a [B,C,H,W] map at each pool size and bilinearly upsamples back to
/// H x W (the pre-fusion pyramid levels).
std::vector<torch::Tensor> pyramid_pool(const torch::Tensor& x, const std::vector<int>& pool_sizes);

/// Pyramid pooling with one 1x1 convolution (normalized, ReLU) per level.
class SpatialPyramidPoolingImpl : public torch::nn::Module {
 public:
  SpatialPyramidPoolingImpl(int channels, int branch_channels, std::vector<int> pool_sizes);
  /// Concatenation of all branch outputs, [B, levels * branch_channels, H, W].
  torch::Tensor forward(const torch::Tensor& x);
  int out_channels() const;

 private:
  std::vector<int> pool_sizes_;
  int branch_channels_;
  torch::nn::ModuleList branches_;
};
TORCH_MODULE(SpatialPyramidPooling);

struct ImageFeatures {
  geometry::FeatureMap high;  // F channels, 1/4 resolution
  geometry::FeatureMap low;   // low-level tap, 1/4 resolution
};

/// 2-D CNN (three 3x3 convolutions, four residual blocks) followed by pyramid pooling
/// and a fusion head. The first convolution and the first residual block have stride 2.
/// The low-level tap is the output of the first residual block.
class FeatureExtractorImpl : public torch::nn::Module {
 public:
  explicit FeatureExtractorImpl(const NetworkConfig& config);

  /// `image` [B,3,H,W] with H, W divisible by 4 (see pad_to_multiple).
  ImageFeatures forward(const torch::Tensor& image);

 private:
  torch::nn::Sequential stem_{nullptr};
  ResidualBlock res1_{nullptr}, res2_{nullptr}, res3_{nullptr}, res4_{nullptr};
  SpatialPyramidPooling spp_{nullptr};
  torch::nn::Conv2d fuse_{nullptr}, project_{nullptr};
  torch::nn::GroupNorm fuse_norm_{nullptr};
};
TORCH_MODULE(FeatureExtractor);

/// Zero-pads [B,C,H,W] on the right and bottom to multiples of `multiple`.
torch::Tensor pad_to_multiple(const torch::Tensor& image, int multiple);

}  // namespace atvs::nn
