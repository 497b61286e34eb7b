#include "atvs/nn/feature_extractor.hpp"

#include <algorithm>

namespace atvs::nn {

namespace F = torch::nn::functional;

std::vector<torch::Tensor> pyramid_pool(const torch::Tensor& x, const std::vector<int>& pool_sizes) {
  const auto h = x.size(2);
  const auto w = x.size(3);
  std::vector<torch::Tensor> levels;
  levels.reserve(pool_sizes.size());
  for (int p : pool_sizes) {
    const int64_t ph = std::max<int64_t>(1, h / p);
    const int64_t pw = std::max<int64_t>(1, w / p);
    auto pooled = F::adaptive_avg_pool2d(x, F::AdaptiveAvgPool2dFuncOptions({ph, pw}));
    levels.push_back(F::interpolate(pooled, F::InterpolateFuncOptions()
                                                .size(std::vector<int64_t>{h, w})
                                                .mode(torch::kBilinear)
                                                .align_corners(false)));
  }
  return levels;
}

SpatialPyramidPoolingImpl::SpatialPyramidPoolingImpl(int channels, int branch_channels,
                                                     std::vector<int> pool_sizes)
    : pool_sizes_(std::move(pool_sizes)), branch_channels_(branch_channels) {
  branches_ = register_module("branches", torch::nn::ModuleList());
  for (std::size_t i = 0; i < pool_sizes_.size(); ++i)
    branches_->push_back(torch::nn::Sequential(conv2d(channels, branch_channels, 1),
                                               channel_norm(branch_channels), torch::nn::ReLU()));
}

torch::Tensor SpatialPyramidPoolingImpl::forward(const torch::Tensor& x) {
  auto levels = pyramid_pool(x, pool_sizes_);
  for (std::size_t i = 0; i < levels.size(); ++i)
    levels[i] = branches_[i]->as<torch::nn::Sequential>()->forward(levels[i]);
  return torch::cat(levels, 1);
}

int SpatialPyramidPoolingImpl::out_channels() const {
  return branch_channels_ * static_cast<int>(pool_sizes_.size());
}

FeatureExtractorImpl::FeatureExtractorImpl(const NetworkConfig& config) {
  const int w = config.base_width;
  const int wide = 2 * w;
  stem_ = register_module(
      "stem", torch::nn::Sequential(conv2d(3, w, 3, 2), channel_norm(w), torch::nn::ReLU(),
                                    conv2d(w, w, 3), channel_norm(w), torch::nn::ReLU(),
                                    conv2d(w, w, 3), channel_norm(w), torch::nn::ReLU()));
  res1_ = register_module("res1", ResidualBlock(w, config.low_level_channels, 2));
  res2_ = register_module("res2", ResidualBlock(config.low_level_channels, wide, 1));
  res3_ = register_module("res3", ResidualBlock(wide, wide, 1));
  res4_ = register_module("res4", ResidualBlock(wide, wide, 1));
  spp_ = register_module("spp", SpatialPyramidPooling(wide, std::max(1, w / 2), config.spp_pool_sizes));
  fuse_ = register_module("fuse", conv2d(2 * wide + spp_->out_channels(), wide, 3));
  fuse_norm_ = register_module("fuse_norm", channel_norm(wide));
  project_ = register_module("project", conv2d(wide, config.feature_channels, 1));
  init_weights(*this);
}

ImageFeatures FeatureExtractorImpl::forward(const torch::Tensor& image) {
  const auto low = res1_(stem_->forward(image));
  const auto mid = res2_(low);
  const auto deep = res4_(res3_(mid));
  const auto fused = torch::relu(fuse_norm_(fuse_(torch::cat({mid, deep, spp_(deep)}, 1))));
  return {{project_(fused), NetworkConfig::kFeatureScale}, {low, NetworkConfig::kFeatureScale}};
}

torch::Tensor pad_to_multiple(const torch::Tensor& image, int multiple) {
  const auto h = image.size(-2);
  const auto w = image.size(-1);
  const auto pad_h = (multiple - h % multiple) % multiple;
  const auto pad_w = (multiple - w % multiple) % multiple;
  if (pad_h == 0 && pad_w == 0) return image;
  return F::pad(image, F::PadFuncOptions({0, pad_w, 0, pad_h}));
}

}  // namespace atvs::nn
