#include "atvs/nn/cost_regularizer.hpp"

#include "atvs/nn/layers.hpp"

namespace atvs::nn {

HourglassImpl::HourglassImpl(int width)
    : down1_(register_module("down1", conv3d(width, 2 * width, 3, 2))),
      conv2_(register_module("conv2", conv3d(2 * width, 2 * width))),
      down3_(register_module("down3", conv3d(2 * width, 2 * width, 3, 2))),
      conv4_(register_module("conv4", conv3d(2 * width, 2 * width))),
      up1_(register_module("up1", deconv3d(2 * width, 2 * width))),
      up2_(register_module("up2", deconv3d(2 * width, width))),
      norm_down1_(register_module("norm_down1", channel_norm(2 * width))),
      norm2_(register_module("norm2", channel_norm(2 * width))),
      norm_down3_(register_module("norm_down3", channel_norm(2 * width))),
      norm4_(register_module("norm4", channel_norm(2 * width))),
      norm_up1_(register_module("norm_up1", channel_norm(2 * width))) {}

HourglassImpl::Output HourglassImpl::forward(const torch::Tensor& x,
                                             const std::optional<torch::Tensor>& presqu,
                                             const std::optional<torch::Tensor>& postsqu) {
  auto out = torch::relu(norm_down1_(down1_(x)));
  auto pre = norm2_(conv2_(out));
  pre = torch::relu(postsqu ? pre + *postsqu : pre);
  out = torch::relu(norm4_(conv4_(torch::relu(norm_down3_(down3_(pre))))));
  auto post = norm_up1_(up1_->forward(out, std::vector<int64_t>(pre.sizes().begin() + 2, pre.sizes().end())));
  post = torch::relu(post + (presqu ? *presqu : pre));
  out = up2_->forward(post, std::vector<int64_t>(x.sizes().begin() + 2, x.sizes().end()));
  return {out, pre, post};
}

CostRegularizerImpl::CostRegularizerImpl(const NetworkConfig& config) {
  const int w = config.base_width;
  stem0_ = register_module(
      "stem0", torch::nn::Sequential(conv3d(2 * config.feature_channels, w), channel_norm(w),
                                     torch::nn::ReLU(), conv3d(w, w), channel_norm(w), torch::nn::ReLU()));
  stem1_ = register_module("stem1", torch::nn::Sequential(conv3d(w, w), channel_norm(w), torch::nn::ReLU(),
                                                          conv3d(w, w), channel_norm(w)));
  stacks_ = register_module("stacks", torch::nn::ModuleList());
  for (int k = 0; k < config.crm_stacks; ++k) stacks_->push_back(Hourglass(w));
  init_weights(*this);
}

RegularizedVolume CostRegularizerImpl::forward(const torch::Tensor& cost) {
  const auto s0 = stem0_->forward(cost);
  const auto base = stem1_->forward(s0) + s0;

  RegularizedVolume result;
  std::optional<torch::Tensor> first_pre;
  std::optional<torch::Tensor> last_post;
  torch::Tensor x = base;
  for (std::size_t k = 0; k < stacks_->size(); ++k) {
    auto hg = stacks_[k]->as<Hourglass>()->forward(x, first_pre, last_post);
    if (!first_pre) first_pre = hg.pre;
    last_post = hg.post;
    x = hg.out + base;
    result.intermediates.push_back(x);
  }
  result.filtered = x;
  return result;
}

void CostRegularizerImpl::zero_final_layers() {
  for (std::size_t k = 0; k < stacks_->size(); ++k)
    zero_parameters(stacks_[k]->as<Hourglass>()->final_layer());
}

}  // namespace atvs::nn
