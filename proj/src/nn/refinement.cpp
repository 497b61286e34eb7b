#include "atvs/nn/refinement.hpp"

#include <stdexcept>

#include "atvs/geometry/warp.hpp"
#include "atvs/nn/layers.hpp"
#include "atvs/volumes/cost_volumes.hpp"

namespace atvs::nn {

namespace {

torch::Tensor maybe_detach(const torch::Tensor& t, bool detach) { return detach ? t.detach() : t; }

}  // namespace

RefinementGuidance build_guidance(const torch::Tensor& ref_low, const torch::Tensor& src_low,
                                  const torch::Tensor& ref_disparity,
                                  const torch::Tensor& src_disparity, const torch::Tensor& hull,
                                  const geometry::CameraBatch& ref, const geometry::CameraBatch& src,
                                  const geometry::DisparityPlanes& planes,
                                  const RefinementInputs& inputs) {
  const auto dtype = ref_low.scalar_type();
  const auto plane_values = planes.tensor(dtype).to(ref_low.device());
  const int64_t depth = planes.count();
  const int64_t b = ref_low.size(0), fl = ref_low.size(1), h = ref_low.size(2), w = ref_low.size(3);
  const auto opts = ref_low.options();
  const auto d_ref = maybe_detach(ref_disparity, inputs.detach_geometry);
  const auto d_src = maybe_detach(src_disparity, inputs.detach_geometry);
  const double sentinel = volumes::invalid_cost(planes);

  RefinementGuidance g;
  if (inputs.photometric) {
    auto warped = geometry::plane_sweep_warp(src_low, plane_values, ref, src);
    g.photometric_volume = volumes::concat_cost_volume(ref_low, warped.volume);
    g.photometric_error = volumes::tile_along_depth(
        volumes::photometric_error(ref_low, src_low, d_ref, ref, src), depth);
  } else {
    g.photometric_volume = torch::zeros({b, 2 * fl, depth, h, w}, opts);
    g.photometric_error = torch::zeros({b, fl, depth, h, w}, opts);
  }
  if (inputs.geometric) {
    g.geometric_volume = torch::cat(
        {volumes::geometric_cost_ref(d_ref, plane_values),
         volumes::geometric_cost_source(d_ref, d_src, plane_values, ref, src, sentinel)},
        1);
    g.geometric_error = volumes::tile_along_depth(
        volumes::geometric_error(d_ref, d_src, ref, src, sentinel), depth);
  } else {
    g.geometric_volume = torch::zeros({b, 2, depth, h, w}, opts);
    g.geometric_error = torch::zeros({b, 1, depth, h, w}, opts);
  }
  g.visual_hull = inputs.visual_hull ? maybe_detach(hull, inputs.detach_geometry).to(dtype)
                                     : torch::zeros({b, 1, depth, h, w}, opts);
  return g;
}

int refinement_input_channels(const NetworkConfig& config) {
  return config.base_width + 2 * config.low_level_channels + 2 + config.low_level_channels + 1 + 1;
}

RefinementNetImpl::RefinementNetImpl(const NetworkConfig& config) {
  const int w = config.base_width;
  enc0_ = register_module("enc0", conv3d(refinement_input_channels(config), w));
  down1_ = register_module("down1", conv3d(w, 2 * w, 3, 2));
  enc1_ = register_module("enc1", conv3d(2 * w, 2 * w));
  down2_ = register_module("down2", conv3d(2 * w, 4 * w, 3, 2));
  enc2_ = register_module("enc2", conv3d(4 * w, 4 * w));
  up1_ = register_module("up1", deconv3d(4 * w, 2 * w));
  up2_ = register_module("up2", deconv3d(2 * w, w));
  head_ = register_module("head", conv3d(w, w));
  const std::vector<std::pair<const char*, int>> norms{
      {"norm_enc0", w}, {"norm_down1", 2 * w}, {"norm_enc1", 2 * w}, {"norm_down2", 4 * w},
      {"norm_enc2", 4 * w}, {"norm_up1", 2 * w}, {"norm_up2", w}};
  for (const auto& [name, c] : norms) norms_.push_back(register_module(name, channel_norm(c)));
  init_weights(*this);
  zero_parameters(*head_);
}

torch::Tensor RefinementNetImpl::residual(const torch::Tensor& x) {
  const auto e0 = torch::relu(norms_[0](enc0_(x)));
  const auto e1 = torch::relu(norms_[2](enc1_(torch::relu(norms_[1](down1_(e0))))));
  const auto e2 = torch::relu(norms_[4](enc2_(torch::relu(norms_[3](down2_(e1))))));
  auto size_of = [](const torch::Tensor& t) {
    return std::vector<int64_t>(t.sizes().begin() + 2, t.sizes().end());
  };
  auto u1 = torch::relu(norms_[5](up1_->forward(e2, size_of(e1))) + e1);
  auto u0 = torch::relu(norms_[6](up2_->forward(u1, size_of(e0))) + e0);
  return head_(u0);
}

torch::Tensor RefinementNetImpl::forward(const torch::Tensor& filtered,
                                         const RefinementGuidance& guidance) {
  const std::vector<torch::Tensor> parts{filtered,
                                         guidance.photometric_volume,
                                         guidance.geometric_volume,
                                         guidance.photometric_error,
                                         guidance.geometric_error,
                                         guidance.visual_hull};
  for (const auto& p : parts) {
    if (p.dim() != 5 || p.size(0) != filtered.size(0) ||
        p.sizes().slice(2) != filtered.sizes().slice(2))
      throw std::invalid_argument("refinement inputs disagree in shape: " +
                                  std::to_string(p.dim()) + "-d tensor " +
                                  c10::str(p.sizes()) + " vs " + c10::str(filtered.sizes()));
  }
  return filtered + residual(torch::cat(parts, 1));
}

}  // namespace atvs::nn
