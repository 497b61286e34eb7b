#include "atvs/nn/two_view.hpp"

#include <array>

#include "atvs/geometry/warp.hpp"
#include "atvs/volumes/cost_volumes.hpp"

namespace atvs::nn {

torch::Tensor normalize_image(const torch::Tensor& image) { return (image - 0.5) * 2.0; }

TwoViewNetImpl::TwoViewNetImpl(NetworkConfig config) : config_(std::move(config)) {
  config_.validate();
  fem_ = register_module("fem", FeatureExtractor(config_));
  crm_ = register_module("crm", CostRegularizer(config_));
  heads_ = register_module("heads", torch::nn::ModuleList());
  for (int k = 0; k + 1 < config_.crm_stacks; ++k) heads_->push_back(OutputModule(config_.base_width));
  final_head_ = register_module("final_head", OutputModule(config_.base_width));
  refine_ = register_module("refine", RefinementNet(config_));
}

torch::Tensor TwoViewNetImpl::plane_values() const { return config_.planes().tensor(torch::kFloat32); }

ImageFeatures TwoViewNetImpl::features(const torch::Tensor& image) {
  return fem_(pad_to_multiple(normalize_image(image), NetworkConfig::kFeatureScale));
}

InitialEstimate TwoViewNetImpl::initial(const ImageFeatures& ref, const ImageFeatures& src,
                                        const geometry::CameraBatch& ref_camera,
                                        const geometry::CameraBatch& src_camera) {
  const auto planes = plane_values().to(ref.high.data.device());
  const auto warped = geometry::plane_sweep_warp(src.high.data, planes, ref_camera, src_camera);
  const auto regularized = crm_(volumes::concat_cost_volume(ref.high.data, warped.volume));

  InitialEstimate out;
  out.filtered = regularized.filtered;
  for (std::size_t k = 0; k + 1 < regularized.intermediates.size(); ++k) {
    auto head = heads_[k]->as<OutputModule>();
    out.stack_disparities.push_back(head->forward(regularized.intermediates[k], planes).disparity);
  }
  out.estimate = final_head_(out.filtered, planes);
  out.stack_disparities.push_back(out.estimate.disparity);
  return out;
}

torch::Tensor TwoViewNetImpl::refine(const torch::Tensor& filtered, const ImageFeatures& ref,
                                     const ImageFeatures& src, const torch::Tensor& ref_disparity,
                                     const torch::Tensor& src_disparity, const torch::Tensor& hull,
                                     const geometry::CameraBatch& ref_camera,
                                     const geometry::CameraBatch& src_camera) {
  const auto guidance =
      build_guidance(ref.low.data, src.low.data, ref_disparity, src_disparity, hull, ref_camera,
                     src_camera, config_.planes(), config_.refinement);
  return refine_->forward(filtered, guidance);
}

DisparityEstimate TwoViewNetImpl::output(const torch::Tensor& volume) {
  return final_head_(volume, plane_values().to(volume.device()));
}

TwoViewOutput TwoViewNetImpl::forward(const torch::Tensor& ref_image, const torch::Tensor& src_image,
                                      const geometry::CameraBatch& ref_camera,
                                      const geometry::CameraBatch& src_camera) {
  const auto ref_cam = ref_camera.downscaled(NetworkConfig::kFeatureScale);
  const auto src_cam = src_camera.downscaled(NetworkConfig::kFeatureScale);

  TwoViewOutput out;
  out.ref_features = features(ref_image);
  out.src_features = features(src_image);
  out.ref = initial(out.ref_features, out.src_features, ref_cam, src_cam);
  {
    torch::AutoGradMode mode(torch::GradMode::is_enabled() && !config_.refinement.detach_geometry);
    out.src = initial(out.src_features, out.ref_features, src_cam, ref_cam);
  }
  const std::array<volumes::ViewDisparity, 2> views{
      volumes::ViewDisparity{out.ref.estimate.disparity.detach(), ref_cam},
      volumes::ViewDisparity{out.src.estimate.disparity.detach(), src_cam}};
  {
    torch::NoGradGuard no_grad;
    out.hull = volumes::visual_hull(views, plane_values(), ref_cam);
  }
  out.refined_volume = refine(out.ref.filtered, out.ref_features, out.src_features,
                              out.ref.estimate.disparity, out.src.estimate.disparity, out.hull,
                              ref_cam, src_cam);
  out.refined = output(out.refined_volume);
  return out;
}

void TwoViewNetImpl::zero_final_layers() {
  for (std::size_t k = 0; k < heads_->size(); ++k) heads_[k]->as<OutputModule>()->zero_final_layer();
  final_head_->zero_final_layer();
  crm_->zero_final_layers();
  torch::NoGradGuard guard;
  for (auto& item : refine_->named_parameters())
    if (item.key().rfind("head.", 0) == 0) item.value().zero_();
}

}  // namespace atvs::nn
