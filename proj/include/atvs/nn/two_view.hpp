#pragma once

#include <vector>

#include <torch/torch.h>

#include "atvs/geometry/camera.hpp"
#include "atvs/nn/config.hpp"
#include "atvs/nn/cost_regularizer.hpp"
#include "atvs/nn/feature_extractor.hpp"
#include "atvs/nn/output_module.hpp"
#include "atvs/nn/refinement.hpp"

namespace atvs::nn {

/// Result of running FEM features of one ordered pair through cost construction, the
/// CRM and the output heads.
struct InitialEstimate {
  torch::Tensor filtered;                          // C~  [B,W,D,H',W']
  std::vector<torch::Tensor> stack_disparities;    // d~^k, k = 1..crm_stacks; last = estimate
  DisparityEstimate estimate;                      // d~ from C~
};

struct TwoViewOutput {
  ImageFeatures ref_features;
  ImageFeatures src_features;
  InitialEstimate ref;   // reference direction, carries gradients
  InitialEstimate src;   // reverse direction (no gradients when geometry is detached)
  torch::Tensor hull;    // [B,1,D,H',W']
  torch::Tensor refined_volume;  // C^R
  DisparityEstimate refined;     // d~^R
};

/// The shared two-view stereo network. Images are [B,3,H,W] in [0,1] with H, W
/// multiples of 4 (the forward pads otherwise); cameras are given at image resolution.
/// All disparities are produced at 1/4 resolution.
class TwoViewNetImpl : public torch::nn::Module {
 public:
  explicit TwoViewNetImpl(NetworkConfig config);

  const NetworkConfig& config() const { return config_; }
  torch::Tensor plane_values() const;

  ImageFeatures features(const torch::Tensor& image);

  /// Cost volume of (ref, src) -> CRM -> heads. Cameras at feature resolution.
  InitialEstimate initial(const ImageFeatures& ref, const ImageFeatures& src,
                          const geometry::CameraBatch& ref_camera,
                          const geometry::CameraBatch& src_camera);

  /// C^R for one branch. Cameras at feature resolution.
  torch::Tensor refine(const torch::Tensor& filtered, const ImageFeatures& ref,
                       const ImageFeatures& src, const torch::Tensor& ref_disparity,
                       const torch::Tensor& src_disparity, const torch::Tensor& hull,
                       const geometry::CameraBatch& ref_camera,
                       const geometry::CameraBatch& src_camera);

  /// The final output module (shared by d~ and d~^R).
  DisparityEstimate output(const torch::Tensor& volume);

  TwoViewOutput forward(const torch::Tensor& ref_image, const torch::Tensor& src_image,
                        const geometry::CameraBatch& ref_camera,
                        const geometry::CameraBatch& src_camera);

  /// Zeroes every output head, every hourglass's last layer and the refinement head.
  void zero_final_layers();

 private:
  NetworkConfig config_;
  FeatureExtractor fem_{nullptr};
  CostRegularizer crm_{nullptr};
  torch::nn::ModuleList heads_{nullptr};  // stacks 1..k-1
  OutputModule final_head_{nullptr};
  RefinementNet refine_{nullptr};
};
TORCH_MODULE(TwoViewNet);

/// Maps [0,1] images to the zero-centred range the FEM sees.
torch::Tensor normalize_image(const torch::Tensor& image);

}  // namespace atvs::nn
