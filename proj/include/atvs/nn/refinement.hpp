#pragma once

#include <torch/torch.h>

#include "atvs/geometry/camera.hpp"
#include "atvs/geometry/planes.hpp"
#include "atvs/nn/config.hpp"

namespace atvs::nn {

/// Per-branch inputs of the refinement network besides the filtered volume.
struct RefinementGuidance {
  torch::Tensor photometric_volume;  // V_p   [B,2*Fl,D,H,W]
  torch::Tensor geometric_volume;    // V_g   [B,2,D,H,W]  (ref, src)
  torch::Tensor photometric_error;   // e_p   [B,Fl,D,H,W] tiled
  torch::Tensor geometric_error;     // e_g   [B,1,D,H,W]  tiled
  torch::Tensor visual_hull;         // H     [B,1,D,H,W]
};

/// Builds V_p, V_g, e_p, e_g for one (reference, source) pair at feature resolution.
/// `hull` is the visual hull computed over every view of the forward pass. Terms
/// disabled in `inputs` come back as zeros of the right shape.
RefinementGuidance build_guidance(const torch::Tensor& ref_low, const torch::Tensor& src_low,
                                  const torch::Tensor& ref_disparity,
                                  const torch::Tensor& src_disparity, const torch::Tensor& hull,
                                  const geometry::CameraBatch& ref, const geometry::CameraBatch& src,
                                  const geometry::DisparityPlanes& planes,
                                  const RefinementInputs& inputs);

/// Channel count of the concatenated refinement input.
int refinement_input_channels(const NetworkConfig& config);

/// Single 3-D encoder-decoder predicting the cost residual. The final layer starts at
/// zero, so the refined volume initially equals the filtered one.
class RefinementNetImpl : public torch::nn::Module {
 public:
  explicit RefinementNetImpl(const NetworkConfig& config);

  /// Returns C^R = filtered + residual. Throws std::invalid_argument when the inputs
  /// disagree on (D, H, W).
  torch::Tensor forward(const torch::Tensor& filtered, const RefinementGuidance& guidance);

  /// The residual alone, from the already concatenated input.
  torch::Tensor residual(const torch::Tensor& stacked_input);

 private:
  torch::nn::Conv3d enc0_{nullptr}, down1_{nullptr}, enc1_{nullptr}, down2_{nullptr},
      enc2_{nullptr}, head_{nullptr};
  torch::nn::ConvTranspose3d up1_{nullptr}, up2_{nullptr};
  std::vector<torch::nn::GroupNorm> norms_;
};
TORCH_MODULE(RefinementNet);

}  // namespace atvs::nn
