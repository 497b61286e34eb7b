#pragma once

#include <vector>

#include <nlohmann/json.hpp>
#include <torch/types.h>

namespace atvs::training {

struct LossWeights {
  double lambda = 0.8;
  std::vector<double> omega{0.2, 0.3, 0.5};

  /// Throws std::invalid_argument on negative weights.
  void validate() const;
};

void to_json(nlohmann::json& j, const LossWeights& w);
void from_json(const nlohmann::json& j, LossWeights& w);

struct LossValue {
  torch::Tensor value;  // scalar
  bool no_valid_pixels = false;
};

/// Ground-truth pixels with a finite, positive disparity.
torch::Tensor valid_mask(const torch::Tensor& gt);

/// Mean |pred - gt| over valid ground-truth pixels; 0 (flagged) when none is valid.
/// Invalid pixels receive exactly zero gradient. Throws on a shape mismatch.
LossValue l1_loss(const torch::Tensor& pred, const torch::Tensor& gt);

/// lambda * l(refined) + sum_k omega_k * l(intermediates[k]). Pass an empty omega and
/// no intermediates for the refined term alone. Throws std::invalid_argument when
/// intermediates.size() != omega.size().
LossValue total_loss(const torch::Tensor& refined, const std::vector<torch::Tensor>& intermediates,
                     const torch::Tensor& gt, const LossWeights& weights);

/// Ground truth at 1/scale resolution: each output pixel takes full-resolution pixel
/// (scale*i, scale*j) when valid, otherwise the first valid pixel of its block in
/// row-major order, otherwise 0. Accepts [H,W] or [B,H,W].
torch::Tensor downsample_nearest_valid(const torch::Tensor& gt, int scale);

}  // namespace atvs::training
