#include "atvs/training/loss.hpp"

#include <stdexcept>

#include <torch/torch.h>

namespace atvs::training {

void LossWeights::validate() const {
  if (lambda < 0.0) throw std::invalid_argument("lambda must be non-negative");
  for (double w : omega)
    if (w < 0.0) throw std::invalid_argument("omega weights must be non-negative");
}

void to_json(nlohmann::json& j, const LossWeights& w) {
  j = nlohmann::json{{"lambda", w.lambda}, {"omega", w.omega}};
}

void from_json(const nlohmann::json& j, LossWeights& w) {
  w.lambda = j.value("lambda", w.lambda);
  w.omega = j.value("omega", w.omega);
}

torch::Tensor valid_mask(const torch::Tensor& gt) { return torch::isfinite(gt) & gt.gt(0); }

LossValue l1_loss(const torch::Tensor& pred, const torch::Tensor& gt) {
  if (pred.sizes() != gt.sizes())
    throw std::invalid_argument("prediction " + c10::str(pred.sizes()) + " and ground truth " +
                                c10::str(gt.sizes()) + " differ in shape");
  const auto mask = valid_mask(gt);
  const auto count = mask.sum().item<int64_t>();
  if (count == 0) return {(pred * 0).sum(), true};
  const auto clean = torch::where(mask, gt, torch::zeros_like(gt)).to(pred.scalar_type());
  const auto diff = torch::where(mask, pred - clean, torch::zeros_like(pred)).abs();
  return {diff.sum() / static_cast<double>(count), false};
}

LossValue total_loss(const torch::Tensor& refined, const std::vector<torch::Tensor>& intermediates,
                     const torch::Tensor& gt, const LossWeights& weights) {
  if (intermediates.size() != weights.omega.size())
    throw std::invalid_argument("got " + std::to_string(intermediates.size()) +
                                " intermediate outputs for " + std::to_string(weights.omega.size()) +
                                " omega weights");
  weights.validate();
  auto first = training::l1_loss(refined, gt);
  LossValue total{first.value * weights.lambda, first.no_valid_pixels};
  for (std::size_t k = 0; k < intermediates.size(); ++k)
    total.value = total.value + weights.omega[k] * training::l1_loss(intermediates[k], gt).value;
  return total;
}

torch::Tensor downsample_nearest_valid(const torch::Tensor& gt, int scale) {
  if (scale < 1) throw std::invalid_argument("scale must be >= 1");
  if (gt.dim() == 2) return downsample_nearest_valid(gt.unsqueeze(0), scale).squeeze(0);
  if (gt.dim() != 3) throw std::invalid_argument("ground truth must be [H,W] or [B,H,W]");
  const auto b = gt.size(0), h = gt.size(1), w = gt.size(2);
  const auto ho = (h + scale - 1) / scale, wo = (w + scale - 1) / scale;
  auto padded = torch::zeros({b, ho * scale, wo * scale}, gt.options());
  padded.slice(1, 0, h).slice(2, 0, w).copy_(gt);
  // [B,ho,wo,scale*scale] with the block's top-left pixel first
  auto blocks = padded.view({b, ho, scale, wo, scale}).permute({0, 1, 3, 2, 4}).reshape({b, ho, wo, scale * scale});
  const auto valid = valid_mask(blocks);
  const auto first = valid.to(torch::kInt).argmax(-1, true);
  auto picked = blocks.gather(-1, first).squeeze(-1);
  const auto any = valid.any(-1);
  return torch::where(any, picked, torch::zeros_like(picked));
}

}  // namespace atvs::training
