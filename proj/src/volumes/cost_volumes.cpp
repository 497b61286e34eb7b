#include "atvs/volumes/cost_volumes.hpp"

#include <stdexcept>

#include <torch/torch.h>

#include "atvs/geometry/warp.hpp"

namespace atvs::volumes {

namespace g = atvs::geometry;

namespace {

torch::Tensor plane_view(const torch::Tensor& plane_values, const torch::Tensor& like) {
  return plane_values.to(like.scalar_type()).view({1, 1, -1, 1, 1});
}

struct SourceLookup {
  g::Correspondence corr;
  g::RescaledDisparity rescaled;  // [B,1,H,W]
};

SourceLookup lookup_source(const torch::Tensor& ref_disparity, const torch::Tensor& src_disparity,
                           const CameraBatch& ref, const CameraBatch& src) {
  if (ref_disparity.dim() != 3 || src_disparity.dim() != 3)
    throw std::invalid_argument("disparity maps must be [B,H,W]");
  auto corr = g::project_grid(ref_disparity.unsqueeze(1), ref, src);
  auto rescaled = g::rescale_disparity(src_disparity, ref, src, corr);
  return {std::move(corr), std::move(rescaled)};
}

}  // namespace

torch::Tensor concat_cost_volume(const torch::Tensor& ref_features,
                                 const torch::Tensor& warped_source) {
  if (ref_features.dim() != 4 || warped_source.dim() != 5)
    throw std::invalid_argument("concat_cost_volume: expected [B,F,H,W] and [B,F,D,H,W]");
  if (ref_features.size(0) != warped_source.size(0) ||
      ref_features.size(1) != warped_source.size(1) ||
      ref_features.size(2) != warped_source.size(3) ||
      ref_features.size(3) != warped_source.size(4))
    throw std::invalid_argument("concat_cost_volume: shape mismatch between reference and source");
  return torch::cat({tile_along_depth(ref_features, warped_source.size(2)), warped_source}, 1);
}

torch::Tensor tile_along_depth(const torch::Tensor& map, int64_t depth) {
  if (depth < 1) throw std::invalid_argument("tile_along_depth: depth must be >= 1");
  const auto m = map.dim() == 3 ? map.unsqueeze(1) : map;
  if (m.dim() != 4) throw std::invalid_argument("tile_along_depth: map must be [B,C,H,W]");
  return m.unsqueeze(2).expand({m.size(0), m.size(1), depth, m.size(2), m.size(3)}).contiguous();
}

torch::Tensor geometric_cost_ref(const torch::Tensor& ref_disparity, const torch::Tensor& plane_values) {
  if (ref_disparity.dim() != 3) throw std::invalid_argument("disparity map must be [B,H,W]");
  return (ref_disparity.unsqueeze(1).unsqueeze(1) - plane_view(plane_values, ref_disparity)).abs();
}

torch::Tensor geometric_cost_ref(const torch::Tensor& ref_disparity, const DisparityPlanes& planes) {
  return geometric_cost_ref(ref_disparity, planes.tensor(ref_disparity.scalar_type()));
}

torch::Tensor geometric_cost_source(const torch::Tensor& ref_disparity,
                                    const torch::Tensor& src_disparity,
                                    const torch::Tensor& plane_values, const CameraBatch& ref,
                                    const CameraBatch& src, double sentinel) {
  const auto look = lookup_source(ref_disparity, src_disparity, ref, src);
  const auto value = look.rescaled.value.unsqueeze(1);  // [B,1,1,H,W]
  const auto valid = look.rescaled.valid.unsqueeze(1);
  const auto cost = (value - plane_view(plane_values, value)).abs();
  return torch::where(valid, cost, torch::full_like(cost, sentinel));
}

torch::Tensor geometric_cost_source(const torch::Tensor& ref_disparity,
                                    const torch::Tensor& src_disparity, const DisparityPlanes& planes,
                                    const CameraBatch& ref, const CameraBatch& src) {
  return geometric_cost_source(ref_disparity, src_disparity,
                               planes.tensor(ref_disparity.scalar_type()), ref, src,
                               invalid_cost(planes));
}

torch::Tensor photometric_error(const torch::Tensor& ref_low, const torch::Tensor& src_low,
                                const torch::Tensor& ref_disparity, const CameraBatch& ref,
                                const CameraBatch& src) {
  if (ref_low.sizes() != src_low.sizes())
    throw std::invalid_argument("photometric_error: feature maps differ in shape");
  const auto corr = g::project_grid(ref_disparity.unsqueeze(1), ref, src);
  const auto sampled = g::bilinear_sample(src_low, corr.coords).squeeze(2);  // [B,F,H,W]
  return (sampled - ref_low).abs();
}

torch::Tensor geometric_error(const torch::Tensor& ref_disparity, const torch::Tensor& src_disparity,
                              const CameraBatch& ref, const CameraBatch& src, double sentinel) {
  const auto look = lookup_source(ref_disparity, src_disparity, ref, src);
  const auto err = (look.rescaled.value - ref_disparity.unsqueeze(1)).abs();
  return torch::where(look.rescaled.valid, err, torch::full_like(err, sentinel));
}

torch::Tensor visual_hull(std::span<const ViewDisparity> views, const torch::Tensor& plane_values,
                          const CameraBatch& ref) {
  if (views.empty()) throw std::invalid_argument("visual_hull: at least one view is required");
  const auto& first = views.front().disparity;
  const auto b = first.size(0);
  const auto h = first.size(1);
  const auto w = first.size(2);
  const auto d = plane_values.numel();
  const auto planes = plane_values.to(first.scalar_type()).view({1, d, 1, 1}).expand({b, d, h, w});

  auto visible_count = torch::zeros({b, d, h, w}, first.options());
  for (const auto& view : views) {
    const auto hv = view.disparity.size(1);
    const auto wv = view.disparity.size(2);
    const auto corr = g::project_grid(planes, ref, view.camera);
    const auto observed = g::bilinear_sample(view.disparity.unsqueeze(1), corr.coords).squeeze(1);
    const auto seen = corr.valid & g::in_bounds(corr.coords, hv, wv);
    const auto step = observed >= corr.src_disparity;
    visible_count = visible_count + torch::where(seen, step, torch::ones_like(step)).to(first.scalar_type());
  }
  return (visible_count / static_cast<double>(views.size())).unsqueeze(1);
}

}  // namespace atvs::volumes
