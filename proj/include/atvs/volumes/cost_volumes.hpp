#pragma once

#include <span>

#include <torch/types.h>

#include "atvs/geometry/camera.hpp"
#include "atvs/geometry/planes.hpp"

// Volumes are [B,C,D,H,W]; disparity maps [B,H,W]; error maps [B,C,H,W].
// Cameras must match the resolution of the maps they are applied to.

namespace atvs::volumes {

using geometry::CameraBatch;
using geometry::DisparityPlanes;

/// Finite penalty stored where a geometric term has no valid projection: the full
/// hypothesis range D * delta.
inline double invalid_cost(const DisparityPlanes& planes) {
  return planes.count() * planes.delta();
}

/// Reference features [B,F,H,W] tiled over the D planes, concatenated with the warped
/// source volume [B,F,D,H,W] along channels -> [B,2F,D,H,W].
torch::Tensor concat_cost_volume(const torch::Tensor& ref_features,
                                 const torch::Tensor& warped_source);

/// Repeats a map [B,C,H,W] (or [B,H,W], treated as one channel) `depth` times along the
/// plane axis -> [B,C,depth,H,W].
torch::Tensor tile_along_depth(const torch::Tensor& map, int64_t depth);

/// |d_ref(u) - d_i| -> [B,1,D,H,W]. `plane_values` is the [D] plane list.
torch::Tensor geometric_cost_ref(const torch::Tensor& ref_disparity, const torch::Tensor& plane_values);
torch::Tensor geometric_cost_ref(const torch::Tensor& ref_disparity, const DisparityPlanes& planes);

/// |d*_src(pi_src(u, d_ref(u))) - d_i| -> [B,1,D,H,W]; `sentinel` where the projection
/// or rescaling is invalid.
torch::Tensor geometric_cost_source(const torch::Tensor& ref_disparity,
                                    const torch::Tensor& src_disparity,
                                    const torch::Tensor& plane_values, const CameraBatch& ref,
                                    const CameraBatch& src, double sentinel);
torch::Tensor geometric_cost_source(const torch::Tensor& ref_disparity,
                                    const torch::Tensor& src_disparity, const DisparityPlanes& planes,
                                    const CameraBatch& ref, const CameraBatch& src);

/// Per-channel |F_src(pi_src(u, d_ref(u))) - F_ref(u)| -> [B,F,H,W]. Source samples
/// outside the image read as zero.
torch::Tensor photometric_error(const torch::Tensor& ref_low, const torch::Tensor& src_low,
                                const torch::Tensor& ref_disparity, const CameraBatch& ref,
                                const CameraBatch& src);

/// |d*_src(pi_src(u, d_ref(u))) - d_ref(u)| -> [B,1,H,W]; `sentinel` where invalid.
torch::Tensor geometric_error(const torch::Tensor& ref_disparity, const torch::Tensor& src_disparity,
                              const CameraBatch& ref, const CameraBatch& src, double sentinel);

/// One view's disparity map [B,H,W] and its camera.
struct ViewDisparity {
  torch::Tensor disparity;
  CameraBatch camera;
};

/// H(u, d_i) = 1/N sum_n step(d_n(pi_n(u, d_i)) - d_i^(n)) -> [B,1,D,H,W], where
/// d_i^(n) is the voxel's disparity in view n and step(0) = 1. Voxels that project
/// outside view n or behind it count as visible in that view.
/// Throws std::invalid_argument for an empty view list.
torch::Tensor visual_hull(std::span<const ViewDisparity> views, const torch::Tensor& plane_values,
                          const CameraBatch& ref);

}  // namespace atvs::volumes
