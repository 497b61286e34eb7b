#pragma once

#include <torch/types.h>

#include "atvs/geometry/camera.hpp"

// Tensor layouts used throughout: images and feature maps [B,C,H,W], volumes
// [B,C,D,H,W], disparity maps [B,H,W]. Cameras passed to the tensor ops must already
// be expressed at the resolution of the tensors they act on (see
// CameraBatch::downscaled).

namespace atvs::geometry {

/// Feature tensor [B,F,H',W'] together with its downsampling factor.
struct FeatureMap {
  torch::Tensor data;
  int scale = 1;
};

/// Bilinear interpolation of `image` [B,C,H,W] at pixel coordinates `coords`
/// [B,...,2] holding (x, y). Taps outside the image read as zero. Returns [B,C,...].
/// Differentiable with respect to both the image values and the coordinates.
torch::Tensor bilinear_sample(const torch::Tensor& image, const torch::Tensor& coords);

/// True where (x, y) lies in [0, width-1] x [0, height-1]. Shape of coords minus the last axis.
torch::Tensor in_bounds(const torch::Tensor& coords, int64_t height, int64_t width);

/// Linear map taking a homogeneous reference pixel u observed at disparity d to
/// d * K_src X_src:  p = matrix * (u, 1) + offset * d.
/// Identical cameras give an exact identity.
struct RelativeProjection {
  torch::Tensor matrix;  // [B,3,3]
  torch::Tensor offset;  // [B,3]
};
RelativeProjection relative_projection(const CameraBatch& ref, const CameraBatch& src,
                                       torch::Dtype dtype);

struct Correspondence {
  torch::Tensor coords;  // [B,K,H,W,2] source pixel coordinates
  torch::Tensor valid;   // [B,K,H,W] disparity > 0 and point in front of the source camera
  torch::Tensor src_disparity;  // [B,K,H,W] 1/Z of the point in the source frame (0 where invalid)
};

/// Projects the H x W reference pixel grid observed at `disparity` [B,K,H,W] into the
/// source camera (pi_src(u, d)).
Correspondence project_grid(const torch::Tensor& disparity, const CameraBatch& ref,
                            const CameraBatch& src);

/// Minimum |Z| for the disparity rescaling division.
inline constexpr double kMinRescaleZ = 1e-8;

struct RescaledDisparity {
  torch::Tensor value;  // [B,K,H,W], zero where invalid
  torch::Tensor valid;  // [B,K,H,W]
};

/// Samples the source disparity map [B,Hs,Ws] at `corr.coords` and re-expresses each
/// sample as a disparity of the reference camera:
///   d*(c) = d_src(c) / [P_ref P_src^{-1} (c, 1, d_src(c))]_Z.
/// Samples out of bounds, behind the camera, or with |Z| <= kMinRescaleZ are invalid.
RescaledDisparity rescale_disparity(const torch::Tensor& src_disparity, const CameraBatch& ref,
                                    const CameraBatch& src, const Correspondence& corr);

struct WarpedVolume {
  torch::Tensor volume;  // [B,F,D,H,W]
  torch::Tensor mask;    // [B,D,H,W]
};

/// Warps the source feature map [B,F,H,W] onto every plane of `plane_values` [D]
/// of the reference frustum. Invalid samples are zero and carry a false mask.
WarpedVolume plane_sweep_warp(const torch::Tensor& src_features, const torch::Tensor& plane_values,
                              const CameraBatch& ref, const CameraBatch& src);

}  // namespace atvs::geometry
