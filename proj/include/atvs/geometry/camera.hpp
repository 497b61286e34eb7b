#pragma once

#include <filesystem>
#include <span>

#include <Eigen/Core>
#include <torch/types.h>

namespace atvs::geometry {

struct ImageSize {
  int width = 0;
  int height = 0;

  friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

/// Pinhole camera: upper-triangular intrinsics (pixels) and a rigid world-to-camera
/// transform. Pixel coordinates put integer values at pixel centers.
class CameraModel {
 public:
  CameraModel();

  /// Throws std::invalid_argument when the intrinsics are not upper-triangular with
  /// positive focal entries or the rotation block is not a proper rotation (1e-6).
  /// Intrinsics are normalized so that K(2,2) == 1.
  CameraModel(const Eigen::Matrix3d& intrinsics, const Eigen::Matrix4d& world_to_cam,
              ImageSize image_size);

  const Eigen::Matrix3d& intrinsics() const { return intrinsics_; }
  const Eigen::Matrix4d& world_to_cam() const { return world_to_cam_; }
  ImageSize image_size() const { return image_size_; }

  Eigen::Matrix4d cam_to_world() const;
  Eigen::Vector3d center() const;

  /// Camera for a feature map `scale` times smaller: focal lengths, skew and principal
  /// point are divided by `scale`; the image size is ceil-divided.
  CameraModel downscaled(int scale) const;

  /// 4x4 projection taking homogeneous world points to (z*u, z*v, z, 1).
  Eigen::Matrix4d projection() const;

  /// Bitwise parameter equality; identical cameras get exact identity warps.
  bool same_as(const CameraModel& other) const;

 private:
  Eigen::Matrix3d intrinsics_;
  Eigen::Matrix4d world_to_cam_;
  ImageSize image_size_;
};

struct ProjectedPixel {
  Eigen::Vector2d coord = Eigen::Vector2d::Zero();
  /// Z-depth of the point in the source camera frame.
  double depth = 0.0;
  /// False when the point lies behind (or on the plane of) the source camera.
  bool valid = false;
};

/// Maps reference pixel `u` observed at disparity `disparity` (1 / Z in the reference
/// frame) to source pixel coordinates. The result may lie outside the source image.
/// Throws std::invalid_argument for disparity <= 0.
ProjectedPixel project_pixel(const Eigen::Vector2d& u, double disparity, const CameraModel& ref,
                             const CameraModel& src);

/// Camera text format: three intrinsics rows, then four world-to-camera rows.
CameraModel read_camera(const std::filesystem::path& path, ImageSize image_size);
void write_camera(const std::filesystem::path& path, const CameraModel& camera);

/// Batched camera parameters for tensor ops: intrinsics [B,3,3], world_to_cam [B,4,4].
struct CameraBatch {
  torch::Tensor intrinsics;
  torch::Tensor world_to_cam;

  static CameraBatch from(std::span<const CameraModel> cameras,
                          torch::Dtype dtype = torch::kFloat64);
  static CameraBatch from(const CameraModel& camera, torch::Dtype dtype = torch::kFloat64);

  int64_t size() const { return intrinsics.size(0); }
  CameraBatch downscaled(int scale) const;
  CameraBatch to(torch::Dtype dtype) const;
  /// Concatenates batches along the batch axis.
  static CameraBatch cat(std::span<const CameraBatch> batches);
};

}  // namespace atvs::geometry
