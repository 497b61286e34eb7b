#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>
#include <torch/types.h>

#include "atvs/geometry/camera.hpp"

namespace atvs::fusion {

struct FusionView {
  torch::Tensor disparity;  // [H,W], <= 0 or non-finite where unknown
  geometry::CameraModel camera;
  torch::Tensor image;      // [3,H,W] in [0,1]; may be undefined (points are then gray)
};

/// Keeps pixels of each view for which at least `min_consistent_views` other views
/// give a geometric error (rescaled source disparity vs. own disparity) below
/// `disp_tolerance`. Returns one [H,W] bool mask per view. Throws
/// std::invalid_argument for fewer than two views.
std::vector<torch::Tensor> consistency_filter(const std::vector<FusionView>& views,
                                              int min_consistent_views, double disp_tolerance);

/// Defaults: 1 consistent view for two inputs, 2 otherwise.
int default_min_consistent_views(std::size_t view_count);

struct Point {
  Eigen::Vector3d position;
  std::array<std::uint8_t, 3> color{128, 128, 128};
};

struct PointCloud {
  std::vector<Point> points;
};

/// Back-projects the surviving pixels. Views are processed in a canonical order (by
/// camera parameters) so the cloud does not depend on the input order. Each unused
/// pixel seeds a point averaged with the matching surviving pixels of the other views
/// (nearest pixel whose depth agrees within `disp_tolerance` in disparity); matched
/// pixels are consumed. The color is the seed pixel's.
PointCloud fuse_point_cloud(const std::vector<FusionView>& views,
                            const std::vector<torch::Tensor>& masks, double disp_tolerance);

/// ASCII PLY 1.0 with float x,y,z and uchar red,green,blue. Returns false (and still
/// writes a valid file) when the cloud is empty.
bool write_ply(const std::filesystem::path& path, const PointCloud& cloud);

}  // namespace atvs::fusion
