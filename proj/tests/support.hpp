#pragma once

// Shared fixtures and naive reference implementations for the test suites.

#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <torch/torch.h>

#include "atvs/geometry/camera.hpp"

namespace atvs::test {

inline Eigen::Matrix3d intrinsics(double f, double cx, double cy) {
  Eigen::Matrix3d k = Eigen::Matrix3d::Identity();
  k(0, 0) = k(1, 1) = f;
  k(0, 2) = cx;
  k(1, 2) = cy;
  return k;
}

/// Camera with rotation `angle` about `axis` and translation `t` (world-to-camera).
inline geometry::CameraModel camera(const Eigen::Matrix3d& k, const Eigen::Vector3d& t,
                                    double angle = 0.0,
                                    const Eigen::Vector3d& axis = Eigen::Vector3d::UnitY(),
                                    geometry::ImageSize size = {8, 6}) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
  m.topRightCorner<3, 1>() = t;
  return geometry::CameraModel(k, m, size);
}

/// Point at disparity d along reference pixel u, in world coordinates.
inline Eigen::Vector3d back_project(const Eigen::Vector2d& u, double d, const geometry::CameraModel& cam) {
  const Eigen::Vector3d ray = cam.intrinsics().inverse() * Eigen::Vector3d(u.x(), u.y(), 1.0);
  const Eigen::Vector3d x_cam = ray / d;
  const Eigen::Matrix4d inv = cam.world_to_cam().inverse();
  return (inv * x_cam.homogeneous()).head<3>();
}

/// Camera-frame coordinates of a world point.
inline Eigen::Vector3d to_camera(const Eigen::Vector3d& x, const geometry::CameraModel& cam) {
  return (cam.world_to_cam() * x.homogeneous()).head<3>();
}

struct Projection {
  Eigen::Vector2d pixel;
  double depth;
};

inline Projection project(const Eigen::Vector3d& world, const geometry::CameraModel& cam) {
  const Eigen::Vector3d c = to_camera(world, cam);
  const Eigen::Vector3d p = cam.intrinsics() * c;
  return {Eigen::Vector2d(p.x() / p.z(), p.y() / p.z()), c.z()};
}

/// Bilinear interpolation of one channel with zero padding, written as the textbook
/// weighted sum of four taps.
inline double bilinear(const torch::Tensor& image2d, double x, double y) {
  const auto img = image2d.to(torch::kFloat64).contiguous();
  const auto a = img.accessor<double, 2>();
  const int64_t h = img.size(0), w = img.size(1);
  auto tap = [&](int64_t yy, int64_t xx) {
    return (xx >= 0 && xx < w && yy >= 0 && yy < h) ? a[yy][xx] : 0.0;
  };
  const double x0 = std::floor(x), y0 = std::floor(y);
  const double fx = x - x0, fy = y - y0;
  const auto ix = static_cast<int64_t>(x0), iy = static_cast<int64_t>(y0);
  return (1 - fx) * (1 - fy) * tap(iy, ix) + fx * (1 - fy) * tap(iy, ix + 1) +
         (1 - fx) * fy * tap(iy + 1, ix) + fx * fy * tap(iy + 1, ix + 1);
}

inline bool inside(const Eigen::Vector2d& p, int64_t h, int64_t w) {
  return p.x() >= 0 && p.y() >= 0 && p.x() <= w - 1 && p.y() <= h - 1;
}

/// d*_src(pi_src(u, d_ref)) computed point by point: sample the source map where u lands,
/// lift that sample to 3-D in the source camera and read its reference-frame disparity.
inline std::optional<double> rescaled_source_disparity(const Eigen::Vector2d& u, double d_ref,
                                                       const torch::Tensor& src_disparity,
                                                       const geometry::CameraModel& ref,
                                                       const geometry::CameraModel& src) {
  const auto world = back_project(u, d_ref, ref);
  const auto proj = project(world, src);
  if (proj.depth <= 0 || !inside(proj.pixel, src_disparity.size(0), src_disparity.size(1)))
    return std::nullopt;
  const double d_src = bilinear(src_disparity, proj.pixel.x(), proj.pixel.y());
  if (d_src == 0.0) return 0.0;
  const auto lifted = back_project(proj.pixel, d_src, src);
  const double z = to_camera(lifted, ref).z();
  if (std::abs(z) <= 1e-8) return std::nullopt;
  return 1.0 / z;
}

inline double max_abs_diff(const torch::Tensor& a, const torch::Tensor& b) {
  return (a.to(torch::kFloat64) - b.to(torch::kFloat64)).abs().max().item<double>();
}

}  // namespace atvs::test
