#include "atvs/fusion/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <stdexcept>

#include <Eigen/LU>
#include <torch/torch.h>

#include "atvs/volumes/cost_volumes.hpp"

namespace atvs::fusion {

namespace {

std::vector<double> camera_key(const geometry::CameraModel& cam) {
  std::vector<double> key;
  const Eigen::Vector3d c = cam.center();
  key.insert(key.end(), c.data(), c.data() + 3);
  key.insert(key.end(), cam.world_to_cam().data(), cam.world_to_cam().data() + 16);
  key.insert(key.end(), cam.intrinsics().data(), cam.intrinsics().data() + 9);
  return key;
}

struct ViewData {
  int width = 0;
  int height = 0;
  std::vector<double> disparity;
  std::vector<char> mask;
  torch::Tensor image;
  Eigen::Matrix3d k_inv;
  Eigen::Matrix3d k;
  Eigen::Matrix3d r;      // world to camera
  Eigen::Vector3d t;
  Eigen::Vector3d center;

  Eigen::Vector3d backproject(int x, int y) const {
    const double z = 1.0 / disparity[static_cast<std::size_t>(y * width + x)];
    return r.transpose() * (z * (k_inv * Eigen::Vector3d(x, y, 1.0)) - t);
  }
};

ViewData prepare(const FusionView& v, const torch::Tensor& mask) {
  ViewData d;
  const auto disp = v.disparity.detach().to(torch::kCPU, torch::kFloat64).contiguous();
  d.height = static_cast<int>(disp.size(0));
  d.width = static_cast<int>(disp.size(1));
  d.disparity.assign(disp.data_ptr<double>(), disp.data_ptr<double>() + disp.numel());
  const auto m = mask.to(torch::kCPU).to(torch::kBool).contiguous();
  d.mask.resize(static_cast<std::size_t>(m.numel()));
  const bool* mp = m.data_ptr<bool>();
  for (std::size_t i = 0; i < d.mask.size(); ++i) {
    const double v0 = d.disparity[i];
    d.mask[i] = mp[i] && std::isfinite(v0) && v0 > 0.0;
  }
  if (v.image.defined()) d.image = v.image.detach().to(torch::kCPU, torch::kFloat32).contiguous();
  d.k = v.camera.intrinsics();
  d.k_inv = d.k.inverse();
  d.r = v.camera.world_to_cam().topLeftCorner<3, 3>();
  d.t = v.camera.world_to_cam().block<3, 1>(0, 3);
  d.center = v.camera.center();
  return d;
}

}  // namespace

int default_min_consistent_views(std::size_t view_count) { return view_count <= 2 ? 1 : 2; }

std::vector<torch::Tensor> consistency_filter(const std::vector<FusionView>& views,
                                              int min_consistent_views, double disp_tolerance) {
  if (views.size() < 2) throw std::invalid_argument("consistency filtering needs at least two views");
  if (min_consistent_views < 0) throw std::invalid_argument("min_consistent_views must be >= 0");
  std::vector<torch::Tensor> masks;
  const double sentinel = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < views.size(); ++r) {
    const auto d_ref = views[r].disparity.detach().to(torch::kFloat64).unsqueeze(0);
    const auto valid = torch::isfinite(d_ref[0]) & d_ref[0].gt(0);
    if (min_consistent_views == 0) {
      masks.push_back(valid);
      continue;
    }
    const auto ref_cam = geometry::CameraBatch::from(views[r].camera);
    auto agree = torch::zeros_like(d_ref[0], torch::kInt);
    const auto clean_ref = torch::where(valid, d_ref[0], torch::ones_like(d_ref[0])).unsqueeze(0);
    for (std::size_t o = 0; o < views.size(); ++o) {
      if (o == r) continue;
      auto d_src = views[o].disparity.detach().to(torch::kFloat64);
      d_src = torch::where(torch::isfinite(d_src) & d_src.gt(0), d_src, torch::zeros_like(d_src));
      const auto err = volumes::geometric_error(clean_ref, d_src.unsqueeze(0), ref_cam,
                                                geometry::CameraBatch::from(views[o].camera), sentinel);
      agree += err[0][0].lt(disp_tolerance).to(torch::kInt);
    }
    masks.push_back(valid & agree.ge(min_consistent_views));
  }
  return masks;
}

PointCloud fuse_point_cloud(const std::vector<FusionView>& views, const std::vector<torch::Tensor>& masks,
                            double disp_tolerance) {
  if (views.size() != masks.size()) throw std::invalid_argument("one mask per view is required");
  std::vector<std::size_t> order(views.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::vector<double>> keys;
  for (const auto& v : views) keys.push_back(camera_key(v.camera));
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });

  std::vector<ViewData> data;
  for (auto i : order) data.push_back(prepare(views[i], masks[i]));
  std::vector<std::vector<char>> used;
  for (const auto& d : data) used.emplace_back(d.mask.size(), 0);

  PointCloud cloud;
  for (std::size_t v = 0; v < data.size(); ++v) {
    const auto& seed_view = data[v];
    for (int y = 0; y < seed_view.height; ++y) {
      for (int x = 0; x < seed_view.width; ++x) {
        const auto idx = static_cast<std::size_t>(y * seed_view.width + x);
        if (!seed_view.mask[idx] || used[v][idx]) continue;
        used[v][idx] = 1;
        const double d_seed = seed_view.disparity[idx];
        const Eigen::Vector3d seed = seed_view.backproject(x, y);
        Eigen::Vector3d sum = seed;
        int count = 1;
        for (std::size_t o = 0; o < data.size(); ++o) {
          if (o == v) continue;
          const auto& other = data[o];
          const Eigen::Vector3d pc = other.r * seed + other.t;
          if (pc.z() <= 0.0) continue;
          const Eigen::Vector3d uvw = other.k * pc;
          const long qx = std::lround(uvw.x() / uvw.z());
          const long qy = std::lround(uvw.y() / uvw.z());
          if (qx < 0 || qy < 0 || qx >= other.width || qy >= other.height) continue;
          const auto q = static_cast<std::size_t>(qy * other.width + qx);
          if (!other.mask[q] || used[o][q]) continue;
          const Eigen::Vector3d candidate = other.backproject(static_cast<int>(qx), static_cast<int>(qy));
          const double z_in_seed = (seed_view.r * candidate + seed_view.t).z();
          if (z_in_seed <= 0.0 || std::abs(1.0 / z_in_seed - d_seed) >= disp_tolerance) continue;
          used[o][q] = 1;
          sum += candidate;
          ++count;
        }
        Point p;
        p.position = sum / count;
        if (seed_view.image.defined()) {
          auto a = seed_view.image.accessor<float, 3>();
          for (int c = 0; c < 3; ++c)
            p.color[c] = static_cast<std::uint8_t>(std::lround(std::clamp(a[c][y][x], 0.0f, 1.0f) * 255.0f));
        }
        if (p.position.allFinite()) cloud.points.push_back(p);
      }
    }
  }
  return cloud;
}

bool write_ply(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.points.size()
      << "\nproperty float x\nproperty float y\nproperty float z\n"
         "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
  out.precision(9);
  for (const auto& p : cloud.points)
    out << static_cast<float>(p.position.x()) << " " << static_cast<float>(p.position.y()) << " "
        << static_cast<float>(p.position.z()) << " " << int(p.color[0]) << " " << int(p.color[1]) << " "
        << int(p.color[2]) << "\n";
  if (cloud.points.empty()) std::cerr << "warning: point cloud is empty: " << path << "\n";
  return !cloud.points.empty();
}

}  // namespace atvs::fusion
