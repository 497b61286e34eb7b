#include "atvs/geometry/camera.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <torch/torch.h>

#include "atvs/errors.hpp"

namespace atvs::geometry {

namespace {

constexpr double kRotationTolerance = 1e-6;

void validate(const Eigen::Matrix3d& k, const Eigen::Matrix4d& t) {
  if (k(1, 0) != 0.0 || k(2, 0) != 0.0 || k(2, 1) != 0.0)
    throw std::invalid_argument("camera intrinsics must be upper-triangular");
  if (!(k(0, 0) > 0.0) || !(k(1, 1) > 0.0) || !(k(2, 2) > 0.0))
    throw std::invalid_argument("camera intrinsics must have positive focal entries");
  if (!k.allFinite() || !t.allFinite())
    throw std::invalid_argument("camera parameters must be finite");
  const Eigen::Matrix3d r = t.topLeftCorner<3, 3>();
  const double ortho_err = (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (ortho_err > kRotationTolerance || std::abs(r.determinant() - 1.0) > kRotationTolerance)
    throw std::invalid_argument("world_to_cam rotation block must be orthonormal with det +1");
  if (t(3, 0) != 0.0 || t(3, 1) != 0.0 || t(3, 2) != 0.0 || t(3, 3) != 1.0)
    throw std::invalid_argument("world_to_cam last row must be (0, 0, 0, 1)");
}

}  // namespace

CameraModel::CameraModel()
    : intrinsics_(Eigen::Matrix3d::Identity()), world_to_cam_(Eigen::Matrix4d::Identity()) {}

CameraModel::CameraModel(const Eigen::Matrix3d& intrinsics, const Eigen::Matrix4d& world_to_cam,
                         ImageSize image_size)
    : intrinsics_(intrinsics), world_to_cam_(world_to_cam), image_size_(image_size) {
  validate(intrinsics_, world_to_cam_);
  // Projectively equivalent; keeps [K X]_z equal to the camera-frame Z.
  if (intrinsics_(2, 2) != 1.0) intrinsics_ /= intrinsics_(2, 2);
}

Eigen::Matrix4d CameraModel::cam_to_world() const {
  Eigen::Matrix4d inv = Eigen::Matrix4d::Identity();
  const Eigen::Matrix3d rt = world_to_cam_.topLeftCorner<3, 3>().transpose();
  inv.topLeftCorner<3, 3>() = rt;
  inv.topRightCorner<3, 1>() = -rt * world_to_cam_.topRightCorner<3, 1>();
  return inv;
}

Eigen::Vector3d CameraModel::center() const { return cam_to_world().topRightCorner<3, 1>(); }

CameraModel CameraModel::downscaled(int scale) const {
  if (scale < 1) throw std::invalid_argument("downscale factor must be >= 1");
  Eigen::Matrix3d k = intrinsics_;
  k.topRows<2>() /= static_cast<double>(scale);
  const ImageSize size{(image_size_.width + scale - 1) / scale,
                       (image_size_.height + scale - 1) / scale};
  return CameraModel(k, world_to_cam_, size);
}

Eigen::Matrix4d CameraModel::projection() const {
  Eigen::Matrix4d k4 = Eigen::Matrix4d::Identity();
  k4.topLeftCorner<3, 3>() = intrinsics_;
  return k4 * world_to_cam_;
}

bool CameraModel::same_as(const CameraModel& other) const {
  return intrinsics_ == other.intrinsics_ && world_to_cam_ == other.world_to_cam_;
}

ProjectedPixel project_pixel(const Eigen::Vector2d& u, double disparity, const CameraModel& ref,
                             const CameraModel& src) {
  if (!(disparity > 0.0)) throw std::invalid_argument("project_pixel: disparity must be > 0");
  ProjectedPixel out;
  if (ref.same_as(src)) {
    out.coord = u;
    out.depth = 1.0 / disparity;
    out.valid = true;
    return out;
  }
  const Eigen::Vector3d ray = ref.intrinsics().triangularView<Eigen::Upper>().solve(
      Eigen::Vector3d(u.x(), u.y(), 1.0));
  const Eigen::Vector4d x_ref((ray / ray.z() / disparity).homogeneous());
  const Eigen::Vector4d x_src = src.world_to_cam() * ref.cam_to_world() * x_ref;
  const Eigen::Vector3d p = src.intrinsics() * x_src.head<3>();
  out.depth = x_src.z();
  out.valid = x_src.z() > 0.0;
  if (p.z() != 0.0) out.coord = p.head<2>() / p.z();
  return out;
}

CameraModel read_camera(const std::filesystem::path& path, ImageSize image_size) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "cannot open camera file");
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::vector<double> row;
    std::string token;
    while (ss >> token) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(token, &used));
        if (used != token.size()) throw std::invalid_argument(token);
      } catch (const std::exception&) {
        throw ParseError(path, line_no, "expected a decimal number, got '" + token + "'");
      }
    }
    if (row.empty()) continue;
    const std::size_t expected = rows.size() < 3 ? 3 : 4;
    if (rows.size() >= 7) throw ParseError(path, line_no, "unexpected trailing data");
    if (row.size() != expected)
      throw ParseError(path, line_no,
                       "expected " + std::to_string(expected) + " values, got " +
                           std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  if (rows.size() != 7)
    throw ParseError(path, line_no, "expected 7 rows (3 intrinsics + 4 world-to-camera)");
  Eigen::Matrix3d k;
  Eigen::Matrix4d t;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) k(r, c) = rows[r][c];
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) t(r, c) = rows[3 + r][c];
  try {
    return CameraModel(k, t, image_size);
  } catch (const std::invalid_argument& e) {
    throw ParseError(path, 0, e.what());
  }
}

void write_camera(const std::filesystem::path& path, const CameraModel& camera) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write camera file " + path.string());
  out << std::setprecision(17);
  const auto& k = camera.intrinsics();
  for (int r = 0; r < 3; ++r) out << k(r, 0) << ' ' << k(r, 1) << ' ' << k(r, 2) << '\n';
  const auto& t = camera.world_to_cam();
  for (int r = 0; r < 4; ++r)
    out << t(r, 0) << ' ' << t(r, 1) << ' ' << t(r, 2) << ' ' << t(r, 3) << '\n';
}

CameraBatch CameraBatch::from(std::span<const CameraModel> cameras, torch::Dtype dtype) {
  const auto b = static_cast<int64_t>(cameras.size());
  auto k = torch::empty({b, 3, 3}, torch::kFloat64);
  auto t = torch::empty({b, 4, 4}, torch::kFloat64);
  auto ka = k.accessor<double, 3>();
  auto ta = t.accessor<double, 3>();
  for (int64_t i = 0; i < b; ++i) {
    const auto& cam = cameras[static_cast<std::size_t>(i)];
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) ka[i][r][c] = cam.intrinsics()(r, c);
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) ta[i][r][c] = cam.world_to_cam()(r, c);
  }
  return CameraBatch{k.to(dtype), t.to(dtype)};
}

CameraBatch CameraBatch::from(const CameraModel& camera, torch::Dtype dtype) {
  return from(std::span<const CameraModel>(&camera, 1), dtype);
}

CameraBatch CameraBatch::downscaled(int scale) const {
  if (scale < 1) throw std::invalid_argument("downscale factor must be >= 1");
  auto row_scale = torch::tensor({1.0 / scale, 1.0 / scale, 1.0}, intrinsics.options()).view({1, 3, 1});
  return CameraBatch{intrinsics * row_scale, world_to_cam};
}

CameraBatch CameraBatch::to(torch::Dtype dtype) const {
  return CameraBatch{intrinsics.to(dtype), world_to_cam.to(dtype)};
}

CameraBatch CameraBatch::cat(std::span<const CameraBatch> batches) {
  std::vector<torch::Tensor> ks, ts;
  for (const auto& b : batches) {
    ks.push_back(b.intrinsics);
    ts.push_back(b.world_to_cam);
  }
  return CameraBatch{torch::cat(ks, 0), torch::cat(ts, 0)};
}

}  // namespace atvs::geometry
