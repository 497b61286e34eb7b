#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "atvs/errors.hpp"
#include "atvs/geometry/camera.hpp"
#include "atvs/geometry/planes.hpp"
#include "atvs/geometry/warp.hpp"
#include "support.hpp"

using namespace atvs;
using namespace atvs::geometry;
using test::camera;
using test::intrinsics;

namespace {

CameraModel rotated_source() {
  return camera(intrinsics(6.0, 3.5, 2.5), {0.3, -0.1, 0.05}, 0.08, {0.2, 1.0, 0.1});
}

CameraModel reference() { return camera(intrinsics(6.0, 3.5, 2.5), Eigen::Vector3d::Zero()); }

}  // namespace

TEST(Planes, FollowOffsetPlusIndexTimesInterval) {
  const auto v = disparity_planes(0.0, 0.01, 3).values();
  ASSERT_EQ(v.size(), 3u);
  EXPECT_DOUBLE_EQ(v[0], 0.01);
  EXPECT_DOUBLE_EQ(v[1], 0.02);
  EXPECT_DOUBLE_EQ(v[2], 0.03);
}

TEST(Planes, FullScaleLastPlane) {
  EXPECT_NEAR(disparity_planes(0.0, 0.01, 128).highest(), 1.28, 1e-12);
}

TEST(Planes, RejectDegenerateParameters) {
  EXPECT_THROW(disparity_planes(0.5, 0.0, 4), std::invalid_argument);
  EXPECT_THROW(disparity_planes(0.5, -0.1, 4), std::invalid_argument);
  EXPECT_THROW(disparity_planes(0.5, 0.1, 0), std::invalid_argument);
  EXPECT_THROW(disparity_planes(-0.1, 0.1, 3), std::invalid_argument);
}

TEST(Planes, StrictlyIncreasing) {
  const auto t = disparity_planes(0.1, 0.025, 64).tensor(torch::kFloat64);
  EXPECT_TRUE((t.slice(0, 1) > t.slice(0, 0, -1)).all().item<bool>());
  EXPECT_TRUE(torch::equal(disparity_planes(0.1, 0.025, 64).reversed_tensor(torch::kFloat64), t.flip(0)));
}

TEST(Camera, RejectsInvalidIntrinsicsAndRotations) {
  Eigen::Matrix3d k = intrinsics(5, 2, 2);
  k(1, 0) = 0.5;
  EXPECT_THROW(CameraModel(k, Eigen::Matrix4d::Identity(), {4, 4}), std::invalid_argument);
  k = intrinsics(-5, 2, 2);
  EXPECT_THROW(CameraModel(k, Eigen::Matrix4d::Identity(), {4, 4}), std::invalid_argument);
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m(0, 0) = -1;  // reflection
  EXPECT_THROW(CameraModel(intrinsics(5, 2, 2), m, {4, 4}), std::invalid_argument);
  m = Eigen::Matrix4d::Identity();
  m(0, 1) = 1e-3;
  EXPECT_THROW(CameraModel(intrinsics(5, 2, 2), m, {4, 4}), std::invalid_argument);
}

TEST(Camera, DownscaleDividesFocalAndPrincipalPoint) {
  const auto cam = camera(intrinsics(40, 31.5, 17.5), {1, 2, 3}, 0.0, Eigen::Vector3d::UnitY(), {64, 37});
  const auto s = cam.downscaled(4);
  EXPECT_DOUBLE_EQ(s.intrinsics()(0, 0), 10.0);
  EXPECT_DOUBLE_EQ(s.intrinsics()(0, 2), 31.5 / 4);
  EXPECT_DOUBLE_EQ(s.intrinsics()(1, 2), 17.5 / 4);
  EXPECT_EQ(s.image_size(), (ImageSize{16, 10}));
  EXPECT_EQ(s.world_to_cam(), cam.world_to_cam());
}

TEST(Camera, TextRoundTripIsExact) {
  const auto path = std::filesystem::temp_directory_path() / "atvs_camera_roundtrip.txt";
  const auto cam = rotated_source();
  write_camera(path, cam);
  const auto back = read_camera(path, cam.image_size());
  EXPECT_TRUE(back.same_as(cam));
}

TEST(Camera, MalformedFileReportsLine) {
  const auto path = std::filesystem::temp_directory_path() / "atvs_camera_bad.txt";
  std::ofstream(path) << "1 0 0\n0 1 0\n0 0 1\n1 0 0 0\n0 1 x 0\n";
  try {
    read_camera(path, {4, 4});
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 5);
  }
  std::ofstream(path) << "1 0 0\n0 1 0\n0 0 1\n";
  EXPECT_THROW(read_camera(path, {4, 4}), ParseError);
}

TEST(ProjectPixel, IdenticalCamerasAreIdentity) {
  const auto cam = rotated_source();
  for (double d : {0.01, 0.5, 3.0}) {
    const auto p = project_pixel({1.25, 4.75}, d, cam, cam);
    EXPECT_TRUE(p.valid);
    EXPECT_EQ(p.coord, Eigen::Vector2d(1.25, 4.75));
  }
}

TEST(ProjectPixel, HandComputedTranslation) {
  const auto ref = camera(intrinsics(100, 50, 50), Eigen::Vector3d::Zero());
  const auto src = camera(intrinsics(100, 50, 50), {1.0, 0.0, 0.0});
  const auto p = project_pixel({50, 50}, 1.0, ref, src);
  EXPECT_TRUE(p.valid);
  EXPECT_NEAR(p.coord.x(), 150.0, 1e-12);
  EXPECT_NEAR(p.coord.y(), 50.0, 1e-12);
}

TEST(ProjectPixel, BehindSourceIsInvalid) {
  const auto ref = camera(intrinsics(100, 50, 50), Eigen::Vector3d::Zero());
  const auto src = camera(intrinsics(100, 50, 50), {0.0, 0.0, -2.0});
  EXPECT_FALSE(project_pixel({50, 50}, 1.0, ref, src).valid);
  EXPECT_THROW(project_pixel({50, 50}, 0.0, ref, src), std::invalid_argument);
}

TEST(ProjectPixel, MatchesWorldSpaceOracleAndInverts) {
  const auto ref = reference(), src = rotated_source();
  torch::manual_seed(1);
  for (int i = 0; i < 50; ++i) {
    const Eigen::Vector2d u(torch::rand({}).item<double>() * 7, torch::rand({}).item<double>() * 5);
    const double d = 0.2 + torch::rand({}).item<double>();
    const auto p = project_pixel(u, d, ref, src);
    const auto oracle = test::project(test::back_project(u, d, ref), src);
    ASSERT_TRUE(p.valid);
    EXPECT_NEAR((p.coord - oracle.pixel).norm(), 0.0, 1e-10);
    const auto back = project_pixel(p.coord, 1.0 / p.depth, src, ref);
    EXPECT_NEAR((back.coord - u).norm(), 0.0, 1e-5);
  }
}

TEST(BilinearSample, IntegerCoordinatesAreExact) {
  const auto img = torch::randn({2, 3, 5, 6});
  const auto coords = torch::tensor({{4.0f, 1.0f}, {0.0f, 3.0f}}).view({2, 1, 2});
  const auto s = bilinear_sample(img, coords);
  EXPECT_TRUE(torch::equal(s[0].squeeze(-1), img.index({0, torch::indexing::Slice(), 1, 4})));
  EXPECT_TRUE(torch::equal(s[1].squeeze(-1), img.index({1, torch::indexing::Slice(), 3, 0})));
}

TEST(BilinearSample, MidpointIsMeanOfFourTaps) {
  const auto img = torch::arange(12, torch::kFloat64).view({1, 1, 3, 4});
  const auto s = bilinear_sample(img, torch::tensor({1.5, 0.5}, torch::kFloat64).view({1, 1, 2}));
  EXPECT_DOUBLE_EQ(s.item<double>(), (1.0 + 2.0 + 5.0 + 6.0) / 4.0);
}

TEST(BilinearSample, MatchesLoopOracleWithZeroPadding) {
  torch::manual_seed(2);
  const auto img = torch::randn({1, 2, 5, 7}, torch::kFloat64);
  const auto coords = torch::rand({1, 40, 2}, torch::kFloat64) * torch::tensor({9.0, 7.0}, torch::kFloat64) - 1.0;
  const auto s = bilinear_sample(img, coords);
  for (int64_t i = 0; i < 40; ++i)
    for (int64_t c = 0; c < 2; ++c) {
      const double x = coords[0][i][0].item<double>(), y = coords[0][i][1].item<double>();
      EXPECT_NEAR(s[0][c][i].item<double>(), test::bilinear(img[0][c], x, y), 1e-12);
    }
}

TEST(PlaneSweep, IdenticalCamerasCopyFeatures) {
  const auto cam = CameraBatch::from(rotated_source());
  const auto feat = torch::randn({1, 4, 6, 8});
  const auto w = plane_sweep_warp(feat, disparity_planes(0.1, 0.1, 5).tensor(), cam, cam);
  for (int i = 0; i < 5; ++i) EXPECT_TRUE(torch::equal(w.volume.select(2, i), feat));
  EXPECT_TRUE(w.mask.all().item<bool>());
}

TEST(PlaneSweep, MatchesPerPixelProjectionOracle) {
  const auto ref = reference(), src = rotated_source();
  torch::manual_seed(3);
  const auto feat = torch::randn({1, 2, 6, 8}, torch::kFloat64);
  const auto planes = disparity_planes(0.1, 0.2, 4);
  const auto w = plane_sweep_warp(feat, planes.tensor(torch::kFloat64), CameraBatch::from(ref),
                                  CameraBatch::from(src));
  for (int i = 0; i < 4; ++i)
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 8; ++x) {
        const auto p = test::project(test::back_project({x, y}, planes.at(i + 1), ref), src);
        const bool valid = p.depth > 0 && test::inside(p.pixel, 6, 8);
        EXPECT_EQ(w.mask[0][i][y][x].item<bool>(), valid);
        for (int c = 0; c < 2; ++c) {
          const double expect = valid ? test::bilinear(feat[0][c], p.pixel.x(), p.pixel.y()) : 0.0;
          EXPECT_NEAR(w.volume[0][c][i][y][x].item<double>(), expect, 1e-9);
        }
      }
}

TEST(PlaneSweep, OutOfBoundsIsZeroAndMasked) {
  const auto ref = reference();
  const auto src = camera(intrinsics(6.0, 3.5, 2.5), {100.0, 0.0, 0.0});
  const auto w = plane_sweep_warp(torch::randn({1, 3, 6, 8}), disparity_planes(0.1, 0.1, 3).tensor(),
                                  CameraBatch::from(ref), CameraBatch::from(src));
  EXPECT_EQ(w.volume.abs().max().item<float>(), 0.0f);
  EXPECT_FALSE(w.mask.any().item<bool>());
}

TEST(RescaleDisparity, IdenticalCamerasReturnSampledMap) {
  const auto cam = CameraBatch::from(rotated_source());
  const auto d = torch::rand({1, 6, 8}, torch::kFloat64) + 0.2;
  const auto corr = project_grid(d.unsqueeze(1), cam, cam);
  const auto r = rescale_disparity(d, cam, cam, corr);
  EXPECT_TRUE(torch::equal(r.value[0][0], d[0]));
  EXPECT_TRUE(r.valid.all().item<bool>());
}

TEST(RescaleDisparity, ZeroSourceMapGivesZero) {
  const auto ref = CameraBatch::from(reference()), src = CameraBatch::from(rotated_source());
  const auto corr = project_grid(torch::full({1, 1, 6, 8}, 0.5, torch::kFloat64), ref, src);
  const auto r = rescale_disparity(torch::zeros({1, 6, 8}, torch::kFloat64), ref, src, corr);
  EXPECT_EQ(r.value.abs().max().item<double>(), 0.0);
}

TEST(RescaleDisparity, PureRotationOfFrontoParallelPlane) {
  // Plane Z = 2 in the reference frame, source rotated about the camera center: the
  // source disparity map of that plane rescaled into the reference frame must be 0.5.
  const auto ref = camera(intrinsics(6.0, 3.5, 2.5), Eigen::Vector3d::Zero());
  const auto src = camera(intrinsics(6.0, 3.5, 2.5), Eigen::Vector3d::Zero(), 0.05, {0.3, 1.0, 0.0});
  auto d_src = torch::zeros({6, 8}, torch::kFloat64);
  const Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 8; ++x) {
      const Eigen::Vector3d ray = src.cam_to_world().topLeftCorner<3, 3>() *
                                  (src.intrinsics().inverse() * Eigen::Vector3d(x, y, 1));
      const double t = 2.0 / ray.dot(normal);
      d_src[y][x] = 1.0 / test::to_camera(ray * t, src).z();
    }
  const auto rb = CameraBatch::from(ref), sb = CameraBatch::from(src);
  const auto corr = project_grid(torch::full({1, 1, 6, 8}, 0.5, torch::kFloat64), rb, sb);
  const auto r = rescale_disparity(d_src.unsqueeze(0), rb, sb, corr);
  const auto valid = r.valid[0][0];
  ASSERT_GT(valid.sum().item<int64_t>(), 20);
  // plane disparity is affine in pixel coordinates, so interpolation is exact
  EXPECT_LT((r.value[0][0] - 0.5).abs().masked_select(valid).max().item<double>(), 1e-9);
}

TEST(RescaleDisparity, MatchesPointwiseOracle) {
  const auto ref = reference(), src = rotated_source();
  torch::manual_seed(4);
  const auto d_ref = torch::rand({1, 6, 8}, torch::kFloat64) * 0.5 + 0.3;
  const auto d_src = torch::rand({1, 6, 8}, torch::kFloat64) * 0.5 + 0.3;
  const auto rb = CameraBatch::from(ref), sb = CameraBatch::from(src);
  const auto corr = project_grid(d_ref.unsqueeze(1), rb, sb);
  const auto r = rescale_disparity(d_src, rb, sb, corr);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 8; ++x) {
      const auto oracle = test::rescaled_source_disparity({x, y}, d_ref[0][y][x].item<double>(), d_src[0], ref, src);
      ASSERT_EQ(r.valid[0][0][y][x].item<bool>(), oracle.has_value()) << x << "," << y;
      if (oracle) {
        EXPECT_NEAR(r.value[0][0][y][x].item<double>(), *oracle, 1e-9);
      }
    }
}
