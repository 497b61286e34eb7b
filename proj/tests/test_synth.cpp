#include <filesystem>
#include <fstream>
#include <optional>

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <gtest/gtest.h>

#include "atvs/errors.hpp"
#include "atvs/synth/sample.hpp"
#include "atvs/synth/scene.hpp"

using namespace atvs;
using namespace atvs::synth;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("atvs_synth_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

SceneOptions small_options() {
  SceneOptions o;
  o.image_size = {24, 20};
  o.source_views = 2;
  return o;
}

// Independent ray tracer: unit-length rays, nearest surface along the ray.
std::optional<Eigen::Vector3d> trace(const SceneSpec& spec, const Eigen::Vector3d& from, const Eigen::Vector3d& to_dir) {
  const Eigen::Vector3d dir = to_dir.normalized();
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : spec.primitives) {
    double t = -1;
    if (p.kind == PrimitiveKind::kSphere) {
      const Eigen::Vector3d oc = from - p.center;
      const double b = oc.dot(dir), c = oc.squaredNorm() - p.radius * p.radius, disc = b * b - c;
      if (disc >= 0) {
        const double r = std::sqrt(disc);
        t = -b - r > 1e-9 ? -b - r : (-b + r > 1e-9 ? -b + r : -1);
      }
    } else {
      const Eigen::Vector3d n = p.axis_u.cross(p.axis_v);
      const double den = n.dot(dir);
      if (std::abs(den) > 1e-15) {
        t = n.dot(p.center - from) / den;
        const Eigen::Vector3d q = from + t * dir - p.center;
        if (t <= 1e-9 || std::abs(q.dot(p.axis_u)) > p.half_u || std::abs(q.dot(p.axis_v)) > p.half_v) t = -1;
      }
    }
    if (t > 0 && t < best) best = t;
  }
  if (!std::isfinite(best)) return std::nullopt;
  return from + best * dir;
}

Eigen::Vector3d to_cam(const geometry::CameraModel& c, const Eigen::Vector3d& x) {
  return c.world_to_cam().topLeftCorner<3, 3>() * x + c.world_to_cam().topRightCorner<3, 1>();
}

Eigen::Vector3d pixel_ray(const geometry::CameraModel& c, double x, double y) {
  const Eigen::Vector3d local = c.intrinsics().inverse() * Eigen::Vector3d(x, y, 1);
  return c.world_to_cam().topLeftCorner<3, 3>().transpose() * local;
}

Eigen::Vector3d centre(const geometry::CameraModel& c) {
  return -c.world_to_cam().topLeftCorner<3, 3>().transpose() * c.world_to_cam().topRightCorner<3, 1>();
}

}  // namespace

TEST(Generator, SameSeedSameSample) {
  const auto a = generate_random_sample(42, small_options());
  const auto b = generate_random_sample(42, small_options());
  ASSERT_EQ(a.views.size(), 3u);
  EXPECT_EQ(a.id, b.id);
  for (std::size_t v = 0; v < 3; ++v) {
    EXPECT_TRUE(torch::equal(a.views[v].image, b.views[v].image));
    EXPECT_TRUE(torch::equal(a.views[v].disparity, b.views[v].disparity));
    EXPECT_TRUE(torch::equal(a.views[v].visibility, b.views[v].visibility));
    EXPECT_TRUE(a.views[v].camera.same_as(b.views[v].camera));
  }
  const auto c = generate_random_sample(43, small_options());
  EXPECT_FALSE(torch::equal(a.views[0].image, c.views[0].image));
}

TEST(Generator, ShapesAndDisparityRange) {
  const auto opt = small_options();
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto s = generate_random_sample(seed, opt);
    EXPECT_EQ(s.source_count(), 2u);
    for (const auto& v : s.views) {
      EXPECT_EQ(v.image.sizes(), (std::vector<int64_t>{3, 20, 24}));
      EXPECT_GE(v.image.min().item<float>(), 0.0f);
      EXPECT_LE(v.image.max().item<float>(), 1.0f);
      EXPECT_TRUE(torch::equal(v.image, (v.image * 255).round() / 255));
      EXPECT_GE(v.disparity.min().item<float>(), float(opt.d_min));
      EXPECT_LE(v.disparity.max().item<float>(), float(opt.d_min + (opt.plane_count - 1) * opt.delta) * (1 + 1e-6f));
    }
  }
}

TEST(Generator, DisparityMatchesRayTracedDepth) {
  const auto opt = small_options();
  const auto spec = accepted_scene_spec(11, opt);
  const auto s = generate_scene(spec);
  for (std::size_t v = 0; v < spec.cameras.size(); ++v) {
    const auto& cam = spec.cameras[v];
    const auto disp = s.views[v].disparity.accessor<float, 2>();
    for (int y = 0; y < 20; y += 3)
      for (int x = 0; x < 24; x += 3) {
        const auto hit = trace(spec, centre(cam), pixel_ray(cam, x, y));
        ASSERT_TRUE(hit.has_value());
        EXPECT_NEAR(disp[y][x], 1.0 / to_cam(cam, *hit).z(), 1e-6) << v << " " << x << " " << y;
      }
  }
}

TEST(Generator, VisibilityMatchesOracle) {
  const auto opt = small_options();
  const auto spec = accepted_scene_spec(17, opt);
  const auto s = generate_scene(spec);
  int checked = 0, visible = 0;
  for (std::size_t v = 0; v < spec.cameras.size(); ++v) {
    const auto& cam = spec.cameras[v];
    const auto vis = s.views[v].visibility.accessor<bool, 2>();
    for (int y = 0; y < 20; ++y)
      for (int x = 0; x < 24; ++x) {
        const Eigen::Vector3d p = *trace(spec, centre(cam), pixel_ray(cam, x, y));
        bool seen = true, clear_cut = true;
        for (std::size_t o = 0; o < spec.cameras.size() && seen; ++o) {
          if (o == v) continue;
          const auto& other = spec.cameras[o];
          const Eigen::Vector3d pc = to_cam(other, p);
          if (pc.z() <= 0) {
            seen = false;
            break;
          }
          const Eigen::Vector3d uv = other.intrinsics() * pc / pc.z();
          if (uv.x() < 0 || uv.y() < 0 || uv.x() > 23 || uv.y() > 19) {
            seen = false;
            clear_cut = uv.x() < -1e-6 || uv.y() < -1e-6 || uv.x() > 23 + 1e-6 || uv.y() > 19 + 1e-6;
            break;
          }
          const auto q = trace(spec, centre(other), p - centre(other));
          const double gap = q ? (*q - p).norm() / (p - centre(other)).norm() : 1.0;
          if (gap > 1e-7) seen = false;
          if (gap > 1e-9 && gap < 1e-4) clear_cut = false;
        }
        if (!clear_cut) continue;
        ++checked;
        visible += seen;
        EXPECT_EQ(vis[y][x], seen) << "view " << v << " pixel " << x << "," << y;
      }
  }
  EXPECT_GT(checked, 1000);
  EXPECT_GT(visible, 100);
  EXPECT_LT(visible, checked);
}

TEST(Generator, OutOfRangePrimitiveIsNamed) {
  auto spec = accepted_scene_spec(5, small_options());
  Primitive near;
  near.kind = PrimitiveKind::kSphere;
  near.name = "too_close";
  near.center = Eigen::Vector3d(0, 0, 1.0);
  near.radius = 0.2;
  spec.primitives.push_back(near);
  try {
    generate_scene(spec);
    FAIL() << "expected SceneError";
  } catch (const SceneError& e) {
    EXPECT_EQ(e.primitive(), "too_close");
  }
}

TEST(Scene, DistancesAndRays) {
  SceneSpec spec;
  Primitive ball;
  ball.kind = PrimitiveKind::kSphere;
  ball.center = {0, 0, 5};
  ball.radius = 1;
  Primitive wall;
  wall.center = {0, 0, 10};
  wall.half_u = wall.half_v = 2;
  spec.primitives = {ball, wall};
  EXPECT_NEAR(distance_to_scene(spec, {0, 0, 0}), 4.0, 1e-12);
  EXPECT_NEAR(distance_to_scene(spec, {0, 0, 9.5}), 0.5, 1e-12);
  EXPECT_NEAR(distance_to_scene(spec, {3, 0, 12}), std::sqrt(5.0), 1e-12);
  const auto h = cast_ray(spec, {0, 0, 0}, {0, 0, 1});
  EXPECT_EQ(h.primitive, 0);
  EXPECT_NEAR(h.t, 4.0, 1e-12);
  const auto w = cast_ray(spec, {1.5, 0, 0}, {0, 0, 1});
  EXPECT_EQ(w.primitive, 1);
  EXPECT_NEAR(w.t, 10.0, 1e-12);
  EXPECT_EQ(cast_ray(spec, {0, 0, 0}, {0, 0, -1}).primitive, -1);
}

TEST(Pfm, RoundTripAndLayout) {
  const auto dir = scratch("pfm");
  auto map = torch::rand({5, 7});
  map[0][0] = std::numeric_limits<float>::infinity();
  write_pfm(dir / "m.pfm", map);
  EXPECT_TRUE(torch::equal(read_pfm(dir / "m.pfm"), map));

  std::ifstream in(dir / "m.pfm", std::ios::binary);
  std::string magic, dims, scale;
  std::getline(in, magic);
  std::getline(in, dims);
  std::getline(in, scale);
  EXPECT_EQ(magic, "Pf");
  EXPECT_EQ(dims, "7 5");
  EXPECT_LT(std::stod(scale), 0.0);
  float first = 0;
  in.read(reinterpret_cast<char*>(&first), sizeof(float));
  EXPECT_EQ(first, map[4][0].item<float>());  // bottom row first
}

TEST(Pfm, BigEndianAndMalformedFiles) {
  const auto dir = scratch("pfm_be");
  {
    std::ofstream out(dir / "be.pfm", std::ios::binary);
    out << "Pf\n2 1\n1.0\n";
    for (float v : {1.5f, -2.0f}) {
      auto bits = std::bit_cast<std::uint32_t>(v);
      bits = __builtin_bswap32(bits);
      out.write(reinterpret_cast<const char*>(&bits), 4);
    }
  }
  const auto m = read_pfm(dir / "be.pfm");
  EXPECT_EQ(m[0][0].item<float>(), 1.5f);
  EXPECT_EQ(m[0][1].item<float>(), -2.0f);
  {
    std::ofstream out(dir / "short.pfm", std::ios::binary);
    out << "Pf\n4 4\n-1.0\nabc";
  }
  EXPECT_THROW(read_pfm(dir / "short.pfm"), ParseError);
  {
    std::ofstream out(dir / "magic.pfm", std::ios::binary);
    out << "PF\n1 1\n-1.0\n1234";
  }
  EXPECT_THROW(read_pfm(dir / "magic.pfm"), ParseError);
}

TEST(Dataset, RoundTripThroughFiles) {
  const auto dir = scratch("dataset");
  const auto names = generate_dataset(dir, 99, 2, small_options());
  ASSERT_EQ(names.size(), 2u);
  EXPECT_EQ(read_index(dir), names);
  const auto data = read_dataset(dir);
  ASSERT_EQ(data.size(), 2u);
  EXPECT_TRUE(std::filesystem::exists(dir / names[0] / "images" / (view_name(0) + ".png")));
  EXPECT_TRUE(std::filesystem::exists(dir / names[0] / "cams" / (view_name(2) + ".txt")));
  for (const auto& s : data)
    for (const auto& v : s.views) EXPECT_EQ(v.image.sizes(), (std::vector<int64_t>{3, 20, 24}));

  const auto direct = read_sample(dir / names[1]);
  EXPECT_TRUE(torch::equal(direct.views[1].disparity, data[1].views[1].disparity));
  EXPECT_TRUE(torch::equal(direct.views[2].visibility, data[1].views[2].visibility));

  const auto again = scratch("dataset_again");
  generate_dataset(again, 99, 2, small_options());
  EXPECT_TRUE(torch::equal(read_dataset(again)[0].views[0].image, data[0].views[0].image));
}

TEST(Dataset, SampleWrittenAndReadBack) {
  const auto dir = scratch("sample");
  const auto s = generate_random_sample(8, small_options());
  write_sample(s, dir / "s");
  const auto r = read_sample(dir / "s");
  ASSERT_EQ(r.views.size(), s.views.size());
  for (std::size_t v = 0; v < s.views.size(); ++v) {
    EXPECT_TRUE(torch::equal(r.views[v].image, s.views[v].image));
    EXPECT_TRUE(torch::equal(r.views[v].disparity, s.views[v].disparity));
    EXPECT_TRUE(torch::equal(r.views[v].visibility, s.views[v].visibility));
    EXPECT_LT((r.views[v].camera.world_to_cam() - s.views[v].camera.world_to_cam()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Dataset, MissingCameraIsAParseErrorNamingTheView) {
  const auto dir = scratch("missing");
  write_sample(generate_random_sample(8, small_options()), dir / "s");
  std::filesystem::remove(dir / "s" / "cams" / (view_name(1) + ".txt"));
  try {
    read_sample(dir / "s");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find(view_name(1)), std::string::npos);
  }
}
