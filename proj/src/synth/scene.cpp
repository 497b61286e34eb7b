#include "atvs/synth/scene.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Geometry>
#include <torch/torch.h>

namespace atvs::synth {

namespace {

constexpr double kHitEpsilon = 1e-9;
constexpr double kVisibilityTolerance = 1e-7;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double lattice_value(std::int64_t x, std::int64_t y, std::int64_t z, std::uint64_t seed) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(x));
  h = splitmix64(h ^ static_cast<std::uint64_t>(y));
  h = splitmix64(h ^ static_cast<std::uint64_t>(z));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

double value_noise(const Eigen::Vector3d& p, std::uint64_t seed) {
  const Eigen::Vector3d f = p.array().floor();
  const Eigen::Vector3d r = p - f;
  const auto ix = static_cast<std::int64_t>(f.x());
  const auto iy = static_cast<std::int64_t>(f.y());
  const auto iz = static_cast<std::int64_t>(f.z());
  const double sx = smooth(r.x()), sy = smooth(r.y()), sz = smooth(r.z());
  double acc = 0.0;
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        const double w = (dx ? sx : 1 - sx) * (dy ? sy : 1 - sy) * (dz ? sz : 1 - sz);
        acc += w * lattice_value(ix + dx, iy + dy, iz + dz, seed);
      }
  return acc;
}

const Eigen::Vector3d& light_direction() {
  static const Eigen::Vector3d l = Eigen::Vector3d(-0.3, -0.5, -1.0).normalized();
  return l;
}

Eigen::Vector3d ray_direction(const geometry::CameraModel& cam, double x, double y) {
  const Eigen::Vector3d local = cam.intrinsics().inverse() * Eigen::Vector3d(x, y, 1.0);
  // camera-frame z component is 1, so the ray parameter equals the Z-depth
  return cam.world_to_cam().topLeftCorner<3, 3>().transpose() * local;
}

}  // namespace

Eigen::Vector3d Texture::albedo(const Eigen::Vector3d& point) const {
  const Eigen::Vector3d p = point / scale;
  double mix = 0.0;
  switch (kind) {
    case TextureKind::kFlat:
      return color_a;
    case TextureKind::kChecker: {
      const auto parity = static_cast<std::int64_t>(std::floor(p.x())) +
                          static_cast<std::int64_t>(std::floor(p.y())) +
                          static_cast<std::int64_t>(std::floor(p.z()));
      mix = (parity % 2 == 0) ? 0.0 : 1.0;
      break;
    }
    case TextureKind::kNoise:
      mix = 0.65 * value_noise(p, seed) + 0.35 * value_noise(2.0 * p, seed + 1);
      break;
  }
  return (1.0 - mix) * color_a + mix * color_b;
}

double Primitive::intersect(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) const {
  if (kind == PrimitiveKind::kRectangle) {
    const Eigen::Vector3d n = normal();
    const double denom = n.dot(dir);
    if (std::abs(denom) < 1e-14) return -1.0;
    const double t = n.dot(center - origin) / denom;
    if (t <= kHitEpsilon) return -1.0;
    const Eigen::Vector3d local = origin + t * dir - center;
    if (std::abs(local.dot(axis_u)) > half_u || std::abs(local.dot(axis_v)) > half_v) return -1.0;
    return t;
  }
  const Eigen::Vector3d oc = origin - center;
  const double a = dir.squaredNorm();
  const double b = oc.dot(dir);
  const double c = oc.squaredNorm() - radius * radius;
  const double disc = b * b - a * c;
  if (disc < 0.0) return -1.0;
  const double s = std::sqrt(disc);
  const double t0 = (-b - s) / a;
  if (t0 > kHitEpsilon) return t0;
  const double t1 = (-b + s) / a;
  return t1 > kHitEpsilon ? t1 : -1.0;
}

Eigen::Vector3d Primitive::surface_normal(const Eigen::Vector3d& point) const {
  if (kind == PrimitiveKind::kRectangle) return normal();
  return (point - center).normalized();
}

double Primitive::distance(const Eigen::Vector3d& point) const {
  if (kind == PrimitiveKind::kSphere) return std::abs((point - center).norm() - radius);
  const Eigen::Vector3d local = point - center;
  const double du = std::max(0.0, std::abs(local.dot(axis_u)) - half_u);
  const double dv = std::max(0.0, std::abs(local.dot(axis_v)) - half_v);
  const double dn = local.dot(normal());
  return std::sqrt(du * du + dv * dv + dn * dn);
}

Hit cast_ray(const SceneSpec& spec, const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) {
  Hit best;
  for (std::size_t i = 0; i < spec.primitives.size(); ++i) {
    const double t = spec.primitives[i].intersect(origin, dir);
    if (t > 0.0 && (best.primitive < 0 || t < best.t)) {
      best.t = t;
      best.primitive = static_cast<int>(i);
    }
  }
  return best;
}

double distance_to_scene(const SceneSpec& spec, const Eigen::Vector3d& point) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : spec.primitives) best = std::min(best, p.distance(point));
  return best;
}

Eigen::Matrix3d default_intrinsics(geometry::ImageSize size) {
  Eigen::Matrix3d k = Eigen::Matrix3d::Identity();
  const double f = 0.875 * size.width;
  k(0, 0) = f;
  k(1, 1) = f;
  k(0, 2) = (size.width - 1) / 2.0;
  k(1, 2) = (size.height - 1) / 2.0;
  return k;
}

geometry::CameraModel look_at_camera(const Eigen::Vector3d& center, const Eigen::Vector3d& target,
                                     const Eigen::Matrix3d& intrinsics, geometry::ImageSize size) {
  const Eigen::Vector3d z = (target - center).normalized();
  const Eigen::Vector3d x = Eigen::Vector3d::UnitY().cross(z).normalized();
  const Eigen::Vector3d y = z.cross(x);
  Eigen::Matrix4d pose = Eigen::Matrix4d::Identity();
  pose.block<1, 3>(0, 0) = x.transpose();
  pose.block<1, 3>(1, 0) = y.transpose();
  pose.block<1, 3>(2, 0) = z.transpose();
  pose.block<3, 1>(0, 3) = -(pose.topLeftCorner<3, 3>() * center);
  return geometry::CameraModel(intrinsics, pose, size);
}

SceneSpec random_scene_spec(std::uint64_t seed, const SceneOptions& options) {
  std::mt19937_64 rng(seed);
  auto uniform = [&rng](double lo, double hi) {
    return lo + (hi - lo) * std::generate_canonical<double, 53>(rng);
  };
  auto integer = [&rng](int lo, int hi) {
    return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
  };
  auto random_color = [&] {
    return Eigen::Vector3d(uniform(0.05, 1.0), uniform(0.05, 1.0), uniform(0.05, 1.0));
  };
  auto random_texture = [&](bool allow_flat) {
    Texture t;
    const double roll = uniform(0.0, 1.0);
    if (allow_flat && roll < options.flat_texture_probability)
      t.kind = TextureKind::kFlat;
    else
      t.kind = roll < 0.55 ? TextureKind::kNoise : TextureKind::kChecker;
    t.color_a = random_color();
    t.color_b = random_color();
    t.scale = t.kind == TextureKind::kNoise ? uniform(0.08, 0.2) : uniform(0.12, 0.35);
    t.seed = rng();
    return t;
  };

  SceneSpec spec;
  spec.seed = seed;
  spec.image_size = options.image_size;
  spec.d_min = options.d_min;
  spec.delta = options.delta;
  spec.plane_count = options.plane_count;

  Primitive background;
  background.name = "background";
  background.center = Eigen::Vector3d(0.0, 0.0, uniform(5.0, 5.8));
  background.half_u = background.half_v = 12.0;
  background.texture = random_texture(false);
  spec.primitives.push_back(background);

  const int rectangles = integer(1, 3);
  for (int i = 0; i < rectangles; ++i) {
    Primitive r;
    r.name = "rectangle#" + std::to_string(i);
    r.center = Eigen::Vector3d(uniform(-1.0, 1.0), uniform(-0.8, 0.8), uniform(2.8, 4.3));
    const Eigen::Matrix3d rot =
        (Eigen::AngleAxisd(uniform(-0.5, 0.5), Eigen::Vector3d::UnitX()) *
         Eigen::AngleAxisd(uniform(-0.5, 0.5), Eigen::Vector3d::UnitY()) *
         Eigen::AngleAxisd(uniform(0.0, std::numbers::pi), Eigen::Vector3d::UnitZ()))
            .toRotationMatrix();
    r.axis_u = rot.col(0);
    r.axis_v = rot.col(1);
    r.half_u = uniform(0.35, 0.9);
    r.half_v = uniform(0.35, 0.9);
    r.texture = random_texture(true);
    spec.primitives.push_back(r);
  }
  const int spheres = integer(0, 2);
  for (int i = 0; i < spheres; ++i) {
    Primitive s;
    s.kind = PrimitiveKind::kSphere;
    s.name = "sphere#" + std::to_string(i);
    s.center = Eigen::Vector3d(uniform(-1.0, 1.0), uniform(-0.8, 0.8), uniform(3.0, 4.3));
    s.radius = uniform(0.3, 0.6);
    s.texture = random_texture(true);
    spec.primitives.push_back(s);
  }

  const auto k = default_intrinsics(options.image_size);
  const Eigen::Vector3d target(0.0, 0.0, 4.0);
  spec.cameras.push_back(look_at_camera(Eigen::Vector3d::Zero(), target, k, options.image_size));
  for (int n = 0; n < options.source_views; ++n) {
    const double phi = uniform(0.0, 2.0 * std::numbers::pi);
    const double baseline = uniform(options.min_baseline, options.max_baseline);
    const Eigen::Vector3d dir =
        Eigen::Vector3d(std::cos(phi), 0.6 * std::sin(phi), uniform(-0.15, 0.15)).normalized();
    const Eigen::Vector3d jitter(uniform(-0.1, 0.1), uniform(-0.1, 0.1), 0.0);
    spec.cameras.push_back(look_at_camera(baseline * dir, target + jitter, k, options.image_size));
  }
  return spec;
}

MVSample generate_scene(const SceneSpec& spec) {
  if (spec.cameras.empty()) throw std::invalid_argument("scene has no cameras");
  const auto planes = spec.planes();
  // small slack for float rounding at the range ends
  const double lo = planes.lowest() * (1.0 - 1e-12);
  const double hi = planes.highest() * (1.0 + 1e-12);
  const int w = spec.image_size.width;
  const int h = spec.image_size.height;

  MVSample sample;
  sample.id = "scene_" + std::to_string(spec.seed);
  std::vector<std::vector<double>> depth(spec.cameras.size());
  for (std::size_t v = 0; v < spec.cameras.size(); ++v) {
    const auto& cam = spec.cameras[v];
    const Eigen::Vector3d origin = cam.center();
    auto rgb = torch::empty({3, h, w}, torch::kUInt8);
    auto disp = torch::empty({h, w}, torch::kFloat32);
    auto rgb_a = rgb.accessor<std::uint8_t, 3>();
    auto disp_a = disp.accessor<float, 2>();
    depth[v].resize(static_cast<std::size_t>(w * h));
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const Hit hit = cast_ray(spec, origin, ray_direction(cam, x, y));
        if (hit.primitive < 0)
          throw SceneError("<none>", "view " + std::to_string(v) + " pixel (" + std::to_string(x) +
                                         ", " + std::to_string(y) + ") sees no primitive");
        const double d = 1.0 / hit.t;
        if (d < lo || d > hi)
          throw SceneError(spec.primitives[hit.primitive].name,
                           "disparity " + std::to_string(d) + " in view " + std::to_string(v) +
                               " outside [" + std::to_string(planes.lowest()) + ", " +
                               std::to_string(planes.highest()) + "]");
        depth[v][static_cast<std::size_t>(y * w + x)] = hit.t;
        disp_a[y][x] = static_cast<float>(std::clamp(d, planes.lowest(), planes.highest()));

        Eigen::Vector3d color = Eigen::Vector3d::Zero();
        for (double oy : {-0.25, 0.25})
          for (double ox : {-0.25, 0.25}) {
            const Eigen::Vector3d dir = ray_direction(cam, x + ox, y + oy);
            const Hit s = cast_ray(spec, origin, dir);
            if (s.primitive < 0) continue;
            const auto& prim = spec.primitives[s.primitive];
            const Eigen::Vector3d p = origin + s.t * dir;
            const double shade = 0.3 + 0.7 * std::abs(prim.surface_normal(p).dot(light_direction()));
            color += 0.25 * shade * prim.texture.albedo(p);
          }
        for (int c = 0; c < 3; ++c)
          rgb_a[c][y][x] = static_cast<std::uint8_t>(std::lround(std::clamp(color[c], 0.0, 1.0) * 255.0));
      }
    }
    View view;
    view.image = rgb.to(torch::kFloat32).div(255.0f);
    view.camera = cam;
    view.disparity = disp;
    sample.views.push_back(std::move(view));
  }

  // Visibility of each view's surface point in every other view.
  for (std::size_t v = 0; v < spec.cameras.size(); ++v) {
    const auto& cam = spec.cameras[v];
    const Eigen::Vector3d origin = cam.center();
    auto vis = torch::ones({h, w}, torch::kBool);
    auto vis_a = vis.accessor<bool, 2>();
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double t = depth[v][static_cast<std::size_t>(y * w + x)];
        const Eigen::Vector3d point = origin + t * ray_direction(cam, x, y);
        for (std::size_t o = 0; o < spec.cameras.size() && vis_a[y][x]; ++o) {
          if (o == v) continue;
          const auto& other = spec.cameras[o];
          const Eigen::Vector3d pc =
              other.world_to_cam().topLeftCorner<3, 3>() * point + other.world_to_cam().block<3, 1>(0, 3);
          if (pc.z() <= 0.0) {
            vis_a[y][x] = false;
            break;
          }
          const Eigen::Vector3d uvw = other.intrinsics() * pc;
          const double px = uvw.x() / uvw.z(), py = uvw.y() / uvw.z();
          if (px < 0.0 || py < 0.0 || px > w - 1 || py > h - 1) {
            vis_a[y][x] = false;
            break;
          }
          const Hit hit = cast_ray(spec, other.center(), ray_direction(other, px, py));
          if (hit.primitive < 0 || std::abs(hit.t - pc.z()) > kVisibilityTolerance * pc.z())
            vis_a[y][x] = false;
        }
      }
    }
    sample.views[v].visibility = vis;
  }
  return sample;
}

SceneSpec accepted_scene_spec(std::uint64_t seed, const SceneOptions& options) {
  constexpr int kAttempts = 64;
  std::string last;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    auto spec = random_scene_spec(splitmix64(seed * 131 + static_cast<std::uint64_t>(attempt)), options);
    spec.seed = seed;
    try {
      generate_scene(spec);
      return spec;
    } catch (const SceneError& e) {
      last = e.what();
    }
  }
  throw std::runtime_error("no valid scene for seed " + std::to_string(seed) + " (" + last + ")");
}

MVSample generate_random_sample(std::uint64_t seed, const SceneOptions& options) {
  auto sample = generate_scene(accepted_scene_spec(seed, options));
  sample.id = "scene_" + std::to_string(seed);
  return sample;
}

std::vector<std::string> generate_dataset(const std::filesystem::path& root, std::uint64_t seed,
                                          int count, const SceneOptions& options) {
  if (count < 0) throw std::invalid_argument("sample count must be non-negative");
  std::vector<std::string> dirs;
  for (int i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "sample_%04d", i);
    auto sample = generate_random_sample(splitmix64(seed) + static_cast<std::uint64_t>(i), options);
    sample.id = name;
    write_sample(sample, root / name);
    dirs.emplace_back(name);
  }
  write_index(root, dirs);
  return dirs;
}

}  // namespace atvs::synth
