#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "atvs/geometry/camera.hpp"
#include "atvs/geometry/planes.hpp"
#include "atvs/synth/sample.hpp"

namespace atvs::synth {

enum class TextureKind { kChecker, kNoise, kFlat };

/// Procedural 3-D texture evaluated at world points.
struct Texture {
  TextureKind kind = TextureKind::kChecker;
  Eigen::Vector3d color_a{0.9, 0.9, 0.9};
  Eigen::Vector3d color_b{0.1, 0.1, 0.1};
  double scale = 0.25;       // checker cell / noise lattice size in scene units
  std::uint64_t seed = 0;    // noise lattice hash seed

  Eigen::Vector3d albedo(const Eigen::Vector3d& point) const;
};

enum class PrimitiveKind { kRectangle, kSphere };

/// A textured rectangle (center, orthonormal in-plane axes, half extents) or sphere.
struct Primitive {
  PrimitiveKind kind = PrimitiveKind::kRectangle;
  std::string name;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d axis_u = Eigen::Vector3d::UnitX();
  Eigen::Vector3d axis_v = Eigen::Vector3d::UnitY();
  double half_u = 1.0;
  double half_v = 1.0;
  double radius = 1.0;
  Texture texture;

  Eigen::Vector3d normal() const { return axis_u.cross(axis_v).normalized(); }
  /// Smallest ray parameter t > eps with origin + t * dir on the surface, or -1.
  double intersect(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) const;
  Eigen::Vector3d surface_normal(const Eigen::Vector3d& point) const;
  /// Euclidean distance from `point` to the surface.
  double distance(const Eigen::Vector3d& point) const;
};

struct SceneSpec {
  std::uint64_t seed = 0;
  std::vector<Primitive> primitives;
  std::vector<geometry::CameraModel> cameras;  // [0] is the reference
  geometry::ImageSize image_size{64, 64};
  double d_min = 0.1;
  double delta = 0.025;
  int plane_count = 16;

  geometry::DisparityPlanes planes() const { return {d_min, delta, plane_count}; }
};

/// Raised when a primitive produces a disparity outside the hypothesis range.
class SceneError : public std::runtime_error {
 public:
  SceneError(std::string primitive, const std::string& what)
      : std::runtime_error(primitive + ": " + what), primitive_(std::move(primitive)) {}
  const std::string& primitive() const noexcept { return primitive_; }

 private:
  std::string primitive_;
};

struct SceneOptions {
  geometry::ImageSize image_size{64, 64};
  int source_views = 5;
  double min_baseline = 0.3;
  double max_baseline = 0.9;
  double d_min = 0.1;
  double delta = 0.025;
  int plane_count = 16;
  double flat_texture_probability = 0.1;
};

/// Camera at `center` looking at `target`, y axis pointing down (towards +y of the world).
geometry::CameraModel look_at_camera(const Eigen::Vector3d& center, const Eigen::Vector3d& target,
                                     const Eigen::Matrix3d& intrinsics, geometry::ImageSize size);

/// Pinhole intrinsics of the generator for a given image size.
Eigen::Matrix3d default_intrinsics(geometry::ImageSize size);

/// Random background plane, objects and camera rig. The spec is a pure function of
/// (seed, options) but may still be rejected by generate_scene.
SceneSpec random_scene_spec(std::uint64_t seed, const SceneOptions& options);

/// Ray-casts every view: 2x2 supersampled Lambertian color, exact center-ray
/// disparity, and visibility in every other view. Throws SceneError naming the
/// primitive when a disparity leaves the hypothesis range or a pixel sees nothing.
MVSample generate_scene(const SceneSpec& spec);

/// First accepted scene for `seed` (retries derived seeds deterministically).
SceneSpec accepted_scene_spec(std::uint64_t seed, const SceneOptions& options);
MVSample generate_random_sample(std::uint64_t seed, const SceneOptions& options);

/// Distance from a world point to the nearest primitive surface.
double distance_to_scene(const SceneSpec& spec, const Eigen::Vector3d& point);

/// Closest hit along a ray: ray parameter and primitive index (-1 when nothing is hit).
struct Hit {
  double t = -1.0;
  int primitive = -1;
};
Hit cast_ray(const SceneSpec& spec, const Eigen::Vector3d& origin, const Eigen::Vector3d& dir);

/// Writes `count` samples for seeds derived from `seed` under `root` plus the index.
/// Returns the sample directory names.
std::vector<std::string> generate_dataset(const std::filesystem::path& root, std::uint64_t seed,
                                          int count, const SceneOptions& options);

}  // namespace atvs::synth
