#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <torch/types.h>

#include "atvs/geometry/camera.hpp"

namespace atvs::synth {

/// One view of a sample. Images hold 8-bit values scaled to [0,1].
struct View {
  torch::Tensor image;       // [3,H,W] float32
  geometry::CameraModel camera;
  torch::Tensor disparity;   // [H,W] float32, <= 0 or non-finite where invalid
  torch::Tensor visibility;  // [H,W] bool, surface point seen by every other view
};

/// A reference view (views[0]) and its source views.
struct MVSample {
  std::string id;
  std::vector<View> views;

  std::size_t source_count() const { return views.empty() ? 0 : views.size() - 1; }
};

/// Grayscale PFM ("Pf"), written little-endian (negative scale), rows bottom to top.
void write_pfm(const std::filesystem::path& path, const torch::Tensor& map);
/// Reads either endianness. Throws ParseError on a malformed header or short payload.
torch::Tensor read_pfm(const std::filesystem::path& path);

/// 8-bit RGB PNG from a [3,H,W] image in [0,1]; values are rounded to the nearest level.
void write_png(const std::filesystem::path& path, const torch::Tensor& image);
torch::Tensor read_png(const std::filesystem::path& path);

/// Layout: images/VIEW.png, cams/VIEW.txt, disp/VIEW.pfm, masks/VIEW.png with VIEW a
/// zero-padded view index and view 000 the reference.
void write_sample(const MVSample& sample, const std::filesystem::path& directory);
/// Throws ParseError naming the offending view when a file is missing or malformed.
MVSample read_sample(const std::filesystem::path& directory);

/// Index file listing one sample directory (relative to the root) per line.
inline constexpr const char* kIndexFile = "index.txt";
void write_index(const std::filesystem::path& root, const std::vector<std::string>& sample_dirs);
std::vector<std::string> read_index(const std::filesystem::path& root);

/// All samples of a dataset root, in index order.
std::vector<MVSample> read_dataset(const std::filesystem::path& root);

std::string view_name(std::size_t index);

}  // namespace atvs::synth
