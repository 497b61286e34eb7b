#include "atvs/synth/sample.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <opencv2/imgcodecs.hpp>
#include <torch/torch.h>

#include "atvs/errors.hpp"

namespace atvs::synth {

namespace fs = std::filesystem;

std::string view_name(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%03zu", index);
  return buf;
}

void write_pfm(const fs::path& path, const torch::Tensor& map) {
  const auto m = map.detach().to(torch::kCPU, torch::kFloat32).contiguous();
  if (m.dim() != 2) throw std::invalid_argument("PFM maps must be [H,W]");
  const auto h = m.size(0), w = m.size(1);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "Pf\n" << w << " " << h << "\n-1.0\n";
  const float* data = m.data_ptr<float>();
  for (int64_t r = h - 1; r >= 0; --r)
    out.write(reinterpret_cast<const char*>(data + r * w), static_cast<std::streamsize>(w * sizeof(float)));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

torch::Tensor read_pfm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path, 0, "cannot open PFM file");
  std::string magic;
  if (!std::getline(in, magic) || magic != "Pf")
    throw ParseError(path, 1, "expected grayscale PFM header 'Pf'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path, 2, "missing dimensions");
  std::istringstream dims(line);
  int64_t w = 0, h = 0;
  if (!(dims >> w >> h) || w <= 0 || h <= 0) throw ParseError(path, 2, "bad dimensions '" + line + "'");
  if (!std::getline(in, line)) throw ParseError(path, 3, "missing scale");
  double scale = 0.0;
  try {
    scale = std::stod(line);
  } catch (const std::exception&) {
    throw ParseError(path, 3, "bad scale '" + line + "'");
  }
  if (scale == 0.0) throw ParseError(path, 3, "scale must be non-zero");
  const bool little = scale < 0.0;

  auto map = torch::empty({h, w}, torch::kFloat32);
  float* data = map.data_ptr<float>();
  for (int64_t r = h - 1; r >= 0; --r) {
    in.read(reinterpret_cast<char*>(data + r * w), static_cast<std::streamsize>(w * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(w * sizeof(float)))
      throw ParseError(path, 0, "truncated PFM payload");
  }
  if (little != (std::endian::native == std::endian::little)) {
    auto* words = reinterpret_cast<std::uint32_t*>(data);
    for (int64_t i = 0; i < h * w; ++i) words[i] = __builtin_bswap32(words[i]);
  }
  return map;
}

void write_png(const fs::path& path, const torch::Tensor& image) {
  const auto img = image.detach().to(torch::kCPU, torch::kFloat32);
  if (img.dim() != 3 || img.size(0) != 3) throw std::invalid_argument("PNG images must be [3,H,W]");
  // RGB -> BGR for OpenCV, HWC layout.
  auto bytes = (img.flip(0).permute({1, 2, 0}).clamp(0, 1) * 255.0f).round().to(torch::kUInt8).contiguous();
  cv::Mat mat(static_cast<int>(bytes.size(0)), static_cast<int>(bytes.size(1)), CV_8UC3, bytes.data_ptr());
  if (!cv::imwrite(path.string(), mat)) throw std::runtime_error("cannot write " + path.string());
}

torch::Tensor read_png(const fs::path& path) {
  if (!fs::exists(path)) throw ParseError(path, 0, "missing image file");
  cv::Mat mat = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (mat.empty()) throw ParseError(path, 0, "unreadable image");
  auto t = torch::from_blob(mat.data, {mat.rows, mat.cols, 3}, torch::kUInt8).clone();
  return t.permute({2, 0, 1}).flip(0).to(torch::kFloat32).div(255.0f).contiguous();
}

namespace {

torch::Tensor read_mask(const fs::path& path) {
  if (!fs::exists(path)) throw ParseError(path, 0, "missing mask file");
  cv::Mat mat = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (mat.empty()) throw ParseError(path, 0, "unreadable mask");
  return torch::from_blob(mat.data, {mat.rows, mat.cols}, torch::kUInt8).gt(127).clone();
}

void write_mask(const fs::path& path, const torch::Tensor& mask) {
  auto bytes = (mask.to(torch::kCPU).to(torch::kUInt8) * 255).contiguous();
  cv::Mat mat(static_cast<int>(bytes.size(0)), static_cast<int>(bytes.size(1)), CV_8UC1, bytes.data_ptr());
  if (!cv::imwrite(path.string(), mat)) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace

void write_sample(const MVSample& sample, const fs::path& directory) {
  for (const char* sub : {"images", "cams", "disp", "masks"}) fs::create_directories(directory / sub);
  for (std::size_t v = 0; v < sample.views.size(); ++v) {
    const auto& view = sample.views[v];
    const auto name = view_name(v);
    write_png(directory / "images" / (name + ".png"), view.image);
    geometry::write_camera(directory / "cams" / (name + ".txt"), view.camera);
    write_pfm(directory / "disp" / (name + ".pfm"), view.disparity);
    write_mask(directory / "masks" / (name + ".png"), view.visibility);
  }
}

MVSample read_sample(const fs::path& directory) {
  MVSample sample;
  sample.id = directory.filename().string();
  if (sample.id.empty()) sample.id = directory.parent_path().filename().string();
  for (std::size_t v = 0;; ++v) {
    const auto name = view_name(v);
    const auto image_path = directory / "images" / (name + ".png");
    if (!fs::exists(image_path)) {
      if (v == 0) throw ParseError(image_path, 0, "sample has no reference view " + name);
      break;
    }
    View view;
    view.image = read_png(image_path);
    const geometry::ImageSize size{static_cast<int>(view.image.size(2)),
                                   static_cast<int>(view.image.size(1))};
    const auto cam_path = directory / "cams" / (name + ".txt");
    if (!fs::exists(cam_path)) throw ParseError(cam_path, 0, "missing camera for view " + name);
    view.camera = geometry::read_camera(cam_path, size);
    const auto disp_path = directory / "disp" / (name + ".pfm");
    if (!fs::exists(disp_path)) throw ParseError(disp_path, 0, "missing disparity for view " + name);
    view.disparity = read_pfm(disp_path);
    view.visibility = read_mask(directory / "masks" / (name + ".png"));
    if (view.disparity.size(0) != size.height || view.disparity.size(1) != size.width)
      throw ParseError(disp_path, 0, "disparity size differs from image of view " + name);
    sample.views.push_back(std::move(view));
  }
  return sample;
}

void write_index(const fs::path& root, const std::vector<std::string>& sample_dirs) {
  fs::create_directories(root);
  std::ofstream out(root / kIndexFile, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write index in " + root.string());
  for (const auto& d : sample_dirs) out << d << "\n";
}

std::vector<std::string> read_index(const fs::path& root) {
  const auto path = root / kIndexFile;
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "missing dataset index");
  std::vector<std::string> dirs;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
    if (!line.empty()) dirs.push_back(line);
  }
  return dirs;
}

std::vector<MVSample> read_dataset(const fs::path& root) {
  std::vector<MVSample> samples;
  for (const auto& d : read_index(root)) samples.push_back(read_sample(root / d));
  return samples;
}

}  // namespace atvs::synth
