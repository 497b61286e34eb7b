#include "atvs/geometry/warp.hpp"

#include <stdexcept>

#include <torch/torch.h>

namespace atvs::geometry {

namespace {

// Per-batch "cameras are bitwise identical" flags, [B] bool.
torch::Tensor identical(const CameraBatch& a, const CameraBatch& b) {
  const auto k_eq = (a.intrinsics == b.intrinsics).flatten(1).all(1);
  const auto t_eq = (a.world_to_cam == b.world_to_cam).flatten(1).all(1);
  return k_eq & t_eq;
}

torch::Tensor rigid_inverse(const torch::Tensor& t) {
  const auto r = t.slice(1, 0, 3).slice(2, 0, 3);
  const auto trans = t.slice(1, 0, 3).slice(2, 3, 4);
  auto inv = torch::zeros_like(t);
  const auto rt = r.transpose(1, 2);
  inv.slice(1, 0, 3).slice(2, 0, 3).copy_(rt);
  inv.slice(1, 0, 3).slice(2, 3, 4).copy_(-torch::bmm(rt, trans));
  inv.select(1, 3).select(1, 3).fill_(1.0);
  return inv;
}

torch::Tensor pixel_grid(int64_t height, int64_t width, const torch::TensorOptions& opts) {
  const auto ys = torch::arange(height, opts);
  const auto xs = torch::arange(width, opts);
  const auto mesh = torch::meshgrid({ys, xs}, "ij");
  return torch::stack({mesh[1], mesh[0], torch::ones({height, width}, opts)}, -1);  // [H,W,3]
}

void check_batch(const torch::Tensor& t, const CameraBatch& ref, const CameraBatch& src) {
  if (t.size(0) != ref.size() || t.size(0) != src.size())
    throw std::invalid_argument("camera batch size does not match tensor batch size");
}

}  // namespace

torch::Tensor bilinear_sample(const torch::Tensor& image, const torch::Tensor& coords) {
  if (image.dim() != 4) throw std::invalid_argument("bilinear_sample: image must be [B,C,H,W]");
  if (coords.size(-1) != 2 || coords.size(0) != image.size(0))
    throw std::invalid_argument("bilinear_sample: coords must be [B,...,2]");
  const auto b = image.size(0);
  const auto c = image.size(1);
  const auto h = image.size(2);
  const auto w = image.size(3);

  const auto flat_coords = coords.reshape({b, -1, 2});
  const auto n = flat_coords.size(1);
  const auto x = flat_coords.select(2, 0);
  const auto y = flat_coords.select(2, 1);
  const auto x0 = x.detach().floor();
  const auto y0 = y.detach().floor();
  const auto wx1 = x - x0;
  const auto wy1 = y - y0;
  const auto wx0 = 1.0 - wx1;
  const auto wy0 = 1.0 - wy1;
  const auto flat = image.reshape({b, c, h * w});

  auto tap = [&](const torch::Tensor& xi, const torch::Tensor& yi, const torch::Tensor& weight) {
    const auto valid = (xi >= 0) & (xi <= w - 1) & (yi >= 0) & (yi <= h - 1);
    const auto index =
        (yi.clamp(0, h - 1) * w + xi.clamp(0, w - 1)).to(torch::kLong).unsqueeze(1).expand({b, c, n});
    return flat.gather(2, index) * (weight * valid.to(weight.scalar_type())).unsqueeze(1);
  };
  auto out = tap(x0, y0, wx0 * wy0) + tap(x0 + 1, y0, wx1 * wy0) + tap(x0, y0 + 1, wx0 * wy1) +
             tap(x0 + 1, y0 + 1, wx1 * wy1);

  std::vector<int64_t> shape{b, c};
  for (int64_t i = 1; i + 1 < coords.dim(); ++i) shape.push_back(coords.size(i));
  return out.reshape(shape);
}

torch::Tensor in_bounds(const torch::Tensor& coords, int64_t height, int64_t width) {
  const auto x = coords.select(-1, 0);
  const auto y = coords.select(-1, 1);
  return (x >= 0) & (x <= width - 1) & (y >= 0) & (y <= height - 1);
}

RelativeProjection relative_projection(const CameraBatch& ref, const CameraBatch& src,
                                       torch::Dtype dtype) {
  const auto r64 = ref.to(torch::kFloat64);
  const auto s64 = src.to(torch::kFloat64);
  const auto rel = torch::bmm(s64.world_to_cam, rigid_inverse(r64.world_to_cam));  // ref -> src
  const auto rot = rel.slice(1, 0, 3).slice(2, 0, 3);
  const auto trans = rel.slice(1, 0, 3).select(2, 3);
  auto matrix = torch::bmm(torch::bmm(s64.intrinsics, rot), torch::linalg_inv(r64.intrinsics));
  auto offset = torch::bmm(s64.intrinsics, trans.unsqueeze(2)).squeeze(2);

  const auto same = identical(r64, s64);
  const auto eye = torch::eye(3, matrix.options()).expand_as(matrix);
  matrix = torch::where(same.view({-1, 1, 1}), eye, matrix);
  offset = torch::where(same.view({-1, 1}), torch::zeros_like(offset), offset);
  return {matrix.to(dtype), offset.to(dtype)};
}

Correspondence project_grid(const torch::Tensor& disparity, const CameraBatch& ref,
                            const CameraBatch& src) {
  if (disparity.dim() != 4) throw std::invalid_argument("project_grid: disparity must be [B,K,H,W]");
  check_batch(disparity, ref, src);
  const auto b = disparity.size(0);
  const auto h = disparity.size(2);
  const auto w = disparity.size(3);
  const auto opts = disparity.options().requires_grad(false);
  const auto rp = relative_projection(ref, src, disparity.scalar_type());

  const auto grid = pixel_grid(h, w, opts).view({1, h * w, 3});
  const auto base = torch::matmul(grid, rp.matrix.transpose(1, 2)).view({b, 1, h, w, 3});
  const auto p = base + rp.offset.view({b, 1, 1, 1, 3}) * disparity.unsqueeze(-1);
  const auto z = p.select(-1, 2);
  const auto valid = (disparity > 0) & (z > 0);
  const auto safe_z = torch::where(valid, z, torch::ones_like(z));
  auto coords = p.slice(-1, 0, 2) / safe_z.unsqueeze(-1);
  // Far outside every image; invalid projections sample zeros.
  coords = torch::where(valid.unsqueeze(-1), coords, torch::full_like(coords, -16.0));
  // p_z = d * Z_src, so d / p_z is the source-frame disparity (exact for the identity).
  auto src_disparity = torch::where(valid, disparity / safe_z, torch::zeros_like(z));
  return {coords, valid, src_disparity};
}

RescaledDisparity rescale_disparity(const torch::Tensor& src_disparity, const CameraBatch& ref,
                                    const CameraBatch& src, const Correspondence& corr) {
  if (src_disparity.dim() != 3)
    throw std::invalid_argument("rescale_disparity: source disparity must be [B,H,W]");
  check_batch(src_disparity, ref, src);
  const auto b = src_disparity.size(0);
  const auto dtype = src_disparity.scalar_type();

  // Z row of P_ref P_src^{-1}, acting on (x, y, 1, d).
  const auto r64 = ref.to(torch::kFloat64);
  const auto s64 = src.to(torch::kFloat64);
  auto k4 = [](const torch::Tensor& k) {
    auto out = torch::eye(4, k.options()).repeat({k.size(0), 1, 1});
    out.slice(1, 0, 3).slice(2, 0, 3).copy_(k);
    return out;
  };
  const auto p_ref = torch::bmm(k4(r64.intrinsics), r64.world_to_cam);
  const auto p_src = torch::bmm(k4(s64.intrinsics), s64.world_to_cam);
  auto z_row = torch::bmm(p_ref, torch::linalg_inv(p_src)).select(1, 2);  // [B,4]
  const auto unit = torch::tensor({0.0, 0.0, 1.0, 0.0}, z_row.options()).expand_as(z_row);
  z_row = torch::where(identical(r64, s64).view({-1, 1}), unit, z_row).to(dtype);

  const auto sampled = bilinear_sample(src_disparity.unsqueeze(1), corr.coords).squeeze(1);
  const auto x = corr.coords.select(-1, 0);
  const auto y = corr.coords.select(-1, 1);
  const auto zr = z_row.view({b, 4, 1, 1, 1});
  const auto z = zr.select(1, 0) * x + zr.select(1, 1) * y + zr.select(1, 2) + zr.select(1, 3) * sampled;

  const auto hs = src_disparity.size(1);
  const auto ws = src_disparity.size(2);
  const auto valid = corr.valid & in_bounds(corr.coords, hs, ws) & (z.abs() > kMinRescaleZ);
  const auto safe_z = torch::where(valid, z, torch::ones_like(z));
  auto value = torch::where(valid, sampled / safe_z, torch::zeros_like(sampled));
  return {value, valid};
}

WarpedVolume plane_sweep_warp(const torch::Tensor& src_features, const torch::Tensor& plane_values,
                              const CameraBatch& ref, const CameraBatch& src) {
  if (src_features.dim() != 4)
    throw std::invalid_argument("plane_sweep_warp: features must be [B,F,H,W]");
  const auto b = src_features.size(0);
  const auto h = src_features.size(2);
  const auto w = src_features.size(3);
  const auto d = plane_values.numel();
  const auto planes =
      plane_values.to(src_features.scalar_type()).view({1, d, 1, 1}).expand({b, d, h, w});
  const auto corr = project_grid(planes, ref, src);
  const auto mask = corr.valid & in_bounds(corr.coords, h, w);
  auto volume = bilinear_sample(src_features, corr.coords);
  volume = volume * mask.unsqueeze(1).to(volume.scalar_type());
  return {volume, mask};
}

}  // namespace atvs::geometry
