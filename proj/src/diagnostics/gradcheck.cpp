#include "atvs/diagnostics/gradcheck.hpp"

#include <algorithm>

#include <Eigen/Geometry>
#include <torch/torch.h>

#include "atvs/aggregation/aggregators.hpp"
#include "atvs/geometry/warp.hpp"
#include "atvs/nn/output_module.hpp"
#include "atvs/nn/refinement.hpp"
#include "atvs/training/loss.hpp"

namespace atvs::diagnostics {

double gradient_error(const ScalarFn& fn, const std::vector<torch::Tensor>& inputs, double eps) {
  std::vector<torch::Tensor> xs;
  for (const auto& x : inputs) xs.push_back(x.detach().to(torch::kFloat64).clone().set_requires_grad(true));
  auto out = fn(xs);
  auto grads = torch::autograd::grad({out}, xs, {}, false, false, true);

  double max_diff = 0.0, max_abs = 0.0;
  torch::NoGradGuard no_grad;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    auto analytic = grads[i].defined() ? grads[i] : torch::zeros_like(xs[i]);
    auto flat = xs[i].view(-1);
    auto numeric = torch::zeros_like(flat);
    for (int64_t k = 0; k < flat.numel(); ++k) {
      const double orig = flat[k].item<double>();
      flat[k] = orig + eps;
      const double plus = fn(xs).item<double>();
      flat[k] = orig - eps;
      const double minus = fn(xs).item<double>();
      flat[k] = orig;
      numeric[k] = (plus - minus) / (2.0 * eps);
    }
    const auto a = analytic.reshape(-1);
    max_diff = std::max(max_diff, (a - numeric).abs().max().item<double>());
    max_abs = std::max({max_abs, a.abs().max().item<double>(), numeric.abs().max().item<double>()});
  }
  return max_abs == 0.0 ? 0.0 : max_diff / max_abs;
}

namespace {

geometry::CameraBatch test_camera(double tx, double yaw, double f, int size) {
  Eigen::Matrix3d k = Eigen::Matrix3d::Identity();
  k(0, 0) = k(1, 1) = f;
  k(0, 2) = k(1, 2) = (size - 1) / 2.0;
  Eigen::Matrix4d pose = Eigen::Matrix4d::Identity();
  pose.topLeftCorner<3, 3>() = Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitY()).toRotationMatrix();
  pose(0, 3) = tx;
  return geometry::CameraBatch::from(geometry::CameraModel(k, pose, {size, size}));
}

// Coordinates with fractional parts away from the sampler's kinks.
torch::Tensor smooth_coords(std::vector<int64_t> shape, double lo, double hi) {
  auto base = torch::randint(static_cast<int64_t>(lo), static_cast<int64_t>(hi), shape, torch::kFloat64);
  return base + 0.15 + 0.7 * torch::rand(shape, torch::kFloat64);
}

}  // namespace

std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed, double tolerance, double eps) {
  torch::manual_seed(seed);
  std::vector<GradCheckResult> results;
  auto record = [&](const std::string& name, double err) {
    results.push_back({name, err, err < tolerance});
  };
  auto contract = [](const torch::Tensor& y, const torch::Tensor& w) { return (y * w).sum(); };

  {
    auto image = torch::randn({1, 2, 5, 6}, torch::kFloat64);
    auto coords = smooth_coords({1, 3, 4, 2}, -1, 5);
    auto w = torch::randn({1, 2, 3, 4}, torch::kFloat64);
    record("bilinear_sample", gradient_error(
                                  [&](const std::vector<torch::Tensor>& x) {
                                    return contract(geometry::bilinear_sample(x[0], x[1]), w);
                                  },
                                  {image, coords}, eps));
  }
  {
    auto feat = torch::randn({1, 2, 6, 6}, torch::kFloat64);
    auto planes = torch::tensor({0.2, 0.3, 0.45}, torch::kFloat64);
    const auto ref = test_camera(0.0, 0.0, 5.0, 6);
    const auto src = test_camera(-0.37, 0.05, 5.0, 6);
    auto w = torch::randn({1, 2, 3, 6, 6}, torch::kFloat64);
    record("plane_sweep_warp", gradient_error(
                                   [&](const std::vector<torch::Tensor>& x) {
                                     return contract(geometry::plane_sweep_warp(x[0], planes, ref, src).volume, w);
                                   },
                                   {feat}, eps));
  }
  {
    nn::OutputModule head(3);
    head->to(torch::kFloat64);
    auto planes = torch::linspace(0.125, 0.5, 6, torch::kFloat64);
    auto volume = torch::randn({1, 3, 6, 3, 3}, torch::kFloat64);
    auto w = torch::randn({1, 3, 3}, torch::kFloat64);
    record("output_module", gradient_error(
                                [&](const std::vector<torch::Tensor>& x) {
                                  return contract(head->forward(x[0], planes).disparity, w);
                                },
                                {volume}, eps));
  }
  {
    nn::NetworkConfig cfg;
    cfg.base_width = 2;
    cfg.low_level_channels = 1;
    nn::RefinementNet net(cfg);
    net->to(torch::kFloat64);
    {
      // a non-zero head so the residual branch contributes to the gradient
      torch::NoGradGuard g;
      for (auto& item : net->named_parameters())
        if (item.key().rfind("head.", 0) == 0) item.value().normal_(0.0, 0.3);
    }
    auto make = [&](int64_t c) { return torch::randn({1, c, 4, 4, 4}, torch::kFloat64); };
    auto filtered = make(2);
    nn::RefinementGuidance guide{make(2), make(2), make(1), make(1), torch::rand({1, 1, 4, 4, 4}, torch::kFloat64)};
    auto w = torch::randn({1, 2, 4, 4, 4}, torch::kFloat64);
    record("refinement_residual", gradient_error(
                                      [&](const std::vector<torch::Tensor>& x) {
                                        return contract(net->forward(x[0], guide), w);
                                      },
                                      {filtered}, eps));
  }
  {
    const int c = 2;
    std::vector<torch::Tensor> inputs;
    for (int n = 0; n < 3; ++n) inputs.push_back(torch::randn({1, c, 3, 3, 3}, torch::kFloat64));
    for (int k = 0; k < 2; ++k) {
      inputs.push_back(0.2 * torch::randn({c, c, 3, 3, 3}, torch::kFloat64));
      inputs.push_back(0.2 * torch::randn({c}, torch::kFloat64));
    }
    auto w = torch::randn({1, c, 3, 3, 3}, torch::kFloat64);
    record("aam_aggregate", gradient_error(
                                [&](const std::vector<torch::Tensor>& x) {
                                  const std::vector<torch::Tensor> set{x[0], x[1], x[2]};
                                  const aggregation::AAMWeights aw{{x[3], x[4]}, {x[5], x[6]}};
                                  return contract(aggregation::aam_aggregate(set, aw), w);
                                },
                                inputs, eps));
  }
  {
    auto gt = torch::rand({2, 4, 4}, torch::kFloat64) + 0.1;
    gt.index_put_({0, 0}, 0.0);
    gt.index_put_({1, 2, 3}, std::numeric_limits<double>::quiet_NaN());
    std::vector<torch::Tensor> inputs{torch::rand({2, 4, 4}, torch::kFloat64) + 0.1};
    for (int k = 0; k < 3; ++k) inputs.push_back(torch::rand({2, 4, 4}, torch::kFloat64) + 0.1);
    const training::LossWeights weights;
    record("total_loss", gradient_error(
                             [&](const std::vector<torch::Tensor>& x) {
                               return training::total_loss(x[0], {x[1], x[2], x[3]}, gt, weights).value;
                             },
                             inputs, eps));
  }
  return results;
}

}  // namespace atvs::diagnostics
