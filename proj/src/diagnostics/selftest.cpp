#include "atvs/diagnostics/selftest.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include <torch/torch.h>

#include "atvs/aggregation/aggregators.hpp"
#include "atvs/eval/metrics.hpp"
#include "atvs/fusion/fusion.hpp"
#include "atvs/geometry/warp.hpp"
#include "atvs/nn/checkpoint.hpp"
#include "atvs/nn/cost_regularizer.hpp"
#include "atvs/nn/output_module.hpp"
#include "atvs/nn/two_view.hpp"
#include "atvs/synth/scene.hpp"
#include "atvs/training/loss.hpp"
#include "atvs/volumes/cost_volumes.hpp"

namespace atvs::diagnostics {

namespace fs = std::filesystem;

namespace {

struct Failure {
  std::string detail;
};

void require(bool condition, const std::string& detail) {
  if (!condition) throw Failure{detail};
}

bool same(const torch::Tensor& a, const torch::Tensor& b) {
  return a.sizes() == b.sizes() && torch::equal(a, b);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

geometry::CameraModel simple_camera(double tx) {
  Eigen::Matrix3d k = Eigen::Matrix3d::Identity();
  k(0, 0) = k(1, 1) = 10.0;
  k(0, 2) = k(1, 2) = 3.5;
  Eigen::Matrix4d pose = Eigen::Matrix4d::Identity();
  pose(0, 3) = tx;
  return geometry::CameraModel(k, pose, {8, 8});
}

}  // namespace

std::vector<CheckResult> run_selftest(const fs::path& scratch) {
  fs::create_directories(scratch);
  torch::manual_seed(0);
  std::vector<CheckResult> results;
  auto check = [&](const std::string& property, const std::function<void()>& body) {
    CheckResult r{property, true, ""};
    try {
      body();
    } catch (const Failure& f) {
      r.passed = false;
      r.detail = f.detail;
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = std::string("unexpected exception: ") + e.what();
    }
    results.push_back(r);
  };

  check("disparity planes follow d_min + i*delta", [] {
    const auto v = geometry::disparity_planes(0.0, 0.01, 3).values();
    require(v.size() == 3 && std::abs(v[0] - 0.01) < 1e-15 && std::abs(v[2] - 0.03) < 1e-15,
            "planes (0, 0.01, 3) != [0.01, 0.02, 0.03]");
  });
  check("zero plane interval is rejected", [] {
    bool threw = false;
    try {
      geometry::disparity_planes(0.5, 0.0, 4);
    } catch (const std::invalid_argument&) {
      threw = true;
    }
    require(threw, "delta = 0 accepted");
  });
  check("identical cameras project a pixel onto itself", [] {
    const auto cam = simple_camera(0.3);
    const auto p = geometry::project_pixel({2.25, 5.5}, 0.7, cam, cam);
    require(p.valid && p.coord == Eigen::Vector2d(2.25, 5.5), "projection moved the pixel");
  });
  check("bilinear sampling at integer coordinates is exact", [] {
    const auto img = torch::randn({1, 2, 4, 5});
    const auto coords = torch::tensor({3.0f, 2.0f}).view({1, 1, 2});
    const auto s = geometry::bilinear_sample(img, coords);
    require(same(s.view({2}), img.index({0, torch::indexing::Slice(), 2, 3})), "sample differs from pixel");
  });
  check("identity plane sweep reproduces the features on every plane", [] {
    const auto cam = geometry::CameraBatch::from(simple_camera(0.0));
    const auto feat = torch::randn({1, 3, 8, 8});
    const auto planes = geometry::disparity_planes(0.1, 0.05, 4).tensor();
    const auto w = geometry::plane_sweep_warp(feat, planes, cam, cam);
    for (int i = 0; i < 4; ++i)
      require(same(w.volume.select(2, i), feat), "plane " + std::to_string(i) + " differs");
  });
  check("identical cameras leave rescaled disparity unchanged", [] {
    const auto cam = geometry::CameraBatch::from(simple_camera(0.2));
    const auto d = torch::rand({1, 8, 8}) * 0.3 + 0.2;
    const auto corr = geometry::project_grid(d.unsqueeze(1), cam, cam);
    const auto r = geometry::rescale_disparity(d, cam, cam, corr);
    require(same(r.value[0][0], d[0]), "rescaled disparity differs");
  });
  check("two-view visual hull takes values in {0, 0.5, 1}", [] {
    const auto ref = geometry::CameraBatch::from(simple_camera(0.0));
    const auto src = geometry::CameraBatch::from(simple_camera(0.2));
    const auto planes = geometry::disparity_planes(0.1, 0.05, 8).tensor();
    std::array<volumes::ViewDisparity, 2> views{volumes::ViewDisparity{torch::rand({1, 8, 8}) * 0.4 + 0.1, ref},
                                                volumes::ViewDisparity{torch::rand({1, 8, 8}) * 0.4 + 0.1, src}};
    const auto h = volumes::visual_hull(views, planes, ref);
    require(((h == 0) | (h == 0.5) | (h == 1)).all().item<bool>(), "hull value outside {0, 0.5, 1}");
  });
  check("soft-argmax of a point mass returns that plane", [] {
    auto logits = torch::full({1, 4, 1, 1}, -1e4);
    logits.index_put_({0, 2}, 0.0);
    const auto planes = geometry::disparity_planes(0.0, 0.01, 4).tensor();
    const auto d = nn::soft_argmax(logits, planes).disparity.item<double>();
    require(std::abs(d - 0.03) < 1e-7, "expected 0.03, got " + std::to_string(d));
  });
  check("soft-argmax of a uniform distribution returns the mean plane", [] {
    const auto planes = geometry::disparity_planes(0.1, 0.025, 16).tensor();
    const auto d = nn::soft_argmax(torch::zeros({1, 16, 2, 2}), planes).disparity;
    require((d - planes.mean()).abs().max().item<double>() < 1e-7, "not the mean plane");
  });
  check("CRM returns one intermediate volume per stack", [] {
    nn::NetworkConfig cfg;
    nn::CostRegularizer crm(cfg);
    const auto out = crm->forward(torch::randn({1, 2 * cfg.feature_channels, 8, 4, 4}));
    require(out.intermediates.size() == static_cast<std::size_t>(cfg.crm_stacks), "wrong intermediate count");
    require(out.filtered.sizes().slice(2) == c10::IntArrayRef({8, 4, 4}), "shape not preserved");
  });
  check("zeroed refinement head makes refinement an identity", [] {
    nn::NetworkConfig cfg;
    cfg.plane_count = 8;
    nn::RefinementNet net(cfg);
    const int64_t fl = cfg.low_level_channels;
    auto v = [](int64_t c) { return torch::randn({1, c, 8, 4, 4}); };
    const auto filtered = v(cfg.base_width);
    const nn::RefinementGuidance g{v(2 * fl), v(2), v(fl), v(1), v(1)};
    require(same(net->forward(filtered, g), filtered), "C^R != C~ at initialization");
  });
  check("zeroed final layers give the uniform cold-start disparity", [] {
    nn::NetworkConfig cfg;
    nn::TwoViewNet net(cfg);
    net->zero_final_layers();
    torch::NoGradGuard g;
    const auto cam = geometry::CameraBatch::from(simple_camera(0.0));
    const auto img = torch::rand({1, 3, 16, 16});
    const auto out = net->forward(img, torch::rand({1, 3, 16, 16}), cam,
                                  geometry::CameraBatch::from(simple_camera(0.1)));
    const double mean = cfg.planes().tensor().mean().item<double>();
    require((out.refined.disparity - mean).abs().max().item<double>() < 1e-6, "not the mean plane");
  });
  check("aggregating a single volume returns it", [] {
    const std::vector<torch::Tensor> set{torch::randn({1, 2, 3, 3, 3})};
    aggregation::AAMWeights w{{torch::randn({2, 2, 3, 3, 3}), torch::randn({2})},
                              {torch::randn({2, 2, 3, 3, 3}), torch::randn({2})}};
    require(same(aggregation::aam_aggregate(set, w), set[0]), "AAM changed a singleton");
    require(same(aggregation::mean_pool_aggregate(set), set[0]), "mean pooling changed a singleton");
  });
  check("mean pooling of zeros and twos is one", [] {
    const std::vector<torch::Tensor> set{torch::zeros({1, 1, 2, 2, 2}), torch::full({1, 1, 2, 2, 2}, 2.0)};
    require(same(aggregation::mean_pool_aggregate(set), torch::ones({1, 1, 2, 2, 2})), "mean != 1");
  });
  check("tied AAM weights reduce to mean pooling", [] {
    std::vector<torch::Tensor> set;
    for (int i = 0; i < 3; ++i) set.push_back(torch::randn({1, 2, 3, 3, 3}));
    const aggregation::ConvWeights shared{torch::randn({2, 2, 3, 3, 3}), torch::randn({2})};
    const auto a = aggregation::aam_aggregate(set, {shared, shared});
    require((a - aggregation::mean_pool_aggregate(set)).abs().max().item<double>() <= 1e-6, "differs from mean");
  });
  check("L1 loss arithmetic", [] {
    const auto gt = torch::rand({2, 3, 3}) + 0.1;
    require(training::l1_loss(gt, gt).value.item<double>() == 0.0, "pred = gt gives non-zero loss");
    const double l = training::l1_loss(gt + 0.5, gt).value.item<double>();
    require(std::abs(l - 0.5) < 1e-6, "offset 0.5 gives " + std::to_string(l));
    const auto none = training::l1_loss(gt, torch::zeros_like(gt));
    require(none.no_valid_pixels && none.value.item<double>() == 0.0, "empty mask not flagged");
  });
  check("total loss with unit errors is lambda + sum(omega)", [] {
    const auto gt = torch::rand({1, 4, 4}) + 0.1;
    const auto off = gt + 1.0;
    const double l = training::total_loss(off, {off, off, off}, gt, {}).value.item<double>();
    require(std::abs(l - 1.8) < 1e-5, "expected 1.8, got " + std::to_string(l));
  });
  check("perfect predictions give zero errors and full inliers", [] {
    const auto gt = torch::rand({8, 8}) + 0.1;
    const auto r = eval::compute_metrics(gt, gt, 0.025);
    require(r.l1 == 0 && r.l1_inv == 0 && r.l1_rel == 0 && r.sc_inv == 0, "non-zero error");
    for (double v : r.inlier) require(v == 100.0, "inlier ratio below 100%");
  });
  check("Sc-inv ignores a global depth scale", [] {
    const auto gt = torch::rand({8, 8}, torch::kFloat64) + 0.1;
    const auto r = eval::compute_metrics(gt / 1.7, gt, 0.025);
    require(r.sc_inv < 1e-6, "Sc-inv = " + std::to_string(r.sc_inv));
    require(std::abs(r.l1_rel - 0.7) < 1e-6, "L1-rel = " + std::to_string(r.l1_rel));
  });
  check("PFM round trip is bit-exact", [&] {
    const auto map = torch::randn({5, 7});
    synth::write_pfm(scratch / "selftest.pfm", map);
    require(same(synth::read_pfm(scratch / "selftest.pfm"), map), "payload changed");
  });
  check("checkpoint round trip is bit-exact", [&] {
    nn::NetworkConfig cfg;
    nn::TwoViewNet net(cfg);
    const auto a = scratch / "selftest_a.ckpt", b = scratch / "selftest_b.ckpt";
    nn::save_checkpoint(nn::make_checkpoint(*net, cfg, 1), a);
    nn::save_checkpoint(nn::load_checkpoint(a), b);
    require(slurp(a) == slurp(b), "re-saved checkpoint differs");
  });
  check("same-seed scene generation is bit-identical", [] {
    synth::SceneOptions opt;
    opt.source_views = 2;
    const auto x = synth::generate_random_sample(3, opt), y = synth::generate_random_sample(3, opt);
    for (std::size_t v = 0; v < x.views.size(); ++v)
      require(same(x.views[v].image, y.views[v].image) && same(x.views[v].disparity, y.views[v].disparity),
              "view " + std::to_string(v) + " differs");
  });
  check("fusion filter with zero required views keeps every valid pixel", [] {
    const auto d = torch::rand({8, 8}) * 0.3 + 0.2;
    std::vector<fusion::FusionView> views{{d, simple_camera(0.0), {}}, {d, simple_camera(0.1), {}}};
    const auto masks = fusion::consistency_filter(views, 0, 0.01);
    require(masks[0].all().item<bool>() && masks[1].all().item<bool>(), "pixels removed");
  });
  return results;
}

}  // namespace atvs::diagnostics
