#include "atvs/aggregation/atvsnet.hpp"

#include <functional>
#include <future>
#include <stdexcept>

#include "atvs/volumes/cost_volumes.hpp"

namespace atvs::aggregation {

namespace {

// Runs body(i) for i in [0, n); the concurrent path carries the caller's grad mode
// into the worker threads.
void for_each_branch(std::size_t n, ExecutionStrategy strategy,
                     const std::function<void(std::size_t)>& body) {
  if (strategy == ExecutionStrategy::kSequential || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  const bool grad = torch::GradMode::is_enabled();
  std::vector<std::future<void>> jobs;
  jobs.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    jobs.push_back(std::async(std::launch::async, [&, i] {
      torch::AutoGradMode mode(grad);
      body(i);
    }));
  for (auto& j : jobs) j.get();
}

}  // namespace

MultiViewNetImpl::MultiViewNetImpl(const nn::NetworkConfig& config) {
  two_view_ = register_module("two_view", nn::TwoViewNet(config));
  first_ = register_module("aam1", Aggregator(config.first_aggregator, config.base_width));
  second_ = register_module("aam2", Aggregator(config.second_aggregator, config.base_width));
}

void MultiViewNetImpl::freeze_two_view(bool frozen) {
  frozen_ = frozen;
  for (auto& p : two_view_->parameters()) p.set_requires_grad(!frozen);
}

MultiViewOutput MultiViewNetImpl::forward(const torch::Tensor& ref_image,
                                          const geometry::CameraBatch& ref_camera,
                                          const std::vector<SourceView>& sources) {
  if (sources.empty()) throw std::invalid_argument("at least one source view is required");
  const auto& cfg = config();
  const auto n = sources.size();
  const int scale = nn::NetworkConfig::kFeatureScale;
  const auto ref_cam = ref_camera.downscaled(scale);
  std::vector<geometry::CameraBatch> src_cams;
  for (const auto& s : sources) src_cams.push_back(s.camera.downscaled(scale));

  auto& net = *two_view_;
  MultiViewOutput out;
  out.branches.resize(n);
  nn::ImageFeatures ref_features;
  std::vector<nn::ImageFeatures> src_features(n);
  {
    // With frozen weights nothing upstream of the first aggregation needs a graph.
    torch::AutoGradMode mode(torch::GradMode::is_enabled() && !frozen_);
    ref_features = net.features(ref_image);
    for_each_branch(n, strategy_, [&](std::size_t i) {
      src_features[i] = net.features(sources[i].image);
      out.branches[i].ref = net.initial(ref_features, src_features[i], ref_cam, src_cams[i]);
    });
    torch::AutoGradMode reverse(torch::GradMode::is_enabled() && !cfg.refinement.detach_geometry);
    for_each_branch(n, strategy_, [&](std::size_t i) {
      out.branches[i].src = net.initial(src_features[i], ref_features, src_cams[i], ref_cam);
    });
  }

  const bool fuse_first = first_->kind() != nn::AggregatorKind::kNone;
  std::vector<torch::Tensor> filtered;
  for (const auto& b : out.branches) filtered.push_back(b.ref.filtered);
  std::vector<torch::Tensor> ref_disparity(n);
  if (fuse_first) {
    out.fused_filtered = first_->forward(filtered);
    const auto fused = n == 1 ? out.branches[0].ref.estimate.disparity
                              : net.output(out.fused_filtered).disparity;
    std::fill(ref_disparity.begin(), ref_disparity.end(), fused);
  } else {
    out.fused_filtered = filtered.front();
    for (std::size_t i = 0; i < n; ++i) ref_disparity[i] = out.branches[i].ref.estimate.disparity;
  }

  // One hull over the reference and every source; without a first aggregation each
  // branch builds it from its own reference estimate.
  auto hull_for = [&](const torch::Tensor& d_ref) {
    std::vector<volumes::ViewDisparity> views{{d_ref.detach(), ref_cam}};
    for (std::size_t i = 0; i < n; ++i)
      views.push_back({out.branches[i].src.estimate.disparity.detach(), src_cams[i]});
    torch::NoGradGuard no_grad;
    return volumes::visual_hull(views, net.plane_values(), ref_cam);
  };
  std::vector<torch::Tensor> hulls(n);
  if (fuse_first) {
    out.hull = hull_for(ref_disparity.front());
    std::fill(hulls.begin(), hulls.end(), out.hull);
  } else {
    for (std::size_t i = 0; i < n; ++i) hulls[i] = hull_for(ref_disparity[i]);
    out.hull = hulls.front();
  }

  for_each_branch(n, strategy_, [&](std::size_t i) {
    const auto& volume = fuse_first ? out.fused_filtered : filtered[i];
    out.branches[i].refined_volume =
        net.refine(volume, ref_features, src_features[i], ref_disparity[i],
                   out.branches[i].src.estimate.disparity, hulls[i], ref_cam, src_cams[i]);
  });

  std::vector<torch::Tensor> refined;
  for (const auto& b : out.branches) refined.push_back(b.refined_volume);
  out.fused_refined = second_->forward(refined);
  out.refined = net.output(out.fused_refined);
  return out;
}

}  // namespace atvs::aggregation
