#pragma once

#include <vector>

#include <torch/torch.h>

#include "atvs/aggregation/aggregators.hpp"
#include "atvs/geometry/camera.hpp"
#include "atvs/nn/two_view.hpp"

namespace atvs::aggregation {

enum class ExecutionStrategy { kSequential, kConcurrent };

struct SourceView {
  torch::Tensor image;          // [B,3,H,W]
  geometry::CameraBatch camera;  // at image resolution
};

struct BranchOutput {
  nn::InitialEstimate ref;  // C~_ref^n, d~_ref^n
  nn::InitialEstimate src;  // d~_src^n
  torch::Tensor refined_volume;  // C^R_n
};

struct MultiViewOutput {
  std::vector<BranchOutput> branches;
  torch::Tensor fused_filtered;  // C^_ref after the first aggregation (or branch 0's C~ with kNone)
  torch::Tensor hull;
  torch::Tensor fused_refined;   // input of the final output module
  nn::DisparityEstimate refined;  // final d~^R_ref at 1/4 resolution
};

/// N shared two-view branches with a first aggregation after the CRM and a second one
/// before the last output module. With N = 1 the result equals the two-view network.
class MultiViewNetImpl : public torch::nn::Module {
 public:
  explicit MultiViewNetImpl(const nn::NetworkConfig& config);

  nn::TwoViewNet& two_view() { return two_view_; }
  Aggregator& first() { return first_; }
  Aggregator& second() { return second_; }
  const nn::NetworkConfig& config() const { return two_view_->config(); }

  /// Freezes (or unfreezes) every two-view parameter.
  void freeze_two_view(bool frozen);
  bool two_view_frozen() const { return frozen_; }

  void set_execution(ExecutionStrategy strategy) { strategy_ = strategy; }

  /// Throws std::invalid_argument for an empty source list.
  MultiViewOutput forward(const torch::Tensor& ref_image, const geometry::CameraBatch& ref_camera,
                          const std::vector<SourceView>& sources);

 private:
  nn::TwoViewNet two_view_{nullptr};
  Aggregator first_{nullptr};
  Aggregator second_{nullptr};
  bool frozen_ = false;
  ExecutionStrategy strategy_ = ExecutionStrategy::kSequential;
};
TORCH_MODULE(MultiViewNet);

}  // namespace atvs::aggregation
