#include "atvs/aggregation/aggregators.hpp"

#include <stdexcept>

#include "atvs/nn/layers.hpp"

namespace atvs::aggregation {

namespace F = torch::nn::functional;

namespace {

void check_set(std::span<const torch::Tensor> set) {
  if (set.empty()) throw std::invalid_argument("volume set is empty");
  for (const auto& c : set) {
    if (c.dim() != 5) throw std::invalid_argument("set member is not a [B,C,D,H,W] volume");
    if (c.sizes() != set.front().sizes())
      throw std::invalid_argument("set members differ in shape: " + c10::str(c.sizes()) + " vs " +
                                  c10::str(set.front().sizes()));
  }
}

torch::Tensor weighted_sum(std::span<const torch::Tensor> set, const torch::Tensor& weights) {
  auto stacked = torch::stack(std::vector<torch::Tensor>(set.begin(), set.end()), 0);
  return (stacked * weights).sum(0);
}

// Runs f on every member in one batched call; returns [N,B,C,D,H,W].
torch::Tensor activate_all(std::span<const torch::Tensor> set, const ConvWeights& w) {
  const auto n = static_cast<int64_t>(set.size());
  const auto& shape = set.front().sizes();
  auto batched = torch::cat(std::vector<torch::Tensor>(set.begin(), set.end()), 0);
  auto out = activation(batched, w);
  std::vector<int64_t> view{n};
  view.insert(view.end(), shape.begin(), shape.end());
  return out.view(view);
}

}  // namespace

torch::Tensor mean_pool_aggregate(std::span<const torch::Tensor> set) {
  check_set(set);
  const auto n = static_cast<double>(set.size());
  return weighted_sum(set, torch::full({}, 1.0 / n, set.front().options()));
}

torch::Tensor activation(const torch::Tensor& volume, const ConvWeights& w) {
  const auto pad = w.weight.size(-1) / 2;
  return F::conv3d(volume, w.weight, F::Conv3dFuncOptions().bias(w.bias).padding(pad));
}

torch::Tensor set_softmax(std::span<const torch::Tensor> scores) {
  return torch::softmax(torch::stack(std::vector<torch::Tensor>(scores.begin(), scores.end()), 0), 0);
}

torch::Tensor attsets_aggregate(std::span<const torch::Tensor> set, const ConvWeights& weights) {
  check_set(set);
  const auto scores = activate_all(set, weights);
  return weighted_sum(set, torch::softmax(scores, 0));
}

std::vector<torch::Tensor> aam_activate(std::span<const torch::Tensor> set, const AAMWeights& weights) {
  check_set(set);
  if (weights.self.weight.sizes() != weights.others.weight.sizes())
    throw std::invalid_argument("W_self and W_others differ in shape");
  const auto own = activate_all(set, weights.self);
  const auto rest = activate_all(set, weights.others);
  // sum over m != n written as (total - own term), so tied weights give equal results
  const auto total = rest.sum(0);
  std::vector<torch::Tensor> activated;
  activated.reserve(set.size());
  for (int64_t i = 0; i < static_cast<int64_t>(set.size()); ++i)
    activated.push_back(total + (own[i] - rest[i]));
  return activated;
}

torch::Tensor aam_aggregate(std::span<const torch::Tensor> set, const AAMWeights& weights) {
  const auto activated = aam_activate(set, weights);
  return weighted_sum(set, set_softmax(activated));
}

AttSetsImpl::AttSetsImpl(int channels) : score_(register_module("score", nn::conv3d(channels, channels))) {
  nn::zero_parameters(*score_);
}

torch::Tensor AttSetsImpl::forward(std::span<const torch::Tensor> set) {
  return attsets_aggregate(set, weights());
}

ConvWeights AttSetsImpl::weights() const { return {score_->weight, score_->bias}; }

AamImpl::AamImpl(int channels)
    : self_(register_module("self", nn::conv3d(channels, channels))),
      others_(register_module("others", nn::conv3d(channels, channels))) {
  nn::zero_parameters(*self_);
  nn::zero_parameters(*others_);
}

torch::Tensor AamImpl::forward(std::span<const torch::Tensor> set) {
  return aam_aggregate(set, weights());
}

AAMWeights AamImpl::weights() const {
  return {{self_->weight, self_->bias}, {others_->weight, others_->bias}};
}

AggregatorImpl::AggregatorImpl(nn::AggregatorKind kind, int channels) : kind_(kind) {
  if (kind_ == nn::AggregatorKind::kAttSets) attsets_ = register_module("attsets", AttSets(channels));
  if (kind_ == nn::AggregatorKind::kAam) aam_ = register_module("aam", Aam(channels));
}

torch::Tensor AggregatorImpl::forward(std::span<const torch::Tensor> set) {
  switch (kind_) {
    case nn::AggregatorKind::kNone:
      check_set(set);
      if (set.size() != 1) throw std::invalid_argument("aggregator 'none' takes a single volume");
      return set.front();
    case nn::AggregatorKind::kMean:
      return mean_pool_aggregate(set);
    case nn::AggregatorKind::kAttSets:
      return attsets_->forward(set);
    case nn::AggregatorKind::kAam:
      return aam_->forward(set);
  }
  throw std::logic_error("unknown aggregator kind");
}

}  // namespace atvs::aggregation
