#pragma once

#include <span>
#include <vector>

#include <torch/torch.h>

#include "atvs/nn/config.hpp"

// A volume set is a non-empty list of [B,C,D,H,W] tensors of identical shape.

namespace atvs::aggregation {

/// Element-wise mean over the set. Throws std::invalid_argument for an empty or
/// inhomogeneous set.
torch::Tensor mean_pool_aggregate(std::span<const torch::Tensor> set);

/// Parameters of one 3-D convolution (weight [C,C,k,k,k], bias [C]).
struct ConvWeights {
  torch::Tensor weight;
  torch::Tensor bias;
};

/// f(C, W): the attention activation, a single channel-preserving 3-D convolution.
torch::Tensor activation(const torch::Tensor& volume, const ConvWeights& w);

/// softmax over the set axis of f(C_n, W), weighted sum of the C_n.
torch::Tensor attsets_aggregate(std::span<const torch::Tensor> set, const ConvWeights& weights);

struct AAMWeights {
  ConvWeights self;
  ConvWeights others;
};

/// C'_n = f(C_n, W_self) + sum_{m != n} f(C_m, W_others).
std::vector<torch::Tensor> aam_activate(std::span<const torch::Tensor> set, const AAMWeights& weights);

/// sum_n C_n * softmax_n(C'_n), softmax taken across the set per voxel and channel.
torch::Tensor aam_aggregate(std::span<const torch::Tensor> set, const AAMWeights& weights);

/// Softmax weights across the set, [N,B,C,D,H,W].
torch::Tensor set_softmax(std::span<const torch::Tensor> scores);

class AttSetsImpl : public torch::nn::Module {
 public:
  explicit AttSetsImpl(int channels);
  torch::Tensor forward(std::span<const torch::Tensor> set);
  ConvWeights weights() const;

 private:
  torch::nn::Conv3d score_{nullptr};
};
TORCH_MODULE(AttSets);

/// Attention aggregation module with independent W_self and W_others. Both start at
/// zero, which makes the module an exact mean pooling until trained.
class AamImpl : public torch::nn::Module {
 public:
  explicit AamImpl(int channels);
  torch::Tensor forward(std::span<const torch::Tensor> set);
  AAMWeights weights() const;

 private:
  torch::nn::Conv3d self_{nullptr};
  torch::nn::Conv3d others_{nullptr};
};
TORCH_MODULE(Aam);

/// Dispatches to the configured aggregation. kNone accepts singletons only.
class AggregatorImpl : public torch::nn::Module {
 public:
  AggregatorImpl(nn::AggregatorKind kind, int channels);
  torch::Tensor forward(std::span<const torch::Tensor> set);
  nn::AggregatorKind kind() const { return kind_; }

 private:
  nn::AggregatorKind kind_;
  AttSets attsets_{nullptr};
  Aam aam_{nullptr};
};
TORCH_MODULE(Aggregator);

}  // namespace atvs::aggregation
