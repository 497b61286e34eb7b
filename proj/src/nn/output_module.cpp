#include "atvs/nn/output_module.hpp"

#include "atvs/nn/layers.hpp"

namespace atvs::nn {

DisparityEstimate soft_argmax(const torch::Tensor& logits, const torch::Tensor& plane_values) {
  auto prob = torch::softmax(logits, 1);
  const auto planes = plane_values.to(prob.scalar_type()).view({1, -1, 1, 1});
  // Clamped so rounding can never leave the hypothesis range.
  auto disparity = torch::clamp((prob * planes).sum(1), planes.min(), planes.max());
  return {prob, disparity};
}

OutputModuleImpl::OutputModuleImpl(int in_channels)
    : reduce_(register_module("reduce", conv3d(in_channels, 1))) {
  init_weights(*this);
}

DisparityEstimate OutputModuleImpl::forward(const torch::Tensor& volume,
                                            const torch::Tensor& plane_values) {
  return soft_argmax(reduce_(volume).squeeze(1), plane_values);
}

void OutputModuleImpl::zero_final_layer() { zero_parameters(*reduce_); }

}  // namespace atvs::nn
