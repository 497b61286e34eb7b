#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <torch/types.h>

namespace atvs::diagnostics {

/// Scalar-valued function of several tensors.
using ScalarFn = std::function<torch::Tensor(const std::vector<torch::Tensor>&)>;

struct GradCheckResult {
  std::string name;
  double max_relative_error = 0.0;  // ||a - n||_inf / max(||a||_inf, ||n||_inf)
  bool passed = false;
};

/// Compares autograd gradients of `fn` at `inputs` (double precision) with central
/// finite differences of step `eps`, over every element of every input.
double gradient_error(const ScalarFn& fn, const std::vector<torch::Tensor>& inputs, double eps = 1e-5);

/// The gradient suite: bilinear sampling, plane-sweep warp, soft-argmax output module,
/// refinement residual path, AAM aggregation, total loss.
std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed, double tolerance = 1e-4,
                                                 double eps = 1e-5);

}  // namespace atvs::diagnostics
