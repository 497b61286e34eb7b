#include "atvs/geometry/planes.hpp"

#include <cmath>
#include <stdexcept>

#include <torch/torch.h>

namespace atvs::geometry {

DisparityPlanes::DisparityPlanes(double d_min, double delta, int count)
    : d_min_(d_min), delta_(delta), count_(count) {
  if (!(delta > 0.0) || !std::isfinite(delta))
    throw std::invalid_argument("disparity planes: delta must be > 0");
  if (count < 1) throw std::invalid_argument("disparity planes: count must be >= 1");
  if (!(d_min >= 0.0) || !std::isfinite(d_min))
    throw std::invalid_argument("disparity planes: d_min must be >= 0");
}

std::vector<double> DisparityPlanes::values() const {
  std::vector<double> v(static_cast<std::size_t>(count_));
  for (int i = 1; i <= count_; ++i) v[static_cast<std::size_t>(i - 1)] = at(i);
  return v;
}

torch::Tensor DisparityPlanes::tensor(torch::Dtype dtype) const {
  return torch::tensor(values(), torch::kFloat64).to(dtype);
}

torch::Tensor DisparityPlanes::reversed_tensor(torch::Dtype dtype) const {
  return tensor(dtype).flip({0});
}

}  // namespace atvs::geometry
