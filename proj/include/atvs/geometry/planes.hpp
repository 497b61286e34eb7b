#pragma once

#include <vector>

#include <torch/types.h>

namespace atvs::geometry {

/// Fronto-parallel disparity planes d_i = d_min + i * delta, i = 1..count.
/// Note the first plane sits one interval above d_min.
class DisparityPlanes {
 public:
  /// Throws std::invalid_argument unless delta > 0, count >= 1 and d_min >= 0.
  DisparityPlanes(double d_min, double delta, int count);

  double d_min() const { return d_min_; }
  double delta() const { return delta_; }
  int count() const { return count_; }

  /// Disparity of plane `index` in [1, count].
  double at(int index) const { return d_min_ + index * delta_; }
  double lowest() const { return at(1); }
  double highest() const { return at(count_); }

  std::vector<double> values() const;
  /// Plane disparities as a [count] tensor.
  torch::Tensor tensor(torch::Dtype dtype = torch::kFloat32) const;
  /// Same range with the plane order reversed.
  torch::Tensor reversed_tensor(torch::Dtype dtype = torch::kFloat32) const;

 private:
  double d_min_;
  double delta_;
  int count_;
};

inline DisparityPlanes disparity_planes(double d_min, double delta, int count) {
  return DisparityPlanes(d_min, delta, count);
}

}  // namespace atvs::geometry
