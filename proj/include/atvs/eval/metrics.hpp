#pragma once

#include <array>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include <torch/types.h>

#include "atvs/nn/checkpoint.hpp"
#include "atvs/synth/sample.hpp"

namespace atvs::eval {

inline constexpr std::array<int, 4> kInlierThresholds{1, 3, 5, 10};

struct MetricReport {
  double l1 = 0.0;      // mean |z - z'| on depth
  double l1_inv = 0.0;  // mean |d - d'| on disparity
  double l1_rel = 0.0;  // mean |z - z'| / z'
  double sc_inv = 0.0;  // sqrt(mean g^2 - (mean g)^2), g = log z - log z'
  std::array<double, 4> inlier{};  // % of |d - d'| < k * threshold for k in kInlierThresholds
  std::int64_t pixel_count = 0;
  /// Set when no pixel was valid; the metric fields are then NaN.
  bool empty = false;
};

/// Metrics over pixels where the ground truth is valid and the prediction is positive
/// and finite. Maps are [H,W] or [B,H,W] of identical shape. Throws
/// std::invalid_argument for a shape mismatch or a non-positive threshold.
MetricReport compute_metrics(const torch::Tensor& pred, const torch::Tensor& gt, double delta_threshold);

/// Field-wise mean of non-empty reports (pixel counts summed).
MetricReport mean_report(const std::vector<MetricReport>& reports);

/// Bilinear upsampling of a [B,h,w] disparity predicted at 1/scale to [B,H,W], with
/// full-resolution pixel (x, y) reading the low-resolution map at (x/scale, y/scale),
/// clamped to the map's extent.
torch::Tensor upsample_disparity(const torch::Tensor& disparity, int scale, int64_t height, int64_t width);

struct SampleMetrics {
  std::string sample_id;
  MetricReport refined;
  MetricReport initial;  // d~ before refinement, same branch-0 reference
};

struct EvalResult {
  std::vector<SampleMetrics> samples;
  MetricReport refined;
  MetricReport initial;
};

struct EvalOptions {
  int views = 1;                 // source views per reference
  double delta_threshold = 0.0;  // 0: the plane interval of the model
};

/// Runs the model on view 0 of every sample with views 1..N as sources.
/// Throws std::invalid_argument when a sample has fewer than N sources.
EvalResult evaluate_dataset(const nn::Checkpoint& model, const std::vector<synth::MVSample>& data,
                            const EvalOptions& options);

/// "sample_id,l1,l1_inv,l1_rel,sc_inv,in1,in3,in5,in10"
void write_metrics_csv(const std::filesystem::path& path, const std::vector<SampleMetrics>& samples,
                       bool refined = true);
/// Aligned table in the column order of the CSV.
void print_table(std::ostream& out, const std::vector<std::pair<std::string, MetricReport>>& rows);

}  // namespace atvs::eval
