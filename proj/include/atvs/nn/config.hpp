#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "atvs/geometry/planes.hpp"

namespace atvs::nn {

/// Which refinement inputs are fed to the U-Net. Disabled terms are replaced by zeros
/// so the architecture (and checkpoint layout) stays the same across ablations.
struct RefinementInputs {
  bool photometric = true;  // V_p, e_p
  bool geometric = true;    // V_g, e_g
  bool visual_hull = true;  // H
  /// Treat the initial disparities as constants inside V_g, e_g, H and the projections.
  bool detach_geometry = true;
};

enum class AggregatorKind { kNone, kMean, kAttSets, kAam };

std::string to_string(AggregatorKind kind);
AggregatorKind aggregator_from_string(const std::string& name);

struct NetworkConfig {
  int feature_channels = 8;     // F
  int low_level_channels = 16;  // channels of the low-level feature tap
  int base_width = 8;           // also the channel count of the filtered cost volume
  int crm_stacks = 3;
  std::vector<int> spp_pool_sizes{4, 8};
  double d_min = 0.1;
  double delta = 0.025;
  int plane_count = 16;
  RefinementInputs refinement;
  AggregatorKind first_aggregator = AggregatorKind::kAam;   // after the CRM
  AggregatorKind second_aggregator = AggregatorKind::kAam;  // before the final output module

  static constexpr int kFeatureScale = 4;

  /// Throws std::invalid_argument on non-positive sizes, odd F, or a second
  /// aggregator of kind kNone.
  void validate() const;
  geometry::DisparityPlanes planes() const;

  /// Full-size configuration (F = 32, D = 128, SPP pools 8/16/32/64).
  static NetworkConfig full_scale();
};

void to_json(nlohmann::json& j, const NetworkConfig& c);
void from_json(const nlohmann::json& j, NetworkConfig& c);

}  // namespace atvs::nn
