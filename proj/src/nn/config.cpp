#include "atvs/nn/config.hpp"

#include <stdexcept>

namespace atvs::nn {

std::string to_string(AggregatorKind kind) {
  switch (kind) {
    case AggregatorKind::kNone: return "none";
    case AggregatorKind::kMean: return "mean";
    case AggregatorKind::kAttSets: return "attsets";
    case AggregatorKind::kAam: return "aam";
  }
  return "unknown";
}

AggregatorKind aggregator_from_string(const std::string& name) {
  if (name == "none") return AggregatorKind::kNone;
  if (name == "mean") return AggregatorKind::kMean;
  if (name == "attsets") return AggregatorKind::kAttSets;
  if (name == "aam") return AggregatorKind::kAam;
  throw std::invalid_argument("unknown aggregator '" + name + "' (none|mean|attsets|aam)");
}

void NetworkConfig::validate() const {
  if (feature_channels < 2 || feature_channels % 2 != 0)
    throw std::invalid_argument("feature_channels must be a positive even number");
  if (low_level_channels < 1 || base_width < 1)
    throw std::invalid_argument("channel counts must be positive");
  if (crm_stacks < 1) throw std::invalid_argument("crm_stacks must be >= 1");
  if (spp_pool_sizes.empty()) throw std::invalid_argument("at least one SPP pool size is required");
  for (int p : spp_pool_sizes)
    if (p < 1) throw std::invalid_argument("SPP pool sizes must be positive");
  if (second_aggregator == AggregatorKind::kNone)
    throw std::invalid_argument("the second aggregation point cannot be disabled");
  (void)planes();
}

geometry::DisparityPlanes NetworkConfig::planes() const {
  return geometry::DisparityPlanes(d_min, delta, plane_count);
}

NetworkConfig NetworkConfig::full_scale() {
  NetworkConfig c;
  c.feature_channels = 32;
  c.base_width = 32;
  c.plane_count = 128;
  c.spp_pool_sizes = {8, 16, 32, 64};
  return c;
}

void to_json(nlohmann::json& j, const NetworkConfig& c) {
  j = nlohmann::json{
      {"feature_channels", c.feature_channels},
      {"low_level_channels", c.low_level_channels},
      {"base_width", c.base_width},
      {"crm_stacks", c.crm_stacks},
      {"spp_pool_sizes", c.spp_pool_sizes},
      {"d_min", c.d_min},
      {"delta", c.delta},
      {"plane_count", c.plane_count},
      {"refinement",
       {{"photometric", c.refinement.photometric},
        {"geometric", c.refinement.geometric},
        {"visual_hull", c.refinement.visual_hull},
        {"detach_geometry", c.refinement.detach_geometry}}},
      {"first_aggregator", to_string(c.first_aggregator)},
      {"second_aggregator", to_string(c.second_aggregator)},
  };
}

void from_json(const nlohmann::json& j, NetworkConfig& c) {
  NetworkConfig d;
  c.feature_channels = j.value("feature_channels", d.feature_channels);
  c.low_level_channels = j.value("low_level_channels", d.low_level_channels);
  c.base_width = j.value("base_width", d.base_width);
  c.crm_stacks = j.value("crm_stacks", d.crm_stacks);
  c.spp_pool_sizes = j.value("spp_pool_sizes", d.spp_pool_sizes);
  c.d_min = j.value("d_min", d.d_min);
  c.delta = j.value("delta", d.delta);
  c.plane_count = j.value("plane_count", d.plane_count);
  if (j.contains("refinement")) {
    const auto& r = j.at("refinement");
    c.refinement.photometric = r.value("photometric", true);
    c.refinement.geometric = r.value("geometric", true);
    c.refinement.visual_hull = r.value("visual_hull", true);
    c.refinement.detach_geometry = r.value("detach_geometry", true);
  }
  c.first_aggregator = aggregator_from_string(j.value("first_aggregator", std::string("aam")));
  c.second_aggregator = aggregator_from_string(j.value("second_aggregator", std::string("aam")));
}

}  // namespace atvs::nn
