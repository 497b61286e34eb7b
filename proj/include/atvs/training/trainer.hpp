#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "atvs/aggregation/atvsnet.hpp"
#include "atvs/nn/checkpoint.hpp"
#include "atvs/synth/sample.hpp"
#include "atvs/training/loss.hpp"

namespace atvs::training {

struct TrainConfig {
  int stage = 1;
  double learning_rate = 1e-3;
  double decay_factor = 0.9;
  int decay_interval = 500;
  int batch_size = 2;
  int iterations = 3000;
  std::uint64_t seed = 0;
  int views = 3;  // source views per reference in stage 2
  /// Stage 1 draws random (reference, source) pairs from every sample; otherwise the
  /// pair is always (view 0, view 1).
  bool random_pairs = true;
  /// Stop once the running masked L1 of the refined output falls below this value (0 = off).
  double early_stop_l1 = 0.0;
  double rmsprop_alpha = 0.99;
  double rmsprop_eps = 1e-8;
  LossWeights loss;

  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// lr * decay^floor((step - 1) / interval), steps counted from 1.
double learning_rate_at(const TrainConfig& config, int step);

/// One supervised batch: reference images, N source views, ground truth at 1/4 scale.
struct Batch {
  torch::Tensor ref_image;                       // [B,3,H,W]
  geometry::CameraBatch ref_camera;
  std::vector<aggregation::SourceView> sources;  // N entries
  torch::Tensor gt;                              // [B,H/4,W/4]
};

/// Builds a batch from (sample, reference view, source views) selections.
struct Selection {
  std::size_t sample = 0;
  std::size_t ref = 0;
  std::vector<std::size_t> sources;
};
Batch make_batch(const std::vector<synth::MVSample>& data, const std::vector<Selection>& picks);

struct StepLog {
  int step;
  int stage;
  double loss;
  double lr;
  double refined_l1;
};

struct TrainResult {
  nn::Checkpoint checkpoint;
  std::vector<StepLog> log;
  int steps = 0;
};

/// Called after every step; return false to stop.
using StepCallback = std::function<bool(const StepLog&)>;

/// Writes "step,stage,loss,lr" lines (append-only; header when the file is new).
class CsvLog {
 public:
  explicit CsvLog(const std::filesystem::path& path);
  void append(const StepLog& entry);

 private:
  std::filesystem::path path_;
};

/// Trains the two-view network from scratch. Deterministic for a given seed.
/// Throws std::invalid_argument for an empty dataset or a sample with fewer than 2 views.
TrainResult train_stage1(const std::vector<synth::MVSample>& data, const TrainConfig& config,
                         const nn::NetworkConfig& network, const StepCallback& on_step = {});

/// Trains only the aggregation modules on top of frozen stage-1 weights.
/// Throws std::invalid_argument when `stage1` is not a complete stage-1 checkpoint.
TrainResult train_stage2(const std::vector<synth::MVSample>& data, const nn::Checkpoint& stage1,
                         const TrainConfig& config, const StepCallback& on_step = {});

/// Multi-view network restored from a stage-1 or stage-2 checkpoint. Stage-1 weights
/// leave the aggregation modules at their initialization.
aggregation::MultiViewNet load_model(const nn::Checkpoint& checkpoint);

/// Forward pass of a loaded model on one batch (no gradients).
aggregation::MultiViewOutput predict(aggregation::MultiViewNet& model, const Batch& batch);

}  // namespace atvs::training
