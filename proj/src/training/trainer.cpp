#include "atvs/training/trainer.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <torch/torch.h>

namespace atvs::training {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  if (stage != 1 && stage != 2) throw std::invalid_argument("stage must be 1 or 2");
  if (learning_rate <= 0.0) throw std::invalid_argument("learning_rate must be positive");
  if (decay_factor <= 0.0) throw std::invalid_argument("decay_factor must be positive");
  if (decay_interval < 1) throw std::invalid_argument("decay_interval must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (iterations < 0) throw std::invalid_argument("iterations must be >= 0");
  if (views < 1) throw std::invalid_argument("views must be >= 1");
  loss.validate();
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"stage", c.stage},
                     {"learning_rate", c.learning_rate},
                     {"decay_factor", c.decay_factor},
                     {"decay_interval", c.decay_interval},
                     {"batch_size", c.batch_size},
                     {"iterations", c.iterations},
                     {"seed", c.seed},
                     {"views", c.views},
                     {"random_pairs", c.random_pairs},
                     {"early_stop_l1", c.early_stop_l1},
                     {"optimizer", {{"name", "rmsprop"}, {"alpha", c.rmsprop_alpha}, {"eps", c.rmsprop_eps}}},
                     {"loss", c.loss}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.stage = j.value("stage", c.stage);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.decay_factor = j.value("decay_factor", c.decay_factor);
  c.decay_interval = j.value("decay_interval", c.decay_interval);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.iterations = j.value("iterations", c.iterations);
  c.seed = j.value("seed", c.seed);
  c.views = j.value("views", c.views);
  c.random_pairs = j.value("random_pairs", c.random_pairs);
  c.early_stop_l1 = j.value("early_stop_l1", c.early_stop_l1);
  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    if (o.value("name", std::string("rmsprop")) != "rmsprop")
      throw std::invalid_argument("only the rmsprop optimizer is supported");
    c.rmsprop_alpha = o.value("alpha", c.rmsprop_alpha);
    c.rmsprop_eps = o.value("eps", c.rmsprop_eps);
  }
  if (j.contains("loss")) c.loss = j.at("loss").get<LossWeights>();
}

double learning_rate_at(const TrainConfig& config, int step) {
  if (step < 1) throw std::invalid_argument("steps are counted from 1");
  return config.learning_rate * std::pow(config.decay_factor, (step - 1) / config.decay_interval);
}

Batch make_batch(const std::vector<synth::MVSample>& data, const std::vector<Selection>& picks) {
  if (picks.empty()) throw std::invalid_argument("empty batch");
  const auto n = picks.front().sources.size();
  std::vector<torch::Tensor> refs, gts;
  std::vector<geometry::CameraModel> ref_cams;
  std::vector<std::vector<torch::Tensor>> src_images(n);
  std::vector<std::vector<geometry::CameraModel>> src_cams(n);
  for (const auto& p : picks) {
    if (p.sources.size() != n) throw std::invalid_argument("batch mixes source counts");
    const auto& views = data.at(p.sample).views;
    refs.push_back(views.at(p.ref).image);
    ref_cams.push_back(views.at(p.ref).camera);
    gts.push_back(views.at(p.ref).disparity);
    for (std::size_t i = 0; i < n; ++i) {
      src_images[i].push_back(views.at(p.sources[i]).image);
      src_cams[i].push_back(views.at(p.sources[i]).camera);
    }
  }
  Batch batch;
  batch.ref_image = torch::stack(refs);
  batch.ref_camera = geometry::CameraBatch::from(ref_cams);
  for (std::size_t i = 0; i < n; ++i)
    batch.sources.push_back({torch::stack(src_images[i]), geometry::CameraBatch::from(src_cams[i])});
  batch.gt = downsample_nearest_valid(torch::stack(gts), nn::NetworkConfig::kFeatureScale);
  return batch;
}

CsvLog::CsvLog(const fs::path& path) : path_(path) {
  if (!fs::exists(path_) || fs::file_size(path_) == 0) {
    std::ofstream out(path_, std::ios::app);
    out << "step,stage,loss,lr\n";
  }
}

void CsvLog::append(const StepLog& e) {
  std::ofstream out(path_, std::ios::app);
  out.precision(9);
  out << e.step << "," << e.stage << "," << e.loss << "," << e.lr << "\n";
}

namespace {

void check_dataset(const std::vector<synth::MVSample>& data, std::size_t min_views) {
  if (data.empty()) throw std::invalid_argument("training dataset is empty");
  for (const auto& s : data)
    if (s.views.size() < min_views)
      throw std::invalid_argument("sample '" + s.id + "' has " + std::to_string(s.views.size()) +
                                  " views, need " + std::to_string(min_views));
}

// Deterministic epoch-wise shuffled sample order.
class SampleOrder {
 public:
  SampleOrder(std::size_t count, std::mt19937_64& rng) : order_(count), rng_(rng) { refill(); }
  std::size_t next() {
    if (pos_ == order_.size()) refill();
    return order_[pos_++];
  }

 private:
  void refill() {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    for (std::size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[rng_() % i]);
    pos_ = 0;
  }
  std::vector<std::size_t> order_;
  std::mt19937_64& rng_;
  std::size_t pos_ = 0;
};

// Picks `count` distinct indices from [0, n) \ {skip} in random order.
std::vector<std::size_t> pick_views(std::size_t n, std::size_t skip, std::size_t count,
                                    std::mt19937_64& rng) {
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < n; ++i)
    if (i != skip) pool.push_back(i);
  for (std::size_t i = 0; i < count; ++i) std::swap(pool[i], pool[i + rng() % (pool.size() - i)]);
  pool.resize(count);
  return pool;
}

torch::optim::RMSprop make_optimizer(std::vector<torch::Tensor> params, const TrainConfig& c) {
  return torch::optim::RMSprop(
      std::move(params),
      torch::optim::RMSpropOptions(c.learning_rate).alpha(c.rmsprop_alpha).eps(c.rmsprop_eps));
}

void set_lr(torch::optim::Optimizer& opt, double lr) {
  for (auto& group : opt.param_groups())
    static_cast<torch::optim::RMSpropOptions&>(group.options()).lr(lr);
}

}  // namespace

TrainResult train_stage1(const std::vector<synth::MVSample>& data, const TrainConfig& config,
                         const nn::NetworkConfig& network, const StepCallback& on_step) {
  config.validate();
  network.validate();
  check_dataset(data, 2);
  if (config.loss.omega.size() != static_cast<std::size_t>(network.crm_stacks))
    throw std::invalid_argument("omega needs one weight per CRM stack");

  torch::manual_seed(config.seed);
  nn::TwoViewNet net(network);
  net->train();
  auto optimizer = make_optimizer(net->parameters(), config);
  std::mt19937_64 rng(config.seed);
  SampleOrder order(data.size(), rng);

  TrainResult result;
  for (int step = 1; step <= config.iterations; ++step) {
    std::vector<Selection> picks;
    for (int b = 0; b < config.batch_size; ++b) {
      Selection s;
      s.sample = order.next();
      const auto views = data[s.sample].views.size();
      s.ref = config.random_pairs ? rng() % views : 0;
      s.sources = config.random_pairs ? pick_views(views, s.ref, 1, rng) : std::vector<std::size_t>{1};
      picks.push_back(std::move(s));
    }
    const auto batch = make_batch(data, picks);
    const double lr = learning_rate_at(config, step);
    set_lr(optimizer, lr);

    const auto out = net->forward(batch.ref_image, batch.sources[0].image, batch.ref_camera,
                                  batch.sources[0].camera);
    const auto loss =
        total_loss(out.refined.disparity, out.ref.stack_disparities, batch.gt, config.loss);
    const double refined_l1 = training::l1_loss(out.refined.disparity.detach(), batch.gt).value.item<double>();
    optimizer.zero_grad();
    loss.value.backward();
    optimizer.step();

    StepLog entry{step, 1, loss.value.item<double>(), lr, refined_l1};
    result.log.push_back(entry);
    result.steps = step;
    if (on_step && !on_step(entry)) break;
    if (config.early_stop_l1 > 0.0 && refined_l1 < config.early_stop_l1) break;
  }
  result.checkpoint = nn::make_checkpoint(*net, network, 1);
  return result;
}

aggregation::MultiViewNet load_model(const nn::Checkpoint& checkpoint) {
  aggregation::MultiViewNet model(checkpoint.config);
  const std::string prefix = checkpoint.stage == 1 ? "two_view." : "";
  const auto missing = nn::apply_checkpoint(*model, checkpoint, prefix);
  for (const auto& name : missing)
    if (name.rfind("two_view.", 0) == 0)
      throw std::invalid_argument("checkpoint lacks two-view parameter '" + name + "'");
  if (checkpoint.stage == 2 && !missing.empty())
    throw std::invalid_argument("stage-2 checkpoint lacks parameter '" + missing.front() + "'");
  model->eval();
  return model;
}

TrainResult train_stage2(const std::vector<synth::MVSample>& data, const nn::Checkpoint& stage1,
                         const TrainConfig& config, const StepCallback& on_step) {
  config.validate();
  if (stage1.stage != 1) throw std::invalid_argument("stage 2 starts from a stage-1 checkpoint");
  if (stage1.parameters.empty()) throw std::invalid_argument("stage-1 checkpoint has no weights");
  check_dataset(data, static_cast<std::size_t>(config.views) + 1);

  torch::manual_seed(config.seed);
  auto model = load_model(stage1);
  model->freeze_two_view(true);
  model->train();
  std::vector<torch::Tensor> params;
  for (auto& item : model->named_parameters())
    if (item.key().rfind("two_view.", 0) != 0) params.push_back(item.value());

  TrainResult result;
  std::mt19937_64 rng(config.seed);
  SampleOrder order(data.size(), rng);
  std::optional<torch::optim::RMSprop> optimizer;
  if (!params.empty()) optimizer.emplace(make_optimizer(params, config));
  const LossWeights refined_only{config.loss.lambda, {}};

  for (int step = 1; step <= config.iterations && optimizer; ++step) {
    std::vector<Selection> picks;
    for (int b = 0; b < config.batch_size; ++b) {
      Selection s;
      s.sample = order.next();
      s.ref = 0;
      s.sources = pick_views(data[s.sample].views.size(), 0, static_cast<std::size_t>(config.views), rng);
      picks.push_back(std::move(s));
    }
    const auto batch = make_batch(data, picks);
    const double lr = learning_rate_at(config, step);
    set_lr(*optimizer, lr);

    const auto out = model->forward(batch.ref_image, batch.ref_camera, batch.sources);
    const auto loss = total_loss(out.refined.disparity, {}, batch.gt, refined_only);
    const double refined_l1 = training::l1_loss(out.refined.disparity.detach(), batch.gt).value.item<double>();
    optimizer->zero_grad();
    loss.value.backward();
    optimizer->step();

    StepLog entry{step, 2, loss.value.item<double>(), lr, refined_l1};
    result.log.push_back(entry);
    result.steps = step;
    if (on_step && !on_step(entry)) break;
    if (config.early_stop_l1 > 0.0 && refined_l1 < config.early_stop_l1) break;
  }
  result.checkpoint = nn::make_checkpoint(*model, stage1.config, 2);
  return result;
}

aggregation::MultiViewOutput predict(aggregation::MultiViewNet& model, const Batch& batch) {
  torch::NoGradGuard no_grad;
  return model->forward(batch.ref_image, batch.ref_camera, batch.sources);
}

}  // namespace atvs::training
