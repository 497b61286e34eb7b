// atvs: command-line entry point for dataset generation, training, inference,
// evaluation, fusion and diagnostics.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <torch/torch.h>

#include "atvs/diagnostics/gradcheck.hpp"
#include "atvs/diagnostics/selftest.hpp"
#include "atvs/errors.hpp"
#include "atvs/eval/metrics.hpp"
#include "atvs/fusion/fusion.hpp"
#include "atvs/synth/sample.hpp"
#include "atvs/synth/scene.hpp"
#include "atvs/training/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace atvs;

namespace {

// Binds CLI options to json keys so a snapshot can be replayed with --config.
class Options {
 public:
  explicit Options(CLI::App* app) : app_(app) {
    app_->add_option("--config", config_path_, "Resolved-config snapshot to replay (JSON)")
        ->check(CLI::ExistingFile);
  }

  template <typename T>
  CLI::Option* add(const std::string& flag, const std::string& key, T& target, const std::string& help) {
    auto* opt = app_->add_option(flag, target, help)->capture_default_str();
    bind(opt, key, target);
    return opt;
  }

  CLI::Option* flag(const std::string& flag, const std::string& key, bool& target, const std::string& help) {
    auto* opt = app_->add_flag(flag, target, help);
    bind(opt, key, target);
    return opt;
  }

  // Fills options not given on the command line from --config.
  void resolve() {
    if (config_path_.empty()) return;
    std::ifstream in(config_path_);
    const json snapshot = json::parse(in);
    const json& values = snapshot.contains("options") ? snapshot.at("options") : snapshot;
    for (const auto& b : bindings_)
      if (b.option->count() == 0 && values.contains(b.key)) b.load(values.at(b.key));
  }

  json values() const {
    json j = json::object();
    // out is excluded from the snapshot
    for (const auto& b : bindings_)
      if (b.key != "out") j[b.key] = b.save();
    return j;
  }

  CLI::App* app() const { return app_; }

 private:
  struct Binding {
    CLI::Option* option;
    std::string key;
    std::function<void(const json&)> load;
    std::function<json()> save;
  };

  template <typename T>
  void bind(CLI::Option* opt, const std::string& key, T& target) {
    bindings_.push_back({opt, key, [&target](const json& j) { target = j.get<T>(); },
                         [&target] { return json(target); }});
  }

  CLI::App* app_;
  std::string config_path_;
  std::vector<Binding> bindings_;
};

void write_snapshot(const fs::path& out, const std::string& subcommand, const json& options,
                    const json& resolved = json::object()) {
  fs::create_directories(out);
  json j{{"subcommand", subcommand}, {"options", options}};
  if (!resolved.empty()) j["resolved"] = resolved;
  std::ofstream(out / "config.json") << j.dump(2) << "\n";
}

struct PlaneArgs {
  double d_min = 0.1;
  double delta = 0.025;
  int planes = 16;

  void add_to(Options& o) {
    o.add("--d-min", "d_min", d_min, "Disparity offset d_min");
    o.add("--delta", "delta", delta, "Plane interval");
    o.add("--planes", "planes", planes, "Number of disparity planes D");
  }
};

// generate ------------------------------------------------------------------

struct GenerateArgs {
  std::string out = "data";
  std::uint64_t seed = 0;
  int count = 10;
  int views = 5;
  int width = 64;
  int height = 64;
  PlaneArgs planes;
};

synth::SceneOptions scene_options(const GenerateArgs& a) {
  synth::SceneOptions o;
  o.image_size = {a.width, a.height};
  o.source_views = a.views;
  o.d_min = a.planes.d_min;
  o.delta = a.planes.delta;
  o.plane_count = a.planes.planes;
  return o;
}

void require_path(const std::string& value, const char* flag) {
  if (value.empty()) throw CLI::RequiredError(flag);
}

int run_generate(const GenerateArgs& a, const json& options) {
  const auto names = synth::generate_dataset(a.out, a.seed, a.count, scene_options(a));
  write_snapshot(a.out, "generate", options);
  std::cout << "wrote " << names.size() << " samples to " << a.out << "\n";
  return 0;
}

// train ---------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string out = "run";
  std::string checkpoint;  // stage-1 weights for stage 2
  training::TrainConfig train;
  nn::NetworkConfig network;
  std::string aggregator = "aam";
  bool no_photometric = false;
  bool no_geometric = false;
  bool no_hull = false;
  bool fixed_pairs = false;
  int print_every = 50;
};

int run_train(TrainArgs& a, const json& options) {
  require_path(a.data, "--data");
  const auto data = synth::read_dataset(a.data);
  a.train.random_pairs = !a.fixed_pairs;
  a.train.validate();
  fs::create_directories(a.out);
  training::CsvLog log(fs::path(a.out) / "log.csv");
  auto on_step = [&](const training::StepLog& s) {
    log.append(s);
    if (a.print_every > 0 && (s.step % a.print_every == 0 || s.step == 1))
      std::cout << "step " << s.step << " loss " << s.loss << " lr " << s.lr << "\n";
    return true;
  };

  training::TrainResult result;
  json resolved{{"train", a.train}};
  if (a.train.stage == 1) {
    a.network.first_aggregator = nn::aggregator_from_string(a.aggregator);
    a.network.second_aggregator = a.network.first_aggregator;
    a.network.refinement.photometric = !a.no_photometric;
    a.network.refinement.geometric = !a.no_geometric;
    a.network.refinement.visual_hull = !a.no_hull;
    a.network.validate();
    resolved["network"] = a.network;
    write_snapshot(a.out, "train", options, resolved);
    result = training::train_stage1(data, a.train, a.network, on_step);
  } else {
    if (a.checkpoint.empty()) throw std::invalid_argument("stage 2 needs --checkpoint (stage-1 weights)");
    const auto stage1 = nn::load_checkpoint(a.checkpoint);
    resolved["network"] = stage1.config;
    write_snapshot(a.out, "train", options, resolved);
    result = training::train_stage2(data, stage1, a.train, on_step);
  }
  const auto path = fs::path(a.out) / "checkpoint.bin";
  nn::save_checkpoint(result.checkpoint, path);
  std::cout << "trained " << result.steps << " steps, wrote " << path.string() << "\n";
  return 0;
}

// infer ---------------------------------------------------------------------

struct InferArgs {
  std::string data;
  std::string checkpoint;
  std::string out = "predictions";
  int views = 2;
  bool all_views = false;
  std::string aggregator;
};

nn::Checkpoint load_for_inference(const std::string& path, const std::string& aggregator) {
  auto ckpt = nn::load_checkpoint(path);
  if (!aggregator.empty()) {
    ckpt.config.first_aggregator = nn::aggregator_from_string(aggregator);
    ckpt.config.second_aggregator = ckpt.config.first_aggregator;
  }
  return ckpt;
}

void write_colormap(const fs::path& path, const torch::Tensor& disparity, double lo, double hi) {
  const auto d = disparity.to(torch::kFloat64).contiguous();
  const auto h = static_cast<int>(d.size(0)), w = static_cast<int>(d.size(1));
  cv::Mat gray(h, w, CV_8UC1);
  const auto acc = d.accessor<double, 2>();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double t = std::clamp((acc[y][x] - lo) / (hi - lo), 0.0, 1.0);
      gray.at<std::uint8_t>(y, x) = static_cast<std::uint8_t>(std::lround(t * 255.0));
    }
  cv::Mat color;
  cv::applyColorMap(gray, color, cv::COLORMAP_JET);
  if (!cv::imwrite(path.string(), color)) throw std::runtime_error("cannot write " + path.string());
}

int run_infer(const InferArgs& a, const json& options) {
  require_path(a.checkpoint, "--checkpoint");
  require_path(a.data, "--data");
  const auto data = synth::read_dataset(a.data);
  const auto ckpt = load_for_inference(a.checkpoint, a.aggregator);
  auto model = training::load_model(ckpt);
  const auto planes = ckpt.config.planes();
  write_snapshot(a.out, "infer", options, {{"network", ckpt.config}});
  for (std::size_t s = 0; s < data.size(); ++s) {
    const auto& sample = data[s];
    const std::size_t total = sample.views.size();
    if (total < static_cast<std::size_t>(a.views) + 1)
      throw std::invalid_argument("sample '" + sample.id + "' has too few views");
    const std::size_t refs = a.all_views ? total : 1;
    const auto dir = fs::path(a.out) / sample.id;
    fs::create_directories(dir);
    for (std::size_t r = 0; r < refs; ++r) {
      training::Selection pick{s, r, {}};
      for (std::size_t k = 1; pick.sources.size() < static_cast<std::size_t>(a.views); ++k)
        pick.sources.push_back((r + k) % total);
      const auto out = training::predict(model, training::make_batch(data, {pick}));
      const auto& gt = sample.views[r].disparity;
      const auto full = eval::upsample_disparity(out.refined.disparity, nn::NetworkConfig::kFeatureScale,
                                                 gt.size(0), gt.size(1))[0];
      const auto name = synth::view_name(r);
      synth::write_pfm(dir / (name + ".pfm"), full);
      write_colormap(dir / (name + ".png"), full, planes.lowest(), planes.highest());
    }
  }
  std::cout << "wrote predictions for " << data.size() << " samples to " << a.out << "\n";
  return 0;
}

// eval ----------------------------------------------------------------------

struct EvalArgs {
  std::string data;
  std::string checkpoint;
  std::string predictions;
  std::string out = "eval";
  int views = 2;
  double threshold = 0.0;
  std::string aggregator;
};

int run_eval(const EvalArgs& a, const json& options) {
  require_path(a.data, "--data");
  if (a.checkpoint.empty() == a.predictions.empty())
    throw std::invalid_argument("give exactly one of --checkpoint and --predictions");
  const auto data = synth::read_dataset(a.data);
  fs::create_directories(a.out);
  std::vector<std::pair<std::string, eval::MetricReport>> rows;
  std::vector<eval::SampleMetrics> samples;
  if (!a.checkpoint.empty()) {
    const auto ckpt = load_for_inference(a.checkpoint, a.aggregator);
    write_snapshot(a.out, "eval", options, {{"network", ckpt.config}});
    const auto result = eval::evaluate_dataset(ckpt, data, {a.views, a.threshold});
    samples = result.samples;
    rows = {{"refined", result.refined}, {"initial", result.initial}};
    eval::write_metrics_csv(fs::path(a.out) / "metrics_initial.csv", samples, false);
  } else {
    write_snapshot(a.out, "eval", options);
    const double thr = a.threshold > 0.0 ? a.threshold : 0.025;
    std::vector<eval::MetricReport> reports;
    for (const auto& sample : data) {
      const auto pred = synth::read_pfm(fs::path(a.predictions) / sample.id / (synth::view_name(0) + ".pfm"));
      eval::SampleMetrics m;
      m.sample_id = sample.id;
      m.refined = eval::compute_metrics(pred, sample.views[0].disparity, thr);
      m.initial = m.refined;
      reports.push_back(m.refined);
      samples.push_back(m);
    }
    rows = {{"prediction", eval::mean_report(reports)}};
  }
  eval::write_metrics_csv(fs::path(a.out) / "metrics.csv", samples, true);
  eval::print_table(std::cout, rows);
  return 0;
}

// fuse ----------------------------------------------------------------------

struct FuseArgs {
  std::string data;
  std::string predictions;  // empty: ground-truth disparities
  std::string out = "clouds";
  int min_views = -1;
  double tolerance = 0.0;
};

int run_fuse(const FuseArgs& a, const json& options) {
  require_path(a.data, "--data");
  const auto root = fs::path(a.data);
  const auto names = synth::read_index(root);
  write_snapshot(a.out, "fuse", options);
  for (const auto& name : names) {
    const auto sample = synth::read_sample(root / name);
    std::vector<fusion::FusionView> views;
    for (std::size_t v = 0; v < sample.views.size(); ++v) {
      const auto& view = sample.views[v];
      auto disp = view.disparity;
      if (!a.predictions.empty())
        disp = synth::read_pfm(fs::path(a.predictions) / sample.id / (synth::view_name(v) + ".pfm"));
      views.push_back({disp, view.camera, view.image});
    }
    const double tol = a.tolerance > 0.0 ? a.tolerance : 0.025;
    const int min_views = a.min_views >= 0 ? a.min_views : fusion::default_min_consistent_views(views.size());
    const auto masks = fusion::consistency_filter(views, min_views, tol);
    const auto cloud = fusion::fuse_point_cloud(views, masks, tol);
    const auto path = fs::path(a.out) / (sample.id + ".ply");
    fusion::write_ply(path, cloud);
    std::cout << sample.id << ": " << cloud.points.size() << " points -> " << path.string() << "\n";
  }
  return 0;
}

// diagnostics ---------------------------------------------------------------

struct GradcheckArgs {
  std::uint64_t seed = 0;
  double tolerance = 1e-4;
  double eps = 1e-5;
  std::string out = "gradcheck";
};

int run_gradcheck(const GradcheckArgs& a, const json& options) {
  write_snapshot(a.out, "gradcheck", options);
  bool ok = true;
  for (const auto& r : diagnostics::run_gradcheck_suite(a.seed, a.tolerance, a.eps)) {
    std::cout << (r.passed ? "ok   " : "FAIL ") << r.name << " max relative error " << r.max_relative_error
              << "\n";
    ok = ok && r.passed;
  }
  return ok ? 0 : 1;
}

struct SelftestArgs {
  std::string out = "selftest";
};

int run_selftest(const SelftestArgs& a, const json& options) {
  write_snapshot(a.out, "selftest", options);
  int failed = 0;
  for (const auto& r : diagnostics::run_selftest(a.out)) {
    if (r.passed) {
      std::cout << "ok   " << r.property << "\n";
    } else {
      ++failed;
      std::cout << "FAIL " << r.property << ": " << r.detail << "\n";
    }
  }
  if (failed > 0) std::cerr << failed << " invariant(s) violated\n";
  return failed > 0 ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-view stereo depth estimation with order-invariant aggregation"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  GenerateArgs gen;
  auto* gen_cmd = app.add_subcommand("generate", "Write a synthetic multi-view dataset");
  Options gen_opts(gen_cmd);
  gen_opts.add("--out", "out", gen.out, "Output dataset directory");
  gen_opts.add("--seed", "seed", gen.seed, "Base seed");
  gen_opts.add("--count", "count", gen.count, "Number of samples")->check(CLI::PositiveNumber);
  gen_opts.add("--views", "views", gen.views, "Source views per sample")->check(CLI::PositiveNumber);
  gen_opts.add("--width", "width", gen.width, "Image width")->check(CLI::PositiveNumber);
  gen_opts.add("--height", "height", gen.height, "Image height")->check(CLI::PositiveNumber);
  gen.planes.add_to(gen_opts);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train stage 1 (two-view) or stage 2 (aggregation)");
  Options train_opts(train_cmd);
  train_opts.add("--stage", "stage", train.train.stage, "Training stage")->check(CLI::IsMember({1, 2}));
  train_opts.add("--data", "data", train.data, "Dataset directory");
  train_opts.add("--out", "out", train.out, "Run directory (checkpoint.bin, log.csv, config.json)");
  train_opts.add("--checkpoint", "checkpoint", train.checkpoint, "Stage-1 checkpoint (stage 2)");
  train_opts.add("--iterations", "iterations", train.train.iterations, "Optimizer steps");
  train_opts.add("--lr", "learning_rate", train.train.learning_rate, "Initial learning rate");
  train_opts.add("--decay", "decay_factor", train.train.decay_factor, "Multiplicative lr decay");
  train_opts.add("--decay-interval", "decay_interval", train.train.decay_interval, "Steps between decays");
  train_opts.add("--batch", "batch_size", train.train.batch_size, "Mini-batch size");
  train_opts.add("--seed", "seed", train.train.seed, "Seed for initialization and data order");
  train_opts.add("--views", "views", train.train.views, "Source views per reference (stage 2)");
  train_opts.add("--early-stop", "early_stop_l1", train.train.early_stop_l1,
                 "Stop when the running refined L1 drops below this (0 = off)");
  train_opts.add("--lambda", "lambda", train.train.loss.lambda, "Weight of the refined output loss");
  train_opts.add("--omega", "omega", train.train.loss.omega, "Weights of the intermediate losses");
  train_opts.flag("--fixed-pairs", "fixed_pairs", train.fixed_pairs,
                  "Stage 1: always use views (0, 1) instead of random pairs");
  train_opts.add("--features", "feature_channels", train.network.feature_channels, "Feature channels F");
  train_opts.add("--low-level", "low_level_channels", train.network.low_level_channels,
                 "Low-level feature channels");
  train_opts.add("--width", "base_width", train.network.base_width, "Filtered cost volume channels");
  train_opts.add("--stacks", "crm_stacks", train.network.crm_stacks, "Stacked hourglasses in the CRM");
  train_opts.add("--d-min", "d_min", train.network.d_min, "Disparity offset d_min");
  train_opts.add("--delta", "delta", train.network.delta, "Plane interval");
  train_opts.add("--planes", "planes", train.network.plane_count, "Number of disparity planes D");
  train_opts.add("--aggregator", "aggregator", train.aggregator, "Aggregator: aam, attsets or mean")
      ->check(CLI::IsMember({"aam", "attsets", "mean"}));
  train_opts.flag("--no-photometric", "no_photometric", train.no_photometric, "Drop V_p and e_p");
  train_opts.flag("--no-geometric", "no_geometric", train.no_geometric, "Drop V_g and e_g");
  train_opts.flag("--no-hull", "no_hull", train.no_hull, "Drop the visual hull");
  train_opts.add("--print-every", "print_every", train.print_every, "Progress line interval (0 = quiet)");

  InferArgs infer;
  auto* infer_cmd = app.add_subcommand("infer", "Write disparity PFMs and colormap PNGs");
  Options infer_opts(infer_cmd);
  infer_opts.add("--data", "data", infer.data, "Dataset directory");
  infer_opts.add("--checkpoint", "checkpoint", infer.checkpoint, "Model checkpoint");
  infer_opts.add("--out", "out", infer.out, "Output directory");
  infer_opts.add("--views", "views", infer.views, "Source views N")->check(CLI::PositiveNumber);
  infer_opts.flag("--all-views", "all_views", infer.all_views, "Predict every view as reference");
  infer_opts.add("--aggregator", "aggregator", infer.aggregator, "Override the aggregator kind")
      ->check(CLI::IsMember({"aam", "attsets", "mean"}));

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Compute metrics against ground truth");
  Options eval_opts(eval_cmd);
  eval_opts.add("--data", "data", ev.data, "Dataset directory");
  eval_opts.add("--checkpoint", "checkpoint", ev.checkpoint, "Model checkpoint");
  eval_opts.add("--predictions", "predictions", ev.predictions, "Directory written by infer");
  eval_opts.add("--out", "out", ev.out, "Output directory (metrics.csv)");
  eval_opts.add("--views", "views", ev.views, "Source views N")->check(CLI::PositiveNumber);
  eval_opts.add("--threshold", "threshold", ev.threshold, "Inlier threshold (0 = model delta)");
  eval_opts.add("--aggregator", "aggregator", ev.aggregator, "Override the aggregator kind")
      ->check(CLI::IsMember({"aam", "attsets", "mean"}));

  FuseArgs fuse;
  auto* fuse_cmd = app.add_subcommand("fuse", "Fuse per-view disparities into PLY point clouds");
  Options fuse_opts(fuse_cmd);
  fuse_opts.add("--data", "data", fuse.data, "Dataset directory");
  fuse_opts.add("--predictions", "predictions", fuse.predictions,
                "Directory written by infer --all-views (default: ground truth)");
  fuse_opts.add("--out", "out", fuse.out, "Output directory");
  fuse_opts.add("--min-views", "min_views", fuse.min_views, "Consistent views required (-1 = default)");
  fuse_opts.add("--tolerance", "tolerance", fuse.tolerance, "Disparity tolerance (0 = 0.025)");

  GradcheckArgs grad;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  Options grad_opts(grad_cmd);
  grad_opts.add("--seed", "seed", grad.seed, "Seed for random inputs and weights");
  grad_opts.add("--tolerance", "tolerance", grad.tolerance, "Maximum relative error");
  grad_opts.add("--eps", "eps", grad.eps, "Finite-difference step");
  grad_opts.add("--out", "out", grad.out, "Directory for the config snapshot");

  SelftestArgs self;
  auto* self_cmd = app.add_subcommand("selftest", "Check structural invariants of every module");
  Options self_opts(self_cmd);
  self_opts.add("--out", "out", self.out, "Scratch directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen_cmd) {
      gen_opts.resolve();
      return run_generate(gen, gen_opts.values());
    }
    if (*train_cmd) {
      train_opts.resolve();
      return run_train(train, train_opts.values());
    }
    if (*infer_cmd) {
      infer_opts.resolve();
      return run_infer(infer, infer_opts.values());
    }
    if (*eval_cmd) {
      eval_opts.resolve();
      return run_eval(ev, eval_opts.values());
    }
    if (*fuse_cmd) {
      fuse_opts.resolve();
      return run_fuse(fuse, fuse_opts.values());
    }
    if (*grad_cmd) {
      grad_opts.resolve();
      return run_gradcheck(grad, grad_opts.values());
    }
    self_opts.resolve();
    return run_selftest(self, self_opts.values());
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n" << app.help();
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
