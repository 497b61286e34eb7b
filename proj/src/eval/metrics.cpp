#include "atvs/eval/metrics.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <stdexcept>

#include <torch/torch.h>

#include "atvs/geometry/warp.hpp"
#include "atvs/training/loss.hpp"
#include "atvs/training/trainer.hpp"

namespace atvs::eval {

MetricReport compute_metrics(const torch::Tensor& pred, const torch::Tensor& gt, double delta_threshold) {
  if (pred.sizes() != gt.sizes())
    throw std::invalid_argument("prediction " + c10::str(pred.sizes()) + " and ground truth " +
                                c10::str(gt.sizes()) + " differ in shape");
  if (!(delta_threshold > 0.0)) throw std::invalid_argument("delta threshold must be positive");

  const auto p = pred.detach().to(torch::kCPU, torch::kFloat64);
  const auto g = gt.detach().to(torch::kCPU, torch::kFloat64);
  const auto mask = training::valid_mask(g) & training::valid_mask(p);
  MetricReport r;
  r.pixel_count = mask.sum().item<int64_t>();
  if (r.pixel_count == 0) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    r.l1 = r.l1_inv = r.l1_rel = r.sc_inv = nan;
    r.inlier.fill(nan);
    r.empty = true;
    return r;
  }
  const auto d = p.masked_select(mask);
  const auto d_gt = g.masked_select(mask);
  const auto z = d.reciprocal();
  const auto z_gt = d_gt.reciprocal();
  const auto disp_err = (d - d_gt).abs();
  r.l1 = (z - z_gt).abs().mean().item<double>();
  r.l1_inv = disp_err.mean().item<double>();
  r.l1_rel = ((z - z_gt).abs() / z_gt).mean().item<double>();
  const auto log_diff = z.log() - z_gt.log();
  const double m1 = log_diff.mean().item<double>();
  const double m2 = log_diff.square().mean().item<double>();
  r.sc_inv = std::sqrt(std::max(0.0, m2 - m1 * m1));
  for (std::size_t k = 0; k < kInlierThresholds.size(); ++k)
    r.inlier[k] = 100.0 * disp_err.lt(kInlierThresholds[k] * delta_threshold).to(torch::kFloat64).mean().item<double>();
  return r;
}

MetricReport mean_report(const std::vector<MetricReport>& reports) {
  MetricReport m;
  int n = 0;
  for (const auto& r : reports) {
    if (r.empty) continue;
    m.l1 += r.l1;
    m.l1_inv += r.l1_inv;
    m.l1_rel += r.l1_rel;
    m.sc_inv += r.sc_inv;
    for (std::size_t k = 0; k < m.inlier.size(); ++k) m.inlier[k] += r.inlier[k];
    m.pixel_count += r.pixel_count;
    ++n;
  }
  if (n == 0) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    m.l1 = m.l1_inv = m.l1_rel = m.sc_inv = nan;
    m.inlier.fill(nan);
    m.empty = true;
    return m;
  }
  m.l1 /= n;
  m.l1_inv /= n;
  m.l1_rel /= n;
  m.sc_inv /= n;
  for (auto& v : m.inlier) v /= n;
  return m;
}

torch::Tensor upsample_disparity(const torch::Tensor& disparity, int scale, int64_t height, int64_t width) {
  const auto b = disparity.size(0), h = disparity.size(1), w = disparity.size(2);
  const auto opts = disparity.options();
  const auto xs = (torch::arange(width, opts) / scale).clamp(0, w - 1);
  const auto ys = (torch::arange(height, opts) / scale).clamp(0, h - 1);
  const auto grid = torch::stack(torch::meshgrid({ys, xs}, "ij"), -1).flip(-1);  // (x, y)
  const auto coords = grid.unsqueeze(0).expand({b, height, width, 2});
  return geometry::bilinear_sample(disparity.unsqueeze(1), coords).squeeze(1);
}

EvalResult evaluate_dataset(const nn::Checkpoint& checkpoint, const std::vector<synth::MVSample>& data,
                            const EvalOptions& options) {
  if (options.views < 1) throw std::invalid_argument("need at least one source view");
  const double threshold =
      options.delta_threshold > 0.0 ? options.delta_threshold : checkpoint.config.delta;
  auto model = training::load_model(checkpoint);
  const int scale = nn::NetworkConfig::kFeatureScale;

  EvalResult result;
  std::vector<MetricReport> refined, initial;
  for (std::size_t s = 0; s < data.size(); ++s) {
    const auto& sample = data[s];
    if (sample.source_count() < static_cast<std::size_t>(options.views))
      throw std::invalid_argument("sample '" + sample.id + "' has " +
                                  std::to_string(sample.source_count()) + " sources, need " +
                                  std::to_string(options.views));
    training::Selection pick{s, 0, {}};
    for (int n = 1; n <= options.views; ++n) pick.sources.push_back(static_cast<std::size_t>(n));
    const auto batch = training::make_batch(data, {pick});
    const auto out = training::predict(model, batch);
    const auto& gt = sample.views[0].disparity;
    const auto h = gt.size(0), w = gt.size(1);
    auto full = [&](const torch::Tensor& d) { return upsample_disparity(d, scale, h, w)[0]; };

    SampleMetrics m;
    m.sample_id = sample.id;
    m.refined = compute_metrics(full(out.refined.disparity), gt, threshold);
    m.initial = compute_metrics(full(out.branches[0].ref.estimate.disparity), gt, threshold);
    refined.push_back(m.refined);
    initial.push_back(m.initial);
    result.samples.push_back(std::move(m));
  }
  result.refined = mean_report(refined);
  result.initial = mean_report(initial);
  return result;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<SampleMetrics>& samples,
                       bool refined) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "sample_id,l1,l1_inv,l1_rel,sc_inv,in1,in3,in5,in10\n";
  out << std::setprecision(9);
  for (const auto& s : samples) {
    const auto& r = refined ? s.refined : s.initial;
    out << s.sample_id << "," << r.l1 << "," << r.l1_inv << "," << r.l1_rel << "," << r.sc_inv;
    for (double v : r.inlier) out << "," << v;
    out << "\n";
  }
}

void print_table(std::ostream& out, const std::vector<std::pair<std::string, MetricReport>>& rows) {
  std::size_t name_width = 6;
  for (const auto& [name, _] : rows) name_width = std::max(name_width, name.size());
  out << std::left << std::setw(static_cast<int>(name_width)) << "method" << std::right;
  for (const char* col : {"L1", "L1-inv", "L1-rel", "Sc-inv", "<1d", "<3d", "<5d", "<10d"})
    out << std::setw(10) << col;
  out << "\n" << std::fixed << std::setprecision(4);
  for (const auto& [name, r] : rows) {
    out << std::left << std::setw(static_cast<int>(name_width)) << name << std::right;
    for (double v : {r.l1, r.l1_inv, r.l1_rel, r.sc_inv}) out << std::setw(10) << v;
    out << std::setprecision(2);
    for (double v : r.inlier) out << std::setw(10) << v;
    out << std::setprecision(4) << "\n";
  }
  out.unsetf(std::ios::fixed);
}

}  // namespace atvs::eval
