#include "unest/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace unest {
namespace {

void require_same_shape(const ImageGrid& a, const ImageGrid& b,
                        const char* op) {
  if (a.height != b.height || a.width != b.width) {
    throw std::invalid_argument(std::string(op) + ": image size mismatch " +
                                std::to_string(a.height) + "x" +
                                std::to_string(a.width) + " vs " +
                                std::to_string(b.height) + "x" +
                                std::to_string(b.width));
  }
}

}  // namespace

double metric_mae(const ImageGrid& a, const ImageGrid& b) {
  require_same_shape(a, b, "mae");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    acc += std::abs(a.pixels[i] - b.pixels[i]);
  }
  return 100.0 * acc / static_cast<double>(a.size());
}

double metric_psnr(const ImageGrid& a, const ImageGrid& b, double max_val) {
  require_same_shape(a, b, "psnr");
  double mse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.pixels[i] - b.pixels[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(max_val * max_val / mse));
}

double metric_ssim(const ImageGrid& a, const ImageGrid& b, int window,
                   double k1, double k2, double dynamic_range) {
  require_same_shape(a, b, "ssim");
  if (a.height < window || a.width < window) {
    throw std::invalid_argument("ssim: image " + std::to_string(a.height) + "x" +
                                std::to_string(a.width) +
                                " smaller than window " + std::to_string(window));
  }
  // Normalized Gaussian weights, sigma 1.5.
  std::vector<double> g(static_cast<std::size_t>(window) * window);
  const double sigma = 1.5;
  const int half = window / 2;
  double wsum = 0.0;
  for (int r = 0; r < window; ++r) {
    for (int c = 0; c < window; ++c) {
      const double dr = r - half;
      const double dc = c - half;
      const double w = std::exp(-(dr * dr + dc * dc) / (2.0 * sigma * sigma));
      g[static_cast<std::size_t>(r) * window + c] = w;
      wsum += w;
    }
  }
  for (double& w : g) w /= wsum;

  const double c1 = (k1 * dynamic_range) * (k1 * dynamic_range);
  const double c2 = (k2 * dynamic_range) * (k2 * dynamic_range);
  double acc = 0.0;
  std::size_t count = 0;
  for (int r0 = 0; r0 + window <= a.height; ++r0) {
    for (int c0 = 0; c0 + window <= a.width; ++c0) {
      double mu_a = 0.0, mu_b = 0.0;
      for (int r = 0; r < window; ++r) {
        for (int c = 0; c < window; ++c) {
          const double w = g[static_cast<std::size_t>(r) * window + c];
          mu_a += w * a.at(r0 + r, c0 + c);
          mu_b += w * b.at(r0 + r, c0 + c);
        }
      }
      double var_a = 0.0, var_b = 0.0, cov = 0.0;
      for (int r = 0; r < window; ++r) {
        for (int c = 0; c < window; ++c) {
          const double w = g[static_cast<std::size_t>(r) * window + c];
          const double da = a.at(r0 + r, c0 + c) - mu_a;
          const double db = b.at(r0 + r, c0 + c) - mu_b;
          var_a += w * da * da;
          var_b += w * db * db;
          cov += w * da * db;
        }
      }
      const double num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
      const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
      acc += num / den;
      ++count;
    }
  }
  return 100.0 * acc / static_cast<double>(count);
}

namespace {

// Regularized incomplete beta I_x(a,b) via Lentz's continued fraction.
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kFpMin = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

double betai(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double bt = std::exp(std::lgamma(a + b) - std::lgamma(a) -
                             std::lgamma(b) + a * std::log(x) +
                             b * std::log(1.0 - x));
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return bt * betacf(a, b, x) / a;
  }
  return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

}  // namespace

double student_t_cdf(double t, int dof) {
  if (dof < 1) throw std::invalid_argument("student_t_cdf: dof must be >= 1");
  const double nu = static_cast<double>(dof);
  const double x = nu / (nu + t * t);
  const double tail = 0.5 * betai(0.5 * nu, 0.5, x);
  return t >= 0.0 ? 1.0 - tail : tail;
}

TTestResult paired_t_test(const std::vector<double>& a,
                          const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("paired_t_test: sample sizes differ");
  }
  const std::size_t n = a.size();
  if (n < 2) throw std::invalid_argument("paired_t_test: need n >= 2");
  double mean_d = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean_d += a[i] - b[i];
  mean_d /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i] - mean_d;
    ss += d * d;
  }
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  TTestResult out;
  if (sd == 0.0) {
    if (mean_d == 0.0) return {0.0, 1.0};
    // Degenerate zero-variance, nonzero-mean case: capped t, vanishing p.
    out.t = mean_d > 0.0 ? 1e15 : -1e15;
    out.p = 0.0;
    return out;
  }
  out.t = mean_d / (sd / std::sqrt(static_cast<double>(n)));
  const double nu = static_cast<double>(n - 1);
  out.p = betai(0.5 * nu, 0.5, nu / (nu + out.t * out.t));
  return out;
}

MetricReport evaluate_pairs(
    const std::function<ImageGrid(const ImageGrid&)>& translate,
    const std::vector<ImageGrid>& inputs,
    const std::vector<ImageGrid>& targets) {
  if (inputs.empty()) throw std::invalid_argument("evaluate_pairs: empty split");
  if (inputs.size() != targets.size()) {
    throw std::invalid_argument("evaluate_pairs: inputs/targets length mismatch");
  }
  MetricReport report;
  report.n_images = static_cast<int>(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const ImageGrid output = translate(inputs[i]);
    report.mae.push_back(metric_mae(output, targets[i]));
    report.psnr.push_back(metric_psnr(output, targets[i]));
    report.ssim.push_back(metric_ssim(output, targets[i]));
  }
  const auto mean_of = [](const std::vector<double>& v) {
    double s = 0.0;
    for (const double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  report.mean_mae = mean_of(report.mae);
  report.mean_psnr = mean_of(report.psnr);
  report.mean_ssim = mean_of(report.ssim);
  return report;
}

MetricReport evaluate_split(const UNestParams& params, const UNestConfig& cfg,
                            const UnpairedDataset& ds, Direction direction) {
  const DatasetPart& part =
      direction == Direction::kXY ? ds.test_x : ds.test_y;
  const std::vector<ImageGrid>& targets =
      direction == Direction::kXY ? ds.test_targets_xy : ds.test_targets_yx;
  if (part.images.empty() || targets.size() != part.images.size()) {
    throw std::invalid_argument(
        "evaluate_split: test split lacks aligned evaluation pairs");
  }
  return evaluate_pairs(
      [&](const ImageGrid& img) { return translate_image(img, params, cfg); },
      part.images, targets);
}

void write_metric_report_csv(const std::string& path,
                             const MetricReport& report) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "image,mae,psnr,ssim\n";
  char buf[64];
  const auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.10g", v);
    os << ',' << buf;
  };
  for (int i = 0; i < report.n_images; ++i) {
    os << i;
    put(report.mae[static_cast<std::size_t>(i)]);
    put(report.psnr[static_cast<std::size_t>(i)]);
    put(report.ssim[static_cast<std::size_t>(i)]);
    os << '\n';
  }
  os << "mean";
  put(report.mean_mae);
  put(report.mean_psnr);
  put(report.mean_ssim);
  os << '\n';
}

std::vector<AggregateStat> aggregate_reports(
    const std::vector<MetricReport>& runs) {
  if (runs.empty()) throw std::invalid_argument("aggregate_reports: no runs");
  const auto stat = [&](auto pick) {
    AggregateStat s;
    for (const MetricReport& r : runs) s.mean += pick(r);
    s.mean /= static_cast<double>(runs.size());
    if (runs.size() > 1) {
      double ss = 0.0;
      for (const MetricReport& r : runs) {
        const double d = pick(r) - s.mean;
        ss += d * d;
      }
      s.stddev = std::sqrt(ss / static_cast<double>(runs.size() - 1));
    }
    return s;
  };
  return {stat([](const MetricReport& r) { return r.mean_mae; }),
          stat([](const MetricReport& r) { return r.mean_psnr; }),
          stat([](const MetricReport& r) { return r.mean_ssim; })};
}

}  // namespace unest
