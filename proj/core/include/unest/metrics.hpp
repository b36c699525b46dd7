#pragma once

#include <functional>
#include <string>
#include <vector>

#include "unest/dataset.hpp"
#include "unest/generator.hpp"
#include "unest/image.hpp"

namespace unest {

// Mean absolute error on [0,1] intensities, reported x100.
double metric_mae(const ImageGrid& a, const ImageGrid& b);

// 10*log10(max^2/MSE) in dB; identical images report the 99 dB cap instead
// of infinity.
double metric_psnr(const ImageGrid& a, const ImageGrid& b, double max_val = 1.0);
inline constexpr double kPsnrCap = 99.0;

// Gaussian-windowed (11x11, sigma 1.5) local SSIM averaged over all
// fully-inside window positions, reported x100.
double metric_ssim(const ImageGrid& a, const ImageGrid& b, int window = 11,
                   double k1 = 0.01, double k2 = 0.03, double dynamic_range = 1.0);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
};

// Two-sided paired Student's t-test on the differences a-b. All-zero
// differences give (0, 1); zero variance with nonzero mean caps t and
// reports p = 0.
TTestResult paired_t_test(const std::vector<double>& a,
                          const std::vector<double>& b);

// CDF of Student's t with dof degrees of freedom (regularized incomplete
// beta via continued fraction).
double student_t_cdf(double t, int dof);

struct MetricReport {
  std::vector<double> mae, psnr, ssim;
  double mean_mae = 0.0, mean_psnr = 0.0, mean_ssim = 0.0;
  int n_images = 0;
};

// Per-image metrics and their means for translate applied to inputs against
// aligned targets.
MetricReport evaluate_pairs(
    const std::function<ImageGrid(const ImageGrid&)>& translate,
    const std::vector<ImageGrid>& inputs,
    const std::vector<ImageGrid>& targets);

// Test-split evaluation through the replayed synthetic pairing.
MetricReport evaluate_split(const UNestParams& params, const UNestConfig& cfg,
                            const UnpairedDataset& ds, Direction direction);

void write_metric_report_csv(const std::string& path, const MetricReport& report);

struct AggregateStat {
  double mean = 0.0;
  double stddev = 0.0;  // sample stddev over runs
};

// mean +/- std across runs (one entry per metric: mae, psnr, ssim).
std::vector<AggregateStat> aggregate_reports(const std::vector<MetricReport>& runs);

}  // namespace unest
