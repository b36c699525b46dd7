#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "unest/metrics.hpp"
#include "unest/rng.hpp"

using namespace unest;

namespace {

ImageGrid uniform_image(int side, double value) {
  return ImageGrid(side, side, value);
}

ImageGrid random_image(int h, int w, Rng& rng) {
  ImageGrid img(h, w);
  for (double& v : img.pixels) v = rng.uniform();
  return img;
}

}  // namespace

TEST_CASE("mae closed forms and symmetry") {
  Rng rng(80);
  const ImageGrid x = random_image(8, 8, rng);
  CHECK(metric_mae(x, x) == 0.0);
  CHECK(metric_mae(uniform_image(4, 0.0), uniform_image(4, 1.0)) == 100.0);
  CHECK(metric_mae(uniform_image(4, 0.0), uniform_image(4, 0.0788)) ==
        doctest::Approx(7.88).epsilon(1e-12));
  const ImageGrid y = random_image(8, 8, rng);
  CHECK(metric_mae(x, y) == doctest::Approx(metric_mae(y, x)).epsilon(1e-15));
  CHECK_THROWS_AS(metric_mae(x, uniform_image(5, 0.0)), std::invalid_argument);
}

TEST_CASE("psnr closed forms") {
  CHECK(metric_psnr(uniform_image(4, 0.0), uniform_image(4, 0.1)) ==
        doctest::Approx(20.0).epsilon(1e-12));
  CHECK(metric_psnr(uniform_image(4, 0.5), uniform_image(4, 0.51)) ==
        doctest::Approx(40.0).epsilon(1e-10));
  const ImageGrid same = uniform_image(4, 0.3);
  CHECK(metric_psnr(same, same) == kPsnrCap);
  Rng rng(81);
  const ImageGrid a = random_image(6, 6, rng);
  const ImageGrid b = random_image(6, 6, rng);
  CHECK(metric_psnr(a, b) == doctest::Approx(metric_psnr(b, a)).epsilon(1e-15));
}

TEST_CASE("ssim closed forms and brute-force agreement") {
  Rng rng(82);
  const ImageGrid x = random_image(16, 16, rng);
  CHECK(metric_ssim(x, x) == doctest::Approx(100.0).epsilon(1e-12));

  // Uniform images: variance-free closed form.
  CHECK(metric_ssim(uniform_image(16, 0.3), uniform_image(16, 0.3)) ==
        doctest::Approx(100.0).epsilon(1e-12));
  const double expected = 100.0 * (2 * 0.3 * 0.6 + 1e-4) / (0.09 + 0.36 + 1e-4);
  CHECK(metric_ssim(uniform_image(16, 0.3), uniform_image(16, 0.6)) ==
        doctest::Approx(expected).epsilon(1e-12));

  // Half-dark/half-bright against its inversion scores below self-similarity.
  ImageGrid split(16, 16);
  ImageGrid inverted(16, 16);
  for (int r = 0; r < 16; ++r) {
    for (int c = 0; c < 16; ++c) {
      split.at(r, c) = c < 8 ? 0.0 : 1.0;
      inverted.at(r, c) = 1.0 - split.at(r, c);
    }
  }
  CHECK(metric_ssim(split, inverted) < metric_ssim(split, split));

  for (int trial = 0; trial < 5; ++trial) {
    const ImageGrid a = random_image(16, 16, rng);
    const ImageGrid b = random_image(16, 16, rng);
    CHECK(std::abs(metric_ssim(a, b) - oracle::ssim_reference(a, b)) <= 1e-9);
    CHECK(metric_ssim(a, b) == doctest::Approx(metric_ssim(b, a)).epsilon(1e-13));
  }

  CHECK_THROWS_AS(metric_ssim(uniform_image(8, 0.5), uniform_image(8, 0.5)),
                  std::invalid_argument);  // smaller than the window
}

TEST_CASE("paired t-test closed forms") {
  const std::vector<double> same = {1.0, 2.0, 3.0};
  const TTestResult identical = paired_t_test(same, same);
  CHECK(identical.t == 0.0);
  CHECK(identical.p == 1.0);

  // Zero variance, nonzero mean: capped statistic, vanishing p.
  const TTestResult degenerate =
      paired_t_test({2.0, 2.0, 2.0, 2.0}, {1.0, 1.0, 1.0, 1.0});
  CHECK(degenerate.t >= 1e12);
  CHECK(degenerate.p == 0.0);

  // d = [1,2,3,4,5]: t = 3*sqrt(2), p ~ 0.0132.
  const TTestResult graded =
      paired_t_test({1.0, 2.0, 3.0, 4.0, 5.0}, {0.0, 0.0, 0.0, 0.0, 0.0});
  CHECK(graded.t == doctest::Approx(3.0 * std::sqrt(2.0)).epsilon(1e-12));
  CHECK(graded.p == doctest::Approx(0.0132).epsilon(2e-3));
  CHECK(std::abs(graded.p - oracle::t_two_sided_p_quadrature(graded.t, 4)) <= 1e-6);

  CHECK_THROWS_AS(paired_t_test({1.0}, {2.0}), std::invalid_argument);
  CHECK_THROWS_AS(paired_t_test({1.0, 2.0}, {1.0}), std::invalid_argument);
}

TEST_CASE("t-test p-values match numeric quadrature across sizes") {
  Rng rng(83);
  for (int n = 2; n <= 30; ++n) {
    std::vector<double> a(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      a[static_cast<std::size_t>(i)] = rng.normal(0.1, 1.0);
      b[static_cast<std::size_t>(i)] = rng.normal(0.0, 1.0);
    }
    const TTestResult r = paired_t_test(a, b);
    if (r.p == 0.0 || r.p == 1.0) continue;
    const double ref = oracle::t_two_sided_p_quadrature(r.t, n - 1);
    REQUIRE(std::abs(r.p - ref) <= 1e-6);
  }
}

TEST_CASE("student t cdf basic identities") {
  CHECK(student_t_cdf(0.0, 5) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(student_t_cdf(3.0, 5) + student_t_cdf(-3.0, 5) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(student_t_cdf(100.0, 5) > 0.999999);
}

TEST_CASE("evaluating the identity map on self-pairs gives the perfect report") {
  Rng rng(84);
  std::vector<ImageGrid> inputs;
  for (int i = 0; i < 4; ++i) inputs.push_back(random_image(16, 16, rng));
  const MetricReport report = evaluate_pairs(
      [](const ImageGrid& img) { return img; }, inputs, inputs);
  CHECK(report.n_images == 4);
  CHECK(report.mean_mae == 0.0);
  CHECK(report.mean_psnr == kPsnrCap);
  CHECK(report.mean_ssim == doctest::Approx(100.0).epsilon(1e-12));
  // The means are means of the per-image lists.
  double acc = 0.0;
  for (const double v : report.ssim) acc += v;
  CHECK(report.mean_ssim == doctest::Approx(acc / 4.0).epsilon(1e-15));
  CHECK_THROWS_AS(evaluate_pairs([](const ImageGrid& i) { return i; }, {}, {}),
                  std::invalid_argument);
}

TEST_CASE("aggregation emits mean and sample deviation per metric") {
  MetricReport a, b, c;
  a.mean_mae = 4.0;
  b.mean_mae = 6.0;
  c.mean_mae = 5.0;
  a.mean_psnr = b.mean_psnr = c.mean_psnr = 30.0;
  a.mean_ssim = 80.0;
  b.mean_ssim = 82.0;
  c.mean_ssim = 84.0;
  const std::vector<AggregateStat> agg = aggregate_reports({a, b, c});
  CHECK(agg[0].mean == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(agg[0].stddev == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(agg[1].stddev == 0.0);
  CHECK(agg[2].mean == doctest::Approx(82.0).epsilon(1e-15));
}
