#include "unest/selftest.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "unest/attention.hpp"
#include "unest/losses.hpp"
#include "unest/mask.hpp"
#include "unest/metrics.hpp"
#include "unest/rng.hpp"
#include "unest/scope.hpp"
#include "unest/synth.hpp"
#include "unest/tensor.hpp"

namespace unest {
namespace {

Tensor random_tensor(const Shape& shape, Rng& rng, bool requires_grad = false) {
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = rng.normal(0.0, 1.0);
  return Tensor::from_data(shape, std::move(data), requires_grad);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

SelfTestResult check(const std::string& name, bool ok, const std::string& detail) {
  return {name, ok, detail};
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

std::vector<SelfTestResult> run_selftest() {
  std::vector<SelfTestResult> results;
  Rng rng(20240);

  {
    const Tensor x = random_tensor({5, 7}, rng);
    const Tensor s = softmax(x, 1);
    const Tensor shifted = softmax(add_scalar(x, 3.25), 1);
    double worst_sum = 0.0;
    double worst_shift = 0.0;
    for (int i = 0; i < 5; ++i) {
      double row = 0.0;
      for (int j = 0; j < 7; ++j) {
        row += s.data()[static_cast<std::size_t>(i) * 7 + j];
        worst_shift = std::max(worst_shift,
                               std::abs(s.data()[static_cast<std::size_t>(i) * 7 + j] -
                                        shifted.data()[static_cast<std::size_t>(i) * 7 + j]));
      }
      worst_sum = std::max(worst_sum, std::abs(row - 1.0));
    }
    results.push_back(check("softmax rows sum to one and are shift invariant",
                            worst_sum < 1e-12 && worst_shift < 1e-12,
                            "max |sum-1| " + fmt(worst_sum) + ", max shift delta " +
                                fmt(worst_shift)));
  }

  {
    // deconv2d maps [3,4,4] -> [2,8,8] with w [3,2,2,2]; the adjoint conv2d
    // maps [2,8,8] -> [3,4,4] reading the same w as [O,C,k,k].
    const Tensor w = random_tensor({3, 2, 2, 2}, rng);
    const Tensor x = random_tensor({3, 4, 4}, rng);
    const Tensor y = random_tensor({2, 8, 8}, rng);
    const Tensor up = deconv2d(x, w);
    const Tensor down = conv2d(y, w, 2, 0);
    const double lhs = dot(down.data(), x.data());
    const double rhs = dot(y.data(), up.data());
    results.push_back(check("conv2d and deconv2d are adjoint",
                            std::abs(lhs - rhs) < 1e-10,
                            "difference " + fmt(std::abs(lhs - rhs))));
  }

  {
    const Scope covering = scope_local({2, 3}, 11, 5, 6);
    const Scope global = scope_global(5, 6);
    results.push_back(check("covering local window equals the global scope",
                            covering == global,
                            std::to_string(covering.size()) + " entries"));
  }

  {
    // Zero leakage through the trace of one masked attention pass.
    const int gh = 4, gw = 4, k = 8;
    std::vector<double> probs(16, 0.0);
    for (const int i : {0, 1, 5, 6, 10}) probs[static_cast<std::size_t>(i)] = 1.0;
    const PatchMask mask = PatchMask::from_probs(gh, gw, probs, 0.5);
    Rng init_rng(7);
    const AttentionParams params = init_attention_params(k, init_rng);
    StBlockConfig cfg;
    cfg.n_heads = 2;
    cfg.window = 3;
    const Tensor tokens = random_tensor({16, k}, rng);
    AttentionTrace trace;
    const std::vector<Scope> scopes = build_scopes(mask, cfg);
    attend(tokens, scopes, params, cfg.n_heads, gw, &trace);
    double worst_leak = 0.0;
    double worst_sum = 0.0;
    for (std::size_t h = 0; h < trace.head_rows.size(); ++h) {
      for (int q = 0; q < 16; ++q) {
        const std::vector<int> allowed = scopes[static_cast<std::size_t>(q)].flat(gw);
        double row_sum = 0.0;
        for (int j = 0; j < 16; ++j) {
          const double wgt = trace.head_rows[h][static_cast<std::size_t>(q) * 16 + j];
          row_sum += wgt;
          bool in_scope = false;
          for (const int a : allowed) in_scope = in_scope || a == j;
          if (!in_scope) worst_leak = std::max(worst_leak, std::abs(wgt));
        }
        worst_sum = std::max(worst_sum, std::abs(row_sum - 1.0));
      }
    }
    results.push_back(check("attention weights vanish outside the scope",
                            worst_leak == 0.0 && worst_sum < 1e-9,
                            "max leak " + fmt(worst_leak) + ", max |sum-1| " +
                                fmt(worst_sum)));
  }

  {
    const PatchMask gt = PatchMask::from_probs(2, 2, {1.0, 0.0, 1.0, 0.0}, 0.5);
    const Tensor probs = Tensor::full({4, 1}, 0.5);
    const double bce = loss_mask(probs, gt).item();
    results.push_back(check("mask BCE at probability one half equals ln 2",
                            std::abs(bce - std::log(2.0)) < 1e-12,
                            "bce " + fmt(bce)));
  }

  {
    const Tensor zeros_scores = Tensor::zeros({1, 3, 3});
    const AdversarialLosses al = loss_adversarial(zeros_scores, zeros_scores);
    const bool ok = std::abs(al.d_loss.item() - 2.0 * std::log(2.0)) < 1e-12 &&
                    std::abs(al.g_loss.item() - std::log(2.0)) < 1e-12;
    results.push_back(check("adversarial losses at sigma one half match closed form",
                            ok, "d " + fmt(al.d_loss.item()) + ", g " +
                                    fmt(al.g_loss.item())));
  }

  {
    const bool ok = lr_schedule(10) == 1e-4 && lr_schedule(75) == 5e-5 &&
                    lr_schedule(100) == 0.0;
    results.push_back(check("learning-rate schedule closed forms", ok,
                            "lr(75) " + fmt(lr_schedule(75))));
  }

  {
    Tensor p = Tensor::from_data({3}, {1.0, -2.0, 0.5}, true);
    p.zero_grad();
    Tensor loss = sum(mul(p, p));
    backward(loss);
    AdamState adam;
    const std::vector<double> before = p.data();
    adam_step({&p}, adam, 1e-3);
    bool ok = true;
    for (int i = 0; i < 3; ++i) {
      const double delta = p.data()[static_cast<std::size_t>(i)] - before[static_cast<std::size_t>(i)];
      const double expected = -1e-3 * (before[static_cast<std::size_t>(i)] > 0 ? 1.0 : -1.0);
      ok = ok && std::abs(delta - expected) < 1e-6 * 1e-3 + 1e-12;
    }
    results.push_back(check("first Adam step moves by -lr times the gradient sign",
                            ok, ""));
  }

  {
    Tensor x = random_tensor({4, 5}, rng, true);
    const double err = grad_check(
        [](const Tensor& t) { return abs_mean(matmul(t, transpose(t))); }, x);
    results.push_back(check("gradient check on a composite expression", err < 1e-6,
                            "max rel error " + fmt(err)));
  }

  {
    SynthConfig cfg;
    cfg.n_per_domain = 10;
    cfg.side = 32;
    cfg.patch = 8;
    cfg.seed = 99;
    const UnpairedDataset a = synth_dataset(cfg);
    const UnpairedDataset b = synth_dataset(cfg);
    bool same = a.train_x.images.size() == b.train_x.images.size();
    for (std::size_t i = 0; same && i < a.train_x.images.size(); ++i) {
      same = a.train_x.images[i].pixels == b.train_x.images[i].pixels;
    }
    results.push_back(check("synthetic dataset is a pure function of its seed",
                            same, std::to_string(a.train_x.images.size()) +
                                      " train images"));
  }

  {
    ImageGrid img(6, 6, 0.0);
    // Two blobs, areas 5 and 3.
    for (const auto [r, c] : {std::pair{1, 1}, {1, 2}, {2, 1}, {2, 2}, {3, 1}}) {
      img.at(r, c) = 0.9;
    }
    for (const auto [r, c] : {std::pair{4, 4}, {4, 5}, {5, 4}}) img.at(r, c) = 0.9;
    const PixelMask m = extract_foreground(img, 0.5);
    int area = 0;
    for (const auto v : m.values) area += v;
    results.push_back(check("largest connected component wins", area == 5,
                            "kept area " + std::to_string(area)));
  }

  return results;
}

std::string format_selftest_report(const std::vector<SelfTestResult>& results) {
  std::ostringstream os;
  int passed = 0;
  for (const SelfTestResult& r : results) {
    os << (r.passed ? "[PASS] " : "[FAIL] ") << r.name;
    if (!r.detail.empty()) os << " (" << r.detail << ")";
    os << '\n';
    passed += r.passed ? 1 : 0;
  }
  os << passed << "/" << results.size() << " checks passed\n";
  return os.str();
}

}  // namespace unest
