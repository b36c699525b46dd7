#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "unest/rng.hpp"
#include "unest/tensor.hpp"
#include "unest/untf.hpp"

using namespace unest;

namespace {

Tensor random_tensor(const Shape& shape, Rng& rng, bool requires_grad = false) {
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = rng.normal(0.0, 1.0);
  return Tensor::from_data(shape, std::move(data), requires_grad);
}

// Scalar projection op(x) . r for gradient checks of non-scalar ops.
Tensor project(const Tensor& t, const std::vector<double>& r) {
  const Tensor rt = Tensor::from_data(t.shape(), r);
  return sum(mul(t, rt));
}

}  // namespace

TEST_CASE("elementwise add matches the reference loop") {
  const Tensor a = Tensor::from_data({2}, {1.0, 2.0});
  const Tensor b = Tensor::from_data({2}, {3.0, 4.0});
  const Tensor c = add(a, b);
  CHECK(c.data() == std::vector<double>{4.0, 6.0});
}

TEST_CASE("additive and multiplicative identities") {
  Rng rng(1);
  const Tensor x = random_tensor({3, 4}, rng);
  CHECK(add(x, Tensor::zeros({3, 4})).data() == x.data());
  CHECK(mul(x, Tensor::ones({3, 4})).data() == x.data());
}

TEST_CASE("binary op shape mismatch names both shapes") {
  const Tensor a = Tensor::zeros({2, 3});
  const Tensor b = Tensor::zeros({4});
  CHECK_THROWS_WITH_AS(add(a, b), doctest::Contains("[2,3]"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(mul(a, b), doctest::Contains("[4]"),
                       std::invalid_argument);
}

TEST_CASE("broadcast add over a leading singleton row") {
  const Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  const Tensor row = Tensor::from_data({1, 2}, {10, 20});
  const Tensor c = add(a, row);
  CHECK(c.data() == std::vector<double>{11, 22, 13, 24});
}

TEST_CASE("broadcast gradients reduce over the broadcast axes") {
  Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4}, true);
  Tensor row = Tensor::from_data({1, 2}, {10, 20}, true);
  backward(sum(mul(a, row)));
  CHECK(a.grad() == std::vector<double>{10, 20, 10, 20});
  CHECK(row.grad() == std::vector<double>{1 + 3, 2 + 4});
}

TEST_CASE("matmul identities and closed forms") {
  const Tensor eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  const Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  CHECK(matmul(eye, a).data() == a.data());

  const Tensor r = Tensor::from_data({1, 2}, {1, 2});
  const Tensor c = Tensor::from_data({2, 1}, {3, 4});
  CHECK(matmul(r, c).item() == 11.0);

  CHECK(matmul(Tensor::zeros({2, 3}), Tensor::ones({3, 5})).data() ==
        std::vector<double>(10, 0.0));
}

TEST_CASE("matmul agrees with the triple-loop reference") {
  Rng rng(2);
  const Tensor a = random_tensor({5, 7}, rng);
  const Tensor b = random_tensor({7, 4}, rng);
  const Tensor c = matmul(a, b);
  const std::vector<double> ref = oracle::matmul(a.data(), b.data(), 5, 7, 4);
  for (std::size_t i = 0; i < ref.size(); ++i) {
    CHECK(c.data()[i] == doctest::Approx(ref[i]).epsilon(1e-13));
  }
}

TEST_CASE("matmul rejects inner-dimension mismatch") {
  CHECK_THROWS_AS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({4, 2})),
                  std::invalid_argument);
}

TEST_CASE("softmax closed forms") {
  const Tensor constant = Tensor::full({4}, 2.5);
  const Tensor uniform = softmax(constant, 0);
  for (const double v : uniform.data()) {
    CHECK(v == doctest::Approx(0.25).epsilon(1e-14));
  }

  const Tensor two = Tensor::from_data({2}, {0.0, std::log(3.0)});
  const Tensor s = softmax(two, 0);
  CHECK(s.data()[0] == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(s.data()[1] == doctest::Approx(0.75).epsilon(1e-14));

  const Tensor extreme = softmax(Tensor::from_data({2}, {1000.0, 0.0}), 0);
  CHECK(std::isfinite(extreme.data()[0]));
  CHECK(extreme.data()[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(extreme.data()[1] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("softmax rows sum to one and shift invariance holds") {
  Rng rng(3);
  const Tensor x = random_tensor({6, 9}, rng);
  const Tensor s = softmax(x, 1);
  const Tensor shifted = softmax(add_scalar(x, 17.5), 1);
  for (int i = 0; i < 6; ++i) {
    double row = 0.0;
    for (int j = 0; j < 9; ++j) row += s.data()[static_cast<std::size_t>(i) * 9 + j];
    CHECK(std::abs(row - 1.0) <= 1e-12);
  }
  for (std::size_t i = 0; i < s.numel(); ++i) {
    CHECK(s.data()[i] == doctest::Approx(shifted.data()[i]).epsilon(1e-12));
  }
}

TEST_CASE("softmax rejects non-finite input") {
  CHECK_THROWS_AS(softmax(Tensor::from_data({2}, {1.0, std::nan("")}), 0),
                  std::domain_error);
}

TEST_CASE("layer norm closed forms") {
  const Tensor gamma = Tensor::ones({3});
  const Tensor beta = Tensor::zeros({3});
  const Tensor constant = Tensor::full({1, 3}, 7.0);
  const Tensor centered = layer_norm(constant, gamma, beta, 1);
  for (const double v : centered.data()) {
    CHECK(std::abs(v) <= 1e-12);
  }

  const Tensor two = Tensor::from_data({1, 2}, {1.0, 3.0});
  const Tensor g2 = Tensor::ones({2});
  const Tensor b2 = Tensor::zeros({2});
  const Tensor normed = layer_norm(two, g2, b2, 1, 1e-30);
  CHECK(normed.data()[0] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(normed.data()[1] == doctest::Approx(1.0).epsilon(1e-12));

  const Tensor g0 = Tensor::zeros({2});
  const Tensor b5 = Tensor::full({2}, 5.0);
  const Tensor overridden = layer_norm(two, g0, b5, 1);
  for (const double v : overridden.data()) {
    CHECK(v == 5.0);
  }
}

TEST_CASE("activation closed forms") {
  CHECK(sigmoid(Tensor::scalar(0.0)).item() == 0.5);
  CHECK(sigmoid(Tensor::scalar(std::log(3.0))).item() ==
        doctest::Approx(0.75).epsilon(1e-14));
  const Tensor r = relu(Tensor::from_data({2}, {-1.0, 2.0}));
  CHECK(r.data() == std::vector<double>{0.0, 2.0});
  CHECK_THROWS_AS(log_act(Tensor::from_data({2}, {1.0, -0.5})), std::domain_error);
  CHECK(tanh_act(Tensor::scalar(0.0)).item() == 0.0);
}

TEST_CASE("conv2d closed forms") {
  // 1x1 kernel with weight 1 is the identity map.
  Rng rng(4);
  const Tensor x = random_tensor({1, 4, 4}, rng);
  const Tensor w1 = Tensor::ones({1, 1, 1, 1});
  CHECK(conv2d(x, w1, 1, 0).data() == x.data());

  // All-ones 3x3 kernel on an impulse spreads a 3x3 block of ones.
  Tensor impulse = Tensor::zeros({1, 5, 5});
  impulse.data()[2 * 5 + 2] = 1.0;
  const Tensor spread = conv2d(impulse, Tensor::ones({1, 1, 3, 3}), 1, 1);
  for (int r = 0; r < 5; ++r) {
    for (int c = 0; c < 5; ++c) {
      const double expected = std::abs(r - 2) <= 1 && std::abs(c - 2) <= 1 ? 1.0 : 0.0;
      CHECK(spread.data()[static_cast<std::size_t>(r) * 5 + c] == expected);
    }
  }

  CHECK(conv2d(x, Tensor::zeros({2, 1, 3, 3}), 1, 1).data() ==
        std::vector<double>(32, 0.0));
}

TEST_CASE("conv2d matches the sliding-window reference") {
  Rng rng(5);
  const Tensor x = random_tensor({3, 6, 7}, rng);
  const Tensor w = random_tensor({4, 3, 3, 3}, rng);
  for (const auto [stride, pad] : {std::pair{1, 0}, {1, 1}, {2, 1}}) {
    const Tensor out = conv2d(x, w, stride, pad);
    int ho = 0, wo = 0;
    const std::vector<double> ref =
        oracle::conv2d(x.data(), w.data(), 3, 6, 7, 4, 3, stride, pad, &ho, &wo);
    REQUIRE(out.shape() == Shape{4, ho, wo});
    for (std::size_t i = 0; i < ref.size(); ++i) {
      CHECK(out.data()[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("conv2d rejects kernels larger than the padded input") {
  CHECK_THROWS_WITH_AS(conv2d(Tensor::zeros({1, 2, 2}), Tensor::zeros({1, 1, 5, 5}), 1, 1),
                       doctest::Contains("larger"), std::invalid_argument);
}

TEST_CASE("deconv2d closed forms and adjointness") {
  // A 1x1 input scales the kernel.
  const Tensor x1 = Tensor::from_data({1, 1, 1}, {2.5});
  const Tensor w = Tensor::from_data({1, 2, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
  const Tensor up = deconv2d(x1, w);
  REQUIRE(up.shape() == Shape{2, 2, 2});
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(up.data()[i] == 2.5 * w.data()[i]);
  }

  CHECK(deconv2d(Tensor::zeros({2, 3, 3}), Tensor::ones({2, 3, 2, 2})).data() ==
        std::vector<double>(3 * 36, 0.0));

  // <conv(y,w), x> == <y, deconv(x,w)> on random 4x4 inputs.
  Rng rng(6);
  const Tensor x = random_tensor({3, 4, 4}, rng);
  const Tensor wr = random_tensor({3, 2, 2, 2}, rng);
  const Tensor y = random_tensor({2, 8, 8}, rng);
  const Tensor down = conv2d(y, wr, 2, 0);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < down.numel(); ++i) lhs += down.data()[i] * x.data()[i];
  const Tensor up2 = deconv2d(x, wr);
  for (std::size_t i = 0; i < up2.numel(); ++i) rhs += y.data()[i] * up2.data()[i];
  CHECK(std::abs(lhs - rhs) < 1e-10);

  CHECK_THROWS_AS(deconv2d(Tensor::zeros({2, 3, 3}), Tensor::zeros({2, 1, 3, 3})),
                  std::invalid_argument);
}

TEST_CASE("reductions") {
  CHECK(abs_mean(Tensor::from_data({2}, {-2.0, 2.0})).item() == 2.0);
  CHECK(sum(Tensor::zeros({3, 3})).item() == 0.0);
  CHECK(mean(Tensor::full({5}, 3.25)).item() == doctest::Approx(3.25).epsilon(1e-15));
}

TEST_CASE("backward populates leaf gradients") {
  Tensor x = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6}, true);
  backward(sum(x));
  CHECK(x.grad() == std::vector<double>(6, 1.0));

  Tensor z = Tensor::from_data({2}, {1.0, -2.0}, true);
  backward(sum(mul(z, z)));
  CHECK(z.grad() == std::vector<double>{2.0, -4.0});
}

TEST_CASE("leaves without requires_grad stay gradient-free") {
  Tensor x = Tensor::from_data({2}, {1.0, 2.0}, true);
  Tensor frozen = Tensor::from_data({2}, {3.0, 4.0});
  backward(sum(mul(x, frozen)));
  CHECK(x.has_grad());
  CHECK_FALSE(frozen.has_grad());
}

TEST_CASE("backward rejects non-scalar losses and accumulates on repeat") {
  Tensor x = Tensor::from_data({2}, {1.0, 1.0}, true);
  CHECK_THROWS_AS(backward(mul(x, x)), std::invalid_argument);

  const Tensor loss = sum(x);
  backward(loss);
  backward(loss);
  CHECK(x.grad() == std::vector<double>{2.0, 2.0});
  x.zero_grad();
  backward(loss);
  CHECK(x.grad() == std::vector<double>{1.0, 1.0});
}

TEST_CASE("shared subexpressions accumulate the sum of path gradients") {
  // u = x*x, v = u + x, w = v*u: brute-force per-element derivative
  // d/dx [ (x^2 + x) * x^2 ] = 4x^3 + 3x^2.
  Tensor x = Tensor::from_data({3}, {0.7, -1.3, 2.1}, true);
  const Tensor u = mul(x, x);
  const Tensor v = add(u, x);
  const Tensor w = mul(v, u);
  backward(sum(w));
  for (int i = 0; i < 3; ++i) {
    const double xv = x.data()[static_cast<std::size_t>(i)];
    const double expected = 4.0 * xv * xv * xv + 3.0 * xv * xv;
    CHECK(x.grad()[static_cast<std::size_t>(i)] ==
          doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("gradient check passes for every primitive") {
  Rng rng(7);
  const auto check_op = [&](const char* name,
                            const std::function<Tensor(const Tensor&)>& f,
                            const Shape& shape) {
    Tensor x = random_tensor(shape, rng, true);
    const double err = grad_check(f, x);
    INFO(name);
    CHECK(err < 1e-5);
  };

  Rng proj_rng(8);
  const auto rand_vec = [&proj_rng](std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = proj_rng.normal(0.0, 1.0);
    return v;
  };
  const std::vector<double> r12 = rand_vec(12);
  const std::vector<double> r16 = rand_vec(16);
  const std::vector<double> r20 = rand_vec(20);
  const std::vector<double> r24 = rand_vec(24);
  const std::vector<double> r48 = rand_vec(48);
  const Tensor other = random_tensor({3, 4}, rng);
  const Tensor mat = random_tensor({4, 4}, rng);

  check_op("add", [&](const Tensor& t) { return project(add(t, other), r12); }, {3, 4});
  check_op("sub", [&](const Tensor& t) { return project(sub(other, t), r12); }, {3, 4});
  check_op("mul", [&](const Tensor& t) { return project(mul(t, other), r12); }, {3, 4});
  check_op("matmul_lhs",
           [&](const Tensor& t) { return project(matmul(t, mat), r12); }, {3, 4});
  check_op("matmul_rhs",
           [&](const Tensor& t) { return project(matmul(other, t), r12); }, {4, 4});
  check_op("transpose",
           [&](const Tensor& t) { return project(transpose(t), r12); }, {3, 4});
  check_op("reshape",
           [&](const Tensor& t) { return project(reshape(t, {4, 3}), r12); }, {3, 4});
  check_op("softmax",
           [&](const Tensor& t) { return project(softmax(t, 1), r12); }, {3, 4});
  check_op("sigmoid",
           [&](const Tensor& t) { return project(sigmoid(t), r12); }, {3, 4});
  check_op("relu", [&](const Tensor& t) { return project(relu(t), r12); }, {3, 4});
  check_op("leaky_relu",
           [&](const Tensor& t) { return project(leaky_relu(t, 0.2), r12); }, {3, 4});
  check_op("gelu", [&](const Tensor& t) { return project(gelu(t), r12); }, {3, 4});
  check_op("tanh", [&](const Tensor& t) { return project(tanh_act(t), r12); }, {3, 4});
  check_op("log", [&](const Tensor& t) {
    return project(log_act(add_scalar(sigmoid(t), 0.5)), r12);
  }, {3, 4});
  check_op("clamp", [&](const Tensor& t) { return project(clamp(t, -0.5, 0.5), r12); },
           {3, 4});
  check_op("sum", [&](const Tensor& t) { return sum(t); }, {3, 4});
  check_op("mean", [&](const Tensor& t) { return mean(t); }, {3, 4});
  check_op("abs_mean", [&](const Tensor& t) { return abs_mean(t); }, {3, 4});
  check_op("gather_rows", [&](const Tensor& t) {
    return project(gather_rows(t, {2, 0, 2, 1}), r16);
  }, {3, 4});
  check_op("scatter_rows", [&](const Tensor& t) {
    return project(scatter_rows(t, {4, 1, 3}, 5), r20);
  }, {3, 4});
  check_op("slice_cols", [&](const Tensor& t) {
    return project(slice_cols(t, 1, 3),
                   std::vector<double>(r12.begin(), r12.begin() + 6));
  }, {3, 4});
  check_op("concat", [&](const Tensor& t) {
    return project(concat({t, other}, 1), r24);
  }, {3, 4});
  check_op("extract_patches", [&](const Tensor& t) {
    return project(extract_patches(t, 2), r16);
  }, {1, 4, 4});
  const Tensor ln_gamma = random_tensor({4}, rng);
  const Tensor ln_beta = random_tensor({4}, rng);
  const Tensor conv_w = random_tensor({3, 1, 3, 3}, rng);
  const Tensor deconv_w = random_tensor({2, 4, 2, 2}, rng);
  const std::vector<double> r64 = rand_vec(64);
  check_op("layer_norm", [&](const Tensor& t) {
    return project(layer_norm(t, ln_gamma, ln_beta, 1), r12);
  }, {3, 4});
  check_op("layer_norm_gamma", [&](const Tensor& t) {
    return project(layer_norm(other, t, ln_beta, 1), r12);
  }, {4});
  check_op("conv2d_input", [&](const Tensor& t) {
    return project(conv2d(t, conv_w, 1, 1), r48);
  }, {1, 4, 4});
  const Tensor conv_x = random_tensor({1, 4, 4}, rng);
  const Tensor deconv_x = random_tensor({2, 2, 2}, rng);
  const Tensor bias_x = random_tensor({4, 2, 2}, rng);
  check_op("conv2d_weights", [&](const Tensor& t) {
    return project(conv2d(conv_x, t, 1, 1), r48);
  }, {3, 1, 3, 3});
  check_op("deconv2d_input", [&](const Tensor& t) {
    return project(deconv2d(t, deconv_w), r64);
  }, {2, 2, 2});
  check_op("deconv2d_weights", [&](const Tensor& t) {
    return project(deconv2d(deconv_x, t), r64);
  }, {2, 4, 2, 2});
  check_op("add_channel_bias", [&](const Tensor& t) {
    return project(add_channel_bias(bias_x, t), r16);
  }, {4});
}

TEST_CASE("adam closed forms") {
  // First step with nonzero gradient moves by -lr * sign(g).
  Tensor p = Tensor::from_data({3}, {0.5, -0.25, 2.0}, true);
  p.zero_grad();
  backward(sum(mul(p, Tensor::from_data({3}, {3.0, -7.0, 0.5}))));
  AdamState state;
  const std::vector<double> before = p.data();
  const double lr = 0.01;
  adam_step({&p}, state, lr);
  CHECK(state.step_count == 1);
  const double signs[3] = {1.0, -1.0, 1.0};
  for (int i = 0; i < 3; ++i) {
    const double delta = p.data()[static_cast<std::size_t>(i)] - before[static_cast<std::size_t>(i)];
    CHECK(std::abs(delta - (-lr * signs[i])) <= 1e-6 * lr);
  }

  // Zero gradients leave parameters unchanged.
  Tensor q = Tensor::from_data({2}, {1.0, 2.0}, true);
  q.zero_grad();
  AdamState fresh;
  adam_step({&q}, fresh, 0.1);
  CHECK(q.data() == std::vector<double>{1.0, 2.0});

  // lr = 0 keeps parameters but still advances the moments.
  Tensor u = Tensor::from_data({1}, {1.0}, true);
  u.zero_grad();
  backward(sum(mul(u, Tensor::from_data({1}, {2.0}))));
  AdamState zs;
  adam_step({&u}, zs, 0.0);
  CHECK(u.data()[0] == 1.0);
  CHECK(zs.step_count == 1);
  CHECK(zs.first_moment[0][0] == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("UNTF round trips and rejects malformed files") {
  Rng rng(11);
  const Tensor t = random_tensor({3, 5}, rng);
  const std::string dir = "untf_test_tmp";
  std::filesystem::create_directories(dir);
  const std::string p1 = dir + "/a.untf";
  const std::string p2 = dir + "/b.untf";
  save_untf(p1, t, 1);
  save_untf(p2, t, 2);
  const Tensor r1 = load_untf(p1);
  const Tensor r2 = load_untf(p2);
  REQUIRE(r1.shape() == t.shape());
  for (std::size_t i = 0; i < t.numel(); ++i) {
    CHECK(r1.data()[i] == doctest::Approx(t.data()[i]).epsilon(1e-7));
  }
  CHECK(r2.data() == t.data());  // float64 payload is exact

  // Truncated payload.
  {
    std::ofstream os(dir + "/trunc.untf", std::ios::binary);
    std::ifstream is(p1, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(is)),
                            std::istreambuf_iterator<char>());
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 3));
  }
  CHECK_THROWS_WITH_AS(load_untf(dir + "/trunc.untf"), doctest::Contains("truncated"),
                       std::runtime_error);

  {
    std::ofstream os(dir + "/magic.untf", std::ios::binary);
    os << "NOPE" << '\x01' << '\x00';
  }
  CHECK_THROWS_WITH_AS(load_untf(dir + "/magic.untf"), doctest::Contains("magic"),
                       std::runtime_error);
  std::filesystem::remove_all(dir);
}
