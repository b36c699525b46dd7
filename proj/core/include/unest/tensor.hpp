#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace unest {

using Shape = std::vector<int>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {
struct Node;
}

// Dense n-dimensional array of doubles with an attached reverse-mode graph.
// Tensors are cheap handles to a shared node; ops below record the graph
// define-by-run whenever an input requires gradients. Graph construction and
// backward are single-threaded per graph; distinct graphs may live on
// distinct threads.
class Tensor {
 public:
  Tensor();  // empty placeholder, numel 0

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor ones(const Shape& shape);
  static Tensor full(const Shape& shape, double value,
                     bool requires_grad = false);
  static Tensor scalar(double value);
  static Tensor from_data(const Shape& shape, std::vector<double> data,
                          bool requires_grad = false);

  const Shape& shape() const;
  int dim(int axis) const;
  int rank() const;
  std::size_t numel() const;
  bool defined() const { return node_ != nullptr; }

  std::vector<double>& data();
  const std::vector<double>& data() const;
  double item() const;  // scalar tensors only

  bool requires_grad() const;
  void set_requires_grad(bool flag);  // leaves only

  bool has_grad() const;
  const std::vector<double>& grad() const;  // throws when absent
  void zero_grad();

  // Value copy with no graph attachment.
  Tensor detach() const;

  detail::Node* node() const { return node_.get(); }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node);
  std::shared_ptr<detail::Node> node_;

  friend Tensor wrap_node(std::shared_ptr<detail::Node> node);
};

// ---- elementwise / linear algebra ----
// add/sub/mul broadcast trailing-aligned singleton axes; a mismatch throws
// with both shapes in the message.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);

Tensor matmul(const Tensor& a, const Tensor& b);  // 2-D only
Tensor transpose(const Tensor& a);                // 2-D only
Tensor reshape(const Tensor& a, const Shape& shape);

Tensor softmax(const Tensor& x, int axis);  // max-subtracted
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  int axis, double eps = 1e-5);

// ---- activations ----
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double negative_slope);
Tensor gelu(const Tensor& x);
Tensor tanh_act(const Tensor& x);
Tensor log_act(const Tensor& x);  // domain error on non-positive input
Tensor clamp(const Tensor& x, double lo, double hi);

// ---- convolution, x is [C,H,W] ----
Tensor conv2d(const Tensor& x, const Tensor& w, int stride, int pad);
// Transposed convolution pinned to stride 2, kernel 2 (the only decoder
// configuration); w is [C_in, C_out, 2, 2] and output doubles H and W.
Tensor deconv2d(const Tensor& x, const Tensor& w);
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);

// ---- reductions to scalar ----
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor abs_mean(const Tensor& x);  // subgradient 0 at the kink

// ---- structure ----
Tensor gather_rows(const Tensor& x, const std::vector<int>& rows);
// Writes row t of x to row rows[t] of an n_rows-tall zero tensor; duplicate
// targets are rejected (consolidation writes each position exactly once).
Tensor scatter_rows(const Tensor& x, const std::vector<int>& rows, int n_rows);
Tensor slice_cols(const Tensor& x, int col_begin, int col_end);
Tensor concat(const std::vector<Tensor>& parts, int axis);
// [1,H,W] -> [N,p*p] row-major patches, N = (H/p)*(W/p).
Tensor extract_patches(const Tensor& x, int patch);

// ---- custom ops ----
// Backward callback for a fused operation: upstream is the output gradient;
// in_values are the input value arrays; in_grads[i] is null when input i
// needs no gradient, otherwise a pre-sized buffer to accumulate into.
using CustomBackward = std::function<void(
    const std::vector<double>& upstream,
    const std::vector<const std::vector<double>*>& in_values,
    const std::vector<std::vector<double>*>& in_grads)>;

// Records a fused op with the given output and hand-written backward. Used
// where building the equivalent op graph would drown the computation in
// node bookkeeping.
Tensor custom_op(const std::vector<Tensor>& inputs, const Shape& out_shape,
                 std::vector<double> value, CustomBackward backward_fn);

// ---- autodiff ----
// Populates grad on every requires_grad leaf reachable from loss. Repeated
// calls accumulate; non-scalar losses are rejected.
void backward(const Tensor& loss);

// Central-difference check of backward() for scalar-valued f at x. Returns
// max over coordinates of |g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|).
double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor& x,
                  double h = 1e-5);
// Same check against every coordinate of every listed parameter.
double grad_check_params(const std::function<Tensor()>& loss_fn,
                         const std::vector<Tensor*>& params, double h = 1e-5);

// ---- optimizer ----
struct AdamState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  long step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Standard bias-corrected Adam, applied in place from each parameter's
// accumulated grad (missing grads count as zero). Initializes moment buffers
// on first use and checks shapes thereafter.
void adam_step(const std::vector<Tensor*>& params, AdamState& state,
               double lr);

void zero_grads(const std::vector<Tensor*>& params);

}  // namespace unest
