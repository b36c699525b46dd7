#include "unest/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <unordered_set>
#include <utility>

#include "unest/parallel.hpp"

namespace unest {

namespace detail {

struct Node : std::enable_shared_from_this<Node> {
  Shape shape;
  std::vector<double> value;
  bool requires_grad = false;
  std::vector<double> grad;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;  // null for leaves

  std::size_t numel() const { return value.size(); }
  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

}  // namespace detail

using detail::Node;

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (const int d : shape) {
    if (d < 0) throw std::invalid_argument("negative extent in shape");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

std::shared_ptr<Node> make_node(Shape shape, std::vector<double> value) {
  auto n = std::make_shared<Node>();
  if (value.size() != shape_numel(shape)) {
    throw std::invalid_argument("tensor data length " +
                                std::to_string(value.size()) +
                                " does not match shape " +
                                shape_to_string(shape));
  }
  n->shape = std::move(shape);
  n->value = std::move(value);
  return n;
}

void accum_into(Node& p, const std::vector<double>& g) {
  p.ensure_grad();
  double* dst = p.grad.data();
  const double* src = g.data();
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += src[i];
}

}  // namespace

Tensor wrap_node(std::shared_ptr<Node> node) { return Tensor(std::move(node)); }

Tensor::Tensor() = default;
Tensor::Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
  auto n = make_node(shape, std::vector<double>(shape_numel(shape), 0.0));
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::ones(const Shape& shape) {
  return full(shape, 1.0);
}

Tensor Tensor::full(const Shape& shape, double value, bool requires_grad) {
  auto n = make_node(shape, std::vector<double>(shape_numel(shape), value));
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double value) {
  return from_data({}, {value});
}

Tensor Tensor::from_data(const Shape& shape, std::vector<double> data,
                         bool requires_grad) {
  auto n = make_node(shape, std::move(data));
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

const Shape& Tensor::shape() const {
  if (!node_) throw std::logic_error("use of undefined tensor");
  return node_->shape;
}

int Tensor::dim(int axis) const { return shape().at(static_cast<std::size_t>(axis)); }
int Tensor::rank() const { return static_cast<int>(shape().size()); }
std::size_t Tensor::numel() const { return node_ ? node_->numel() : 0; }

std::vector<double>& Tensor::data() {
  if (!node_) throw std::logic_error("use of undefined tensor");
  return node_->value;
}

const std::vector<double>& Tensor::data() const {
  if (!node_) throw std::logic_error("use of undefined tensor");
  return node_->value;
}

double Tensor::item() const {
  if (numel() != 1) {
    throw std::invalid_argument("item() requires a scalar tensor, got shape " +
                                shape_to_string(shape()));
  }
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool flag) {
  if (!node_) throw std::logic_error("use of undefined tensor");
  if (node_->backprop) {
    throw std::logic_error("requires_grad may only be toggled on leaves");
  }
  node_->requires_grad = flag;
  if (!flag) node_->grad.clear();
}

bool Tensor::has_grad() const {
  return node_ && node_->grad.size() == node_->value.size() &&
         !node_->value.empty();
}

const std::vector<double>& Tensor::grad() const {
  if (!has_grad()) {
    throw std::logic_error("tensor has no gradient");
  }
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_ && !node_->grad.empty()) {
    std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
  }
}

Tensor Tensor::detach() const {
  if (!node_) throw std::logic_error("use of undefined tensor");
  return from_data(node_->shape, node_->value, false);
}

// ---------------------------------------------------------------------------
// op plumbing

namespace {

std::shared_ptr<Node> sp(const Tensor& t) {
  if (!t.defined()) throw std::logic_error("use of undefined tensor");
  return t.node()->shared_from_this();
}

Tensor finish_unary(const Tensor& a, std::shared_ptr<Node> out,
                    std::function<void(Node&, Node&)> bp) {
  if (a.requires_grad()) {
    out->requires_grad = true;
    out->parents = {sp(a)};
    out->backprop = [bp = std::move(bp)](Node& self) {
      bp(self, *self.parents[0]);
    };
  }
  return wrap_node(std::move(out));
}

Tensor finish_binary(const Tensor& a, const Tensor& b,
                     std::shared_ptr<Node> out,
                     std::function<void(Node&, Node&, Node&)> bp) {
  if (a.requires_grad() || b.requires_grad()) {
    out->requires_grad = true;
    out->parents = {sp(a), sp(b)};
    out->backprop = [bp = std::move(bp)](Node& self) {
      bp(self, *self.parents[0], *self.parents[1]);
    };
  }
  return wrap_node(std::move(out));
}

// Trailing-aligned broadcast plan; strides are in units of elements and 0
// along broadcast axes.
struct BroadcastPlan {
  Shape out_shape;
  std::vector<std::size_t> stride_a;
  std::vector<std::size_t> stride_b;
  std::size_t n = 0;
  bool same_shape = false;
};

BroadcastPlan broadcast_plan(const Shape& a, const Shape& b,
                             const char* op_name) {
  BroadcastPlan plan;
  if (a == b) {
    plan.out_shape = a;
    plan.n = shape_numel(a);
    plan.same_shape = true;
    return plan;
  }
  const int ra = static_cast<int>(a.size());
  const int rb = static_cast<int>(b.size());
  const int r = std::max(ra, rb);
  plan.out_shape.assign(static_cast<std::size_t>(r), 1);
  for (int d = 0; d < r; ++d) {
    const int ea = d < r - ra ? 1 : a[static_cast<std::size_t>(d - (r - ra))];
    const int eb = d < r - rb ? 1 : b[static_cast<std::size_t>(d - (r - rb))];
    if (ea != eb && ea != 1 && eb != 1) {
      throw std::invalid_argument(std::string(op_name) + ": shape mismatch " +
                                  shape_to_string(a) + " vs " +
                                  shape_to_string(b));
    }
    plan.out_shape[static_cast<std::size_t>(d)] = std::max(ea, eb);
  }
  auto strides_for = [&](const Shape& s) {
    const int rs = static_cast<int>(s.size());
    std::vector<std::size_t> native(s.size(), 0);
    std::size_t acc = 1;
    for (int d = rs - 1; d >= 0; --d) {
      native[static_cast<std::size_t>(d)] = acc;
      acc *= static_cast<std::size_t>(s[static_cast<std::size_t>(d)]);
    }
    std::vector<std::size_t> out(static_cast<std::size_t>(r), 0);
    for (int d = 0; d < r; ++d) {
      const int sd = d - (r - rs);
      if (sd >= 0 && s[static_cast<std::size_t>(sd)] != 1) {
        out[static_cast<std::size_t>(d)] = native[static_cast<std::size_t>(sd)];
      }
    }
    return out;
  };
  plan.stride_a = strides_for(a);
  plan.stride_b = strides_for(b);
  plan.n = shape_numel(plan.out_shape);
  return plan;
}

template <typename F>
void for_each_broadcast(const BroadcastPlan& plan, F&& f) {
  const int r = static_cast<int>(plan.out_shape.size());
  std::vector<int> idx(static_cast<std::size_t>(r), 0);
  std::size_t off_a = 0;
  std::size_t off_b = 0;
  for (std::size_t flat = 0; flat < plan.n; ++flat) {
    f(flat, off_a, off_b);
    for (int d = r - 1; d >= 0; --d) {
      const auto du = static_cast<std::size_t>(d);
      ++idx[du];
      off_a += plan.stride_a[du];
      off_b += plan.stride_b[du];
      if (idx[du] < plan.out_shape[du]) break;
      off_a -= static_cast<std::size_t>(plan.out_shape[du]) * plan.stride_a[du];
      off_b -= static_cast<std::size_t>(plan.out_shape[du]) * plan.stride_b[du];
      idx[du] = 0;
    }
  }
}

enum class BinKind { kAdd, kSub, kMul };

Tensor binary_elementwise(const Tensor& a, const Tensor& b, BinKind kind,
                          const char* name) {
  const auto plan = broadcast_plan(a.shape(), b.shape(), name);
  std::vector<double> out(plan.n);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  if (plan.same_shape) {
    switch (kind) {
      case BinKind::kAdd:
        for (std::size_t i = 0; i < plan.n; ++i) out[i] = pa[i] + pb[i];
        break;
      case BinKind::kSub:
        for (std::size_t i = 0; i < plan.n; ++i) out[i] = pa[i] - pb[i];
        break;
      case BinKind::kMul:
        for (std::size_t i = 0; i < plan.n; ++i) out[i] = pa[i] * pb[i];
        break;
    }
  } else {
    for_each_broadcast(plan, [&](std::size_t o, std::size_t ia, std::size_t ib) {
      switch (kind) {
        case BinKind::kAdd: out[o] = pa[ia] + pb[ib]; break;
        case BinKind::kSub: out[o] = pa[ia] - pb[ib]; break;
        case BinKind::kMul: out[o] = pa[ia] * pb[ib]; break;
      }
    });
  }
  auto node = make_node(plan.out_shape, std::move(out));
  return finish_binary(a, b, std::move(node),
                       [plan, kind](Node& self, Node& na, Node& nb) {
    const double* g = self.grad.data();
    if (plan.same_shape) {
      if (na.requires_grad) {
        na.ensure_grad();
        double* ga = na.grad.data();
        if (kind == BinKind::kMul) {
          const double* vb = nb.value.data();
          for (std::size_t i = 0; i < plan.n; ++i) ga[i] += g[i] * vb[i];
        } else {
          for (std::size_t i = 0; i < plan.n; ++i) ga[i] += g[i];
        }
      }
      if (nb.requires_grad) {
        nb.ensure_grad();
        double* gb = nb.grad.data();
        switch (kind) {
          case BinKind::kAdd:
            for (std::size_t i = 0; i < plan.n; ++i) gb[i] += g[i];
            break;
          case BinKind::kSub:
            for (std::size_t i = 0; i < plan.n; ++i) gb[i] -= g[i];
            break;
          case BinKind::kMul: {
            const double* va = na.value.data();
            for (std::size_t i = 0; i < plan.n; ++i) gb[i] += g[i] * va[i];
            break;
          }
        }
      }
      return;
    }
    if (na.requires_grad) na.ensure_grad();
    if (nb.requires_grad) nb.ensure_grad();
    const double* va = na.value.data();
    const double* vb = nb.value.data();
    for_each_broadcast(plan, [&](std::size_t o, std::size_t ia, std::size_t ib) {
      const double gv = g[o];
      if (na.requires_grad) {
        na.grad[ia] += (kind == BinKind::kMul) ? gv * vb[ib] : gv;
      }
      if (nb.requires_grad) {
        switch (kind) {
          case BinKind::kAdd: nb.grad[ib] += gv; break;
          case BinKind::kSub: nb.grad[ib] -= gv; break;
          case BinKind::kMul: nb.grad[ib] += gv * va[ia]; break;
        }
      }
    });
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_elementwise(a, b, BinKind::kAdd, "add");
}
Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_elementwise(a, b, BinKind::kSub, "sub");
}
Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_elementwise(a, b, BinKind::kMul, "mul");
}

Tensor add_scalar(const Tensor& a, double c) {
  std::vector<double> out = a.data();
  for (double& v : out) v += c;
  auto node = make_node(a.shape(), std::move(out));
  return finish_unary(a, std::move(node), [](Node& self, Node& pa) {
    if (!pa.requires_grad) return;
    accum_into(pa, self.grad);
  });
}

Tensor mul_scalar(const Tensor& a, double c) {
  std::vector<double> out = a.data();
  for (double& v : out) v *= c;
  auto node = make_node(a.shape(), std::move(out));
  return finish_unary(a, std::move(node), [c](Node& self, Node& pa) {
    if (!pa.requires_grad) return;
    pa.ensure_grad();
    const double* g = self.grad.data();
    double* dst = pa.grad.data();
    for (std::size_t i = 0; i < self.numel(); ++i) dst[i] += c * g[i];
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw std::invalid_argument("matmul expects 2-D tensors, got " +
                                shape_to_string(a.shape()) + " and " +
                                shape_to_string(b.shape()));
  }
  const int m = a.dim(0);
  const int k = a.dim(1);
  const int k2 = b.dim(0);
  const int n = b.dim(1);
  if (k != k2) {
    throw std::invalid_argument("matmul inner-dimension mismatch: " +
                                shape_to_string(a.shape()) + " x " +
                                shape_to_string(b.shape()));
  }
  std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  const auto run_rows = [&](std::size_t r0, std::size_t r1) {
    for (std::size_t i = r0; i < r1; ++i) {
      double* crow = out.data() + i * static_cast<std::size_t>(n);
      const double* arow = pa + i * static_cast<std::size_t>(k);
      for (int kk = 0; kk < k; ++kk) {
        const double av = arow[kk];
        if (av == 0.0) continue;
        const double* brow = pb + static_cast<std::size_t>(kk) * n;
        for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  };
  const std::size_t work = std::max<std::size_t>(1, static_cast<std::size_t>(k) * n);
  parallel_for(static_cast<std::size_t>(m), std::max<std::size_t>(1, 32768 / work),
               run_rows);
  auto node = make_node({m, n}, std::move(out));
  return finish_binary(a, b, std::move(node),
                       [m, k, n](Node& self, Node& na, Node& nb) {
    const double* g = self.grad.data();
    const double* pa = na.value.data();
    const double* pb = nb.value.data();
    if (na.requires_grad) {
      na.ensure_grad();
      double* ga = na.grad.data();
      for (int i = 0; i < m; ++i) {
        const double* grow = g + static_cast<std::size_t>(i) * n;
        double* garow = ga + static_cast<std::size_t>(i) * k;
        for (int kk = 0; kk < k; ++kk) {
          const double* brow = pb + static_cast<std::size_t>(kk) * n;
          double acc = 0.0;
          for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
          garow[kk] += acc;
        }
      }
    }
    if (nb.requires_grad) {
      nb.ensure_grad();
      double* gb = nb.grad.data();
      for (int i = 0; i < m; ++i) {
        const double* grow = g + static_cast<std::size_t>(i) * n;
        const double* arow = pa + static_cast<std::size_t>(i) * k;
        for (int kk = 0; kk < k; ++kk) {
          const double av = arow[kk];
          if (av == 0.0) continue;
          double* gbrow = gb + static_cast<std::size_t>(kk) * n;
          for (int j = 0; j < n; ++j) gbrow[j] += av * grow[j];
        }
      }
    }
  });
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) {
    throw std::invalid_argument("transpose expects a 2-D tensor, got " +
                                shape_to_string(a.shape()));
  }
  const int m = a.dim(0);
  const int n = a.dim(1);
  std::vector<double> out(a.numel());
  const double* pa = a.data().data();
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      out[static_cast<std::size_t>(j) * m + i] =
          pa[static_cast<std::size_t>(i) * n + j];
    }
  }
  auto node = make_node({n, m}, std::move(out));
  return finish_unary(a, std::move(node), [m, n](Node& self, Node& pa) {
    if (!pa.requires_grad) return;
    pa.ensure_grad();
    const double* g = self.grad.data();
    double* dst = pa.grad.data();
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < m; ++i) {
        dst[static_cast<std::size_t>(i) * n + j] +=
            g[static_cast<std::size_t>(j) * m + i];
      }
    }
  });
}

Tensor reshape(const Tensor& a, const Shape& shape) {
  if (shape_numel(shape) != a.numel()) {
    throw std::invalid_argument("reshape from " + shape_to_string(a.shape()) +
                                " to " + shape_to_string(shape) +
                                " changes element count");
  }
  auto node = make_node(shape, a.data());
  return finish_unary(a, std::move(node), [](Node& self, Node& pa) {
    if (!pa.requires_grad) return;
    accum_into(pa, self.grad);
  });
}

namespace {

// Decomposes a shape around `axis` into outer/extent/inner for slice loops.
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit axis_split(const Shape& shape, int axis, const char* op_name) {
  if (axis < 0 || axis >= static_cast<int>(shape.size())) {
    throw std::invalid_argument(std::string(op_name) + ": axis " +
                                std::to_string(axis) +
                                " out of range for shape " +
                                shape_to_string(shape));
  }
  AxisSplit s;
  for (int d = 0; d < axis; ++d) s.outer *= static_cast<std::size_t>(shape[static_cast<std::size_t>(d)]);
  s.extent = static_cast<std::size_t>(shape[static_cast<std::size_t>(axis)]);
  for (std::size_t d = static_cast<std::size_t>(axis) + 1; d < shape.size(); ++d) {
    s.inner *= static_cast<std::size_t>(shape[d]);
  }
  return s;
}

}  // namespace

Tensor softmax(const Tensor& x, int axis) {
  for (const double v : x.data()) {
    if (!std::isfinite(v)) {
      throw std::domain_error("softmax: non-finite input");
    }
  }
  const auto s = axis_split(x.shape(), axis, "softmax");
  std::vector<double> out(x.numel());
  const double* px = x.data().data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.extent * s.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t e = 0; e < s.extent; ++e) {
        mx = std::max(mx, px[base + e * s.inner]);
      }
      double denom = 0.0;
      for (std::size_t e = 0; e < s.extent; ++e) {
        const double ev = std::exp(px[base + e * s.inner] - mx);
        out[base + e * s.inner] = ev;
        denom += ev;
      }
      const double inv = 1.0 / denom;
      for (std::size_t e = 0; e < s.extent; ++e) out[base + e * s.inner] *= inv;
    }
  }
  auto node = make_node(x.shape(), std::move(out));
  return finish_unary(x, std::move(node), [s](Node& self, Node& pa) {
    if (!pa.requires_grad) return;
    pa.ensure_grad();
    const double* g = self.grad.data();
    const double* p = self.value.data();
    double* dst = pa.grad.data();
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = o * s.extent * s.inner + in;
        double dot = 0.0;
        for (std::size_t e = 0; e < s.extent; ++e) {
          const std::size_t i = base + e * s.inner;
          dot += g[i] * p[i];
        }
        for (std::size_t e = 0; e < s.extent; ++e) {
          const std::size_t i = base + e * s.inner;
          dst[i] += p[i] * (g[i] - dot);
        }
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  int axis, double eps) {
  const auto s = axis_split(x.shape(), axis, "layer_norm");
  if (gamma.rank() != 1 || beta.rank() != 1 ||
      gamma.numel() != s.extent || beta.numel() != s.extent) {
    throw std::invalid_argument(
        "layer_norm: gamma/beta must be rank-1 of length " +
        std::to_string(s.extent) + ", got " + shape_to_string(gamma.shape()) +
        " and " + shape_to_string(beta.shape()));
  }
  const std::size_t n_slices = s.outer * s.inner;
  std::vector<double> out(x.numel());
  std::vector<double> normalized(x.numel());
  std::vector<double> inv_std(n_slices);
  const double* px = x.data().data();
  const double* pg = gamma.data().data();
  const double* pb = beta.data().data();
  const double inv_extent = 1.0 / static_cast<double>(s.extent);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.extent * s.inner + in;
      double mean_v = 0.0;
      for (std::size_t e = 0; e < s.extent; ++e) mean_v += px[base + e * s.inner];
      mean_v *= inv_extent;
      double var_v = 0.0;
      for (std::size_t e = 0; e < s.extent; ++e) {
        const double d = px[base + e * s.inner] - mean_v;
        var_v += d * d;
      }
      var_v *= inv_extent;
      const double inv = 1.0 / std::sqrt(var_v + eps);
      inv_std[o * s.inner + in] = inv;
      for (std::size_t e = 0; e < s.extent; ++e) {
        const std::size_t i = base + e * s.inner;
        const double nv = (px[i] - mean_v) * inv;
        normalized[i] = nv;
        out[i] = nv * pg[e] + pb[e];
      }
    }
  }
  auto node = make_node(x.shape(), std::move(out));
  const bool any = x.requires_grad() || gamma.requires_grad() || beta.requires_grad();
  if (!any) return wrap_node(std::move(node));
  node->requires_grad = true;
  node->parents = {sp(x), sp(gamma), sp(beta)};
  node->backprop = [s, normalized = std::move(normalized),
                    inv_std = std::move(inv_std), inv_extent](Node& self) {
    Node& nx = *self.parents[0];
    Node& ng = *self.parents[1];
    Node& nb = *self.parents[2];
    const double* g = self.grad.data();
    const double* gam = ng.value.data();
    if (nb.requires_grad) {
      nb.ensure_grad();
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t in = 0; in < s.inner; ++in) {
          const std::size_t base = o * s.extent * s.inner + in;
          for (std::size_t e = 0; e < s.extent; ++e) {
            nb.grad[e] += g[base + e * s.inner];
          }
        }
      }
    }
    if (ng.requires_grad) {
      ng.ensure_grad();
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t in = 0; in < s.inner; ++in) {
          const std::size_t base = o * s.extent * s.inner + in;
          for (std::size_t e = 0; e < s.extent; ++e) {
            const std::size_t i = base + e * s.inner;
            ng.grad[e] += g[i] * normalized[i];
          }
        }
      }
    }
    if (nx.requires_grad) {
      nx.ensure_grad();
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t in = 0; in < s.inner; ++in) {
          const std::size_t base = o * s.extent * s.inner + in;
          const double inv = inv_std[o * s.inner + in];
          double sum_d = 0.0;
          double sum_dn = 0.0;
          for (std::size_t e = 0; e < s.extent; ++e) {
            const std::size_t i = base + e * s.inner;
            const double d = g[i] * gam[e];
            sum_d += d;
            sum_dn += d * normalized[i];
          }
          sum_d *= inv_extent;
          sum_dn *= inv_extent;
          for (std::size_t e = 0; e < s.extent; ++e) {
            const std::size_t i = base + e * s.inner;
            const double d = g[i] * gam[e];
            nx.grad[i] += inv * (d - sum_d - normalized[i] * sum_dn);
          }
        }
      }
    }
  };
  return wrap_node(std::move(node));
}

// ---------------------------------------------------------------------------
// activations

namespace {

Tensor pointwise(const Tensor& x, std::vector<double> value,
                 std::vector<double> dvalue) {
  auto node = make_node(x.shape(), std::move(value));
  return finish_unary(x, std::move(node),
                      [d = std::move(dvalue)](Node& self, Node& pa) {
    if (!pa.requires_grad) return;
    pa.ensure_grad();
    const double* g = self.grad.data();
    double* dst = pa.grad.data();
    for (std::size_t i = 0; i < self.numel(); ++i) dst[i] += g[i] * d[i];
  });
}

}  // namespace

Tensor sigmoid(const Tensor& x) {
  const std::size_t n = x.numel();
  std::vector<double> value(n);
  std::vector<double> dvalue(n);
  const double* px = x.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    const double v = px[i];
    const double s = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                              : std::exp(v) / (1.0 + std::exp(v));
    value[i] = s;
    dvalue[i] = s * (1.0 - s);
  }
  return pointwise(x, std::move(value), std::move(dvalue));
}

Tensor relu(const Tensor& x) {
  const std::size_t n = x.numel();
  std::vector<double> value(n);
  std::vector<double> dvalue(n);
  const double* px = x.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    const bool pos = px[i] > 0.0;
    value[i] = pos ? px[i] : 0.0;
    dvalue[i] = pos ? 1.0 : 0.0;
  }
  return pointwise(x, std::move(value), std::move(dvalue));
}

Tensor leaky_relu(const Tensor& x, double negative_slope) {
  const std::size_t n = x.numel();
  std::vector<double> value(n);
  std::vector<double> dvalue(n);
  const double* px = x.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    const bool pos = px[i] > 0.0;
    value[i] = pos ? px[i] : negative_slope * px[i];
    dvalue[i] = pos ? 1.0 : negative_slope;
  }
  return pointwise(x, std::move(value), std::move(dvalue));
}

Tensor gelu(const Tensor& x) {
  const std::size_t n = x.numel();
  std::vector<double> value(n);
  std::vector<double> dvalue(n);
  const double* px = x.data().data();
  constexpr double inv_sqrt2 = std::numbers::sqrt2 / 2.0;
  const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = px[i];
    const double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
    const double pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
    value[i] = v * cdf;
    dvalue[i] = cdf + v * pdf;
  }
  return pointwise(x, std::move(value), std::move(dvalue));
}

Tensor tanh_act(const Tensor& x) {
  const std::size_t n = x.numel();
  std::vector<double> value(n);
  std::vector<double> dvalue(n);
  const double* px = x.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    const double t = std::tanh(px[i]);
    value[i] = t;
    dvalue[i] = 1.0 - t * t;
  }
  return pointwise(x, std::move(value), std::move(dvalue));
}

Tensor log_act(const Tensor& x) {
  const std::size_t n = x.numel();
  std::vector<double> value(n);
  std::vector<double> dvalue(n);
  const double* px = x.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    if (!(px[i] > 0.0)) {
      throw std::domain_error("log: non-positive input " +
                              std::to_string(px[i]));
    }
    value[i] = std::log(px[i]);
    dvalue[i] = 1.0 / px[i];
  }
  return pointwise(x, std::move(value), std::move(dvalue));
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("clamp: lo > hi");
  const std::size_t n = x.numel();
  std::vector<double> value(n);
  std::vector<double> dvalue(n);
  const double* px = x.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    const double v = px[i];
    const bool inside = v > lo && v < hi;
    value[i] = std::min(hi, std::max(lo, v));
    dvalue[i] = inside ? 1.0 : 0.0;
  }
  return pointwise(x, std::move(value), std::move(dvalue));
}

// ---------------------------------------------------------------------------
// convolution

Tensor conv2d(const Tensor& x, const Tensor& w, int stride, int pad) {
  if (x.rank() != 3 || w.rank() != 4) {
    throw std::invalid_argument("conv2d expects x [C,H,W] and w [O,C,k,k], got " +
                                shape_to_string(x.shape()) + " and " +
                                shape_to_string(w.shape()));
  }
  const int C = x.dim(0);
  const int H = x.dim(1);
  const int W = x.dim(2);
  const int O = w.dim(0);
  const int kh = w.dim(2);
  const int kw = w.dim(3);
  if (w.dim(1) != C) {
    throw std::invalid_argument("conv2d channel mismatch: x " +
                                shape_to_string(x.shape()) + " vs w " +
                                shape_to_string(w.shape()));
  }
  if (kh != kw || kh < 1) throw std::invalid_argument("conv2d kernel must be square");
  if (stride < 1 || pad < 0) throw std::invalid_argument("conv2d stride/pad out of range");
  const int k = kh;
  const int h_out = (H + 2 * pad - k) / stride + 1;
  const int w_out = (W + 2 * pad - k) / stride + 1;
  if (H + 2 * pad < k || W + 2 * pad < k || h_out < 1 || w_out < 1) {
    throw std::invalid_argument("conv2d kernel larger than padded input");
  }

  std::vector<double> out(static_cast<std::size_t>(O) * h_out * w_out, 0.0);
  const double* px = x.data().data();
  const double* pw = w.data().data();
  // Coefficient-outer accumulation: each kernel tap adds a shifted input row
  // into the output row, keeping the inner loop long and contiguous.
  const auto run = [&](std::size_t o0, std::size_t o1) {
    for (std::size_t o = o0; o < o1; ++o) {
      double* oplane = out.data() + o * static_cast<std::size_t>(h_out) * w_out;
      for (int c = 0; c < C; ++c) {
        const double* xpl = px + static_cast<std::size_t>(c) * H * W;
        const double* wpl = pw + (o * C + static_cast<std::size_t>(c)) * k * k;
        for (int r = 0; r < k; ++r) {
          for (int q = 0; q < k; ++q) {
            const double coeff = wpl[static_cast<std::size_t>(r) * k + q];
            if (coeff == 0.0) continue;
            // Output rows whose source row hi = ho*stride - pad + r is valid.
            for (int ho = 0; ho < h_out; ++ho) {
              const int hi = ho * stride - pad + r;
              if (hi < 0) continue;
              if (hi >= H) break;
              // Valid wo range: 0 <= wo*stride - pad + q < W.
              const int wi_base = q - pad;
              int wo_lo = 0;
              if (wi_base < 0) wo_lo = (-wi_base + stride - 1) / stride;
              int wo_hi = w_out;  // exclusive
              if (wi_base + (w_out - 1) * stride >= W) {
                wo_hi = (W - wi_base + stride - 1) / stride;
              }
              double* orow = oplane + static_cast<std::size_t>(ho) * w_out;
              const double* xrow = xpl + static_cast<std::size_t>(hi) * W + wi_base;
              if (stride == 1) {
                for (int wo = wo_lo; wo < wo_hi; ++wo) orow[wo] += coeff * xrow[wo];
              } else {
                for (int wo = wo_lo; wo < wo_hi; ++wo) {
                  orow[wo] += coeff * xrow[static_cast<std::size_t>(wo) * stride];
                }
              }
            }
          }
        }
      }
    }
  };
  const std::size_t conv_work = std::max<std::size_t>(
      1, static_cast<std::size_t>(C) * h_out * w_out * k * k);
  parallel_for(static_cast<std::size_t>(O),
               std::max<std::size_t>(1, 65536 / conv_work), run);

  auto node = make_node({O, h_out, w_out}, std::move(out));
  return finish_binary(x, w, std::move(node),
                       [C, H, W, O, k, stride, pad, h_out, w_out](
                           Node& self, Node& nx, Node& nw) {
    const double* g = self.grad.data();
    const double* px = nx.value.data();
    const double* pw = nw.value.data();
    // Same tap-outer structure as the forward: per (o,c,r,q) the valid
    // output range [wo_lo, wo_hi) pairs row g[o,ho,:] with the input row at
    // hi = ho*stride - pad + r shifted by wi_base = q - pad.
    const auto tap_range = [&](int q, int* wo_lo, int* wo_hi) {
      const int wi_base = q - pad;
      *wo_lo = wi_base < 0 ? (-wi_base + stride - 1) / stride : 0;
      *wo_hi = w_out;
      if (wi_base + (w_out - 1) * stride >= W) {
        *wo_hi = (W - wi_base + stride - 1) / stride;
      }
      return wi_base;
    };
    if (nx.requires_grad) {
      nx.ensure_grad();
      double* dx = nx.grad.data();
      for (int o = 0; o < O; ++o) {
        const double* gpl = g + static_cast<std::size_t>(o) * h_out * w_out;
        for (int c = 0; c < C; ++c) {
          double* dxpl = dx + static_cast<std::size_t>(c) * H * W;
          const double* wpl = pw + (static_cast<std::size_t>(o) * C + c) * k * k;
          for (int r = 0; r < k; ++r) {
            for (int q = 0; q < k; ++q) {
              const double coeff = wpl[static_cast<std::size_t>(r) * k + q];
              if (coeff == 0.0) continue;
              int wo_lo, wo_hi;
              const int wi_base = tap_range(q, &wo_lo, &wo_hi);
              for (int ho = 0; ho < h_out; ++ho) {
                const int hi = ho * stride - pad + r;
                if (hi < 0) continue;
                if (hi >= H) break;
                const double* grow = gpl + static_cast<std::size_t>(ho) * w_out;
                double* dxrow = dxpl + static_cast<std::size_t>(hi) * W + wi_base;
                if (stride == 1) {
                  for (int wo = wo_lo; wo < wo_hi; ++wo) dxrow[wo] += coeff * grow[wo];
                } else {
                  for (int wo = wo_lo; wo < wo_hi; ++wo) {
                    dxrow[static_cast<std::size_t>(wo) * stride] += coeff * grow[wo];
                  }
                }
              }
            }
          }
        }
      }
    }
    if (nw.requires_grad) {
      nw.ensure_grad();
      double* dw = nw.grad.data();
      for (int o = 0; o < O; ++o) {
        const double* gpl = g + static_cast<std::size_t>(o) * h_out * w_out;
        for (int c = 0; c < C; ++c) {
          const double* xpl = px + static_cast<std::size_t>(c) * H * W;
          double* dwpl = dw + (static_cast<std::size_t>(o) * C + c) * k * k;
          for (int r = 0; r < k; ++r) {
            for (int q = 0; q < k; ++q) {
              int wo_lo, wo_hi;
              const int wi_base = tap_range(q, &wo_lo, &wo_hi);
              double acc = 0.0;
              for (int ho = 0; ho < h_out; ++ho) {
                const int hi = ho * stride - pad + r;
                if (hi < 0) continue;
                if (hi >= H) break;
                const double* grow = gpl + static_cast<std::size_t>(ho) * w_out;
                const double* xrow = xpl + static_cast<std::size_t>(hi) * W + wi_base;
                if (stride == 1) {
                  for (int wo = wo_lo; wo < wo_hi; ++wo) acc += grow[wo] * xrow[wo];
                } else {
                  for (int wo = wo_lo; wo < wo_hi; ++wo) {
                    acc += grow[wo] * xrow[static_cast<std::size_t>(wo) * stride];
                  }
                }
              }
              dwpl[static_cast<std::size_t>(r) * k + q] += acc;
            }
          }
        }
      }
    }
  });
}

Tensor deconv2d(const Tensor& x, const Tensor& w) {
  if (x.rank() != 3 || w.rank() != 4) {
    throw std::invalid_argument("deconv2d expects x [C,H,W] and w [C,O,2,2]");
  }
  const int C = x.dim(0);
  const int H = x.dim(1);
  const int W = x.dim(2);
  if (w.dim(0) != C || w.dim(2) != 2 || w.dim(3) != 2) {
    throw std::invalid_argument(
        "deconv2d supports only stride 2 with a 2x2 kernel; got weights " +
        shape_to_string(w.shape()) + " for input " + shape_to_string(x.shape()));
  }
  const int O = w.dim(1);
  const int H2 = 2 * H;
  const int W2 = 2 * W;
  // Kernel equals stride, so each output pixel has exactly one source tap.
  std::vector<double> out(static_cast<std::size_t>(O) * H2 * W2, 0.0);
  const double* px = x.data().data();
  const double* pw = w.data().data();
  for (int c = 0; c < C; ++c) {
    const double* xpl = px + static_cast<std::size_t>(c) * H * W;
    for (int o = 0; o < O; ++o) {
      const double* wq = pw + (static_cast<std::size_t>(c) * O + o) * 4;
      double* opl = out.data() + static_cast<std::size_t>(o) * H2 * W2;
      for (int h = 0; h < H; ++h) {
        const double* xrow = xpl + static_cast<std::size_t>(h) * W;
        double* orow0 = opl + static_cast<std::size_t>(2 * h) * W2;
        double* orow1 = orow0 + W2;
        for (int v = 0; v < W; ++v) {
          const double xv = xrow[v];
          orow0[2 * v] += xv * wq[0];
          orow0[2 * v + 1] += xv * wq[1];
          orow1[2 * v] += xv * wq[2];
          orow1[2 * v + 1] += xv * wq[3];
        }
      }
    }
  }
  auto node = make_node({O, H2, W2}, std::move(out));
  return finish_binary(x, w, std::move(node),
                       [C, H, W, O, H2, W2](Node& self, Node& nx, Node& nw) {
    const double* g = self.grad.data();
    const double* px = nx.value.data();
    const double* pw = nw.value.data();
    if (nx.requires_grad) {
      nx.ensure_grad();
      double* dx = nx.grad.data();
      for (int c = 0; c < C; ++c) {
        double* dxpl = dx + static_cast<std::size_t>(c) * H * W;
        for (int o = 0; o < O; ++o) {
          const double* wq = pw + (static_cast<std::size_t>(c) * O + o) * 4;
          const double* gpl = g + static_cast<std::size_t>(o) * H2 * W2;
          for (int h = 0; h < H; ++h) {
            const double* grow0 = gpl + static_cast<std::size_t>(2 * h) * W2;
            const double* grow1 = grow0 + W2;
            double* dxrow = dxpl + static_cast<std::size_t>(h) * W;
            for (int v = 0; v < W; ++v) {
              dxrow[v] += grow0[2 * v] * wq[0] + grow0[2 * v + 1] * wq[1] +
                          grow1[2 * v] * wq[2] + grow1[2 * v + 1] * wq[3];
            }
          }
        }
      }
    }
    if (nw.requires_grad) {
      nw.ensure_grad();
      double* dw = nw.grad.data();
      for (int c = 0; c < C; ++c) {
        const double* xpl = px + static_cast<std::size_t>(c) * H * W;
        for (int o = 0; o < O; ++o) {
          double* dwq = dw + (static_cast<std::size_t>(c) * O + o) * 4;
          const double* gpl = g + static_cast<std::size_t>(o) * H2 * W2;
          double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
          for (int h = 0; h < H; ++h) {
            const double* grow0 = gpl + static_cast<std::size_t>(2 * h) * W2;
            const double* grow1 = grow0 + W2;
            const double* xrow = xpl + static_cast<std::size_t>(h) * W;
            for (int v = 0; v < W; ++v) {
              const double xv = xrow[v];
              a0 += xv * grow0[2 * v];
              a1 += xv * grow0[2 * v + 1];
              a2 += xv * grow1[2 * v];
              a3 += xv * grow1[2 * v + 1];
            }
          }
          dwq[0] += a0;
          dwq[1] += a1;
          dwq[2] += a2;
          dwq[3] += a3;
        }
      }
    }
  });
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
  if (x.rank() != 3 || bias.rank() != 1 || bias.dim(0) != x.dim(0)) {
    throw std::invalid_argument("add_channel_bias expects x [C,H,W] and bias [C], got " +
                                shape_to_string(x.shape()) + " and " +
                                shape_to_string(bias.shape()));
  }
  const int C = x.dim(0);
  const std::size_t plane = x.numel() / static_cast<std::size_t>(C);
  std::vector<double> out = x.data();
  const double* pb = bias.data().data();
  for (int c = 0; c < C; ++c) {
    double* row = out.data() + static_cast<std::size_t>(c) * plane;
    const double bv = pb[c];
    for (std::size_t i = 0; i < plane; ++i) row[i] += bv;
  }
  auto node = make_node(x.shape(), std::move(out));
  return finish_binary(x, bias, std::move(node),
                       [C, plane](Node& self, Node& nx, Node& nb) {
    const double* g = self.grad.data();
    if (nx.requires_grad) accum_into(nx, self.grad);
    if (nb.requires_grad) {
      nb.ensure_grad();
      for (int c = 0; c < C; ++c) {
        const double* row = g + static_cast<std::size_t>(c) * plane;
        double acc = 0.0;
        for (std::size_t i = 0; i < plane; ++i) acc += row[i];
        nb.grad[static_cast<std::size_t>(c)] += acc;
      }
    }
  });
}

// ---------------------------------------------------------------------------
// reductions

namespace {

enum class RedKind { kSum, kMean, kAbsMean };

Tensor reduce_scalar(const Tensor& x, RedKind kind) {
  const std::size_t n = x.numel();
  if (n == 0) throw std::invalid_argument("reduction over empty tensor");
  const double* px = x.data().data();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += kind == RedKind::kAbsMean ? std::abs(px[i]) : px[i];
  }
  if (kind != RedKind::kSum) acc /= static_cast<double>(n);
  auto node = make_node({}, {acc});
  return finish_unary(x, std::move(node), [kind, n](Node& self, Node& pa) {
    if (!pa.requires_grad) return;
    pa.ensure_grad();
    const double g = self.grad[0];
    const double scale = kind == RedKind::kSum ? 1.0 : 1.0 / static_cast<double>(n);
    double* dst = pa.grad.data();
    const double* v = pa.value.data();
    for (std::size_t i = 0; i < n; ++i) {
      double d = scale;
      if (kind == RedKind::kAbsMean) {
        d *= v[i] > 0.0 ? 1.0 : (v[i] < 0.0 ? -1.0 : 0.0);
      }
      dst[i] += g * d;
    }
  });
}

}  // namespace

Tensor sum(const Tensor& x) { return reduce_scalar(x, RedKind::kSum); }
Tensor mean(const Tensor& x) { return reduce_scalar(x, RedKind::kMean); }
Tensor abs_mean(const Tensor& x) { return reduce_scalar(x, RedKind::kAbsMean); }

// ---------------------------------------------------------------------------
// structural ops

Tensor gather_rows(const Tensor& x, const std::vector<int>& rows) {
  if (x.rank() != 2) {
    throw std::invalid_argument("gather_rows expects a 2-D tensor");
  }
  const int n = x.dim(0);
  const int k = x.dim(1);
  std::vector<double> out(rows.size() * static_cast<std::size_t>(k));
  const double* px = x.data().data();
  for (std::size_t t = 0; t < rows.size(); ++t) {
    const int r = rows[t];
    if (r < 0 || r >= n) {
      throw std::out_of_range("gather_rows: row " + std::to_string(r) +
                              " out of range [0," + std::to_string(n) + ")");
    }
    std::copy_n(px + static_cast<std::size_t>(r) * k, k,
                out.data() + t * static_cast<std::size_t>(k));
  }
  auto node = make_node({static_cast<int>(rows.size()), k}, std::move(out));
  return finish_unary(x, std::move(node), [rows, k](Node& self, Node& pa) {
    if (!pa.requires_grad) return;
    pa.ensure_grad();
    const double* g = self.grad.data();
    for (std::size_t t = 0; t < rows.size(); ++t) {
      double* dst = pa.grad.data() + static_cast<std::size_t>(rows[t]) * k;
      const double* src = g + t * static_cast<std::size_t>(k);
      for (int j = 0; j < k; ++j) dst[j] += src[j];
    }
  });
}

Tensor scatter_rows(const Tensor& x, const std::vector<int>& rows,
                    int n_rows) {
  if (x.rank() != 2) {
    throw std::invalid_argument("scatter_rows expects a 2-D tensor");
  }
  if (static_cast<std::size_t>(x.dim(0)) != rows.size()) {
    throw std::invalid_argument("scatter_rows: row-index count mismatch");
  }
  const int k = x.dim(1);
  std::vector<double> out(static_cast<std::size_t>(n_rows) * k, 0.0);
  std::vector<char> seen(static_cast<std::size_t>(n_rows), 0);
  const double* px = x.data().data();
  for (std::size_t t = 0; t < rows.size(); ++t) {
    const int r = rows[t];
    if (r < 0 || r >= n_rows) {
      throw std::out_of_range("scatter_rows: row " + std::to_string(r) +
                              " out of range [0," + std::to_string(n_rows) + ")");
    }
    if (seen[static_cast<std::size_t>(r)]) {
      throw std::invalid_argument("scatter_rows: duplicate target row " +
                                  std::to_string(r));
    }
    seen[static_cast<std::size_t>(r)] = 1;
    std::copy_n(px + t * static_cast<std::size_t>(k), k,
                out.data() + static_cast<std::size_t>(r) * k);
  }
  auto node = make_node({n_rows, k}, std::move(out));
  return finish_unary(x, std::move(node), [rows, k](Node& self, Node& pa) {
    if (!pa.requires_grad) return;
    pa.ensure_grad();
    const double* g = self.grad.data();
    for (std::size_t t = 0; t < rows.size(); ++t) {
      const double* src = g + static_cast<std::size_t>(rows[t]) * k;
      double* dst = pa.grad.data() + t * static_cast<std::size_t>(k);
      for (int j = 0; j < k; ++j) dst[j] += src[j];
    }
  });
}

Tensor slice_cols(const Tensor& x, int col_begin, int col_end) {
  if (x.rank() != 2) {
    throw std::invalid_argument("slice_cols expects a 2-D tensor");
  }
  const int n = x.dim(0);
  const int k = x.dim(1);
  if (col_begin < 0 || col_end > k || col_begin >= col_end) {
    throw std::out_of_range("slice_cols: range [" + std::to_string(col_begin) +
                            "," + std::to_string(col_end) +
                            ") invalid for width " + std::to_string(k));
  }
  const int w = col_end - col_begin;
  std::vector<double> out(static_cast<std::size_t>(n) * w);
  const double* px = x.data().data();
  for (int i = 0; i < n; ++i) {
    std::copy_n(px + static_cast<std::size_t>(i) * k + col_begin, w,
                out.data() + static_cast<std::size_t>(i) * w);
  }
  auto node = make_node({n, w}, std::move(out));
  return finish_unary(x, std::move(node),
                      [n, k, w, col_begin](Node& self, Node& pa) {
    if (!pa.requires_grad) return;
    pa.ensure_grad();
    const double* g = self.grad.data();
    for (int i = 0; i < n; ++i) {
      double* dst = pa.grad.data() + static_cast<std::size_t>(i) * k + col_begin;
      const double* src = g + static_cast<std::size_t>(i) * w;
      for (int j = 0; j < w; ++j) dst[j] += src[j];
    }
  });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat of zero tensors");
  const Shape& first = parts[0].shape();
  const int r = static_cast<int>(first.size());
  if (axis < 0 || axis >= r) throw std::invalid_argument("concat: bad axis");
  Shape out_shape = first;
  int total = 0;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    if (static_cast<int>(s.size()) != r) {
      throw std::invalid_argument("concat: rank mismatch");
    }
    for (int d = 0; d < r; ++d) {
      if (d != axis && s[static_cast<std::size_t>(d)] != first[static_cast<std::size_t>(d)]) {
        throw std::invalid_argument("concat: shape mismatch " +
                                    shape_to_string(s) + " vs " +
                                    shape_to_string(first));
      }
    }
    total += s[static_cast<std::size_t>(axis)];
  }
  out_shape[static_cast<std::size_t>(axis)] = total;

  std::size_t outer = 1;
  for (int d = 0; d < axis; ++d) outer *= static_cast<std::size_t>(first[static_cast<std::size_t>(d)]);
  std::size_t inner = 1;
  for (int d = axis + 1; d < r; ++d) inner *= static_cast<std::size_t>(first[static_cast<std::size_t>(d)]);

  std::vector<double> out(shape_numel(out_shape));
  std::vector<std::size_t> slab(parts.size());
  const std::size_t out_slab = static_cast<std::size_t>(total) * inner;
  std::size_t offset = 0;
  for (std::size_t pi = 0; pi < parts.size(); ++pi) {
    const std::size_t sl =
        static_cast<std::size_t>(parts[pi].shape()[static_cast<std::size_t>(axis)]) * inner;
    slab[pi] = sl;
    const double* src = parts[pi].data().data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(src + o * sl, sl, out.data() + o * out_slab + offset);
    }
    offset += sl;
  }

  auto node = make_node(out_shape, std::move(out));
  bool any = false;
  for (const Tensor& p : parts) any = any || p.requires_grad();
  if (!any) return wrap_node(std::move(node));
  node->requires_grad = true;
  for (const Tensor& p : parts) node->parents.push_back(sp(p));
  node->backprop = [slab, outer, out_slab](Node& self) {
    const double* g = self.grad.data();
    std::size_t offset = 0;
    for (std::size_t pi = 0; pi < self.parents.size(); ++pi) {
      Node& p = *self.parents[pi];
      const std::size_t sl = slab[pi];
      if (p.requires_grad) {
        p.ensure_grad();
        for (std::size_t o = 0; o < outer; ++o) {
          const double* src = g + o * out_slab + offset;
          double* dst = p.grad.data() + o * sl;
          for (std::size_t i = 0; i < sl; ++i) dst[i] += src[i];
        }
      }
      offset += sl;
    }
  };
  return wrap_node(std::move(node));
}

Tensor extract_patches(const Tensor& x, int patch) {
  if (x.rank() != 3 || x.dim(0) != 1) {
    throw std::invalid_argument("extract_patches expects a [1,H,W] tensor, got " +
                                shape_to_string(x.shape()));
  }
  const int H = x.dim(1);
  const int W = x.dim(2);
  if (patch < 1 || H % patch != 0 || W % patch != 0) {
    throw std::invalid_argument("extract_patches: patch " + std::to_string(patch) +
                                " must divide image dims " + shape_to_string(x.shape()));
  }
  const int gh = H / patch;
  const int gw = W / patch;
  const int n = gh * gw;
  const int p2 = patch * patch;
  std::vector<double> out(static_cast<std::size_t>(n) * p2);
  const double* px = x.data().data();
  for (int gi = 0; gi < gh; ++gi) {
    for (int gj = 0; gj < gw; ++gj) {
      double* row = out.data() + (static_cast<std::size_t>(gi) * gw + gj) * p2;
      for (int r = 0; r < patch; ++r) {
        const double* src = px + static_cast<std::size_t>(gi * patch + r) * W +
                            static_cast<std::size_t>(gj) * patch;
        std::copy_n(src, patch, row + static_cast<std::size_t>(r) * patch);
      }
    }
  }
  auto node = make_node({n, p2}, std::move(out));
  return finish_unary(x, std::move(node),
                      [H, W, patch, gh, gw, p2](Node& self, Node& pa) {
    if (!pa.requires_grad) return;
    pa.ensure_grad();
    const double* g = self.grad.data();
    for (int gi = 0; gi < gh; ++gi) {
      for (int gj = 0; gj < gw; ++gj) {
        const double* row = g + (static_cast<std::size_t>(gi) * gw + gj) * p2;
        for (int r = 0; r < patch; ++r) {
          double* dst = pa.grad.data() +
                        static_cast<std::size_t>(gi * patch + r) * W +
                        static_cast<std::size_t>(gj) * patch;
          const double* src = row + static_cast<std::size_t>(r) * patch;
          for (int q = 0; q < patch; ++q) dst[q] += src[q];
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// custom ops

Tensor custom_op(const std::vector<Tensor>& inputs, const Shape& out_shape,
                 std::vector<double> value, CustomBackward backward_fn) {
  auto node = make_node(out_shape, std::move(value));
  bool any = false;
  for (const Tensor& t : inputs) any = any || t.requires_grad();
  if (!any) return wrap_node(std::move(node));
  node->requires_grad = true;
  for (const Tensor& t : inputs) node->parents.push_back(sp(t));
  node->backprop = [backward_fn = std::move(backward_fn)](Node& self) {
    std::vector<const std::vector<double>*> in_values;
    std::vector<std::vector<double>*> in_grads;
    in_values.reserve(self.parents.size());
    in_grads.reserve(self.parents.size());
    for (const auto& p : self.parents) {
      in_values.push_back(&p->value);
      if (p->requires_grad) {
        p->ensure_grad();
        in_grads.push_back(&p->grad);
      } else {
        in_grads.push_back(nullptr);
      }
    }
    backward_fn(self.grad, in_values, in_grads);
  };
  return wrap_node(std::move(node));
}

// ---------------------------------------------------------------------------
// backward

void backward(const Tensor& loss) {
  Node* root = loss.node();
  if (!root) throw std::logic_error("backward on undefined tensor");
  if (root->numel() != 1) {
    throw std::invalid_argument("backward requires a scalar loss, got shape " +
                                shape_to_string(root->shape));
  }
  if (!root->requires_grad) return;

  struct Frame {
    Node* node;
    std::size_t next;
  };
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<Frame> stack;
  stack.push_back({root, 0});
  visited.insert(root);
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.node->parents.size()) {
      Node* p = f.node->parents[f.next++].get();
      if (p->requires_grad && visited.insert(p).second) {
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  // Interior grads are pass-local; leaf grads persist so repeated calls
  // accumulate.
  for (Node* n : order) {
    if (n->backprop) {
      n->grad.assign(n->numel(), 0.0);
    } else {
      n->ensure_grad();
    }
  }
  root->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop) n->backprop(*n);
  }
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor& x,
                  double h) {
  if (!x.requires_grad()) {
    throw std::invalid_argument("grad_check: x must require gradients");
  }
  x.zero_grad();
  {
    Tensor loss = f(x);
    backward(loss);
  }
  std::vector<double> analytic =
      x.has_grad() ? x.grad() : std::vector<double>(x.numel(), 0.0);

  double worst = 0.0;
  std::vector<double>& vals = x.data();
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const double saved = vals[i];
    vals[i] = saved + h;
    const double up = f(x).item();
    vals[i] = saved - h;
    const double dn = f(x).item();
    vals[i] = saved;
    const double fd = (up - dn) / (2.0 * h);
    const double ad = analytic[i];
    const double rel = std::abs(ad - fd) / std::max(1e-8, std::abs(ad) + std::abs(fd));
    worst = std::max(worst, rel);
  }
  return worst;
}

double grad_check_params(const std::function<Tensor()>& loss_fn,
                         const std::vector<Tensor*>& params, double h) {
  for (Tensor* p : params) p->zero_grad();
  {
    Tensor loss = loss_fn();
    backward(loss);
  }
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (Tensor* p : params) {
    analytic.push_back(p->has_grad() ? p->grad()
                                     : std::vector<double>(p->numel(), 0.0));
  }
  double worst = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    std::vector<double>& vals = params[pi]->data();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double saved = vals[i];
      vals[i] = saved + h;
      const double up = loss_fn().item();
      vals[i] = saved - h;
      const double dn = loss_fn().item();
      vals[i] = saved;
      const double fd = (up - dn) / (2.0 * h);
      const double ad = analytic[pi][i];
      const double rel =
          std::abs(ad - fd) / std::max(1e-8, std::abs(ad) + std::abs(fd));
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// optimizer

void adam_step(const std::vector<Tensor*>& params, AdamState& state,
               double lr) {
  if (lr < 0.0) throw std::invalid_argument("adam_step: negative learning rate");
  if (state.first_moment.empty()) {
    state.first_moment.resize(params.size());
    state.second_moment.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.first_moment[i].assign(params[i]->numel(), 0.0);
      state.second_moment[i].assign(params[i]->numel(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw std::invalid_argument("adam_step: state/parameter count mismatch");
  }
  ++state.step_count;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    std::vector<double>& m = state.first_moment[i];
    std::vector<double>& v = state.second_moment[i];
    if (m.size() != p.numel()) {
      throw std::invalid_argument("adam_step: moment shape mismatch at parameter " +
                                  std::to_string(i));
    }
    const bool has_g = p.has_grad();
    const std::vector<double>* g = has_g ? &p.grad() : nullptr;
    std::vector<double>& vals = p.data();
    for (std::size_t j = 0; j < vals.size(); ++j) {
      const double gj = has_g ? (*g)[j] : 0.0;
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * gj;
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * gj * gj;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      vals[j] -= lr * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

void zero_grads(const std::vector<Tensor*>& params) {
  for (Tensor* p : params) p->zero_grad();
}

}  // namespace unest
