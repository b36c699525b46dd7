#include "unest/attention.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

namespace unest {

std::vector<Tensor*> AttentionParams::parameters() {
  return {&w_q,       &w_k,      &w_v,       &w_o,      &ln1_gamma,
          &ln1_beta,  &ln2_gamma, &ln2_beta, &mlp_w1,   &mlp_b1,
          &mlp_w2,    &mlp_b2};
}

std::vector<const Tensor*> AttentionParams::parameters() const {
  auto* self = const_cast<AttentionParams*>(this);
  std::vector<const Tensor*> out;
  for (Tensor* t : self->parameters()) out.push_back(t);
  return out;
}

namespace {

Tensor init_weight(const Shape& shape, Rng& rng) {
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = rng.normal(0.0, 0.02);
  return Tensor::from_data(shape, std::move(data), true);
}

}  // namespace

AttentionParams init_attention_params(int embed_dim, Rng& rng) {
  const int k = embed_dim;
  const int hidden = 4 * k;
  AttentionParams p;
  p.w_q = init_weight({k, k}, rng);
  p.w_k = init_weight({k, k}, rng);
  p.w_v = init_weight({k, k}, rng);
  p.w_o = init_weight({k, k}, rng);
  p.ln1_gamma = Tensor::full({k}, 1.0, true);
  p.ln1_beta = Tensor::zeros({k}, true);
  p.ln2_gamma = Tensor::full({k}, 1.0, true);
  p.ln2_beta = Tensor::zeros({k}, true);
  p.mlp_w1 = init_weight({k, hidden}, rng);
  p.mlp_b1 = Tensor::zeros({hidden}, true);
  p.mlp_w2 = init_weight({hidden, k}, rng);
  p.mlp_b2 = Tensor::zeros({k}, true);
  return p;
}

Tensor attend(const Tensor& tokens, const std::vector<Scope>& scopes,
              const AttentionParams& params, int n_heads, int grid_w,
              AttentionTrace* trace) {
  if (tokens.rank() != 2) {
    throw std::invalid_argument("attend expects tokens [N,K], got " +
                                shape_to_string(tokens.shape()));
  }
  const int n = tokens.dim(0);
  const int k = tokens.dim(1);
  if (static_cast<int>(scopes.size()) != n) {
    throw std::invalid_argument("attend: need one scope per query (" +
                                std::to_string(scopes.size()) + " scopes for " +
                                std::to_string(n) + " tokens)");
  }
  if (n_heads < 1 || k % n_heads != 0) {
    throw std::invalid_argument("attend: embed dim " + std::to_string(k) +
                                " not divisible by " + std::to_string(n_heads) +
                                " heads");
  }
  if (grid_w < 1 || n % grid_w != 0) {
    throw std::invalid_argument("attend: grid width " + std::to_string(grid_w) +
                                " does not divide token count " +
                                std::to_string(n));
  }
  const int d_head = k / n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d_head));

  // Flat key-row lists per query. Scopes are small and per-query, so the
  // softmax/value aggregation runs as one fused op rather than a lattice of
  // gather/slice/matmul nodes per scope group.
  auto flat_scopes = std::make_shared<std::vector<std::vector<int>>>();
  flat_scopes->reserve(static_cast<std::size_t>(n));
  for (int q = 0; q < n; ++q) {
    const Scope& s = scopes[static_cast<std::size_t>(q)];
    if (s.empty()) {
      throw std::invalid_argument("attend: empty scope for query " +
                                  std::to_string(q));
    }
    std::vector<int> rows = s.flat(grid_w);
    for (const int r : rows) {
      if (r < 0 || r >= n) {
        throw std::out_of_range("attend: scope entry " + std::to_string(r) +
                                " outside token range [0," + std::to_string(n) + ")");
      }
    }
    flat_scopes->push_back(std::move(rows));
  }

  const Tensor q_all = matmul(tokens, params.w_q);
  const Tensor k_all = matmul(tokens, params.w_k);
  const Tensor v_all = matmul(tokens, params.w_v);

  // Post-softmax weights per (query, head), stored contiguously per query
  // for the backward pass and the trace.
  auto weights = std::make_shared<std::vector<double>>();
  auto weight_base = std::make_shared<std::vector<std::size_t>>(
      static_cast<std::size_t>(n), 0);
  {
    std::size_t total = 0;
    for (int q = 0; q < n; ++q) {
      (*weight_base)[static_cast<std::size_t>(q)] = total;
      total += (*flat_scopes)[static_cast<std::size_t>(q)].size() *
               static_cast<std::size_t>(n_heads);
    }
    weights->assign(total, 0.0);
  }

  const double* qv = q_all.data().data();
  const double* kv = k_all.data().data();
  const double* vv = v_all.data().data();
  std::vector<double> merged(static_cast<std::size_t>(n) * k, 0.0);
  std::vector<double> logits;
  for (int q = 0; q < n; ++q) {
    const std::vector<int>& rows = (*flat_scopes)[static_cast<std::size_t>(q)];
    const std::size_t t_count = rows.size();
    logits.resize(t_count);
    for (int h = 0; h < n_heads; ++h) {
      const int c0 = h * d_head;
      const double* qrow = qv + static_cast<std::size_t>(q) * k + c0;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t t = 0; t < t_count; ++t) {
        const double* krow = kv + static_cast<std::size_t>(rows[t]) * k + c0;
        double acc = 0.0;
        for (int d = 0; d < d_head; ++d) acc += qrow[d] * krow[d];
        logits[t] = acc * scale;
        mx = std::max(mx, logits[t]);
      }
      double denom = 0.0;
      double* wrow = weights->data() + (*weight_base)[static_cast<std::size_t>(q)] +
                     static_cast<std::size_t>(h) * t_count;
      for (std::size_t t = 0; t < t_count; ++t) {
        wrow[t] = std::exp(logits[t] - mx);
        denom += wrow[t];
      }
      const double inv = 1.0 / denom;
      double* orow = merged.data() + static_cast<std::size_t>(q) * k + c0;
      for (std::size_t t = 0; t < t_count; ++t) {
        wrow[t] *= inv;
        const double* vrow = vv + static_cast<std::size_t>(rows[t]) * k + c0;
        const double wt = wrow[t];
        for (int d = 0; d < d_head; ++d) orow[d] += wt * vrow[d];
      }
    }
  }

  if (trace) {
    trace->n_tokens = n;
    trace->head_rows.assign(
        static_cast<std::size_t>(n_heads),
        std::vector<double>(static_cast<std::size_t>(n) * n, 0.0));
    for (int q = 0; q < n; ++q) {
      const std::vector<int>& rows = (*flat_scopes)[static_cast<std::size_t>(q)];
      for (int h = 0; h < n_heads; ++h) {
        const double* wrow = weights->data() +
                             (*weight_base)[static_cast<std::size_t>(q)] +
                             static_cast<std::size_t>(h) * rows.size();
        for (std::size_t t = 0; t < rows.size(); ++t) {
          trace->head_rows[static_cast<std::size_t>(h)]
                          [static_cast<std::size_t>(q) * n + rows[t]] = wrow[t];
        }
      }
    }
  }

  const Tensor aggregated = custom_op(
      {q_all, k_all, v_all}, {n, k}, std::move(merged),
      [flat_scopes, weights, weight_base, n, k, n_heads, d_head, scale](
          const std::vector<double>& upstream,
          const std::vector<const std::vector<double>*>& in_values,
          const std::vector<std::vector<double>*>& in_grads) {
        const double* qv = in_values[0]->data();
        const double* kv = in_values[1]->data();
        const double* vv = in_values[2]->data();
        std::vector<double>* dq = in_grads[0];
        std::vector<double>* dk = in_grads[1];
        std::vector<double>* dv = in_grads[2];
        std::vector<double> da;
        for (int q = 0; q < n; ++q) {
          const std::vector<int>& rows = (*flat_scopes)[static_cast<std::size_t>(q)];
          const std::size_t t_count = rows.size();
          da.resize(t_count);
          for (int h = 0; h < n_heads; ++h) {
            const int c0 = h * d_head;
            const double* go = upstream.data() + static_cast<std::size_t>(q) * k + c0;
            const double* wrow = weights->data() +
                                 (*weight_base)[static_cast<std::size_t>(q)] +
                                 static_cast<std::size_t>(h) * t_count;
            // d(weight_t) = go . v_t; dv_t += weight_t * go
            double dot = 0.0;
            for (std::size_t t = 0; t < t_count; ++t) {
              const std::size_t vrow = static_cast<std::size_t>(rows[t]) * k + c0;
              double acc = 0.0;
              for (int d = 0; d < d_head; ++d) acc += go[d] * vv[vrow + d];
              da[t] = acc;
              dot += acc * wrow[t];
              if (dv) {
                double* dvrow = dv->data() + vrow;
                const double wt = wrow[t];
                for (int d = 0; d < d_head; ++d) dvrow[d] += wt * go[d];
              }
            }
            // Softmax VJP, then the scaled bilinear logit terms.
            if (!dq && !dk) continue;
            const double* qrow = qv + static_cast<std::size_t>(q) * k + c0;
            double* dqrow = dq ? dq->data() + static_cast<std::size_t>(q) * k + c0 : nullptr;
            for (std::size_t t = 0; t < t_count; ++t) {
              const double ds = scale * wrow[t] * (da[t] - dot);
              const std::size_t krow = static_cast<std::size_t>(rows[t]) * k + c0;
              if (dqrow) {
                for (int d = 0; d < d_head; ++d) dqrow[d] += ds * kv[krow + d];
              }
              if (dk) {
                double* dkrow = dk->data() + krow;
                for (int d = 0; d < d_head; ++d) dkrow[d] += ds * qrow[d];
              }
            }
          }
        }
      });
  return matmul(aggregated, params.w_o);
}

std::vector<Scope> build_scopes(const PatchMask& mask,
                                const StBlockConfig& cfg) {
  const int gh = mask.grid_h;
  const int gw = mask.grid_w;
  const Scope fg = scope_structural(mask);
  Scope bg_shared;
  if (cfg.mode == AttentionMode::kFgStructuralBgStructural) {
    bg_shared = scope_background(mask);
  }
  std::vector<Scope> scopes;
  scopes.reserve(static_cast<std::size_t>(gh) * gw);
  for (int i = 0; i < gh; ++i) {
    for (int j = 0; j < gw; ++j) {
      if (mask.is_foreground(i, j)) {
        scopes.push_back(fg);
      } else if (cfg.mode == AttentionMode::kFgStructuralBgLocal) {
        scopes.push_back(scope_local({i, j}, cfg.window, gh, gw));
      } else {
        scopes.push_back(bg_shared);
      }
    }
  }
  return scopes;
}

Tensor st_block(const Tensor& tokens, const PatchMask& mask,
                const StBlockConfig& cfg, const AttentionParams& params,
                AttentionTrace* trace) {
  if (tokens.dim(0) != mask.grid_h * mask.grid_w) {
    throw std::invalid_argument("st_block: token count " +
                                std::to_string(tokens.dim(0)) +
                                " does not match mask grid " +
                                std::to_string(mask.grid_h) + "x" +
                                std::to_string(mask.grid_w));
  }
  const std::vector<Scope> scopes = build_scopes(mask, cfg);
  const Tensor attended =
      attend(layer_norm(tokens, params.ln1_gamma, params.ln1_beta, 1, cfg.ln_eps),
             scopes, params, cfg.n_heads, mask.grid_w, trace);
  const Tensor f1 = add(tokens, attended);
  const Tensor normed = layer_norm(f1, params.ln2_gamma, params.ln2_beta, 1, cfg.ln_eps);
  const Tensor hidden = gelu(add(matmul(normed, params.mlp_w1), params.mlp_b1));
  const Tensor mlp_out = add(matmul(hidden, params.mlp_w2), params.mlp_b2);
  return add(f1, mlp_out);
}

}  // namespace unest
