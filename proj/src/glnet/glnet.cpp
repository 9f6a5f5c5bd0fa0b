// Copyright 2026 The lol-lora Authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#include "lol/glnet.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "lol/errors.hpp"
#include "lol/linalg.hpp"
#include "lol/parallel.hpp"

namespace lol {

namespace {

// h×k with orthonormal rows (h ≤ k) or columns scaled by √(h/k) (h > k);
// entry variance 1/k either way.
Matrix semi_orthogonal(std::size_t h, std::size_t k, Rng& rng) {
  if (h <= k) return qr_thin(gaussian_matrix(k, h, rng, 1.0)).q.transpose();
  Matrix q = qr_thin(gaussian_matrix(h, k, rng, 1.0)).q;
  q *= std::sqrt(static_cast<double>(h) / static_cast<double>(k));
  return q;
}

}  // namespace

std::string_view to_string(Nonlinearity kind) {
  switch (kind) {
    case Nonlinearity::none: return "none";
    case Nonlinearity::relu_sign: return "relu_sign";
    case Nonlinearity::tanh_rowsum: return "tanh_rowsum";
  }
  return "none";
}

Nonlinearity parse_nonlinearity(std::string_view s) {
  if (s == "none") return Nonlinearity::none;
  if (s == "relu_sign") return Nonlinearity::relu_sign;
  if (s == "tanh_rowsum") return Nonlinearity::tanh_rowsum;
  throw std::invalid_argument("unknown nonlinearity '" + std::string(s) + "'");
}

GlNetParams GlNetParams::init(std::span<const std::pair<std::size_t, std::size_t>> shapes, const GlNetConfig& cfg,
                              Rng& rng) {
  if (cfg.stacks < 1) throw std::invalid_argument("GlNetParams::init: need at least one equivariant layer");
  GlNetParams p;
  p.nonlinearity = cfg.nonlinearity;
  p.hidden_width = cfg.hidden_width;
  p.product_cap = cfg.product_cap;
  const std::size_t h = cfg.hidden_width;
  for (std::size_t s = 0; s < cfg.stacks; ++s) {
    EquivariantLayer layer;
    for (const auto& [n, m] : shapes) {
      const std::size_t n_in = s == 0 ? n : h;
      const std::size_t m_in = s == 0 ? m : h;
      layer.phi.push_back(semi_orthogonal(h, n_in, rng));
      layer.psi.push_back(semi_orthogonal(h, m_in, rng));
    }
    p.stacks.push_back(std::move(layer));
  }
  std::vector<std::size_t> dims{shapes.size() * h * h};
  dims.insert(dims.end(), cfg.head_hidden.begin(), cfg.head_hidden.end());
  dims.push_back(cfg.output_dim);
  p.head = MlpParams::init(dims, rng);
  return p;
}

GlNetParams GlNetParams::zeros_like(const GlNetParams& p) {
  GlNetParams z = p;
  for (auto& t : z.tensors()) std::fill(t.begin(), t.end(), 0.0);
  return z;
}

std::vector<std::span<double>> GlNetParams::tensors() {
  std::vector<std::span<double>> out;
  for (auto& s : stacks) {
    for (auto& m : s.phi) out.push_back(m.data());
    for (auto& m : s.psi) out.push_back(m.data());
  }
  for (auto t : head.tensors()) out.push_back(t);
  return out;
}

std::vector<std::span<const double>> GlNetParams::tensors() const {
  std::vector<std::span<const double>> out;
  for (const auto& s : stacks) {
    for (const auto& m : s.phi) out.push_back(m.data());
    for (const auto& m : s.psi) out.push_back(m.data());
  }
  for (auto t : head.tensors()) out.push_back(t);
  return out;
}

LoraUpdate equivariant_linear(const EquivariantLayer& p, const LoraUpdate& x) {
  if (p.phi.size() != x.layer_count() || p.psi.size() != x.layer_count())
    throw ShapeError("equivariant_linear: parameters cover " + std::to_string(p.phi.size()) + " layers, input has " +
                     std::to_string(x.layer_count()));
  std::vector<LoraLayer> out;
  out.reserve(x.layer_count());
  for (std::size_t i = 0; i < x.layer_count(); ++i) {
    const auto& layer = x.layer(i);
    if (p.phi[i].cols() != layer.n() || p.psi[i].cols() != layer.m())
      throw ShapeError("equivariant_linear: layer '" + layer.name + "' is " + std::to_string(layer.n()) + "/" +
                       std::to_string(layer.m()) + " rows, parameters expect " + std::to_string(p.phi[i].cols()) +
                       "/" + std::to_string(p.psi[i].cols()));
    out.push_back({layer.name, matmul(p.phi[i], layer.u), matmul(p.psi[i], layer.v)});
  }
  return LoraUpdate(std::move(out));
}

namespace {

double gate(Nonlinearity kind, double s) {
  switch (kind) {
    case Nonlinearity::none: return 1.0;
    case Nonlinearity::relu_sign: return s > 0.0 ? 1.0 : 0.0;
    case Nonlinearity::tanh_rowsum: return std::tanh(s);
  }
  return 1.0;
}

double gate_derivative(Nonlinearity kind, double s) {
  if (kind == Nonlinearity::tanh_rowsum) {
    const double t = std::tanh(s);
    return 1.0 - t * t;
  }
  return 0.0;
}

std::vector<double> column_sums(const Matrix& a) {
  std::vector<double> s(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) s[j] += a(i, j);
  return s;
}

// Row sums of u·vᵀ (and of v·uᵀ) without forming the product.
struct RowSums {
  std::vector<double> u_rows;  ///< u·(vᵀ1)
  std::vector<double> v_rows;  ///< v·(uᵀ1)
};

RowSums product_row_sums(const Matrix& u, const Matrix& v) {
  return {matvec(u, column_sums(v)), matvec(v, column_sums(u))};
}

Matrix scale_rows(const Matrix& a, std::span<const double> s) {
  Matrix out = a;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (double& x : out.row(i)) x *= s[i];
  return out;
}

void nonlinearity_backward(Nonlinearity kind, const Matrix& u, const Matrix& v, const Matrix& gu_out,
                           const Matrix& gv_out, Matrix& gu, Matrix& gv) {
  const RowSums sums = product_row_sums(u, v);
  const std::size_t n = u.rows();
  const std::size_t m = v.rows();
  const std::size_t r = u.cols();
  std::vector<double> gate_u(n), gate_v(m), da(n), dc(m);
  for (std::size_t i = 0; i < n; ++i) {
    gate_u[i] = gate(kind, sums.u_rows[i]);
    double dotp = 0.0;
    for (std::size_t k = 0; k < r; ++k) dotp += gu_out(i, k) * u(i, k);
    da[i] = gate_derivative(kind, sums.u_rows[i]) * dotp;
  }
  for (std::size_t j = 0; j < m; ++j) {
    gate_v[j] = gate(kind, sums.v_rows[j]);
    double dotp = 0.0;
    for (std::size_t k = 0; k < r; ++k) dotp += gv_out(j, k) * v(j, k);
    dc[j] = gate_derivative(kind, sums.v_rows[j]) * dotp;
  }
  gu = scale_rows(gu_out, gate_u);
  gv = scale_rows(gv_out, gate_v);
  if (kind != Nonlinearity::tanh_rowsum) return;

  // a = u·w with w = vᵀ1; c = v·z with z = uᵀ1.
  const std::vector<double> w = column_sums(v);
  const std::vector<double> z = column_sums(u);
  const std::vector<double> dw = matvec_t(u, da);
  const std::vector<double> dz = matvec_t(v, dc);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < r; ++k) gu(i, k) += da[i] * w[k] + dz[k];
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t k = 0; k < r; ++k) gv(j, k) += dc[j] * z[k] + dw[k];
}

// Hidden factors at every stage of one item's forward pass.
struct ItemTrace {
  std::vector<LoraUpdate> stack_inputs;  ///< input to stack s
  std::vector<LoraUpdate> linear_out;    ///< output of stack s before the nonlinearity
  LoraUpdate hidden;                     ///< input to the head
};

bool has_nonlinearity_after(const GlNetParams& p, std::size_t s) {
  return p.nonlinearity != Nonlinearity::none && s + 1 < p.stacks.size();
}

ItemTrace trace_item(const GlNetParams& p, const LoraUpdate& x) {
  ItemTrace t;
  LoraUpdate state = x;
  for (std::size_t s = 0; s < p.stacks.size(); ++s) {
    t.stack_inputs.push_back(state);
    LoraUpdate lin = equivariant_linear(p.stacks[s], state);
    t.linear_out.push_back(lin);
    state = has_nonlinearity_after(p, s) ? equivariant_nonlinearity(lin, p.nonlinearity) : std::move(lin);
  }
  t.hidden = std::move(state);
  return t;
}

void check_item_shapes(const GlNetParams& p, const LoraUpdate& x) {
  if (p.stacks.empty()) throw ShapeError("glnet: no equivariant layers");
  if (p.stacks.front().phi.size() != x.layer_count())
    throw ShapeError("glnet: parameters cover " + std::to_string(p.stacks.front().phi.size()) +
                     " layers, input has " + std::to_string(x.layer_count()));
}

// Backpropagates head-feature gradients of one item into stack gradients.
void item_backward(const GlNetParams& p, const ItemTrace& t, std::span<const double> dfeat, GlNetParams& grads) {
  const std::size_t layers = t.hidden.layer_count();
  std::vector<Matrix> gu(layers), gv(layers);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < layers; ++i) {
    const auto& layer = t.hidden.layer(i);
    const std::size_t n = layer.n();
    const std::size_t m = layer.m();
    Matrix dp(n, m, std::vector<double>(dfeat.begin() + offset, dfeat.begin() + offset + n * m));
    offset += n * m;
    gu[i] = matmul(dp, layer.v);
    gv[i] = matmul_tn(dp, layer.u);
  }
  for (std::size_t s = p.stacks.size(); s-- > 0;) {
    const LoraUpdate& in = t.stack_inputs[s];
    if (has_nonlinearity_after(p, s)) {
      const LoraUpdate& lin = t.linear_out[s];
      for (std::size_t i = 0; i < layers; ++i) {
        Matrix a, b;
        nonlinearity_backward(p.nonlinearity, lin.layer(i).u, lin.layer(i).v, gu[i], gv[i], a, b);
        gu[i] = std::move(a);
        gv[i] = std::move(b);
      }
    }
    auto& gs = grads.stacks[s];
    for (std::size_t i = 0; i < layers; ++i) {
      gs.phi[i] = matmul_nt(gu[i], in.layer(i).u);
      gs.psi[i] = matmul_nt(gv[i], in.layer(i).v);
      if (s > 0) {
        gu[i] = matmul_tn(p.stacks[s].phi[i], gu[i]);
        gv[i] = matmul_tn(p.stacks[s].psi[i], gv[i]);
      }
    }
  }
}

Matrix gather_head_features(const GlNetParams& p, const std::vector<ItemTrace>& traces) {
  if (traces.empty()) return Matrix(0, p.head.input_dim());
  const std::size_t dim = head_features(traces.front().hidden, p.product_cap).size();
  Matrix feats(traces.size(), dim);
  parallel_for(traces.size(), [&](std::size_t b) {
    const auto f = head_features(traces[b].hidden, p.product_cap);
    if (f.size() != dim) throw ShapeError("glnet: batch items produce different head widths");
    std::copy(f.begin(), f.end(), feats.row(b).begin());
  });
  return feats;
}

std::vector<ItemTrace> trace_batch(const GlNetParams& p, std::span<const LoraUpdate* const> xs) {
  std::vector<ItemTrace> traces(xs.size());
  for (const auto* x : xs) check_item_shapes(p, *x);
  parallel_for(xs.size(), [&](std::size_t b) { traces[b] = trace_item(p, *xs[b]); });
  return traces;
}

}  // namespace

LoraUpdate equivariant_nonlinearity(const LoraUpdate& x, Nonlinearity kind) {
  if (kind == Nonlinearity::none) return x;
  std::vector<LoraLayer> out;
  out.reserve(x.layer_count());
  for (const auto& layer : x.layers()) {
    const RowSums sums = product_row_sums(layer.u, layer.v);
    std::vector<double> gu(sums.u_rows.size()), gv(sums.v_rows.size());
    for (std::size_t i = 0; i < gu.size(); ++i) gu[i] = gate(kind, sums.u_rows[i]);
    for (std::size_t j = 0; j < gv.size(); ++j) gv[j] = gate(kind, sums.v_rows[j]);
    Matrix u = scale_rows(layer.u, gu);
    Matrix v = scale_rows(layer.v, gv);
    if (kind == Nonlinearity::relu_sign) {
      // Copy kept rows verbatim so they are bit-identical to the input.
      for (std::size_t i = 0; i < gu.size(); ++i)
        if (gu[i] == 1.0) std::copy(layer.u.row(i).begin(), layer.u.row(i).end(), u.row(i).begin());
      for (std::size_t j = 0; j < gv.size(); ++j)
        if (gv[j] == 1.0) std::copy(layer.v.row(j).begin(), layer.v.row(j).end(), v.row(j).begin());
    }
    out.push_back({layer.name, std::move(u), std::move(v)});
  }
  return LoraUpdate(std::move(out));
}

std::vector<double> head_features(const LoraUpdate& x, std::size_t product_cap) {
  std::vector<double> out;
  for (const auto& layer : x.layers()) {
    if (layer.n() * layer.m() > product_cap)
      throw CapabilityError("invariant_head: layer '" + layer.name + "' product is " + std::to_string(layer.n()) +
                            "x" + std::to_string(layer.m()) + ", over the head cap of " +
                            std::to_string(product_cap) + " entries");
    const Matrix pr = dense_product(layer);
    out.insert(out.end(), pr.data().begin(), pr.data().end());
  }
  return out;
}

std::vector<double> invariant_head(const LoraUpdate& x, const MlpParams& mlp, std::size_t product_cap) {
  return mlp_forward(mlp, head_features(x, product_cap));
}

LoraUpdate glnet_features(const GlNetParams& p, const LoraUpdate& x) {
  check_item_shapes(p, x);
  return trace_item(p, x).hidden;
}

Matrix glnet_forward_batch(const GlNetParams& p, std::span<const LoraUpdate* const> xs) {
  const auto traces = trace_batch(p, xs);
  return mlp_forward_batch(p.head, gather_head_features(p, traces));
}

std::vector<double> glnet_forward(const GlNetParams& p, const LoraUpdate& x) {
  const LoraUpdate* ptr = &x;
  const Matrix y = glnet_forward_batch(p, std::span(&ptr, 1));
  return {y.data().begin(), y.data().end()};
}

GlNetStep glnet_forward_backward(const GlNetParams& p, std::span<const LoraUpdate* const> xs,
                                 const std::function<Matrix(const Matrix&)>& upstream_of) {
  const auto traces = trace_batch(p, xs);
  MlpTrace head_trace;
  GlNetStep step;
  step.output = mlp_forward_batch(p.head, gather_head_features(p, traces), &head_trace);
  const Matrix upstream = upstream_of(step.output);
  if (upstream.rows() != xs.size() || upstream.cols() != p.head.output_dim())
    throw ShapeError("glnet_backward: upstream must be batch × output");
  MlpGradients head_grads = mlp_backward_batch(p.head, head_trace, upstream);

  std::vector<GlNetParams> per_item(xs.size());
  parallel_for(xs.size(), [&](std::size_t b) {
    GlNetParams g;
    g.stacks = p.stacks;
    item_backward(p, traces[b], head_grads.input.row(b), g);
    per_item[b] = std::move(g);
  });

  GlNetParams grads = GlNetParams::zeros_like(p);
  for (const auto& g : per_item)
    for (std::size_t s = 0; s < grads.stacks.size(); ++s)
      for (std::size_t i = 0; i < grads.stacks[s].phi.size(); ++i) {
        grads.stacks[s].phi[i] += g.stacks[s].phi[i];
        grads.stacks[s].psi[i] += g.stacks[s].psi[i];
      }
  grads.head = std::move(head_grads.params);
  step.grads = std::move(grads);
  return step;
}

GlNetParams glnet_backward_batch(const GlNetParams& p, std::span<const LoraUpdate* const> xs, const Matrix& upstream) {
  return glnet_forward_backward(p, xs, [&](const Matrix&) { return upstream; }).grads;
}

GlNetParams glnet_backward(const GlNetParams& p, const LoraUpdate& x, std::span<const double> upstream) {
  const LoraUpdate* ptr = &x;
  return glnet_backward_batch(p, std::span(&ptr, 1),
                              Matrix(1, upstream.size(), std::vector<double>(upstream.begin(), upstream.end())));
}

GlNetActivationPattern glnet_activation_pattern(const GlNetParams& p, const LoraUpdate& x) {
  check_item_shapes(p, x);
  GlNetActivationPattern pattern;
  const ItemTrace t = trace_item(p, x);
  for (std::size_t s = 0; s < p.stacks.size(); ++s) {
    if (!has_nonlinearity_after(p, s) || p.nonlinearity != Nonlinearity::relu_sign) continue;
    for (const auto& layer : t.linear_out[s].layers()) {
      const RowSums sums = product_row_sums(layer.u, layer.v);
      for (double v : sums.u_rows) pattern.gates.push_back(v > 0.0);
      for (double v : sums.v_rows) pattern.gates.push_back(v > 0.0);
    }
  }
  const auto feats = head_features(t.hidden, p.product_cap);
  MlpTrace head_trace;
  mlp_forward_batch(p.head, Matrix(1, feats.size(), feats), &head_trace);
  for (std::size_t l = 0; l + 1 < head_trace.pre.size(); ++l)
    for (double v : head_trace.pre[l].data()) pattern.gates.push_back(v > 0.0);
  return pattern;
}

}  // namespace lol
