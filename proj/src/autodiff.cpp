#include "goal/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "goal/error.hpp"
#include "goal/simd.hpp"

namespace goal {

// ---------------------------------------------------------------------------
// Var / Tape

const Tensor& Var::value() const {
  if (!tape_) throw StateError("use of an unbound Var");
  return tape_->value(*this);
}

bool Var::requires_grad() const { return tape_ && tape_->requires_grad(*this); }

Var Tape::push(Tensor value, bool requires_grad, BackwardFn backward) {
  if (backward_done_) throw StateError("tape already consumed by backward()");
  nodes_.push_back(Node{std::move(value), requires_grad, {}, std::move(backward)});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward));
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  bool needs = false;
  for (const Var& in : inputs) {
    if (in.tape() != this) throw ContractError("op inputs live on different tapes");
    needs = needs || node(in).requires_grad;
  }
  if (!record_ || !needs) return push(std::move(value), false, {});
  return push(std::move(value), true, std::move(backward));
}

Tape::Node& Tape::node(Var v) {
  if (v.tape() != this || v.id() >= nodes_.size()) throw ContractError("Var not on this tape");
  return nodes_[v.id()];
}

const Tape::Node& Tape::node(Var v) const {
  if (v.tape() != this || v.id() >= nodes_.size()) throw ContractError("Var not on this tape");
  return nodes_[v.id()];
}

const Tensor& Tape::value(Var v) const { return node(v).value; }
bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

std::span<double> Tape::grad_buffer(Var v) {
  Node& n = node(v);
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

Tensor Tape::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.empty()) return Tensor::zeros_like(n.value);
  return Tensor(n.value.shape(), n.grad);
}

void Tape::backward(Var loss) {
  if (backward_done_) throw StateError("backward() called twice on the same tape");
  const Node& root = node(loss);
  if (root.value.size() != 1 || root.value.rank() != 0)
    throw ContractError("backward() needs a scalar loss, got shape " +
                        shape_string(root.value.shape()));
  backward_done_ = true;
  if (!root.requires_grad) return;
  grad_buffer(loss)[0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.empty()) continue;
    // Inputs always precede outputs, so n.grad is final here.
    n.backward(*this, n.value, n.grad);
  }
}

// ---------------------------------------------------------------------------
// Helpers

namespace {

bool is_scalar(const Tensor& t) { return t.rank() == 0; }

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2)
    throw DimensionError(std::string(op) + " expects a matrix, got " +
                         shape_string(t.shape()));
}

void accumulate(Tape& tape, Var v, std::span<const double> g) {
  if (!v.requires_grad()) return;
  auto dst = tape.grad_buffer(v);
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

// Shared driver for add/sub/mul with scalar broadcasting.
enum class Binary { add, sub, mul };

Var binary(Var a, Var b, Binary kind) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const bool a_scalar = is_scalar(av) && !is_scalar(bv);
  const bool b_scalar = is_scalar(bv) && !is_scalar(av);
  if (!a_scalar && !b_scalar && av.shape() != bv.shape())
    throw DimensionError("elementwise op on " + shape_string(av.shape()) + " and " +
                         shape_string(bv.shape()));
  const Tensor& big = a_scalar ? bv : av;
  Tensor out(big.shape());
  const std::size_t n = out.size();
  auto A = [&](std::size_t i) { return a_scalar ? av[0] : av[i]; };
  auto B = [&](std::size_t i) { return b_scalar ? bv[0] : bv[i]; };
  for (std::size_t i = 0; i < n; ++i) {
    switch (kind) {
      case Binary::add: out[i] = A(i) + B(i); break;
      case Binary::sub: out[i] = A(i) - B(i); break;
      case Binary::mul: out[i] = A(i) * B(i); break;
    }
  }
  Tape& tape = *a.tape();
  return tape.record(std::move(out), {a, b},
                     [a, b, kind, a_scalar, b_scalar, n](Tape& t, const Tensor&, std::span<const double> g) {
                       const Tensor& av = t.value(a);
                       const Tensor& bv = t.value(b);
                       auto route = [&](Var target, bool target_scalar, auto&& factor) {
                         if (!target.requires_grad()) return;
                         auto dst = t.grad_buffer(target);
                         for (std::size_t i = 0; i < n; ++i)
                           dst[target_scalar ? 0 : i] += g[i] * factor(i);
                       };
                       auto A = [&](std::size_t i) { return a_scalar ? av[0] : av[i]; };
                       auto B = [&](std::size_t i) { return b_scalar ? bv[0] : bv[i]; };
                       switch (kind) {
                         case Binary::add:
                           route(a, a_scalar, [](std::size_t) { return 1.0; });
                           route(b, b_scalar, [](std::size_t) { return 1.0; });
                           break;
                         case Binary::sub:
                           route(a, a_scalar, [](std::size_t) { return 1.0; });
                           route(b, b_scalar, [](std::size_t) { return -1.0; });
                           break;
                         case Binary::mul:
                           route(a, a_scalar, B);
                           route(b, b_scalar, A);
                           break;
                       }
                     });
}

// Unary elementwise op: f computes the value, df(x, y) the local derivative.
template <class F, class DF>
Var unary(Var x, F f, DF df) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return x.tape()->record(std::move(out), {x}, [x, df](Tape& t, const Tensor&, std::span<const double> g) {
    if (!x.requires_grad()) return;
    const Tensor& xv = t.value(x);
    auto dst = t.grad_buffer(x);
    for (std::size_t i = 0; i < xv.size(); ++i) dst[i] += g[i] * df(xv[i]);
  });
}

}  // namespace

// ---------------------------------------------------------------------------
// Linear algebra

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_matrix(av, "matmul");
  require_matrix(bv, "matmul");
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  if (bv.rows() != k)
    throw DimensionError("matmul inner dimensions differ: " + shape_string(av.shape()) +
                         " · " + shape_string(bv.shape()));
  Tensor out({m, n});
  simd::gemm_nn(av.data().data(), bv.data().data(), out.data().data(), m, k, n);
  return a.tape()->record(std::move(out), {a, b},
                          [a, b, m, k, n](Tape& t, const Tensor&, std::span<const double> g) {
                            const double* gp = g.data();
                            if (a.requires_grad())  // da = g · bᵀ
                              simd::gemm_nt(gp, t.value(b).data().data(),
                                            t.grad_buffer(a).data(), m, n, k);
                            if (b.requires_grad())  // db = aᵀ · g
                              simd::gemm_tn(t.value(a).data().data(), gp,
                                            t.grad_buffer(b).data(), k, m, n);
                          });
}

Var transpose(Var x) {
  const Tensor& xv = x.value();
  require_matrix(xv, "transpose");
  const std::size_t m = xv.rows(), n = xv.cols();
  Tensor out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = xv[i * n + j];
  return x.tape()->record(std::move(out), {x}, [x, m, n](Tape& t, const Tensor&, std::span<const double> g) {
    if (!x.requires_grad()) return;
    auto dst = t.grad_buffer(x);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) dst[i * n + j] += g[j * m + i];
  });
}

Var linear(Var x, Var w, Var b) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const Tensor& bv = b.value();
  require_matrix(xv, "linear");
  require_matrix(wv, "linear");
  const std::size_t m = xv.rows(), k = xv.cols(), n = wv.cols();
  if (wv.rows() != k || bv.size() != n)
    throw DimensionError("linear: x " + shape_string(xv.shape()) + ", w " +
                         shape_string(wv.shape()) + ", b " + shape_string(bv.shape()));
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i)
    std::copy(bv.data().begin(), bv.data().end(), out.data().begin() + i * n);
  simd::gemm_nn(xv.data().data(), wv.data().data(), out.data().data(), m, k, n);
  return x.tape()->record(std::move(out), {x, w, b},
                          [x, w, b, m, k, n](Tape& t, const Tensor&, std::span<const double> g) {
                            const double* gp = g.data();
                            if (x.requires_grad())
                              simd::gemm_nt(gp, t.value(w).data().data(),
                                            t.grad_buffer(x).data(), m, n, k);
                            if (w.requires_grad())
                              simd::gemm_tn(t.value(x).data().data(), gp,
                                            t.grad_buffer(w).data(), k, m, n);
                            if (b.requires_grad()) {
                              auto db = t.grad_buffer(b);
                              for (std::size_t i = 0; i < m; ++i)
                                for (std::size_t j = 0; j < n; ++j) db[j] += gp[i * n + j];
                            }
                          });
}

// ---------------------------------------------------------------------------
// Elementwise

Var add(Var a, Var b) { return binary(a, b, Binary::add); }
Var sub(Var a, Var b) { return binary(a, b, Binary::sub); }
Var mul(Var a, Var b) { return binary(a, b, Binary::mul); }

Var scale(Var x, double factor) {
  return unary(x, [factor](double v) { return v * factor; },
               [factor](double) { return factor; });
}

Var relu(Var x) {
  return unary(x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

Var gelu(Var x) {
  // Exact (erf) form: x·Φ(x).
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  constexpr double inv_sqrt2pi = 0.39894228040143267794;
  return unary(
      x, [](double v) { return 0.5 * v * (1.0 + std::erf(v * inv_sqrt2)); },
      [](double v) {
        return 0.5 * (1.0 + std::erf(v * inv_sqrt2)) + v * inv_sqrt2pi * std::exp(-0.5 * v * v);
      });
}

Var exp(Var x) {
  return unary(x, [](double v) { return std::exp(v); }, [](double v) { return std::exp(v); });
}

Var log(Var x) {
  return unary(x, [](double v) { return std::log(v); }, [](double v) { return 1.0 / v; });
}

Var clamp_max(Var x, double limit) {
  return unary(x, [limit](double v) { return std::min(v, limit); },
               [limit](double v) { return v < limit ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------------------
// Reductions

Var sum(Var x) {
  const Tensor& xv = x.value();
  double s = 0.0;
  for (double v : xv.data()) s += v;
  const std::size_t n = xv.size();
  return x.tape()->record(Tensor::scalar(s), {x}, [x, n](Tape& t, const Tensor&, std::span<const double> g) {
    if (!x.requires_grad()) return;
    auto dst = t.grad_buffer(x);
    for (std::size_t i = 0; i < n; ++i) dst[i] += g[0];
  });
}

Var mean(Var x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().size())); }

// ---------------------------------------------------------------------------
// Row-wise normalizers

Var softmax_rows(Var x, std::span<const bool> column_mask) {
  const Tensor& xv = x.value();
  const std::size_t m = xv.rows(), n = xv.cols();
  if (!column_mask.empty() && column_mask.size() != n)
    throw DimensionError("softmax mask length " + std::to_string(column_mask.size()) +
                         " vs " + std::to_string(n) + " columns");
  std::vector<bool> mask(column_mask.begin(), column_mask.end());
  auto keep = [&](std::size_t j) { return mask.empty() || mask[j]; };
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < m; ++i) {
    const double* xr = xv.data().data() + i * n;
    double* yr = out.data().data() + i * n;
    double mx = -INFINITY;
    for (std::size_t j = 0; j < n; ++j)
      if (keep(j)) mx = std::max(mx, xr[j]);
    if (mx == -INFINITY) continue;  // every column masked: all-zero row
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      yr[j] = keep(j) ? std::exp(xr[j] - mx) : 0.0;
      z += yr[j];
    }
    for (std::size_t j = 0; j < n; ++j) yr[j] /= z;
  }
  return x.tape()->record(std::move(out), {x},
                          [x, m, n](Tape& t, const Tensor& y, std::span<const double> g) {
                            if (!x.requires_grad()) return;
                            auto dst = t.grad_buffer(x);
                            for (std::size_t i = 0; i < m; ++i) {
                              const double* yr = y.data().data() + i * n;
                              const double* gr = g.data() + i * n;
                              double dotp = 0.0;
                              for (std::size_t j = 0; j < n; ++j) dotp += gr[j] * yr[j];
                              for (std::size_t j = 0; j < n; ++j)
                                dst[i * n + j] += yr[j] * (gr[j] - dotp);
                            }
                          });
}

Var log_softmax_rows(Var x) {
  const Tensor& xv = x.value();
  const std::size_t m = xv.rows(), n = xv.cols();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < m; ++i) {
    const double* xr = xv.data().data() + i * n;
    double mx = *std::max_element(xr, xr + n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += std::exp(xr[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < n; ++j) {
      out[i * n + j] = xr[j] - lse;
    }
  }
  return x.tape()->record(std::move(out), {x},
                          [x, m, n](Tape& t, const Tensor& y, std::span<const double> g) {
                            if (!x.requires_grad()) return;
                            auto dst = t.grad_buffer(x);
                            for (std::size_t i = 0; i < m; ++i) {
                              double gs = 0.0;
                              for (std::size_t j = 0; j < n; ++j) gs += g[i * n + j];
                              for (std::size_t j = 0; j < n; ++j)
                                dst[i * n + j] += g[i * n + j] - std::exp(y[i * n + j]) * gs;
                            }
                          });
}

Var layer_norm(Var x, Var gamma, Var beta) {
  const Tensor& xv = x.value();
  const std::size_t m = xv.rows(), d = xv.cols();
  if (d == 0) throw ContractError("layer_norm on zero-width rows");
  if (gamma.value().size() != d || beta.value().size() != d)
    throw DimensionError("layer_norm affine params " + shape_string(gamma.shape()) + "/" +
                         shape_string(beta.shape()) + " vs row width " + std::to_string(d));
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  Tensor out(xv.shape());
  std::vector<double> xhat(m * d), inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double* xr = xv.data().data() + i * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += xr[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<double>(d);
    inv_std[i] = 1.0 / std::sqrt(var + kLayerNormEps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[i * d + j] = (xr[j] - mu) * inv_std[i];
      out[i * d + j] = gv[j] * xhat[i * d + j] + bv[j];
    }
  }
  return x.tape()->record(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, m, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](
          Tape& t, const Tensor&, std::span<const double> g) {
        const Tensor& gv = t.value(gamma);
        if (gamma.requires_grad()) {
          auto dg = t.grad_buffer(gamma);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < d; ++j) dg[j] += g[i * d + j] * xhat[i * d + j];
        }
        if (beta.requires_grad()) {
          auto db = t.grad_buffer(beta);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < d; ++j) db[j] += g[i * d + j];
        }
        if (!x.requires_grad()) return;
        auto dx = t.grad_buffer(x);
        const double inv_d = 1.0 / static_cast<double>(d);
        for (std::size_t i = 0; i < m; ++i) {
          double mean_dh = 0.0, mean_dh_xh = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            const double dh = g[i * d + j] * gv[j];
            mean_dh += dh;
            mean_dh_xh += dh * xhat[i * d + j];
          }
          mean_dh *= inv_d;
          mean_dh_xh *= inv_d;
          for (std::size_t j = 0; j < d; ++j) {
            const double dh = g[i * d + j] * gv[j];
            dx[i * d + j] += inv_std[i] * (dh - mean_dh - xhat[i * d + j] * mean_dh_xh);
          }
        }
      });
}

Var l2_normalize_rows(Var x) {
  const Tensor& xv = x.value();
  const std::size_t m = xv.rows(), d = xv.cols();
  Tensor out(xv.shape());
  std::vector<double> norms(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double* xr = xv.data().data() + i * d;
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += xr[j] * xr[j];
    norms[i] = std::sqrt(s);
    const double div = norms[i] < kNormFloor ? 1.0 : norms[i];
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = xr[j] / div;
  }
  return x.tape()->record(
      std::move(out), {x},
      [x, m, d, norms = std::move(norms)](Tape& t, const Tensor& y, std::span<const double> g) {
        if (!x.requires_grad()) return;
        auto dst = t.grad_buffer(x);
        for (std::size_t i = 0; i < m; ++i) {
          if (norms[i] < kNormFloor) {
            for (std::size_t j = 0; j < d; ++j) dst[i * d + j] += g[i * d + j];
            continue;
          }
          double yg = 0.0;
          for (std::size_t j = 0; j < d; ++j) yg += y[i * d + j] * g[i * d + j];
          for (std::size_t j = 0; j < d; ++j)
            dst[i * d + j] += (g[i * d + j] - y[i * d + j] * yg) / norms[i];
        }
      });
}

// ---------------------------------------------------------------------------
// Indexing and reshaping

Var mean_rows(Var x, std::span<const std::size_t> indices) {
  const Tensor& xv = x.value();
  const std::size_t m = xv.rows(), d = xv.cols();
  if (indices.empty()) throw ContractError("mean_rows over an empty index set");
  for (std::size_t i : indices)
    if (i >= m)
      throw ContractError("mean_rows index " + std::to_string(i) + " out of " +
                          std::to_string(m) + " rows");
  Tensor out({d});
  for (std::size_t i : indices)
    for (std::size_t j = 0; j < d; ++j) out[j] += xv[i * d + j];
  const double inv = 1.0 / static_cast<double>(indices.size());
  for (std::size_t j = 0; j < d; ++j) out[j] *= inv;
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return x.tape()->record(std::move(out), {x},
                          [x, d, inv, idx = std::move(idx)](Tape& t, const Tensor&, std::span<const double> g) {
                            if (!x.requires_grad()) return;
                            auto dst = t.grad_buffer(x);
                            for (std::size_t i : idx)
                              for (std::size_t j = 0; j < d; ++j) dst[i * d + j] += g[j] * inv;
                          });
}

Var select_rows(Var x, std::span<const std::size_t> indices) {
  const Tensor& xv = x.value();
  const std::size_t m = xv.rows(), d = xv.cols();
  Tensor out({indices.size(), d});
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= m)
      throw ContractError("select_rows index " + std::to_string(indices[r]) + " out of " +
                          std::to_string(m) + " rows");
    std::copy_n(xv.data().begin() + indices[r] * d, d, out.data().begin() + r * d);
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return x.tape()->record(std::move(out), {x},
                          [x, d, idx = std::move(idx)](Tape& t, const Tensor&, std::span<const double> g) {
                            if (!x.requires_grad()) return;
                            auto dst = t.grad_buffer(x);
                            for (std::size_t r = 0; r < idx.size(); ++r)
                              for (std::size_t j = 0; j < d; ++j)
                                dst[idx[r] * d + j] += g[r * d + j];
                          });
}

Var row(Var x, std::size_t i) {
  const Tensor& xv = x.value();
  require_matrix(xv, "row");
  const std::size_t d = xv.cols();
  if (i >= xv.rows()) throw ContractError("row index out of range");
  Tensor out({d}, std::vector<double>(xv.data().begin() + i * d, xv.data().begin() + (i + 1) * d));
  return x.tape()->record(std::move(out), {x}, [x, i, d](Tape& t, const Tensor&, std::span<const double> g) {
    if (!x.requires_grad()) return;
    auto dst = t.grad_buffer(x);
    for (std::size_t j = 0; j < d; ++j) dst[i * d + j] += g[j];
  });
}

Var slice_rows(Var x, std::size_t begin, std::size_t end) {
  const Tensor& xv = x.value();
  require_matrix(xv, "slice_rows");
  if (begin > end || end > xv.rows()) throw ContractError("slice_rows range out of bounds");
  const std::size_t d = xv.cols();
  Tensor out({end - begin, d},
             std::vector<double>(xv.data().begin() + begin * d, xv.data().begin() + end * d));
  return x.tape()->record(std::move(out), {x}, [x, begin, end, d](Tape& t, const Tensor&, std::span<const double> g) {
    if (!x.requires_grad()) return;
    auto dst = t.grad_buffer(x);
    for (std::size_t k = 0; k < (end - begin) * d; ++k) dst[begin * d + k] += g[k];
  });
}

Var slice_cols(Var x, std::size_t begin, std::size_t end) {
  const Tensor& xv = x.value();
  require_matrix(xv, "slice_cols");
  const std::size_t m = xv.rows(), n = xv.cols();
  if (begin > end || end > n) throw ContractError("slice_cols range out of bounds");
  const std::size_t w = end - begin;
  Tensor out({m, w});
  for (std::size_t i = 0; i < m; ++i)
    std::copy_n(xv.data().begin() + i * n + begin, w, out.data().begin() + i * w);
  return x.tape()->record(std::move(out), {x}, [x, m, n, begin, w](Tape& t, const Tensor&, std::span<const double> g) {
    if (!x.requires_grad()) return;
    auto dst = t.grad_buffer(x);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) dst[i * n + begin + j] += g[i * w + j];
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_rows of nothing");
  const std::size_t d = parts[0].cols();
  std::size_t m = 0;
  for (const Var& p : parts) {
    if (p.cols() != d)
      throw DimensionError("concat_rows width mismatch: " + shape_string(parts[0].shape()) +
                           " vs " + shape_string(p.shape()));
    m += p.rows();
  }
  Tensor out({m, d});
  std::size_t offset = 0;
  for (const Var& p : parts) {
    std::copy(p.value().data().begin(), p.value().data().end(), out.data().begin() + offset);
    offset += p.value().size();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].tape()->record(std::move(out), parts,
                                 [inputs](Tape& t, const Tensor&, std::span<const double> g) {
                                   std::size_t off = 0;
                                   for (const Var& p : inputs) {
                                     const std::size_t n = p.value().size();
                                     accumulate(t, p, g.subspan(off, n));
                                     off += n;
                                   }
                                 });
}

Var stack_rows(std::span<const Var> rows) { return concat_rows(rows); }

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_cols of nothing");
  const std::size_t m = parts[0].rows();
  std::size_t n = 0;
  for (const Var& p : parts) {
    if (p.rows() != m)
      throw DimensionError("concat_cols height mismatch: " + shape_string(parts[0].shape()) +
                           " vs " + shape_string(p.shape()));
    n += p.cols();
  }
  Tensor out({m, n});
  std::size_t col = 0;
  for (const Var& p : parts) {
    const std::size_t w = p.cols();
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(p.value().data().begin() + i * w, w, out.data().begin() + i * n + col);
    col += w;
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].tape()->record(std::move(out), parts,
                                 [inputs, m, n](Tape& t, const Tensor&, std::span<const double> g) {
                                   std::size_t col = 0;
                                   for (const Var& p : inputs) {
                                     const std::size_t w = p.cols();
                                     if (p.requires_grad()) {
                                       auto dst = t.grad_buffer(p);
                                       for (std::size_t i = 0; i < m; ++i)
                                         for (std::size_t j = 0; j < w; ++j)
                                           dst[i * w + j] += g[i * n + col + j];
                                     }
                                     col += w;
                                   }
                                 });
}

Var diag(Var x) {
  const Tensor& xv = x.value();
  require_matrix(xv, "diag");
  const std::size_t n = xv.rows();
  if (xv.cols() != n) throw DimensionError("diag of non-square " + shape_string(xv.shape()));
  Tensor out({n});
  for (std::size_t i = 0; i < n; ++i) out[i] = xv[i * n + i];
  return x.tape()->record(std::move(out), {x}, [x, n](Tape& t, const Tensor&, std::span<const double> g) {
    if (!x.requires_grad()) return;
    auto dst = t.grad_buffer(x);
    for (std::size_t i = 0; i < n; ++i) dst[i * n + i] += g[i];
  });
}

// ---------------------------------------------------------------------------

Tensor l2_normalize_rows(const Tensor& x) {
  Tape tape(false);
  return l2_normalize_rows(tape.constant(x)).value();
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("cosine of vectors with different lengths");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  const double na = std::sqrt(aa), nb = std::sqrt(bb);
  if (na < kNormFloor || nb < kNormFloor) return 0.0;
  return ab / (na * nb);
}

}  // namespace goal
