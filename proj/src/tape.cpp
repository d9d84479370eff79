#include "graphmem/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "graphmem/error.hpp"

namespace graphmem {

namespace {

constexpr double kLogFloor = 1e-12;

void check_same_tape(const Var& a, const Var& b, const char* op) {
  if (a.tape() != b.tape()) {
    throw ContractError(std::string(op) + ": operands live on different tapes");
  }
}

// Value-level kernels shared by forward and pull closures.

Tensor mm(const Tensor& a, const Tensor& b) {
  const std::int64_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out({m, n});
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t l = 0; l < k; ++l) {
      const double av = pa[i * k + l];
      if (av == 0.0) continue;
      const double* brow = pb + l * n;
      double* orow = po + i * n;
      for (std::int64_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

Tensor mm_at_b(const Tensor& a, const Tensor& b) {
  // a^T * b, a: m x k, b: m x n -> k x n
  const std::int64_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out({k, n});
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();
  for (std::int64_t i = 0; i < m; ++i) {
    const double* arow = pa + i * k;
    const double* brow = pb + i * n;
    for (std::int64_t l = 0; l < k; ++l) {
      const double av = arow[l];
      if (av == 0.0) continue;
      double* orow = po + l * n;
      for (std::int64_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

Tensor mm_a_bt(const Tensor& a, const Tensor& b) {
  // a * b^T, a: m x k, b: n x k -> m x n
  const std::int64_t m = a.rows(), k = a.cols(), n = b.rows();
  Tensor out({m, n});
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();
  for (std::int64_t i = 0; i < m; ++i) {
    const double* arow = pa + i * k;
    for (std::int64_t j = 0; j < n; ++j) {
      const double* brow = pb + j * k;
      double acc = 0.0;
      for (std::int64_t l = 0; l < k; ++l) acc += arow[l] * brow[l];
      po[i * n + j] = acc;
    }
  }
  return out;
}

Tensor transpose_values(const Tensor& a) {
  const std::int64_t m = a.rows(), n = a.cols();
  Tensor out({n, m});
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j) out.at(j, i) = a.at(i, j);
  return out;
}

}  // namespace

const Tensor& Var::value() const {
  if (!tape_) throw ContractError("value() on a null Var");
  return tape_->value(*this);
}

int Tape::push(Tensor value, std::vector<Parent> parents, bool requires_grad) {
  Node node;
  node.value = std::move(value);
  node.parents = std::move(parents);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size()) - 1;
}

Var Tape::constant(Tensor value) { return Var(this, push(std::move(value), {}, false)); }

Var Tape::param(Tensor value) { return Var(this, push(std::move(value), {}, true)); }

Var Tape::make(Tensor value, std::vector<std::pair<Var, PullFn>> parents) {
  std::vector<Parent> ps;
  bool needs_grad = false;
  ps.reserve(parents.size());
  for (auto& [var, pull] : parents) {
    if (var.tape() != this) throw ContractError("make(): parent from another tape");
    if (nodes_[static_cast<std::size_t>(var.slot())].requires_grad) needs_grad = true;
    ps.push_back(Parent{var.slot(), std::move(pull)});
  }
  return Var(this, push(std::move(value), std::move(ps), needs_grad));
}

void Tape::backward(const Var& out) {
  if (out.tape() != this) throw ContractError("backward(): output from another tape");
  if (value(out).numel() != 1) {
    throw ContractError("backward(): output must be a scalar, got " + value(out).shape_str());
  }
  grads_.assign(nodes_.size(), Tensor());
  has_grad_.assign(nodes_.size(), 0);
  const std::size_t root = static_cast<std::size_t>(out.slot());
  grads_[root] = Tensor(value(out).shape(), {1.0});
  has_grad_[root] = 1;

  for (std::size_t i = nodes_.size(); i-- > 0;) {
    if (!has_grad_[i] || !nodes_[i].requires_grad) continue;
    const Tensor& g = grads_[i];
    for (const Parent& parent : nodes_[i].parents) {
      const std::size_t ps = static_cast<std::size_t>(parent.slot);
      if (!nodes_[ps].requires_grad) continue;
      Tensor contrib = parent.pull(g);
      if (!contrib.same_shape(nodes_[ps].value)) {
        throw ShapeError("backward(): gradient shape " + contrib.shape_str() +
                         " does not match tensor shape " + nodes_[ps].value.shape_str());
      }
      if (!has_grad_[ps]) {
        grads_[ps] = std::move(contrib);
        has_grad_[ps] = 1;
      } else {
        double* acc = grads_[ps].data().data();
        const double* add = contrib.data().data();
        const std::int64_t n = contrib.numel();
        for (std::int64_t j = 0; j < n; ++j) acc[j] += add[j];
      }
    }
  }
}

Tensor Tape::grad(const Var& v) const {
  if (v.tape() != this) throw ContractError("grad(): var from another tape");
  const std::size_t s = static_cast<std::size_t>(v.slot());
  if (s < has_grad_.size() && has_grad_[s]) return grads_[s];
  return Tensor::zeros(nodes_[s].value.shape());
}

const Tensor& Tape::value(const Var& v) const {
  return nodes_[static_cast<std::size_t>(v.slot())].value;
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  check_same_tape(a, b, "matmul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.rows()) {
    throw ShapeError("matmul: incompatible shapes " + av.shape_str() + " and " + bv.shape_str());
  }
  Tensor out = mm(av, bv);
  Tensor ac = av, bc = bv;
  return a.tape()->make(std::move(out),
                        {{a, [bc](const Tensor& g) { return mm_a_bt(g, bc); }},
                         {b, [ac](const Tensor& g) { return mm_at_b(ac, g); }}});
}

Var transpose(const Var& a) {
  Tensor out = transpose_values(a.value());
  return a.tape()->make(std::move(out), {{a, [](const Tensor& g) { return transpose_values(g); }}});
}

Var add(const Var& a, const Var& b) {
  check_same_tape(a, b, "add");
  check_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  const double* pb = b.value().data().data();
  double* po = out.data().data();
  for (std::int64_t i = 0; i < out.numel(); ++i) po[i] += pb[i];
  auto pass = [](const Tensor& g) { return g; };
  return a.tape()->make(std::move(out), {{a, pass}, {b, pass}});
}

Var sub(const Var& a, const Var& b) {
  check_same_tape(a, b, "sub");
  check_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  const double* pb = b.value().data().data();
  double* po = out.data().data();
  for (std::int64_t i = 0; i < out.numel(); ++i) po[i] -= pb[i];
  return a.tape()->make(std::move(out), {{a, [](const Tensor& g) { return g; }},
                                         {b, [](const Tensor& g) {
                                            Tensor n = g;
                                            for (auto& v : n.data()) v = -v;
                                            return n;
                                          }}});
}

Var mul(const Var& a, const Var& b) {
  check_same_tape(a, b, "mul");
  check_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  const double* pb = b.value().data().data();
  double* po = out.data().data();
  for (std::int64_t i = 0; i < out.numel(); ++i) po[i] *= pb[i];
  Tensor ac = a.value(), bc = b.value();
  auto scaled = [](const Tensor& g, const Tensor& w) {
    Tensor out_t = g;
    const double* pw = w.data().data();
    double* pg = out_t.data().data();
    for (std::int64_t i = 0; i < out_t.numel(); ++i) pg[i] *= pw[i];
    return out_t;
  };
  return a.tape()->make(std::move(out), {{a, [bc, scaled](const Tensor& g) { return scaled(g, bc); }},
                                         {b, [ac, scaled](const Tensor& g) { return scaled(g, ac); }}});
}

Var scale(const Var& a, double c) {
  Tensor out = a.value();
  for (auto& v : out.data()) v *= c;
  return a.tape()->make(std::move(out), {{a, [c](const Tensor& g) {
                                            Tensor n = g;
                                            for (auto& v : n.data()) v *= c;
                                            return n;
                                          }}});
}

Var add_const(const Var& a, double c) {
  Tensor out = a.value();
  for (auto& v : out.data()) v += c;
  return a.tape()->make(std::move(out), {{a, [](const Tensor& g) { return g; }}});
}

Var leaky_relu(const Var& x, double slope) {
  if (!(slope > 0.0 && slope < 1.0)) {
    throw ContractError("leaky_relu: slope must lie in (0, 1)");
  }
  Tensor out = x.value();
  for (auto& v : out.data()) v = v >= 0.0 ? v : slope * v;
  Tensor xc = x.value();
  return x.tape()->make(std::move(out), {{x, [xc, slope](const Tensor& g) {
                                            Tensor n = g;
                                            const double* px = xc.data().data();
                                            double* pn = n.data().data();
                                            for (std::int64_t i = 0; i < n.numel(); ++i) {
                                              if (px[i] < 0.0) pn[i] *= slope;
                                            }
                                            return n;
                                          }}});
}

Var row_softmax(const Var& x) {
  const Tensor& xv = x.value();
  const std::int64_t m = xv.rows(), n = xv.cols();
  Tensor out({m, n});
  for (std::int64_t i = 0; i < m; ++i) {
    double mx = xv.at(i, 0);
    for (std::int64_t j = 1; j < n; ++j) mx = std::max(mx, xv.at(i, j));
    double sum = 0.0;
    for (std::int64_t j = 0; j < n; ++j) {
      const double e = std::exp(xv.at(i, j) - mx);
      out.at(i, j) = e;
      sum += e;
    }
    for (std::int64_t j = 0; j < n; ++j) out.at(i, j) /= sum;
  }
  Tensor sm = out;
  return x.tape()->make(std::move(out), {{x, [sm](const Tensor& g) {
                                            const std::int64_t m2 = sm.rows(), n2 = sm.cols();
                                            Tensor gx({m2, n2});
                                            for (std::int64_t i = 0; i < m2; ++i) {
                                              double dot = 0.0;
                                              for (std::int64_t j = 0; j < n2; ++j)
                                                dot += g.at(i, j) * sm.at(i, j);
                                              for (std::int64_t j = 0; j < n2; ++j)
                                                gx.at(i, j) = sm.at(i, j) * (g.at(i, j) - dot);
                                            }
                                            return gx;
                                          }}});
}

Var row_normalize(const Var& x) {
  const Tensor& xv = x.value();
  const std::int64_t m = xv.rows(), n = xv.cols();
  Tensor out({m, n});
  std::vector<double> sums(static_cast<std::size_t>(m), 0.0);
  for (std::int64_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::int64_t j = 0; j < n; ++j) s += xv.at(i, j);
    if (s == 0.0) throw NumericError("row_normalize: zero row sum");
    sums[static_cast<std::size_t>(i)] = s;
    for (std::int64_t j = 0; j < n; ++j) out.at(i, j) = xv.at(i, j) / s;
  }
  Tensor yc = out;
  return x.tape()->make(std::move(out), {{x, [yc, sums](const Tensor& g) {
                                            const std::int64_t m2 = yc.rows(), n2 = yc.cols();
                                            Tensor gx({m2, n2});
                                            for (std::int64_t i = 0; i < m2; ++i) {
                                              double dot = 0.0;
                                              for (std::int64_t j = 0; j < n2; ++j)
                                                dot += g.at(i, j) * yc.at(i, j);
                                              const double s = sums[static_cast<std::size_t>(i)];
                                              for (std::int64_t j = 0; j < n2; ++j)
                                                gx.at(i, j) = (g.at(i, j) - dot) / s;
                                            }
                                            return gx;
                                          }}});
}

Var pairwise_sq_dist(const Var& q, const Var& k) {
  check_same_tape(q, k, "pairwise_sq_dist");
  const Tensor& qv = q.value();
  const Tensor& kv = k.value();
  if (qv.rank() != 2 || kv.rank() != 2 || qv.cols() != kv.cols()) {
    throw ShapeError("pairwise_sq_dist: feature dims differ, " + qv.shape_str() + " vs " +
                     kv.shape_str());
  }
  const std::int64_t m = qv.rows(), n = kv.rows(), d = qv.cols();
  Tensor out({m, n});
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::int64_t c = 0; c < d; ++c) {
        const double diff = qv.at(i, c) - kv.at(j, c);
        acc += diff * diff;
      }
      out.at(i, j) = acc;
    }
  }
  Tensor qc = qv, kc = kv;
  return q.tape()->make(
      std::move(out),
      {{q,
        [qc, kc](const Tensor& g) {
          const std::int64_t m2 = qc.rows(), n2 = kc.rows(), d2 = qc.cols();
          Tensor gq({m2, d2});
          for (std::int64_t i = 0; i < m2; ++i)
            for (std::int64_t j = 0; j < n2; ++j) {
              const double w = 2.0 * g.at(i, j);
              if (w == 0.0) continue;
              for (std::int64_t c = 0; c < d2; ++c)
                gq.at(i, c) += w * (qc.at(i, c) - kc.at(j, c));
            }
          return gq;
        }},
       {k, [qc, kc](const Tensor& g) {
          const std::int64_t m2 = qc.rows(), n2 = kc.rows(), d2 = qc.cols();
          Tensor gk({n2, d2});
          for (std::int64_t i = 0; i < m2; ++i)
            for (std::int64_t j = 0; j < n2; ++j) {
              const double w = 2.0 * g.at(i, j);
              if (w == 0.0) continue;
              for (std::int64_t c = 0; c < d2; ++c)
                gk.at(j, c) -= w * (qc.at(i, c) - kc.at(j, c));
            }
          return gk;
        }}});
}

Var student_t_kernel(const Var& d, double tau) {
  if (!(tau > 0.0)) throw ContractError("student_t_kernel: tau must be positive");
  const Tensor& dv = d.value();
  const double expo = -(tau + 1.0) / 2.0;
  Tensor out = dv;
  for (auto& v : out.data()) v = std::pow(1.0 + v / tau, expo);
  Tensor dc = dv;
  return d.tape()->make(std::move(out), {{d, [dc, tau, expo](const Tensor& g) {
                                            Tensor n = g;
                                            const double* pd = dc.data().data();
                                            double* pn = n.data().data();
                                            for (std::int64_t i = 0; i < n.numel(); ++i) {
                                              pn[i] *= (expo / tau) *
                                                       std::pow(1.0 + pd[i] / tau, expo - 1.0);
                                            }
                                            return n;
                                          }}});
}

Var concat_cols(const Var& a, const Var& b) {
  check_same_tape(a, b, "concat_cols");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rows() != bv.rows()) {
    throw ShapeError("concat_cols: row counts differ, " + av.shape_str() + " vs " +
                     bv.shape_str());
  }
  const std::int64_t m = av.rows(), na = av.cols(), nb = bv.cols();
  Tensor out({m, na + nb});
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t j = 0; j < na; ++j) out.at(i, j) = av.at(i, j);
    for (std::int64_t j = 0; j < nb; ++j) out.at(i, na + j) = bv.at(i, j);
  }
  return a.tape()->make(std::move(out),
                        {{a,
                          [m, na](const Tensor& g) {
                            Tensor ga({m, na});
                            for (std::int64_t i = 0; i < m; ++i)
                              for (std::int64_t j = 0; j < na; ++j) ga.at(i, j) = g.at(i, j);
                            return ga;
                          }},
                         {b, [m, na, nb](const Tensor& g) {
                            Tensor gb({m, nb});
                            for (std::int64_t i = 0; i < m; ++i)
                              for (std::int64_t j = 0; j < nb; ++j) gb.at(i, j) = g.at(i, na + j);
                            return gb;
                          }}});
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: empty part list");
  Tape* tape = parts[0].tape();
  const std::int64_t cols = parts[0].value().cols();
  std::int64_t total = 0;
  for (const Var& p : parts) {
    if (p.tape() != tape) throw ContractError("concat_rows: operands on different tapes");
    if (p.value().cols() != cols) throw ShapeError("concat_rows: column counts differ");
    total += p.value().rows();
  }
  Tensor out({total, cols});
  std::vector<std::pair<Var, Tape::PullFn>> parents;
  std::int64_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& pv = p.value();
    const std::int64_t r = pv.rows();
    for (std::int64_t i = 0; i < r; ++i)
      for (std::int64_t j = 0; j < cols; ++j) out.at(offset + i, j) = pv.at(i, j);
    const std::int64_t off = offset;
    parents.push_back({p, [off, r, cols](const Tensor& g) {
                         Tensor gp({r, cols});
                         for (std::int64_t i = 0; i < r; ++i)
                           for (std::int64_t j = 0; j < cols; ++j) gp.at(i, j) = g.at(off + i, j);
                         return gp;
                       }});
    offset += r;
  }
  return tape->make(std::move(out), std::move(parents));
}

Var take_rows(const Var& x, std::vector<std::int64_t> idx) {
  const Tensor& xv = x.value();
  const std::int64_t m = xv.rows(), n = xv.cols();
  Tensor out({static_cast<std::int64_t>(idx.size()), n});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] < 0 || idx[r] >= m) throw ContractError("take_rows: index out of range");
    for (std::int64_t j = 0; j < n; ++j) out.at(static_cast<std::int64_t>(r), j) = xv.at(idx[r], j);
  }
  return x.tape()->make(std::move(out), {{x, [idx, m, n](const Tensor& g) {
                                            Tensor gx({m, n});
                                            for (std::size_t r = 0; r < idx.size(); ++r)
                                              for (std::int64_t j = 0; j < n; ++j)
                                                gx.at(idx[r], j) +=
                                                    g.at(static_cast<std::int64_t>(r), j);
                                            return gx;
                                          }}});
}

Var tile_rows(const Var& row, std::int64_t n) {
  const Tensor& rv = row.value();
  if (rv.rows() != 1) throw ShapeError("tile_rows: input must have one row");
  const std::int64_t c = rv.cols();
  Tensor out({n, c});
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < c; ++j) out.at(i, j) = rv.at(0, j);
  return row.tape()->make(std::move(out), {{row, [n, c](const Tensor& g) {
                                              Tensor gr({1, c});
                                              for (std::int64_t i = 0; i < n; ++i)
                                                for (std::int64_t j = 0; j < c; ++j)
                                                  gr.at(0, j) += g.at(i, j);
                                              return gr;
                                            }}});
}

Var scale_rows(const Var& x, const Var& s) {
  check_same_tape(x, s, "scale_rows");
  const Tensor& xv = x.value();
  const Tensor& sv = s.value();
  if (sv.rank() != 2 || sv.cols() != 1 || sv.rows() != xv.rows()) {
    throw ShapeError("scale_rows: scale must be {rows, 1}, got " + sv.shape_str());
  }
  const std::int64_t m = xv.rows(), n = xv.cols();
  Tensor out({m, n});
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j) out.at(i, j) = xv.at(i, j) * sv.at(i, 0);
  Tensor xc = xv, sc = sv;
  return x.tape()->make(std::move(out),
                        {{x,
                          [sc, m, n](const Tensor& g) {
                            Tensor gx({m, n});
                            for (std::int64_t i = 0; i < m; ++i)
                              for (std::int64_t j = 0; j < n; ++j)
                                gx.at(i, j) = g.at(i, j) * sc.at(i, 0);
                            return gx;
                          }},
                         {s, [xc, m, n](const Tensor& g) {
                            Tensor gs({m, 1});
                            for (std::int64_t i = 0; i < m; ++i) {
                              double acc = 0.0;
                              for (std::int64_t j = 0; j < n; ++j) acc += g.at(i, j) * xc.at(i, j);
                              gs.at(i, 0) = acc;
                            }
                            return gs;
                          }}});
}

Var segment_sum(const Var& x, std::vector<std::int64_t> seg, std::int64_t num_segments) {
  const Tensor& xv = x.value();
  const std::int64_t m = xv.rows(), n = xv.cols();
  if (static_cast<std::int64_t>(seg.size()) != m) {
    throw ShapeError("segment_sum: segment list length must equal row count");
  }
  Tensor out({num_segments, n});
  for (std::int64_t i = 0; i < m; ++i) {
    const std::int64_t s = seg[static_cast<std::size_t>(i)];
    if (s < 0 || s >= num_segments) throw ContractError("segment_sum: segment id out of range");
    for (std::int64_t j = 0; j < n; ++j) out.at(s, j) += xv.at(i, j);
  }
  return x.tape()->make(std::move(out), {{x, [seg, m, n](const Tensor& g) {
                                            Tensor gx({m, n});
                                            for (std::int64_t i = 0; i < m; ++i) {
                                              const std::int64_t s = seg[static_cast<std::size_t>(i)];
                                              for (std::int64_t j = 0; j < n; ++j)
                                                gx.at(i, j) = g.at(s, j);
                                            }
                                            return gx;
                                          }}});
}

Var segment_softmax(const Var& x, std::vector<std::int64_t> seg) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2 || xv.cols() != 1) {
    throw ShapeError("segment_softmax: input must be {m, 1}, got " + xv.shape_str());
  }
  const std::int64_t m = xv.rows();
  if (static_cast<std::int64_t>(seg.size()) != m) {
    throw ShapeError("segment_softmax: segment list length must equal row count");
  }
  std::int64_t num_segments = 0;
  for (auto s : seg) num_segments = std::max(num_segments, s + 1);
  std::vector<double> mx(static_cast<std::size_t>(num_segments),
                         -std::numeric_limits<double>::infinity());
  for (std::int64_t i = 0; i < m; ++i) {
    auto s = static_cast<std::size_t>(seg[static_cast<std::size_t>(i)]);
    mx[s] = std::max(mx[s], xv.at(i, 0));
  }
  std::vector<double> sums(static_cast<std::size_t>(num_segments), 0.0);
  Tensor out({m, 1});
  for (std::int64_t i = 0; i < m; ++i) {
    auto s = static_cast<std::size_t>(seg[static_cast<std::size_t>(i)]);
    const double e = std::exp(xv.at(i, 0) - mx[s]);
    out.at(i, 0) = e;
    sums[s] += e;
  }
  for (std::int64_t i = 0; i < m; ++i) {
    auto s = static_cast<std::size_t>(seg[static_cast<std::size_t>(i)]);
    out.at(i, 0) /= sums[s];
  }
  Tensor alpha = out;
  return x.tape()->make(std::move(out), {{x, [alpha, seg, m](const Tensor& g) {
                                            std::int64_t nseg = 0;
                                            for (auto s : seg) nseg = std::max(nseg, s + 1);
                                            std::vector<double> dots(
                                                static_cast<std::size_t>(nseg), 0.0);
                                            for (std::int64_t i = 0; i < m; ++i) {
                                              auto s = static_cast<std::size_t>(
                                                  seg[static_cast<std::size_t>(i)]);
                                              dots[s] += g.at(i, 0) * alpha.at(i, 0);
                                            }
                                            Tensor gx({m, 1});
                                            for (std::int64_t i = 0; i < m; ++i) {
                                              auto s = static_cast<std::size_t>(
                                                  seg[static_cast<std::size_t>(i)]);
                                              gx.at(i, 0) =
                                                  alpha.at(i, 0) * (g.at(i, 0) - dots[s]);
                                            }
                                            return gx;
                                          }}});
}

Var slice_head(const Var& t, std::int64_t head) {
  const Tensor& tv = t.value();
  if (tv.rank() != 3) throw ShapeError("slice_head: input must be rank-3, got " + tv.shape_str());
  const std::int64_t h = tv.dim(0), n = tv.dim(1), d = tv.dim(2);
  if (head < 0 || head >= h) throw ContractError("slice_head: head index out of range");
  Tensor out({n, d});
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < d; ++j) out.at(i, j) = tv.at(head, i, j);
  return t.tape()->make(std::move(out), {{t, [h, n, d, head](const Tensor& g) {
                                            Tensor gt({h, n, d});
                                            for (std::int64_t i = 0; i < n; ++i)
                                              for (std::int64_t j = 0; j < d; ++j)
                                                gt.at(head, i, j) = g.at(i, j);
                                            return gt;
                                          }}});
}

Var select_entry(const Var& v, std::int64_t i) {
  const Tensor& vv = v.value();
  if (vv.rank() != 1) throw ShapeError("select_entry: input must be rank-1");
  if (i < 0 || i >= vv.numel()) throw ContractError("select_entry: index out of range");
  const std::int64_t n = vv.numel();
  Tensor out({1}, {vv.at(i)});
  return v.tape()->make(std::move(out), {{v, [n, i](const Tensor& g) {
                                            Tensor gv({n});
                                            gv.at(i) = g.at(0);
                                            return gv;
                                          }}});
}

Var scale_by(const Var& x, const Var& s) {
  check_same_tape(x, s, "scale_by");
  if (s.value().numel() != 1) throw ShapeError("scale_by: scale must be a single element");
  const double sv = s.value().at(0);
  Tensor out = x.value();
  for (auto& v : out.data()) v *= sv;
  Tensor xc = x.value();
  return x.tape()->make(std::move(out),
                        {{x,
                          [sv](const Tensor& g) {
                            Tensor n = g;
                            for (auto& v : n.data()) v *= sv;
                            return n;
                          }},
                         {s, [xc](const Tensor& g) {
                            double acc = 0.0;
                            const double* pg = g.data().data();
                            const double* px = xc.data().data();
                            for (std::int64_t i = 0; i < g.numel(); ++i) acc += pg[i] * px[i];
                            return Tensor({1}, {acc});
                          }}});
}

Var add_scalar(const Var& x, const Var& s) {
  check_same_tape(x, s, "add_scalar");
  if (s.value().numel() != 1) throw ShapeError("add_scalar: addend must be a single element");
  const double sv = s.value().at(0);
  Tensor out = x.value();
  for (auto& v : out.data()) v += sv;
  return x.tape()->make(std::move(out), {{x, [](const Tensor& g) { return g; }},
                                         {s, [](const Tensor& g) {
                                            double acc = 0.0;
                                            for (double v : g.data()) acc += v;
                                            return Tensor({1}, {acc});
                                          }}});
}

Var sum_all(const Var& x) {
  double acc = 0.0;
  for (double v : x.value().data()) acc += v;
  const Tensor shape_like = x.value();
  return x.tape()->make(Tensor({1}, {acc}), {{x, [shape_like](const Tensor& g) {
                                                Tensor n(shape_like.shape());
                                                for (auto& v : n.data()) v = g.at(0);
                                                return n;
                                              }}});
}

Var sqrt_scalar(const Var& x) {
  if (x.value().numel() != 1) throw ShapeError("sqrt_scalar: input must be a single element");
  const double v = x.value().at(0);
  if (v < 0.0) throw NumericError("sqrt_scalar: negative input");
  const double r = std::sqrt(v);
  return x.tape()->make(Tensor({1}, {r}), {{x, [r](const Tensor& g) {
                                              const double denom = std::max(r, 1e-12);
                                              return Tensor({1}, {g.at(0) / (2.0 * denom)});
                                            }}});
}

Var sum_squares(const Var& x) {
  double acc = 0.0;
  for (double v : x.value().data()) acc += v * v;
  Tensor xc = x.value();
  return x.tape()->make(Tensor({1}, {acc}), {{x, [xc](const Tensor& g) {
                                                Tensor n = xc;
                                                for (auto& v : n.data()) v *= 2.0 * g.at(0);
                                                return n;
                                              }}});
}

Var softmax_cross_entropy(const Var& logits, std::vector<std::int64_t> labels) {
  const Tensor& z = logits.value();
  const std::int64_t b = z.rows(), c = z.cols();
  if (static_cast<std::int64_t>(labels.size()) != b) {
    throw ShapeError("softmax_cross_entropy: one label per row required");
  }
  for (auto y : labels) {
    if (y < 0 || y >= c) throw ContractError("softmax_cross_entropy: label out of range");
  }
  Tensor probs({b, c});
  double loss = 0.0;
  for (std::int64_t i = 0; i < b; ++i) {
    double mx = z.at(i, 0);
    for (std::int64_t j = 1; j < c; ++j) mx = std::max(mx, z.at(i, j));
    double sum = 0.0;
    for (std::int64_t j = 0; j < c; ++j) {
      const double e = std::exp(z.at(i, j) - mx);
      probs.at(i, j) = e;
      sum += e;
    }
    for (std::int64_t j = 0; j < c; ++j) probs.at(i, j) /= sum;
    loss += std::log(sum) + mx - z.at(i, labels[static_cast<std::size_t>(i)]);
  }
  loss /= static_cast<double>(b);
  return logits.tape()->make(Tensor({1}, {loss}), {{logits, [probs, labels, b, c](const Tensor& g) {
                                                      Tensor gz({b, c});
                                                      const double w = g.at(0) / static_cast<double>(b);
                                                      for (std::int64_t i = 0; i < b; ++i) {
                                                        for (std::int64_t j = 0; j < c; ++j)
                                                          gz.at(i, j) = w * probs.at(i, j);
                                                        gz.at(i, labels[static_cast<std::size_t>(i)]) -=
                                                            w;
                                                      }
                                                      return gz;
                                                    }}});
}

Var kl_divergence(const Tensor& p, const Var& c) {
  const Tensor& cv = c.value();
  check_same_shape(p, cv, "kl_divergence");
  double loss = 0.0;
  for (std::int64_t i = 0; i < p.numel(); ++i) {
    const double pi = p.at(i);
    if (pi <= 0.0) continue;
    loss += pi * (std::log(pi) - std::log(std::max(cv.at(i), kLogFloor)));
  }
  Tensor pc = p, cc = cv;
  return c.tape()->make(Tensor({1}, {loss}), {{c, [pc, cc](const Tensor& g) {
                                                 Tensor gc(cc.shape());
                                                 const double w = g.at(0);
                                                 for (std::int64_t i = 0; i < cc.numel(); ++i) {
                                                   const double pi = pc.at(i);
                                                   if (pi <= 0.0 || cc.at(i) < kLogFloor) continue;
                                                   gc.at(i) = -w * pi / cc.at(i);
                                                 }
                                                 return gc;
                                               }}});
}

Var dropout(const Var& x, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ContractError("dropout: rate must lie in [0, 1)");
  if (rate == 0.0) return x;
  const Tensor& xv = x.value();
  Tensor mask(xv.shape());
  const double keep = 1.0 - rate;
  for (auto& v : mask.data()) v = rng.uniform() < rate ? 0.0 : 1.0 / keep;
  Tensor out = xv;
  for (std::int64_t i = 0; i < out.numel(); ++i) out.at(i) *= mask.at(i);
  return x.tape()->make(std::move(out), {{x, [mask](const Tensor& g) {
                                            Tensor n = g;
                                            for (std::int64_t i = 0; i < n.numel(); ++i)
                                              n.at(i) *= mask.at(i);
                                            return n;
                                          }}});
}

}  // namespace graphmem
