// SPDX-License-Identifier: Apache-2.0
#include "skybeam/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "skybeam/fft.hpp"

namespace skybeam::ad {

namespace {
constexpr double kHalfLogTwoPi = 0.91893853320467274178032973640562;

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}
}  // namespace

Node Tape::constant(Tensor v) {
  Rec r;
  r.val = std::move(v);
  r.needs = false;
  recs_.push_back(std::move(r));
  return Node{static_cast<int>(recs_.size()) - 1};
}

Node Tape::param(Param& p) {
  require(p.value.shape == p.grad.shape, "tape: param grad shape mismatch");
  Rec r;
  r.pval = &p.value;
  r.pgrad = &p.grad;
  r.needs = true;
  r.grad_alloc = true;
  recs_.push_back(std::move(r));
  return Node{static_cast<int>(recs_.size()) - 1};
}

const Tensor& Tape::val(Node n) const {
  const Rec& r = recs_.at(static_cast<size_t>(n.id));
  return r.pval ? *r.pval : r.val;
}

const Tensor& Tape::grad(Node n) const {
  const Rec& r = recs_.at(static_cast<size_t>(n.id));
  if (r.pgrad) return *r.pgrad;
  if (!r.grad_alloc) return zero_;
  return r.grad;
}

int Tape::push(Tensor val, bool needs, std::function<void(Tape&)> pull) {
  Rec r;
  r.val = std::move(val);
  r.needs = needs;
  if (needs) r.pull = std::move(pull);
  recs_.push_back(std::move(r));
  return static_cast<int>(recs_.size()) - 1;
}

Tensor& Tape::gbuf(int id) {
  Rec& r = recs_.at(static_cast<size_t>(id));
  if (r.pgrad) return *r.pgrad;
  if (!r.grad_alloc) {
    r.grad = Tensor(r.pval ? r.pval->shape : r.val.shape);
    r.grad_alloc = true;
  }
  return r.grad;
}

void Tape::backward(Node root) {
  if (ran_backward_) throw std::logic_error("tape: backward may run once");
  ran_backward_ = true;
  require(root.valid(), "tape: invalid backward root");
  require(val(root).numel() == 1, "tape: backward root must be scalar");
  gbuf(root.id)[0] += 1.0;
  for (int id = root.id; id >= 0; --id) {
    Rec& r = recs_[static_cast<size_t>(id)];
    if (r.needs && r.grad_alloc && r.pull) r.pull(*this);
  }
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

namespace {

template <class Fwd, class Pull>
Node unary_op(Tape& t, Node a, Fwd fwd, Pull pull_fn) {
  const Tensor& av = t.val(a);
  Tensor out(av.shape);
  for (long i = 0; i < av.numel(); ++i) out[static_cast<size_t>(i)] = fwd(av[static_cast<size_t>(i)]);
  const bool needs = t.needs(a.id);
  const int self = t.size();
  auto pull = [self, a, pull_fn](Tape& tt) {
    if (!tt.needs(a.id)) return;
    const Tensor& g = tt.grad(Node{self});
    const Tensor& av2 = tt.val(a);
    const Tensor& ov = tt.val(Node{self});
    Tensor& da = tt.gbuf(a.id);
    for (long i = 0; i < av2.numel(); ++i) {
      const size_t k = static_cast<size_t>(i);
      da[k] += pull_fn(g[k], av2[k], ov[k]);
    }
  };
  return Node{t.push(std::move(out), needs, std::move(pull))};
}

template <class Fwd, class PullA, class PullB>
Node binary_op(Tape& t, Node a, Node b, const char* name, Fwd fwd, PullA pa, PullB pb) {
  const Tensor& av = t.val(a);
  const Tensor& bv = t.val(b);
  require(av.shape == bv.shape, std::string(name) + ": shape mismatch " +
                                    shape_string(av.shape) + " vs " + shape_string(bv.shape));
  Tensor out(av.shape);
  for (long i = 0; i < av.numel(); ++i) {
    const size_t k = static_cast<size_t>(i);
    out[k] = fwd(av[k], bv[k]);
  }
  const bool needs = t.needs(a.id) || t.needs(b.id);
  const int self = t.size();
  auto pull = [self, a, b, pa, pb](Tape& tt) {
    const Tensor& g = tt.grad(Node{self});
    const Tensor& av2 = tt.val(a);
    const Tensor& bv2 = tt.val(b);
    const Tensor& ov = tt.val(Node{self});
    if (tt.needs(a.id)) {
      Tensor& da = tt.gbuf(a.id);
      for (long i = 0; i < av2.numel(); ++i) {
        const size_t k = static_cast<size_t>(i);
        da[k] += pa(g[k], av2[k], bv2[k], ov[k]);
      }
    }
    if (tt.needs(b.id)) {
      Tensor& db = tt.gbuf(b.id);
      for (long i = 0; i < av2.numel(); ++i) {
        const size_t k = static_cast<size_t>(i);
        db[k] += pb(g[k], av2[k], bv2[k], ov[k]);
      }
    }
  };
  return Node{t.push(std::move(out), needs, std::move(pull))};
}

}  // namespace

Node add(Tape& t, Node a, Node b) {
  return binary_op(
      t, a, b, "add", [](double x, double y) { return x + y; },
      [](double g, double, double, double) { return g; },
      [](double g, double, double, double) { return g; });
}

Node sub(Tape& t, Node a, Node b) {
  return binary_op(
      t, a, b, "sub", [](double x, double y) { return x - y; },
      [](double g, double, double, double) { return g; },
      [](double g, double, double, double) { return -g; });
}

Node mul(Tape& t, Node a, Node b) {
  return binary_op(
      t, a, b, "mul", [](double x, double y) { return x * y; },
      [](double g, double, double y, double) { return g * y; },
      [](double g, double x, double, double) { return g * x; });
}

Node divide(Tape& t, Node a, Node b) {
  return binary_op(
      t, a, b, "divide", [](double x, double y) { return x / y; },
      [](double g, double, double y, double) { return g / y; },
      [](double g, double, double y, double o) { return -g * o / y; });
}

Node neg(Tape& t, Node a) {
  return unary_op(
      t, a, [](double x) { return -x; },
      [](double g, double, double) { return -g; });
}

Node add_const(Tape& t, Node a, double c) {
  return unary_op(
      t, a, [c](double x) { return x + c; },
      [](double g, double, double) { return g; });
}

Node mul_const(Tape& t, Node a, double c) {
  return unary_op(
      t, a, [c](double x) { return x * c; },
      [c](double g, double, double) { return g * c; });
}

Node rdiv_const(Tape& t, double c, Node a) {
  return unary_op(
      t, a, [c](double x) { return c / x; },
      [](double g, double x, double o) { return -g * o / x; });
}

Node vexp(Tape& t, Node a) {
  return unary_op(
      t, a, [](double x) { return std::exp(x); },
      [](double g, double, double o) { return g * o; });
}

Node vlog(Tape& t, Node a) {
  return unary_op(
      t, a, [](double x) { return std::log(x); },
      [](double g, double x, double) { return g / x; });
}

Node vsqrt(Tape& t, Node a) {
  return unary_op(
      t, a, [](double x) { return std::sqrt(x); },
      [](double g, double, double o) { return 0.5 * g / o; });
}

Node relu(Tape& t, Node a) {
  return unary_op(
      t, a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double g, double x, double) { return x > 0.0 ? g : 0.0; });
}

Node clamp_const(Tape& t, Node a, double lo, double hi) {
  require(lo < hi, "clamp: lo must be below hi");
  return unary_op(
      t, a, [lo, hi](double x) { return std::min(hi, std::max(lo, x)); },
      [lo, hi](double g, double x, double) { return (x > lo && x < hi) ? g : 0.0; });
}

// ---------------------------------------------------------------------------
// shape / reduction
// ---------------------------------------------------------------------------

Node reshape(Tape& t, Node a, std::vector<int> shape) {
  const Tensor& av = t.val(a);
  Tensor::check_shape(shape);
  require(Tensor::numel(shape) == av.numel(), "reshape: element count mismatch");
  Tensor out(shape);
  out.v = av.v;
  const bool needs = t.needs(a.id);
  const int self = t.size();
  auto pull = [self, a](Tape& tt) {
    if (!tt.needs(a.id)) return;
    const Tensor& g = tt.grad(Node{self});
    Tensor& da = tt.gbuf(a.id);
    for (size_t i = 0; i < da.v.size(); ++i) da[i] += g[i];
  };
  return Node{t.push(std::move(out), needs, std::move(pull))};
}

Node sum_all(Tape& t, Node a) {
  const Tensor& av = t.val(a);
  Tensor out({1});
  double s = 0.0;
  for (double x : av.v) s += x;
  out[0] = s;
  const bool needs = t.needs(a.id);
  const int self = t.size();
  auto pull = [self, a](Tape& tt) {
    if (!tt.needs(a.id)) return;
    const double g = tt.grad(Node{self})[0];
    Tensor& da = tt.gbuf(a.id);
    for (double& x : da.v) x += g;
  };
  return Node{t.push(std::move(out), needs, std::move(pull))};
}

Node sum_rows(Tape& t, Node a) {
  const Tensor& av = t.val(a);
  require(av.ndim() == 2, "sum_rows: rank-2 tensor required");
  const int m = av.dim(0), n = av.dim(1);
  Tensor out({m});
  for (int i = 0; i < m; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += av.at(i, j);
    out[static_cast<size_t>(i)] = s;
  }
  const bool needs = t.needs(a.id);
  const int self = t.size();
  auto pull = [self, a, m, n](Tape& tt) {
    if (!tt.needs(a.id)) return;
    const Tensor& g = tt.grad(Node{self});
    Tensor& da = tt.gbuf(a.id);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) da.at(i, j) += g[static_cast<size_t>(i)];
  };
  return Node{t.push(std::move(out), needs, std::move(pull))};
}

Node take_diag(Tape& t, Node a) {
  const Tensor& av = t.val(a);
  require(av.ndim() == 2 && av.dim(0) == av.dim(1), "take_diag: square matrix required");
  const int m = av.dim(0);
  Tensor out({m});
  for (int i = 0; i < m; ++i) out[static_cast<size_t>(i)] = av.at(i, i);
  const bool needs = t.needs(a.id);
  const int self = t.size();
  auto pull = [self, a, m](Tape& tt) {
    if (!tt.needs(a.id)) return;
    const Tensor& g = tt.grad(Node{self});
    Tensor& da = tt.gbuf(a.id);
    for (int i = 0; i < m; ++i) da.at(i, i) += g[static_cast<size_t>(i)];
  };
  return Node{t.push(std::move(out), needs, std::move(pull))};
}

Node plane(Tape& t, Node a, int idx) {
  const Tensor& av = t.val(a);
  require(av.ndim() >= 2, "plane: rank >= 2 required");
  require(idx >= 0 && idx < av.dim(0), "plane: index out of range");
  std::vector<int> shape(av.shape.begin() + 1, av.shape.end());
  const long block = Tensor::numel(shape);
  Tensor out(shape);
  const size_t off = static_cast<size_t>(idx) * static_cast<size_t>(block);
  std::copy(av.v.begin() + off, av.v.begin() + off + block, out.v.begin());
  const bool needs = t.needs(a.id);
  const int self = t.size();
  auto pull = [self, a, off, block](Tape& tt) {
    if (!tt.needs(a.id)) return;
    const Tensor& g = tt.grad(Node{self});
    Tensor& da = tt.gbuf(a.id);
    for (long i = 0; i < block; ++i) da[off + static_cast<size_t>(i)] += g[static_cast<size_t>(i)];
  };
  return Node{t.push(std::move(out), needs, std::move(pull))};
}

Node scale_by(Tape& t, Node a, Node s) {
  const Tensor& av = t.val(a);
  const Tensor& sv = t.val(s);
  require(sv.numel() == 1, "scale_by: scale must be a [1] tensor");
  Tensor out(av.shape);
  const double sc = sv[0];
  for (long i = 0; i < av.numel(); ++i) out[static_cast<size_t>(i)] = av[static_cast<size_t>(i)] * sc;
  const bool needs = t.needs(a.id) || t.needs(s.id);
  const int self = t.size();
  auto pull = [self, a, s](Tape& tt) {
    const Tensor& g = tt.grad(Node{self});
    const Tensor& av2 = tt.val(a);
    const double sc2 = tt.val(s)[0];
    if (tt.needs(a.id)) {
      Tensor& da = tt.gbuf(a.id);
      for (long i = 0; i < av2.numel(); ++i) da[static_cast<size_t>(i)] += g[static_cast<size_t>(i)] * sc2;
    }
    if (tt.needs(s.id)) {
      double acc = 0.0;
      for (long i = 0; i < av2.numel(); ++i) acc += g[static_cast<size_t>(i)] * av2[static_cast<size_t>(i)];
      tt.gbuf(s.id)[0] += acc;
    }
  };
  return Node{t.push(std::move(out), needs, std::move(pull))};
}

Node mul_rows(Tape& t, Node a, Node s) {
  const Tensor& av = t.val(a);
  const Tensor& sv = t.val(s);
  require(av.ndim() == 2, "mul_rows: rank-2 tensor required");
  require(sv.ndim() == 1 && sv.dim(0) == av.dim(0), "mul_rows: scale length mismatch");
  const int m = av.dim(0), n = av.dim(1);
  Tensor out(av.shape);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at(i, j) = av.at(i, j) * sv[static_cast<size_t>(i)];
  const bool needs = t.needs(a.id) || t.needs(s.id);
  const int self = t.size();
  auto pull = [self, a, s, m, n](Tape& tt) {
    const Tensor& g = tt.grad(Node{self});
    const Tensor& av2 = tt.val(a);
    const Tensor& sv2 = tt.val(s);
    if (tt.needs(a.id)) {
      Tensor& da = tt.gbuf(a.id);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) da.at(i, j) += g.at(i, j) * sv2[static_cast<size_t>(i)];
    }
    if (tt.needs(s.id)) {
      Tensor& ds = tt.gbuf(s.id);
      for (int i = 0; i < m; ++i) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) acc += g.at(i, j) * av2.at(i, j);
        ds[static_cast<size_t>(i)] += acc;
      }
    }
  };
  return Node{t.push(std::move(out), needs, std::move(pull))};
}

// ---------------------------------------------------------------------------
// linear / neural
// ---------------------------------------------------------------------------

Node dense(Tape& t, Node x, Node w, Node b) {
  const Tensor& xv = t.val(x);
  const Tensor& wv = t.val(w);
  const Tensor& bv = t.val(b);
  require(xv.ndim() == 1 && wv.ndim() == 2 && bv.ndim() == 1, "dense: ranks must be 1/2/1");
  const int in = xv.dim(0), out_n = wv.dim(0);
  require(wv.dim(1) == in, "dense: weight/input mismatch " + shape_string(wv.shape) + " vs " +
                               shape_string(xv.shape));
  require(bv.dim(0) == out_n, "dense: bias length mismatch");
  Tensor out({out_n});
  for (int o = 0; o < out_n; ++o) {
    const double* wr = wv.v.data() + static_cast<size_t>(o) * in;
    double acc = bv[static_cast<size_t>(o)];
    for (int i = 0; i < in; ++i) acc += wr[i] * xv[static_cast<size_t>(i)];
    out[static_cast<size_t>(o)] = acc;
  }
  const bool needs = t.needs(x.id) || t.needs(w.id) || t.needs(b.id);
  const int self = t.size();
  auto pull = [self, x, w, b, in, out_n](Tape& tt) {
    const Tensor& g = tt.grad(Node{self});
    const Tensor& xv2 = tt.val(x);
    const Tensor& wv2 = tt.val(w);
    if (tt.needs(x.id)) {
      Tensor& dx = tt.gbuf(x.id);
      for (int o = 0; o < out_n; ++o) {
        const double go = g[static_cast<size_t>(o)];
        const double* wr = wv2.v.data() + static_cast<size_t>(o) * in;
        for (int i = 0; i < in; ++i) dx[static_cast<size_t>(i)] += go * wr[i];
      }
    }
    if (tt.needs(w.id)) {
      Tensor& dw = tt.gbuf(w.id);
      for (int o = 0; o < out_n; ++o) {
        const double go = g[static_cast<size_t>(o)];
        double* dwr = dw.v.data() + static_cast<size_t>(o) * in;
        for (int i = 0; i < in; ++i) dwr[i] += go * xv2[static_cast<size_t>(i)];
      }
    }
    if (tt.needs(b.id)) {
      Tensor& db = tt.gbuf(b.id);
      for (int o = 0; o < out_n; ++o) db[static_cast<size_t>(o)] += g[static_cast<size_t>(o)];
    }
  };
  return Node{t.push(std::move(out), needs, std::move(pull))};
}

Node matmul(Tape& t, Node a, Node b) {
  const Tensor& av = t.val(a);
  const Tensor& bv = t.val(b);
  require(av.ndim() == 2 && bv.ndim() == 2 && av.dim(1) == bv.dim(0),
          "matmul: shape mismatch " + shape_string(av.shape) + " vs " + shape_string(bv.shape));
  const int m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Tensor out({m, n});
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < k; ++p) {
      const double aip = av.at(i, p);
      if (aip == 0.0) continue;
      const double* br = bv.v.data() + static_cast<size_t>(p) * n;
      double* orow = out.v.data() + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) orow[j] += aip * br[j];
    }
  }
  const bool needs = t.needs(a.id) || t.needs(b.id);
  const int self = t.size();
  auto pull = [self, a, b, m, k, n](Tape& tt) {
    const Tensor& g = tt.grad(Node{self});
    const Tensor& av2 = tt.val(a);
    const Tensor& bv2 = tt.val(b);
    if (tt.needs(a.id)) {
      Tensor& da = tt.gbuf(a.id);
      for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
          const double* gr = g.v.data() + static_cast<size_t>(i) * n;
          const double* br = bv2.v.data() + static_cast<size_t>(p) * n;
          double acc = 0.0;
          for (int j = 0; j < n; ++j) acc += gr[j] * br[j];
          da.at(i, p) += acc;
        }
    }
    if (tt.needs(b.id)) {
      Tensor& db = tt.gbuf(b.id);
      for (int p = 0; p < k; ++p)
        for (int i = 0; i < m; ++i) {
          const double aip = av2.at(i, p);
          if (aip == 0.0) continue;
          const double* gr = g.v.data() + static_cast<size_t>(i) * n;
          double* dbr = db.v.data() + static_cast<size_t>(p) * n;
          for (int j = 0; j < n; ++j) dbr[j] += aip * gr[j];
        }
    }
  };
  return Node{t.push(std::move(out), needs, std::move(pull))};
}

Node matmul_nt(Tape& t, Node a, Node b) {
  const Tensor& av = t.val(a);
  const Tensor& bv = t.val(b);
  require(av.ndim() == 2 && bv.ndim() == 2 && av.dim(1) == bv.dim(1),
          "matmul_nt: shape mismatch " + shape_string(av.shape) + " vs " + shape_string(bv.shape));
  const int m = av.dim(0), k = av.dim(1), n = bv.dim(0);
  Tensor out({m, n});
  for (int i = 0; i < m; ++i) {
    const double* ar = av.v.data() + static_cast<size_t>(i) * k;
    for (int j = 0; j < n; ++j) {
      const double* br = bv.v.data() + static_cast<size_t>(j) * k;
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += ar[p] * br[p];
      out.at(i, j) = acc;
    }
  }
  const bool needs = t.needs(a.id) || t.needs(b.id);
  const int self = t.size();
  auto pull = [self, a, b, m, k, n](Tape& tt) {
    const Tensor& g = tt.grad(Node{self});
    const Tensor& av2 = tt.val(a);
    const Tensor& bv2 = tt.val(b);
    if (tt.needs(a.id)) {
      Tensor& da = tt.gbuf(a.id);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
          const double gij = g.at(i, j);
          if (gij == 0.0) continue;
          const double* br = bv2.v.data() + static_cast<size_t>(j) * k;
          double* dar = da.v.data() + static_cast<size_t>(i) * k;
          for (int p = 0; p < k; ++p) dar[p] += gij * br[p];
        }
    }
    if (tt.needs(b.id)) {
      Tensor& db = tt.gbuf(b.id);
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < m; ++i) {
          const double gij = g.at(i, j);
          if (gij == 0.0) continue;
          const double* ar = av2.v.data() + static_cast<size_t>(i) * k;
          double* dbr = db.v.data() + static_cast<size_t>(j) * k;
          for (int p = 0; p < k; ++p) dbr[p] += gij * ar[p];
        }
    }
  };
  return Node{t.push(std::move(out), needs, std::move(pull))};
}

Node softmax_last(Tape& t, Node a) {
  const Tensor& av = t.val(a);
  require(av.ndim() == 1 || av.ndim() == 2, "softmax: rank 1 or 2 required");
  const int n = av.dim(av.ndim() - 1);
  const int rows = static_cast<int>(av.numel() / n);
  Tensor out(av.shape);
  for (int r = 0; r < rows; ++r) {
    const double* x = av.v.data() + static_cast<size_t>(r) * n;
    double* y = out.v.data() + static_cast<size_t>(r) * n;
    double mx = x[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, x[i]);
    double z = 0.0;
    for (int i = 0; i < n; ++i) {
      y[i] = std::exp(x[i] - mx);
      z += y[i];
    }
    for (int i = 0; i < n; ++i) y[i] /= z;
  }
  const bool needs = t.needs(a.id);
  const int self = t.size();
  auto pull = [self, a, rows, n](Tape& tt) {
    if (!tt.needs(a.id)) return;
    const Tensor& g = tt.grad(Node{self});
    const Tensor& ov = tt.val(Node{self});
    Tensor& da = tt.gbuf(a.id);
    for (int r = 0; r < rows; ++r) {
      const double* gr = g.v.data() + static_cast<size_t>(r) * n;
      const double* s = ov.v.data() + static_cast<size_t>(r) * n;
      double* dar = da.v.data() + static_cast<size_t>(r) * n;
      double dot = 0.0;
      for (int i = 0; i < n; ++i) dot += gr[i] * s[i];
      for (int i = 0; i < n; ++i) dar[i] += s[i] * (gr[i] - dot);
    }
  };
  return Node{t.push(std::move(out), needs, std::move(pull))};
}

Node conv2d(Tape& t, Node x, Node k, Node b) {
  const Tensor& xv = t.val(x);
  const Tensor& kv = t.val(k);
  const Tensor& bv = t.val(b);
  require(xv.ndim() == 3 && kv.ndim() == 4 && bv.ndim() == 1, "conv2d: ranks must be 3/4/1");
  const int cin = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  const int cout = kv.dim(0), kh = kv.dim(2), kw = kv.dim(3);
  require(kv.dim(1) == cin, "conv2d: channel mismatch");
  require(kh % 2 == 1 && kw % 2 == 1, "conv2d: odd kernel required");
  require(bv.dim(0) == cout, "conv2d: bias length mismatch");
  const int ph = kh / 2, pw = kw / 2;
  Tensor out({cout, h, w});
  for (int o = 0; o < cout; ++o)
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        double acc = bv[static_cast<size_t>(o)];
        for (int i = 0; i < cin; ++i)
          for (int dr = 0; dr < kh; ++dr) {
            const int rr = r + dr - ph;
            if (rr < 0 || rr >= h) continue;
            for (int dc = 0; dc < kw; ++dc) {
              const int cc = c + dc - pw;
              if (cc < 0 || cc >= w) continue;
              acc += xv.at(i, rr, cc) * kv.at(o, i, dr, dc);
            }
          }
        out.at(o, r, c) = acc;
      }
  const bool needs = t.needs(x.id) || t.needs(k.id) || t.needs(b.id);
  const int self = t.size();
  auto pull = [self, x, k, b, cin, h, w, cout, kh, kw, ph, pw](Tape& tt) {
    const Tensor& g = tt.grad(Node{self});
    const Tensor& xv2 = tt.val(x);
    const Tensor& kv2 = tt.val(k);
    const bool nx = tt.needs(x.id), nk = tt.needs(k.id), nb = tt.needs(b.id);
    for (int o = 0; o < cout; ++o)
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
          const double go = g.at(o, r, c);
          if (go == 0.0) continue;
          if (nb) tt.gbuf(b.id)[static_cast<size_t>(o)] += go;
          for (int i = 0; i < cin; ++i)
            for (int dr = 0; dr < kh; ++dr) {
              const int rr = r + dr - ph;
              if (rr < 0 || rr >= h) continue;
              for (int dc = 0; dc < kw; ++dc) {
                const int cc = c + dc - pw;
                if (cc < 0 || cc >= w) continue;
                if (nx) tt.gbuf(x.id).at(i, rr, cc) += go * kv2.at(o, i, dr, dc);
                if (nk) tt.gbuf(k.id).at(o, i, dr, dc) += go * xv2.at(i, rr, cc);
              }
            }
        }
  };
  return Node{t.push(std::move(out), needs, std::move(pull))};
}

// ---------------------------------------------------------------------------
// spectral
// ---------------------------------------------------------------------------

namespace {

void check_packed(const Tensor& v, const char* name) {
  require(v.ndim() >= 3 && v.dim(0) == 2,
          std::string(name) + ": packed complex tensor [2 x ...] required, got " +
              shape_string(v.shape));
}

}  // namespace

Node fft2(Tape& t, Node packed, bool inverse) {
  const Tensor& av = t.val(packed);
  check_packed(av, "fft2");
  const int nd = av.ndim();
  const int ch = nd == 4 ? av.dim(1) : 1;
  const int h = av.dim(nd - 2), w = av.dim(nd - 1);
  const long hw = static_cast<long>(h) * w;
  Tensor out = av;
  {
    double* re = out.v.data();
    double* im = out.v.data() + static_cast<size_t>(ch) * hw;
    for (int c = 0; c < ch; ++c)
      fft::transform2d(re + static_cast<size_t>(c) * hw, im + static_cast<size_t>(c) * hw, h, w,
                       inverse);
  }
  const bool needs = t.needs(packed.id);
  const int self = t.size();
  auto pull = [self, packed, ch, h, w, hw, inverse](Tape& tt) {
    if (!tt.needs(packed.id)) return;
    Tensor tmp = tt.grad(Node{self});
    double* re = tmp.v.data();
    double* im = tmp.v.data() + static_cast<size_t>(ch) * hw;
    // Adjoint of the unscaled forward DFT is hw * inverse; of the 1/hw
    // inverse it is forward / hw.
    for (int c = 0; c < ch; ++c)
      fft::transform2d(re + static_cast<size_t>(c) * hw, im + static_cast<size_t>(c) * hw, h, w,
                       !inverse);
    const double s = inverse ? 1.0 / static_cast<double>(hw) : static_cast<double>(hw);
    Tensor& da = tt.gbuf(packed.id);
    for (size_t i = 0; i < da.v.size(); ++i) da[i] += tmp[i] * s;
  };
  return Node{t.push(std::move(out), needs, std::move(pull))};
}

Node spectral_mul(Tape& t, Node xp, Node zr, Node zi, int mh, int mw) {
  const Tensor& xv = t.val(xp);
  const Tensor& zrv = t.val(zr);
  const Tensor& ziv = t.val(zi);
  check_packed(xv, "spectral_mul");
  require(xv.ndim() == 4, "spectral_mul: input must be [2 x Cin x H x W]");
  require(zrv.ndim() == 4 && ziv.ndim() == 4 && zrv.shape == ziv.shape,
          "spectral_mul: weight planes must match");
  const int cin = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
  const int cout = zrv.dim(0);
  require(zrv.dim(1) == cin, "spectral_mul: channel mismatch");
  require(zrv.dim(2) == mh && zrv.dim(3) == mw, "spectral_mul: weight/mode mismatch");
  require(mh >= 1 && mw >= 1 && mh <= h && mw <= w,
          "spectral_mul: retained modes exceed transform size");
  Tensor out({2, cout, h, w});
  for (int p = 0; p < mh; ++p) {
    const int p2 = (h - p) % h;
    for (int q = 0; q < mw; ++q) {
      const int q2 = (w - q) % w;
      const bool partner_inside = (p2 < mh && q2 < mw);
      for (int o = 0; o < cout; ++o) {
        double ar = 0.0, ai = 0.0;
        for (int i = 0; i < cin; ++i) {
          const double xr = xv.at(0, i, p, q), xi = xv.at(1, i, p, q);
          const double wr = zrv.at(o, i, p, q), wi = ziv.at(o, i, p, q);
          ar += wr * xr - wi * xi;
          ai += wr * xi + wi * xr;
        }
        out.at(0, o, p, q) = ar;
        out.at(1, o, p, q) = ai;
        if (!partner_inside) {
          out.at(0, o, p2, q2) = ar;
          out.at(1, o, p2, q2) = -ai;
        }
      }
    }
  }
  const bool needs = t.needs(xp.id) || t.needs(zr.id) || t.needs(zi.id);
  const int self = t.size();
  auto pull = [self, xp, zr, zi, cin, h, w, cout, mh, mw](Tape& tt) {
    const Tensor& g = tt.grad(Node{self});
    const Tensor& xv2 = tt.val(xp);
    const Tensor& zrv2 = tt.val(zr);
    const Tensor& ziv2 = tt.val(zi);
    const bool nx = tt.needs(xp.id), nzr = tt.needs(zr.id), nzi = tt.needs(zi.id);
    for (int p = 0; p < mh; ++p) {
      const int p2 = (h - p) % h;
      for (int q = 0; q < mw; ++q) {
        const int q2 = (w - q) % w;
        const bool partner_inside = (p2 < mh && q2 < mw);
        for (int o = 0; o < cout; ++o) {
          double gr = g.at(0, o, p, q);
          double gi = g.at(1, o, p, q);
          if (!partner_inside) {
            gr += g.at(0, o, p2, q2);
            gi -= g.at(1, o, p2, q2);
          }
          if (gr == 0.0 && gi == 0.0) continue;
          for (int i = 0; i < cin; ++i) {
            const double xr = xv2.at(0, i, p, q), xi = xv2.at(1, i, p, q);
            const double wr = zrv2.at(o, i, p, q), wi = ziv2.at(o, i, p, q);
            if (nzr) tt.gbuf(zr.id).at(o, i, p, q) += gr * xr + gi * xi;
            if (nzi) tt.gbuf(zi.id).at(o, i, p, q) += -gr * xi + gi * xr;
            if (nx) {
              tt.gbuf(xp.id).at(0, i, p, q) += gr * wr + gi * wi;
              tt.gbuf(xp.id).at(1, i, p, q) += -gr * wi + gi * wr;
            }
          }
        }
      }
    }
  };
  return Node{t.push(std::move(out), needs, std::move(pull))};
}

// ---------------------------------------------------------------------------
// sampling
// ---------------------------------------------------------------------------

SampleOut gaussian_sample_with(Tape& t, Node mu, Node log_std, Tensor eps) {
  // copied, not referenced: pushing nodes below may reallocate tape storage
  const std::vector<int> mshape = t.val(mu).shape;
  const std::vector<int> lshape = t.val(log_std).shape;
  require(eps.shape == mshape, "gaussian_sample: eps/mu shape mismatch");
  double eps_sq = 0.0;
  for (double e : eps.v) eps_sq += e * e;
  long n_coord = 1;
  for (int d : mshape) n_coord *= d;

  Node eps_node = t.constant(eps);
  Node std_node = vexp(t, log_std);
  Node action;
  Node ls_sum = sum_all(t, log_std);
  Node lp;
  long l_numel = 1;
  for (int d : lshape) l_numel *= d;
  if (lshape == mshape) {
    action = add(t, mu, mul(t, eps_node, std_node));
    lp = neg(t, ls_sum);
  } else if (lshape.size() == 1 && l_numel == 1) {
    action = add(t, mu, scale_by(t, eps_node, std_node));
    lp = mul_const(t, ls_sum, -static_cast<double>(n_coord));
  } else if (mshape.size() == 2 && lshape.size() == 1 && lshape[0] == mshape[0]) {
    action = add(t, mu, mul_rows(t, eps_node, std_node));
    lp = mul_const(t, ls_sum, -static_cast<double>(mshape[1]));
  } else {
    throw std::invalid_argument("gaussian_sample: log_std shape " + shape_string(lshape) +
                                " incompatible with mu " + shape_string(mshape));
  }
  lp = add_const(t, lp, -kHalfLogTwoPi * static_cast<double>(n_coord) - 0.5 * eps_sq);
  SampleOut out;
  out.action = action;
  out.log_prob = lp;
  out.eps = t.val(eps_node);
  return out;
}

SampleOut gaussian_sample(Tape& t, Node mu, Node log_std, Rng& rng) {
  Tensor eps(t.val(mu).shape);
  for (double& e : eps.v) e = rng.normal();
  return gaussian_sample_with(t, mu, log_std, std::move(eps));
}

// ---------------------------------------------------------------------------
// complex composites
// ---------------------------------------------------------------------------

CNode cmatmul(Tape& t, CNode a, CNode b) {
  return CNode{sub(t, matmul(t, a.re, b.re), matmul(t, a.im, b.im)),
               add(t, matmul(t, a.re, b.im), matmul(t, a.im, b.re))};
}

CNode cmatmul_nt(Tape& t, CNode a, CNode b) {
  return CNode{sub(t, matmul_nt(t, a.re, b.re), matmul_nt(t, a.im, b.im)),
               add(t, matmul_nt(t, a.re, b.im), matmul_nt(t, a.im, b.re))};
}

Node cabs2(Tape& t, CNode a) {
  return add(t, mul(t, a.re, a.re), mul(t, a.im, a.im));
}

}  // namespace skybeam::ad
