// Copyright 2026 The eras Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "eras/tape.hpp"

#include <algorithm>
#include <cmath>

#include "eras/common.hpp"
#include "eras/linalg.hpp"

namespace eras {
namespace ad {

std::string Shape::str() const {
  std::string s = "[";
  for (int i = 0; i < rank; ++i) {
    if (i) s += "x";
    s += std::to_string(dim[i]);
  }
  return s + "]";
}

double Tensor::scalar_value() const {
  require(shape.rank == 0 || shape.elems() == 1, ErrorKind::numerical,
          "expected a scalar tensor");
  return v[0];
}

namespace {

inline void require_shape(bool cond, const char* what) {
  if (!cond) throw NumericalError(std::string("tape: ") + what);
}

// C (+)= op_a(A) * op_b(B); A, B, C dense row-major.
void gemm_acc(double* c, int rows, int cols, const double* a, const double* b,
              int inner, bool trans_a, bool trans_b, int lda, int ldb) {
  for (int i = 0; i < rows; ++i) {
    double* crow = c + static_cast<std::size_t>(i) * cols;
    for (int k = 0; k < inner; ++k) {
      const double av = trans_a ? a[static_cast<std::size_t>(k) * lda + i]
                                : a[static_cast<std::size_t>(i) * lda + k];
      if (av == 0.0) continue;
      const double* brow = trans_b ? nullptr : b + static_cast<std::size_t>(k) * ldb;
      if (!trans_b) {
        for (int j = 0; j < cols; ++j) crow[j] += av * brow[j];
      } else {
        for (int j = 0; j < cols; ++j)
          crow[j] += av * b[static_cast<std::size_t>(j) * ldb + k];
      }
    }
  }
}

}  // namespace

int Tape::new_slot(Tensor t, bool needs_grad) {
  slots_.push_back(Slot{std::move(t), Tensor(), needs_grad, false});
  return static_cast<int>(slots_.size()) - 1;
}

void Tape::check_mine(Var v) const {
  require(v.tape == this && v.slot >= 0 &&
              v.slot < static_cast<int>(slots_.size()),
          ErrorKind::numerical, "tape: var does not belong to this tape");
}

Var Tape::constant(Tensor t) { return Var{this, new_slot(std::move(t), false)}; }

Var Tape::param(Tensor t) {
  const int s = new_slot(std::move(t), true);
  ops_.push_back(Op{OpKind::leaf, 0, 0, s, -1, 0, 0, 0.0});
  return Var{this, s};
}

Var Tape::make(OpKind kind, std::initializer_list<Var> ins, Tensor out_value,
               int i0, int i1, double s0) {
  std::vector<Var> v(ins);
  return make_vec(kind, v, std::move(out_value), i0, i1, s0);
}

Var Tape::make_vec(OpKind kind, const std::vector<Var>& ins, Tensor out_value,
                   int i0, int i1, double s0) {
  require(!consumed_, ErrorKind::numerical, "tape already consumed by backward");
  bool req = false;
  for (const Var& in : ins) {
    check_mine(in);
    req = req || slots_[in.slot].requires_grad;
  }
  if (kind == OpKind::stop_grad) req = false;
  const int out = new_slot(std::move(out_value), req);
  Op op;
  op.kind = kind;
  op.in_ofs = static_cast<int>(op_inputs_.size());
  op.in_count = static_cast<int>(ins.size());
  op.out = out;
  op.i0 = i0;
  op.i1 = i1;
  op.s0 = s0;
  for (const Var& in : ins) op_inputs_.push_back(in.slot);
  ops_.push_back(op);
  return Var{this, out};
}

const Tensor& Tape::value(Var v) const {
  check_mine(v);
  return slots_[v.slot].value;
}

bool Tape::requires_grad(Var v) const {
  check_mine(v);
  return slots_[v.slot].requires_grad;
}

Tensor Tape::grad(Var v) const {
  check_mine(v);
  const Slot& s = slots_[v.slot];
  require(consumed_, ErrorKind::numerical, "tape: backward has not run");
  if (!s.grad_alloc) return Tensor(s.value.shape);
  return s.grad;
}

Tensor& Tape::grad_buf(int slot) {
  Slot& s = slots_[slot];
  if (!s.grad_alloc) {
    s.grad = Tensor(s.value.shape);
    s.grad_alloc = true;
  }
  return s.grad;
}

std::size_t Tape::count_ops(OpKind kind) const {
  std::size_t n = 0;
  for (const auto& op : ops_)
    if (op.kind == kind) ++n;
  return n;
}

// ---------------------------------------------------------------------------
// forward ops

Var Tape::add(Var a, Var b) {
  require_shape(value(a).shape == value(b).shape, "add: shape mismatch");
  Tensor out = value(a);
  const Tensor& tb = value(b);
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += tb.v[i];
  return make(OpKind::add, {a, b}, std::move(out));
}

Var Tape::sub(Var a, Var b) {
  require_shape(value(a).shape == value(b).shape, "sub: shape mismatch");
  Tensor out = value(a);
  const Tensor& tb = value(b);
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] -= tb.v[i];
  return make(OpKind::sub, {a, b}, std::move(out));
}

Var Tape::mul(Var a, Var b) {
  require_shape(value(a).shape == value(b).shape, "mul: shape mismatch");
  Tensor out = value(a);
  const Tensor& tb = value(b);
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] *= tb.v[i];
  return make(OpKind::mul, {a, b}, std::move(out));
}

Var Tape::add_n(const std::vector<Var>& xs) {
  require(!xs.empty(), ErrorKind::numerical, "tape: add_n of nothing");
  Tensor out = value(xs[0]);
  for (std::size_t i = 1; i < xs.size(); ++i) {
    require_shape(value(xs[i]).shape == out.shape, "add_n: shape mismatch");
    const Tensor& t = value(xs[i]);
    for (std::size_t k = 0; k < out.v.size(); ++k) out.v[k] += t.v[k];
  }
  return make_vec(OpKind::add_n, xs, std::move(out));
}

Var Tape::scalar_mul(Var x, double s) {
  Tensor out = value(x);
  for (double& v : out.v) v *= s;
  return make(OpKind::scalar_mul, {x}, std::move(out), 0, 0, s);
}

Var Tape::scale_by(Var scalar, Var x) {
  require_shape(value(scalar).shape.elems() == 1, "scale_by: first arg not scalar");
  const double s = value(scalar).v[0];
  Tensor out = value(x);
  for (double& v : out.v) v *= s;
  return make(OpKind::scale_by, {scalar, x}, std::move(out));
}

Var Tape::reciprocal(Var x) {
  Tensor out = value(x);
  for (double& v : out.v) v = 1.0 / v;
  return make(OpKind::reciprocal, {x}, std::move(out));
}

Var Tape::log(Var x) {
  Tensor out = value(x);
  for (double& v : out.v) v = std::log(v);
  return make(OpKind::log, {x}, std::move(out));
}

Var Tape::tanh(Var x) {
  Tensor out = value(x);
  for (double& v : out.v) v = std::tanh(v);
  return make(OpKind::tanh_op, {x}, std::move(out));
}

Var Tape::abs_floored(Var x, double floor_val) {
  Tensor out = value(x);
  for (double& v : out.v) v = std::max(std::abs(v), floor_val);
  return make(OpKind::abs_floored, {x}, std::move(out), 0, 0, floor_val);
}

Var Tape::complex_abs(Var re, Var im, double floor_val) {
  require_shape(value(re).shape == value(im).shape, "complex_abs: shape mismatch");
  Tensor out = value(re);
  const Tensor& ti = value(im);
  for (std::size_t i = 0; i < out.v.size(); ++i)
    out.v[i] = std::max(std::hypot(out.v[i], ti.v[i]), floor_val);
  return make(OpKind::complex_abs, {re, im}, std::move(out), 0, 0, floor_val);
}

std::array<Var, 2> Tape::cmul(Var ar, Var ai, Var br, Var bi) {
  const Shape s = value(ar).shape;
  require_shape(value(ai).shape == s && value(br).shape == s && value(bi).shape == s,
                "cmul: shape mismatch");
  Tensor out_re(s), out_im(s);
  const auto &tar = value(ar).v, &tai = value(ai).v, &tbr = value(br).v,
             &tbi = value(bi).v;
  for (std::size_t i = 0; i < out_re.v.size(); ++i) {
    out_re.v[i] = tar[i] * tbr[i] - tai[i] * tbi[i];
    out_im.v[i] = tar[i] * tbi[i] + tai[i] * tbr[i];
  }
  // Record as one op with two output slots.
  require(!consumed_, ErrorKind::numerical, "tape already consumed by backward");
  bool req = slots_[ar.slot].requires_grad || slots_[ai.slot].requires_grad ||
             slots_[br.slot].requires_grad || slots_[bi.slot].requires_grad;
  const int o1 = new_slot(std::move(out_re), req);
  const int o2 = new_slot(std::move(out_im), req);
  Op op;
  op.kind = OpKind::cmul;
  op.in_ofs = static_cast<int>(op_inputs_.size());
  op.in_count = 4;
  op.out = o1;
  op.out2 = o2;
  for (Var v : {ar, ai, br, bi}) {
    check_mine(v);
    op_inputs_.push_back(v.slot);
  }
  ops_.push_back(op);
  return {Var{this, o1}, Var{this, o2}};
}

namespace {
// rank-1 tensors act as column vectors in matmul
void mat_dims(const Shape& s, bool trans, int& rows, int& cols, int& ld) {
  int r, c;
  if (s.rank == 1) {
    r = s.dim[0];
    c = 1;
  } else {
    r = s.dim[0];
    c = s.dim[1];
  }
  ld = c;
  rows = trans ? c : r;
  cols = trans ? r : c;
}
}  // namespace

Var Tape::matmul(Var a, Var b, bool trans_a, bool trans_b) {
  const Shape& sa = value(a).shape;
  const Shape& sb = value(b).shape;
  require_shape(sa.rank >= 1 && sa.rank <= 2 && sb.rank >= 1 && sb.rank <= 2,
                "matmul: rank must be 1 or 2");
  int ar, ac, lda, br, bc, ldb;
  mat_dims(sa, trans_a, ar, ac, lda);
  mat_dims(sb, trans_b, br, bc, ldb);
  if (ac != br)
    throw NumericalError("tape: matmul inner dimensions differ (" + sa.str() +
                         " vs " + sb.str() + ")");
  const bool vec_out = bc == 1 && sb.rank == 1;
  Tensor out(vec_out ? Shape::vec(ar) : Shape::mat(ar, bc));
  gemm_acc(out.v.data(), ar, bc, value(a).v.data(), value(b).v.data(), ac, trans_a,
           trans_b, lda, ldb);
  return make(OpKind::matmul, {a, b}, std::move(out), trans_a ? 1 : 0,
              trans_b ? 1 : 0);
}

Var Tape::add_rowvec(Var m, Var row) {
  const Shape& sm = value(m).shape;
  const Shape& sr = value(row).shape;
  require_shape(sm.rank == 2 && sr.rank == 1 && sr.dim[0] == sm.dim[1],
                "add_rowvec: shapes incompatible");
  Tensor out = value(m);
  const Tensor& r = value(row);
  const int rows = sm.dim[0], cols = sm.dim[1];
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) out.at(i, j) += r.at(j);
  return make(OpKind::add_rowvec, {m, row}, std::move(out));
}

Var Tape::sum(Var x) {
  double s = 0.0;
  for (double v : value(x).v) s += v;
  return make(OpKind::sum_all, {x}, Tensor::scalar(s));
}

Var Tape::mean(Var x) {
  double s = 0.0;
  const auto& v = value(x).v;
  for (double val : v) s += val;
  return make(OpKind::mean_all, {x}, Tensor::scalar(s / static_cast<double>(v.size())));
}

Var Tape::variance_axis1(Var x) {
  const Shape& s = value(x).shape;
  require_shape(s.rank == 2, "variance_axis1 needs a matrix");
  const int rows = s.dim[0], cols = s.dim[1];
  Tensor out(Shape::vec(rows));
  const Tensor& t = value(x);
  for (int i = 0; i < rows; ++i) {
    double mean = 0.0;
    for (int j = 0; j < cols; ++j) mean += t.at(i, j);
    mean /= cols;
    double var = 0.0;
    for (int j = 0; j < cols; ++j) {
      const double d = t.at(i, j) - mean;
      var += d * d;
    }
    out.at(i) = var / cols;
  }
  return make(OpKind::variance_axis1, {x}, std::move(out));
}

Var Tape::l1_distance(Var a, Var b) {
  require_shape(value(a).shape == value(b).shape, "l1_distance: shape mismatch");
  double s = 0.0;
  const auto& ta = value(a).v;
  const auto& tb = value(b).v;
  for (std::size_t i = 0; i < ta.size(); ++i) s += std::abs(ta[i] - tb[i]);
  return make(OpKind::l1_distance, {a, b}, Tensor::scalar(s));
}

Var Tape::linear_solve(Var a, Var b) {
  const Shape& sa = value(a).shape;
  const Shape& sb = value(b).shape;
  require_shape(sa.rank == 2 && sa.dim[0] == sa.dim[1], "linear_solve: A not square");
  require_shape(sb.rank == 1 && sb.dim[0] == sa.dim[0],
                "linear_solve: b length mismatch");
  const int n = sa.dim[0];
  linalg::LuFactors f = linalg::lu_factor(value(a).v, n);
  std::vector<double> x = linalg::lu_solve(f, value(b).v, false);

  // Save the factorization for the adjoint pass.
  const int saved_base = static_cast<int>(saved_.size());
  Tensor lu_t(Shape::mat(n, n), std::move(f.lu));
  Tensor perm_t(Shape::vec(n));
  for (int i = 0; i < n; ++i) perm_t.at(i) = static_cast<double>(f.perm[i]);
  saved_.push_back(std::move(lu_t));
  saved_.push_back(std::move(perm_t));

  return make(OpKind::linear_solve, {a, b}, Tensor(Shape::vec(n), std::move(x)),
              saved_base);
}

Var Tape::trace(Var a) {
  const Shape& s = value(a).shape;
  require_shape(s.rank == 2 && s.dim[0] == s.dim[1], "trace: not square");
  double t = 0.0;
  for (int i = 0; i < s.dim[0]; ++i) t += value(a).at(i, i);
  return make(OpKind::trace_op, {a}, Tensor::scalar(t));
}

Var Tape::col(Var m, int c) {
  const Shape& s = value(m).shape;
  require_shape(s.rank == 2 && c >= 0 && c < s.dim[1], "col: index out of range");
  Tensor out(Shape::vec(s.dim[0]));
  for (int i = 0; i < s.dim[0]; ++i) out.at(i) = value(m).at(i, c);
  return make(OpKind::col, {m}, std::move(out), c);
}

Var Tape::stack_cols(const std::vector<Var>& cols) {
  require(!cols.empty(), ErrorKind::numerical, "tape: stack_cols of nothing");
  const int rows = value(cols[0]).shape.dim[0];
  for (const Var& v : cols)
    require_shape(value(v).shape.rank == 1 && value(v).shape.dim[0] == rows,
                  "stack_cols: column shapes differ");
  Tensor out(Shape::mat(rows, static_cast<int>(cols.size())));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    const Tensor& t = value(cols[c]);
    for (int r = 0; r < rows; ++r) out.at(r, static_cast<int>(c)) = t.at(r);
  }
  return make_vec(OpKind::stack_cols, cols, std::move(out));
}

Var Tape::stack_shifted(Var v, int k_past, int k_future) {
  const Shape& s = value(v).shape;
  require_shape(s.rank == 1, "stack_shifted needs a vector");
  const int T = s.dim[0];
  const int K = k_past + 1 + k_future;
  Tensor out(Shape::mat(T, K));
  const Tensor& t = value(v);
  for (int i = 0; i < T; ++i) {
    for (int k = 0; k < K; ++k) {
      const int src = i - k_past + k;
      out.at(i, k) = (src >= 0 && src < T) ? t.at(src) : 0.0;
    }
  }
  return make(OpKind::stack_shifted, {v}, std::move(out), k_past, k_future);
}

Var Tape::rows_scale(Var m, Var w) {
  const Shape& sm = value(m).shape;
  const Shape& sw = value(w).shape;
  require_shape(sm.rank == 2 && sw.rank == 1 && sw.dim[0] == sm.dim[0],
                "rows_scale: shapes incompatible");
  Tensor out = value(m);
  const Tensor& tw = value(w);
  for (int i = 0; i < sm.dim[0]; ++i) {
    const double wi = tw.at(i);
    for (int j = 0; j < sm.dim[1]; ++j) out.at(i, j) *= wi;
  }
  return make(OpKind::rows_scale, {m, w}, std::move(out));
}

Var Tape::slice_vec(Var v, int begin, int end) {
  const Shape& s = value(v).shape;
  require_shape(s.rank == 1 && begin >= 0 && end <= s.dim[0] && begin < end,
                "slice_vec: bad range");
  Tensor out(Shape::vec(end - begin));
  for (int i = begin; i < end; ++i) out.at(i - begin) = value(v).at(i);
  return make(OpKind::slice_vec, {v}, std::move(out), begin, end);
}

Var Tape::concat_vec(Var a, Var b) {
  const Shape& sa = value(a).shape;
  const Shape& sb = value(b).shape;
  require_shape(sa.rank == 1 && sb.rank == 1, "concat_vec needs vectors");
  Tensor out(Shape::vec(sa.dim[0] + sb.dim[0]));
  for (int i = 0; i < sa.dim[0]; ++i) out.at(i) = value(a).at(i);
  for (int i = 0; i < sb.dim[0]; ++i) out.at(sa.dim[0] + i) = value(b).at(i);
  return make(OpKind::concat_vec, {a, b}, std::move(out), sa.dim[0]);
}

Var Tape::complex_embed(Var a_re, Var a_im) {
  const Shape& s = value(a_re).shape;
  require_shape(s.rank == 2 && s.dim[0] == s.dim[1] && value(a_im).shape == s,
                "complex_embed needs equal square matrices");
  const int n = s.dim[0];
  Tensor out(Shape::mat(2 * n, 2 * n));
  const Tensor& ar = value(a_re);
  const Tensor& ai = value(a_im);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      out.at(i, j) = ar.at(i, j);
      out.at(i, n + j) = -ai.at(i, j);
      out.at(n + i, j) = ai.at(i, j);
      out.at(n + i, n + j) = ar.at(i, j);
    }
  }
  return make(OpKind::complex_embed, {a_re, a_im}, std::move(out), n);
}

Var Tape::stop_grad(Var x) {
  return make(OpKind::stop_grad, {x}, value(x));
}

// ---------------------------------------------------------------------------
// backward

void Tape::backward(Var loss) {
  check_mine(loss);
  require(!consumed_, ErrorKind::numerical, "tape already consumed by backward");
  require(value(loss).shape.elems() == 1, ErrorKind::numerical,
          "backward needs a scalar loss");
  consumed_ = true;
  if (!slots_[loss.slot].requires_grad) return;  // nothing depends on params
  grad_buf(loss.slot).v[0] = 1.0;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
    const Op& op = *it;
    if (op.out < 0 || !slots_[op.out].requires_grad) continue;
    if (!slots_[op.out].grad_alloc &&
        (op.out2 < 0 || !slots_[op.out2].grad_alloc)) {
      continue;  // no downstream sensitivity reached this op
    }
    run_adjoint(op);
  }
}

void Tape::run_adjoint(const Op& op) {
  const int* in = op_inputs_.data() + op.in_ofs;
  auto needs = [&](int k) { return slots_[in[k]].requires_grad; };
  const Tensor& g = slots_[op.out].grad_alloc ? slots_[op.out].grad
                                              : (grad_buf(op.out));

  switch (op.kind) {
    case OpKind::leaf:
    case OpKind::stop_grad:
      break;

    case OpKind::add: {
      for (int k = 0; k < 2; ++k) {
        if (!needs(k)) continue;
        Tensor& gi = grad_buf(in[k]);
        for (std::size_t i = 0; i < g.v.size(); ++i) gi.v[i] += g.v[i];
      }
      break;
    }
    case OpKind::sub: {
      if (needs(0)) {
        Tensor& ga = grad_buf(in[0]);
        for (std::size_t i = 0; i < g.v.size(); ++i) ga.v[i] += g.v[i];
      }
      if (needs(1)) {
        Tensor& gb = grad_buf(in[1]);
        for (std::size_t i = 0; i < g.v.size(); ++i) gb.v[i] -= g.v[i];
      }
      break;
    }
    case OpKind::mul: {
      const Tensor& a = slots_[in[0]].value;
      const Tensor& b = slots_[in[1]].value;
      if (needs(0)) {
        Tensor& ga = grad_buf(in[0]);
        for (std::size_t i = 0; i < g.v.size(); ++i) ga.v[i] += g.v[i] * b.v[i];
      }
      if (needs(1)) {
        Tensor& gb = grad_buf(in[1]);
        for (std::size_t i = 0; i < g.v.size(); ++i) gb.v[i] += g.v[i] * a.v[i];
      }
      break;
    }
    case OpKind::add_n: {
      for (int k = 0; k < op.in_count; ++k) {
        if (!needs(k)) continue;
        Tensor& gi = grad_buf(in[k]);
        for (std::size_t i = 0; i < g.v.size(); ++i) gi.v[i] += g.v[i];
      }
      break;
    }
    case OpKind::scalar_mul: {
      if (needs(0)) {
        Tensor& gx = grad_buf(in[0]);
        for (std::size_t i = 0; i < g.v.size(); ++i) gx.v[i] += op.s0 * g.v[i];
      }
      break;
    }
    case OpKind::scale_by: {
      const double s = slots_[in[0]].value.v[0];
      const Tensor& x = slots_[in[1]].value;
      if (needs(0)) {
        double acc = 0.0;
        for (std::size_t i = 0; i < g.v.size(); ++i) acc += g.v[i] * x.v[i];
        grad_buf(in[0]).v[0] += acc;
      }
      if (needs(1)) {
        Tensor& gx = grad_buf(in[1]);
        for (std::size_t i = 0; i < g.v.size(); ++i) gx.v[i] += s * g.v[i];
      }
      break;
    }
    case OpKind::reciprocal: {
      if (needs(0)) {
        const Tensor& y = slots_[op.out].value;
        Tensor& gx = grad_buf(in[0]);
        for (std::size_t i = 0; i < g.v.size(); ++i)
          gx.v[i] -= g.v[i] * y.v[i] * y.v[i];
      }
      break;
    }
    case OpKind::log: {
      if (needs(0)) {
        const Tensor& x = slots_[in[0]].value;
        Tensor& gx = grad_buf(in[0]);
        for (std::size_t i = 0; i < g.v.size(); ++i) gx.v[i] += g.v[i] / x.v[i];
      }
      break;
    }
    case OpKind::tanh_op: {
      if (needs(0)) {
        const Tensor& y = slots_[op.out].value;
        Tensor& gx = grad_buf(in[0]);
        for (std::size_t i = 0; i < g.v.size(); ++i)
          gx.v[i] += g.v[i] * (1.0 - y.v[i] * y.v[i]);
      }
      break;
    }
    case OpKind::abs_floored: {
      if (needs(0)) {
        const Tensor& x = slots_[in[0]].value;
        Tensor& gx = grad_buf(in[0]);
        for (std::size_t i = 0; i < g.v.size(); ++i) {
          const double ax = std::abs(x.v[i]);
          if (ax > op.s0)
            gx.v[i] += g.v[i] * (x.v[i] > 0.0 ? 1.0 : (x.v[i] < 0.0 ? -1.0 : 0.0));
        }
      }
      break;
    }
    case OpKind::complex_abs: {
      const Tensor& re = slots_[in[0]].value;
      const Tensor& im = slots_[in[1]].value;
      const Tensor& y = slots_[op.out].value;
      for (std::size_t i = 0; i < g.v.size(); ++i) {
        const double m = std::hypot(re.v[i], im.v[i]);
        if (m <= op.s0 || m == 0.0) continue;  // floored bins are insensitive
        const double gm = g.v[i] / y.v[i];
        if (needs(0)) grad_buf(in[0]).v[i] += gm * re.v[i];
        if (needs(1)) grad_buf(in[1]).v[i] += gm * im.v[i];
      }
      break;
    }
    case OpKind::cmul: {
      const Tensor& ar = slots_[in[0]].value;
      const Tensor& ai = slots_[in[1]].value;
      const Tensor& br = slots_[in[2]].value;
      const Tensor& bi = slots_[in[3]].value;
      const bool has_gr = slots_[op.out].grad_alloc;
      const bool has_gi = slots_[op.out2].grad_alloc;
      const Tensor* gr = has_gr ? &slots_[op.out].grad : nullptr;
      const Tensor* gi = has_gi ? &slots_[op.out2].grad : nullptr;
      const std::size_t n = ar.v.size();
      for (std::size_t i = 0; i < n; ++i) {
        const double grv = gr ? gr->v[i] : 0.0;
        const double giv = gi ? gi->v[i] : 0.0;
        if (grv == 0.0 && giv == 0.0) continue;
        if (needs(0)) grad_buf(in[0]).v[i] += grv * br.v[i] + giv * bi.v[i];
        if (needs(1)) grad_buf(in[1]).v[i] += -grv * bi.v[i] + giv * br.v[i];
        if (needs(2)) grad_buf(in[2]).v[i] += grv * ar.v[i] + giv * ai.v[i];
        if (needs(3)) grad_buf(in[3]).v[i] += -grv * ai.v[i] + giv * ar.v[i];
      }
      break;
    }
    case OpKind::matmul: {
      const Tensor& a = slots_[in[0]].value;
      const Tensor& b = slots_[in[1]].value;
      const bool ta = op.i0 != 0;
      const bool tb = op.i1 != 0;
      int ar, ac, lda, br, bc, ldb;
      mat_dims(a.shape, ta, ar, ac, lda);
      mat_dims(b.shape, tb, br, bc, ldb);
      // g has shape [ar x bc] (ld = bc)
      if (needs(0)) {
        Tensor& ga = grad_buf(in[0]);
        if (!ta) {
          // ga[i,k] += sum_j g[i,j] * opb(B)[k,j]
          gemm_acc(ga.v.data(), ar, ac, g.v.data(), b.v.data(), bc, false, !tb,
                   bc, ldb);
        } else {
          // raw A was used transposed: ga[k,i] += sum_j opb(B)[k,j] * g[i,j]
          gemm_acc(ga.v.data(), ac, ar, b.v.data(), g.v.data(), bc, tb, true, ldb,
                   bc);
        }
      }
      if (needs(1)) {
        Tensor& gb = grad_buf(in[1]);
        if (!tb) {
          // gb[k,j] += sum_i opa(A)[i,k] * g[i,j] -> opa(A)^T * g
          gemm_acc(gb.v.data(), br, bc, a.v.data(), g.v.data(), ar, !ta, false,
                   lda, bc);
        } else {
          // B^T used: gb[j,k] += g^T * opa(A)
          gemm_acc(gb.v.data(), bc, br, g.v.data(), a.v.data(), ar, true, ta, bc,
                   lda);
        }
      }
      break;
    }
    case OpKind::add_rowvec: {
      const Shape& sm = slots_[in[0]].value.shape;
      const int rows = sm.dim[0], cols = sm.dim[1];
      if (needs(0)) {
        Tensor& gm = grad_buf(in[0]);
        for (std::size_t i = 0; i < g.v.size(); ++i) gm.v[i] += g.v[i];
      }
      if (needs(1)) {
        Tensor& gr = grad_buf(in[1]);
        for (int i = 0; i < rows; ++i)
          for (int j = 0; j < cols; ++j)
            gr.at(j) += g.v[static_cast<std::size_t>(i) * cols + j];
      }
      break;
    }
    case OpKind::sum_all: {
      if (needs(0)) {
        Tensor& gx = grad_buf(in[0]);
        const double gs = g.v[0];
        for (double& v : gx.v) v += gs;
      }
      break;
    }
    case OpKind::mean_all: {
      if (needs(0)) {
        Tensor& gx = grad_buf(in[0]);
        const double gs = g.v[0] / static_cast<double>(gx.v.size());
        for (double& v : gx.v) v += gs;
      }
      break;
    }
    case OpKind::variance_axis1: {
      if (needs(0)) {
        const Tensor& x = slots_[in[0]].value;
        const int rows = x.shape.dim[0], cols = x.shape.dim[1];
        Tensor& gx = grad_buf(in[0]);
        for (int i = 0; i < rows; ++i) {
          const double gi = g.at(i);
          if (gi == 0.0) continue;
          double mean = 0.0;
          for (int j = 0; j < cols; ++j) mean += x.at(i, j);
          mean /= cols;
          const double c = 2.0 * gi / cols;
          for (int j = 0; j < cols; ++j) gx.at(i, j) += c * (x.at(i, j) - mean);
        }
      }
      break;
    }
    case OpKind::l1_distance: {
      const Tensor& a = slots_[in[0]].value;
      const Tensor& b = slots_[in[1]].value;
      const double gs = g.v[0];
      for (std::size_t i = 0; i < a.v.size(); ++i) {
        const double d = a.v[i] - b.v[i];
        const double s = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
        if (needs(0)) grad_buf(in[0]).v[i] += gs * s;
        if (needs(1)) grad_buf(in[1]).v[i] -= gs * s;
      }
      break;
    }
    case OpKind::linear_solve: {
      // x = A^{-1} b; given xbar: bbar = A^{-T} xbar, Abar = -bbar x^T.
      const Tensor& lu = saved_[op.i0];
      const Tensor& perm = saved_[op.i0 + 1];
      const int n = lu.shape.dim[0];
      linalg::LuFactors f;
      f.n = n;
      f.lu = lu.v;
      f.perm.resize(n);
      for (int i = 0; i < n; ++i) f.perm[i] = static_cast<int>(perm.at(i));
      std::vector<double> bbar = linalg::lu_solve(f, g.v, true);
      if (needs(1)) {
        Tensor& gb = grad_buf(in[1]);
        for (int i = 0; i < n; ++i) gb.at(i) += bbar[i];
      }
      if (needs(0)) {
        const Tensor& x = slots_[op.out].value;
        Tensor& ga = grad_buf(in[0]);
        for (int i = 0; i < n; ++i) {
          const double bi = bbar[i];
          if (bi == 0.0) continue;
          for (int j = 0; j < n; ++j) ga.at(i, j) -= bi * x.at(j);
        }
      }
      break;
    }
    case OpKind::trace_op: {
      if (needs(0)) {
        Tensor& ga = grad_buf(in[0]);
        const int n = ga.shape.dim[0];
        for (int i = 0; i < n; ++i) ga.at(i, i) += g.v[0];
      }
      break;
    }
    case OpKind::col: {
      if (needs(0)) {
        Tensor& gm = grad_buf(in[0]);
        const int rows = gm.shape.dim[0];
        for (int i = 0; i < rows; ++i) gm.at(i, op.i0) += g.at(i);
      }
      break;
    }
    case OpKind::stack_cols: {
      const int rows = g.shape.dim[0];
      for (int c = 0; c < op.in_count; ++c) {
        if (!needs(c)) continue;
        Tensor& gc = grad_buf(in[c]);
        for (int r = 0; r < rows; ++r) gc.at(r) += g.at(r, c);
      }
      break;
    }
    case OpKind::stack_shifted: {
      if (needs(0)) {
        Tensor& gv = grad_buf(in[0]);
        const int T = gv.shape.dim[0];
        const int K = op.i0 + 1 + op.i1;
        for (int t = 0; t < T; ++t) {
          for (int k = 0; k < K; ++k) {
            const int src = t - op.i0 + k;
            if (src >= 0 && src < T) gv.at(src) += g.at(t, k);
          }
        }
      }
      break;
    }
    case OpKind::rows_scale: {
      const Tensor& m = slots_[in[0]].value;
      const Tensor& w = slots_[in[1]].value;
      const int rows = m.shape.dim[0], cols = m.shape.dim[1];
      if (needs(0)) {
        Tensor& gm = grad_buf(in[0]);
        for (int i = 0; i < rows; ++i) {
          const double wi = w.at(i);
          for (int j = 0; j < cols; ++j) gm.at(i, j) += g.at(i, j) * wi;
        }
      }
      if (needs(1)) {
        Tensor& gw = grad_buf(in[1]);
        for (int i = 0; i < rows; ++i) {
          double acc = 0.0;
          for (int j = 0; j < cols; ++j) acc += g.at(i, j) * m.at(i, j);
          gw.at(i) += acc;
        }
      }
      break;
    }
    case OpKind::slice_vec: {
      if (needs(0)) {
        Tensor& gv = grad_buf(in[0]);
        for (int i = op.i0; i < op.i1; ++i) gv.at(i) += g.at(i - op.i0);
      }
      break;
    }
    case OpKind::concat_vec: {
      const int na = op.i0;
      if (needs(0)) {
        Tensor& ga = grad_buf(in[0]);
        for (int i = 0; i < na; ++i) ga.at(i) += g.at(i);
      }
      if (needs(1)) {
        Tensor& gb = grad_buf(in[1]);
        const int nb = gb.shape.dim[0];
        for (int i = 0; i < nb; ++i) gb.at(i) += g.at(na + i);
      }
      break;
    }
    case OpKind::complex_embed: {
      const int n = op.i0;
      if (needs(0)) {
        Tensor& gr = grad_buf(in[0]);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) gr.at(i, j) += g.at(i, j) + g.at(n + i, n + j);
      }
      if (needs(1)) {
        Tensor& gi = grad_buf(in[1]);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) gi.at(i, j) += g.at(n + i, j) - g.at(i, n + j);
      }
      break;
    }
  }
}

double grad_check(const std::function<Var(Tape&, Var)>& f, const Tensor& x,
                  double h) {
  Tensor analytic;
  {
    Tape t;
    Var vx = t.param(x);
    Var y = f(t, vx);
    require(t.value(y).shape.elems() == 1, ErrorKind::numerical,
            "grad_check: f must return a scalar");
    t.backward(y);
    analytic = t.grad(vx);
  }
  auto eval = [&](const Tensor& xt) {
    Tape t;
    Var vx = t.param(xt);
    return t.value(f(t, vx)).scalar_value();
  };
  double worst = 0.0;
  for (std::size_t i = 0; i < x.v.size(); ++i) {
    Tensor xp = x, xm = x;
    xp.v[i] += h;
    xm.v[i] -= h;
    const double fd = (eval(xp) - eval(xm)) / (2.0 * h);
    const double a = analytic.v[i];
    const double denom = std::max({std::abs(a), std::abs(fd), 1e-8});
    const double err = std::abs(a - fd) / denom;
    if (err > worst) worst = err;
  }
  return worst;
}

}  // namespace ad
}  // namespace eras
