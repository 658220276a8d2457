// Copyright 2026 The eras Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace eras {
namespace ad {

// Dense real tensor, rank <= 3. Rank-0 tensors are scalars.
struct Shape {
  int rank = 0;
  std::array<int, 3> dim{1, 1, 1};

  static Shape scalar() { return {0, {1, 1, 1}}; }
  static Shape vec(int n) { return {1, {n, 1, 1}}; }
  static Shape mat(int r, int c) { return {2, {r, c, 1}}; }
  std::size_t elems() const {
    std::size_t e = 1;
    for (int i = 0; i < rank; ++i) e *= static_cast<std::size_t>(dim[i]);
    return e;
  }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

struct Tensor {
  Shape shape;
  std::vector<double> v;

  Tensor() = default;
  explicit Tensor(Shape s) : shape(s), v(s.elems(), 0.0) {}
  Tensor(Shape s, std::vector<double> data) : shape(s), v(std::move(data)) {}
  static Tensor scalar(double x) { return Tensor(Shape::scalar(), {x}); }

  double& at(int i) { return v[static_cast<std::size_t>(i)]; }
  double at(int i) const { return v[static_cast<std::size_t>(i)]; }
  double& at(int r, int c) { return v[static_cast<std::size_t>(r) * shape.dim[1] + c]; }
  double at(int r, int c) const {
    return v[static_cast<std::size_t>(r) * shape.dim[1] + c];
  }
  double scalar_value() const;
};

class Tape;

// Handle to a value slot on a tape.
struct Var {
  Tape* tape = nullptr;
  int slot = -1;

  bool valid() const { return tape != nullptr && slot >= 0; }
};

enum class OpKind : std::uint8_t {
  leaf,
  add,
  sub,
  mul,
  add_n,
  scalar_mul,      // s0 * x (s0 is a compile-time constant)
  scale_by,        // broadcast: scalar var * tensor var
  reciprocal,
  log,
  tanh_op,
  abs_floored,     // max(|x|, s0) elementwise, subgradient 0 at the floor
  complex_abs,     // (re, im) -> max(sqrt(re^2+im^2), s0)
  cmul,            // complex pair multiply: (a,b)*(c,d), two outputs
  matmul,          // i0/i1: transpose flags for lhs/rhs
  add_rowvec,      // [R x C] + broadcast row vector [C]
  sum_all,
  mean_all,
  variance_axis1,  // population variance over columns of [R x C] -> [R]
  l1_distance,     // sum |a - b| -> scalar
  linear_solve,    // A [n x n], b [n] -> x, LU with partial pivoting
  trace_op,
  col,             // column f of [R x C] -> [R]
  stack_cols,      // C vectors [R] -> [R x C]
  stack_shifted,   // [T] -> [T x K], column k holds v shifted by (k - k_past)
  rows_scale,      // [R x C] scaled per-row by vector [R]
  slice_vec,       // contiguous [i0, i1) of a vector
  concat_vec,
  complex_embed,   // (Ar, Ai) -> [[Ar, -Ai], [Ai, Ar]]
  stop_grad,
};

// Reverse-mode tape. Forward values are computed eagerly as ops are
// recorded; backward() replays exact adjoints in reverse order. One
// backward pass per tape.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor t);
  Var param(Tensor t);  // leaf with gradient
  Var scalar_const(double x) { return constant(Tensor::scalar(x)); }

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var add_n(const std::vector<Var>& xs);
  Var scalar_mul(Var x, double s);
  Var scale_by(Var scalar, Var x);
  Var reciprocal(Var x);
  Var log(Var x);
  Var tanh(Var x);
  Var abs_floored(Var x, double floor_val);
  Var complex_abs(Var re, Var im, double floor_val);
  std::array<Var, 2> cmul(Var ar, Var ai, Var br, Var bi);
  Var matmul(Var a, Var b, bool trans_a = false, bool trans_b = false);
  Var add_rowvec(Var m, Var row);
  Var sum(Var x);
  Var mean(Var x);
  Var variance_axis1(Var x);
  Var l1_distance(Var a, Var b);
  Var linear_solve(Var a, Var b);
  Var trace(Var a);
  Var col(Var m, int c);
  Var stack_cols(const std::vector<Var>& cols);
  Var stack_shifted(Var v, int k_past, int k_future);
  Var rows_scale(Var m, Var w);
  Var slice_vec(Var v, int begin, int end);
  Var concat_vec(Var a, Var b);
  Var complex_embed(Var a_re, Var a_im);
  Var stop_grad(Var x);

  const Tensor& value(Var v) const;
  // Zero tensor of the var's shape when no sensitivity reached it.
  Tensor grad(Var v) const;
  bool requires_grad(Var v) const;

  void backward(Var loss);
  bool consumed() const { return consumed_; }

  std::size_t num_ops() const { return ops_.size(); }
  std::size_t count_ops(OpKind kind) const;

 private:
  struct Slot {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool grad_alloc = false;
  };
  struct Op {
    OpKind kind;
    int in_ofs = 0;
    int in_count = 0;
    int out = -1;
    int out2 = -1;
    int i0 = 0;
    int i1 = 0;
    double s0 = 0.0;
  };

  int new_slot(Tensor t, bool needs_grad);
  Var make(OpKind kind, std::initializer_list<Var> ins, Tensor out_value,
           int i0 = 0, int i1 = 0, double s0 = 0.0);
  Var make_vec(OpKind kind, const std::vector<Var>& ins, Tensor out_value,
               int i0 = 0, int i1 = 0, double s0 = 0.0);
  void check_mine(Var v) const;
  Tensor& grad_buf(int slot);
  void run_adjoint(const Op& op);

  std::vector<Slot> slots_;
  std::vector<Op> ops_;
  std::vector<int> op_inputs_;
  std::vector<Tensor> saved_;   // per-op saved intermediates (indexed via i0)
  bool consumed_ = false;
};

// Compares the reverse-mode gradient of f at x against central finite
// differences with step h. Returns the worst elementwise relative error.
double grad_check(const std::function<Var(Tape&, Var)>& f, const Tensor& x, double h);

}  // namespace ad
}  // namespace eras
