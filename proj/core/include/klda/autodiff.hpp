#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "klda/error.hpp"
#include "klda/param.hpp"

namespace klda::ad {

using klda::Matrix;

// Handle to a node on a Tape; valid only for the tape that created it.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape over dense 64-bit matrices.
//
// Shape conventions: everything is a matrix; row vectors are [1 x C],
// column vectors [R x 1], scalars [1 x 1]. Every forward op validates its
// operand shapes and rejects non-finite results; backward() rejects
// non-finite adjoints. Evaluation order is fixed, so identical inputs
// produce bit-identical values and gradients.
class Tape {
 public:
  // Leaf without gradient (data, noise draws, pinned constants).
  Var constant(Matrix v);
  // Leaf with gradient (trainable parameters).
  Var input(Matrix v);

  // Elementwise arithmetic; operand shapes must match.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var add_scalar(Var a, double c);
  Var mul_scalar(Var a, double c);
  Var neg(Var a);

  // Elementwise nonlinearities.
  Var exp(Var a);
  Var log(Var a);
  Var tanh(Var a);
  Var relu(Var a);
  Var softplus(Var a);

  // a [m x k] * b^T with b [n x k] -> [m x n]
  Var matmul_nt(Var a, Var b);
  // a^T [m x k] * b with a [k x m], b [k x n] -> [m x n]
  Var matmul_tn(Var a, Var b);
  // x [B x in] * w^T + bias, w [out x in], bias [1 x out] -> [B x out]
  Var affine(Var x, Var w, Var bias);

  Var transpose(Var a);
  // Columns [c0, c1) of a.
  Var slice_cols(Var a, int c0, int c1);
  // m [R x C] plus v [1 x C] added to every row.
  Var add_rowvec(Var m, Var v);
  // m [R x C] plus v [R x 1] added to every column.
  Var add_colvec(Var m, Var v);

  // Reductions.
  Var sum(Var a);        // [1 x 1]
  Var mean(Var a);       // [1 x 1]
  Var sum_rows(Var a);   // [R x 1], sums each row over its columns
  Var sum_cols(Var a);   // [1 x C]

  // Row-wise softmax / log-sum-exp, both overflow-safe.
  Var softmax_rows(Var a);
  Var logsumexp_rows(Var a);  // [R x 1]

  // out[r] = m(r, idx[r]); the index gather used by the NLL loss.
  Var pick_column(Var m, std::vector<int> idx);

  const Matrix& value(Var v) const;
  double scalar_value(Var v) const;  // requires a [1 x 1] node

  // Reverse sweep from a scalar output. One-shot per tape.
  void backward(Var scalar_out);
  // Gradient of the backward output w.r.t. node v (zeros if untouched).
  Matrix grad(Var v) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Op : std::uint8_t {
    kConstant, kInput,
    kAdd, kSub, kMul, kDiv, kAddScalar, kMulScalar, kNeg,
    kExp, kLog, kTanh, kRelu, kSoftplus,
    kMatmulNT, kMatmulTN, kTranspose, kSliceCols, kAddRowVec, kAddColVec,
    kSum, kMean, kSumRows, kSumCols, kSoftmaxRows, kLogSumExpRows,
    kPickColumn,
  };

  struct Node {
    Op op;
    Matrix value;
    Matrix grad;             // allocated lazily during backward
    int a = -1;
    int b = -1;
    int i0 = 0, i1 = 0;      // slice bounds
    double c = 0.0;          // scalar operand
    std::vector<int> index;  // pick_column
    bool needs_grad = false;
  };

  Var push(Node n, const char* opname);
  const Node& node(Var v) const;
  Matrix& grad_buf(int id);
  void accumulate(int id, const Matrix& g);

  static const char* op_name(Op op);

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// One (value, gradient) evaluation of a scalar objective over a ParamVector.
struct ObjectiveEval {
  double value = 0.0;
  ParamVector grad;
};

// The objective receives a fresh tape plus one Var per parameter entry, in
// entry order, and returns a scalar node.
using ObjectiveFn = std::function<Var(Tape&, const std::vector<Var>&)>;

// Exact reverse-mode value and gradient of `objective` at `params`.
ObjectiveEval value_and_grad(const ObjectiveFn& objective,
                             const ParamVector& params);

}  // namespace klda::ad
