#include "klda/autodiff.hpp"

#include <cmath>
#include <string>

namespace klda::ad {

namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  // log(1 + e^x) without overflow on either tail
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

}  // namespace

const char* Tape::op_name(Op op) {
  switch (op) {
    case Op::kConstant: return "constant";
    case Op::kInput: return "input";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kDiv: return "div";
    case Op::kAddScalar: return "add_scalar";
    case Op::kMulScalar: return "mul_scalar";
    case Op::kNeg: return "neg";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kTanh: return "tanh";
    case Op::kRelu: return "relu";
    case Op::kSoftplus: return "softplus";
    case Op::kMatmulNT: return "matmul_nt";
    case Op::kMatmulTN: return "matmul_tn";
    case Op::kTranspose: return "transpose";
    case Op::kSliceCols: return "slice_cols";
    case Op::kAddRowVec: return "add_rowvec";
    case Op::kAddColVec: return "add_colvec";
    case Op::kSum: return "sum";
    case Op::kMean: return "mean";
    case Op::kSumRows: return "sum_rows";
    case Op::kSumCols: return "sum_cols";
    case Op::kSoftmaxRows: return "softmax_rows";
    case Op::kLogSumExpRows: return "logsumexp_rows";
    case Op::kPickColumn: return "pick_column";
  }
  return "?";
}

const Tape::Node& Tape::node(Var v) const {
  require(v.valid() && v.id < static_cast<int>(nodes_.size()),
          "invalid tape handle");
  return nodes_[static_cast<std::size_t>(v.id)];
}

Var Tape::push(Node n, const char* opname) {
  if (!n.value.allFinite())
    throw NumericError(std::string("numerical overflow in ") + opname);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Matrix v) {
  Node n;
  n.op = Op::kConstant;
  n.value = std::move(v);
  return push(std::move(n), "constant");
}

Var Tape::input(Matrix v) {
  Node n;
  n.op = Op::kInput;
  n.value = std::move(v);
  n.needs_grad = true;
  return push(std::move(n), "input");
}

#define KLDA_BINARY_SAME_SHAPE(a, b, opname)                            \
  require(node(a).value.rows() == node(b).value.rows() &&               \
              node(a).value.cols() == node(b).value.cols(),             \
          std::string(opname) + ": operand shapes differ")

Var Tape::add(Var a, Var b) {
  KLDA_BINARY_SAME_SHAPE(a, b, "add");
  Node n;
  n.op = Op::kAdd;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  n.value = node(a).value + node(b).value;
  return push(std::move(n), "add");
}

Var Tape::sub(Var a, Var b) {
  KLDA_BINARY_SAME_SHAPE(a, b, "sub");
  Node n;
  n.op = Op::kSub;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  n.value = node(a).value - node(b).value;
  return push(std::move(n), "sub");
}

Var Tape::mul(Var a, Var b) {
  KLDA_BINARY_SAME_SHAPE(a, b, "mul");
  Node n;
  n.op = Op::kMul;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  n.value = node(a).value.cwiseProduct(node(b).value);
  return push(std::move(n), "mul");
}

Var Tape::div(Var a, Var b) {
  KLDA_BINARY_SAME_SHAPE(a, b, "div");
  Node n;
  n.op = Op::kDiv;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  n.value = node(a).value.cwiseQuotient(node(b).value);
  return push(std::move(n), "div");
}

Var Tape::add_scalar(Var a, double c) {
  Node n;
  n.op = Op::kAddScalar;
  n.a = a.id;
  n.c = c;
  n.needs_grad = node(a).needs_grad;
  n.value = node(a).value.array() + c;
  return push(std::move(n), "add_scalar");
}

Var Tape::mul_scalar(Var a, double c) {
  Node n;
  n.op = Op::kMulScalar;
  n.a = a.id;
  n.c = c;
  n.needs_grad = node(a).needs_grad;
  n.value = node(a).value * c;
  return push(std::move(n), "mul_scalar");
}

Var Tape::neg(Var a) {
  Node n;
  n.op = Op::kNeg;
  n.a = a.id;
  n.needs_grad = node(a).needs_grad;
  n.value = -node(a).value;
  return push(std::move(n), "neg");
}

Var Tape::exp(Var a) {
  Node n;
  n.op = Op::kExp;
  n.a = a.id;
  n.needs_grad = node(a).needs_grad;
  n.value = node(a).value.array().exp();
  return push(std::move(n), "exp");
}

Var Tape::log(Var a) {
  Node n;
  n.op = Op::kLog;
  n.a = a.id;
  n.needs_grad = node(a).needs_grad;
  n.value = node(a).value.array().log();
  return push(std::move(n), "log");
}

Var Tape::tanh(Var a) {
  Node n;
  n.op = Op::kTanh;
  n.a = a.id;
  n.needs_grad = node(a).needs_grad;
  n.value = node(a).value.array().tanh();
  return push(std::move(n), "tanh");
}

Var Tape::relu(Var a) {
  Node n;
  n.op = Op::kRelu;
  n.a = a.id;
  n.needs_grad = node(a).needs_grad;
  n.value = node(a).value.cwiseMax(0.0);
  return push(std::move(n), "relu");
}

Var Tape::softplus(Var a) {
  Node n;
  n.op = Op::kSoftplus;
  n.a = a.id;
  n.needs_grad = node(a).needs_grad;
  n.value = node(a).value.unaryExpr([](double x) { return stable_softplus(x); });
  return push(std::move(n), "softplus");
}

Var Tape::matmul_nt(Var a, Var b) {
  require(node(a).value.cols() == node(b).value.cols(),
          "matmul_nt: inner dimensions differ");
  Node n;
  n.op = Op::kMatmulNT;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  n.value = node(a).value * node(b).value.transpose();
  return push(std::move(n), "matmul_nt");
}

Var Tape::matmul_tn(Var a, Var b) {
  require(node(a).value.rows() == node(b).value.rows(),
          "matmul_tn: inner dimensions differ");
  Node n;
  n.op = Op::kMatmulTN;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  n.value = node(a).value.transpose() * node(b).value;
  return push(std::move(n), "matmul_tn");
}

Var Tape::affine(Var x, Var w, Var bias) {
  require(node(bias).value.rows() == 1 &&
              node(bias).value.cols() == node(w).value.rows(),
          "affine: bias must be [1 x out]");
  return add_rowvec(matmul_nt(x, w), bias);
}

Var Tape::transpose(Var a) {
  Node n;
  n.op = Op::kTranspose;
  n.a = a.id;
  n.needs_grad = node(a).needs_grad;
  n.value = node(a).value.transpose();
  return push(std::move(n), "transpose");
}

Var Tape::slice_cols(Var a, int c0, int c1) {
  require(0 <= c0 && c0 < c1 && c1 <= node(a).value.cols(),
          "slice_cols: bounds out of range");
  Node n;
  n.op = Op::kSliceCols;
  n.a = a.id;
  n.i0 = c0;
  n.i1 = c1;
  n.needs_grad = node(a).needs_grad;
  n.value = node(a).value.middleCols(c0, c1 - c0);
  return push(std::move(n), "slice_cols");
}

Var Tape::add_rowvec(Var m, Var v) {
  require(node(v).value.rows() == 1 &&
              node(v).value.cols() == node(m).value.cols(),
          "add_rowvec: vector must be [1 x C] matching the matrix");
  Node n;
  n.op = Op::kAddRowVec;
  n.a = m.id;
  n.b = v.id;
  n.needs_grad = node(m).needs_grad || node(v).needs_grad;
  n.value = node(m).value.rowwise() + node(v).value.row(0);
  return push(std::move(n), "add_rowvec");
}

Var Tape::add_colvec(Var m, Var v) {
  require(node(v).value.cols() == 1 &&
              node(v).value.rows() == node(m).value.rows(),
          "add_colvec: vector must be [R x 1] matching the matrix");
  Node n;
  n.op = Op::kAddColVec;
  n.a = m.id;
  n.b = v.id;
  n.needs_grad = node(m).needs_grad || node(v).needs_grad;
  n.value = node(m).value.colwise() + node(v).value.col(0);
  return push(std::move(n), "add_colvec");
}

Var Tape::sum(Var a) {
  Node n;
  n.op = Op::kSum;
  n.a = a.id;
  n.needs_grad = node(a).needs_grad;
  n.value = Matrix::Constant(1, 1, node(a).value.sum());
  return push(std::move(n), "sum");
}

Var Tape::mean(Var a) {
  Node n;
  n.op = Op::kMean;
  n.a = a.id;
  n.needs_grad = node(a).needs_grad;
  n.value = Matrix::Constant(1, 1, node(a).value.mean());
  return push(std::move(n), "mean");
}

Var Tape::sum_rows(Var a) {
  Node n;
  n.op = Op::kSumRows;
  n.a = a.id;
  n.needs_grad = node(a).needs_grad;
  n.value = node(a).value.rowwise().sum();
  return push(std::move(n), "sum_rows");
}

Var Tape::sum_cols(Var a) {
  Node n;
  n.op = Op::kSumCols;
  n.a = a.id;
  n.needs_grad = node(a).needs_grad;
  n.value = node(a).value.colwise().sum();
  return push(std::move(n), "sum_cols");
}

Var Tape::softmax_rows(Var a) {
  const Matrix& x = node(a).value;
  Matrix p(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double m = x.row(r).maxCoeff();
    Eigen::RowVectorXd e = (x.row(r).array() - m).exp();
    p.row(r) = e / e.sum();
  }
  Node n;
  n.op = Op::kSoftmaxRows;
  n.a = a.id;
  n.needs_grad = node(a).needs_grad;
  n.value = std::move(p);
  return push(std::move(n), "softmax_rows");
}

Var Tape::logsumexp_rows(Var a) {
  const Matrix& x = node(a).value;
  Matrix out(x.rows(), 1);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double m = x.row(r).maxCoeff();
    out(r, 0) = m + std::log((x.row(r).array() - m).exp().sum());
  }
  Node n;
  n.op = Op::kLogSumExpRows;
  n.a = a.id;
  n.needs_grad = node(a).needs_grad;
  n.value = std::move(out);
  return push(std::move(n), "logsumexp_rows");
}

Var Tape::pick_column(Var m, std::vector<int> idx) {
  const Matrix& x = node(m).value;
  require(static_cast<Eigen::Index>(idx.size()) == x.rows(),
          "pick_column: one index per row required");
  for (int j : idx)
    require(0 <= j && j < x.cols(), "pick_column: index out of range");
  Matrix out(x.rows(), 1);
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    out(r, 0) = x(r, idx[static_cast<std::size_t>(r)]);
  Node n;
  n.op = Op::kPickColumn;
  n.a = m.id;
  n.index = std::move(idx);
  n.needs_grad = node(m).needs_grad;
  n.value = std::move(out);
  return push(std::move(n), "pick_column");
}

const Matrix& Tape::value(Var v) const { return node(v).value; }

double Tape::scalar_value(Var v) const {
  const Matrix& m = node(v).value;
  require(m.rows() == 1 && m.cols() == 1, "scalar_value: node is not 1x1");
  return m(0, 0);
}

Matrix& Tape::grad_buf(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::accumulate(int id, const Matrix& g) {
  if (!nodes_[static_cast<std::size_t>(id)].needs_grad) return;
  grad_buf(id) += g;
}

void Tape::backward(Var scalar_out) {
  require(!backward_done_, "backward already run on this tape");
  backward_done_ = true;
  const Node& out = node(scalar_out);
  require(out.value.rows() == 1 && out.value.cols() == 1,
          "backward: output must be scalar");
  if (!out.needs_grad) return;  // objective does not depend on any input
  grad_buf(scalar_out.id)(0, 0) = 1.0;

  for (int id = scalar_out.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad || n.grad.size() == 0) continue;
    if (!n.grad.allFinite())
      throw NumericError(std::string("numerical overflow in backward of ") +
                         op_name(n.op));
    const Matrix& g = n.grad;
    switch (n.op) {
      case Op::kConstant:
      case Op::kInput:
        break;
      case Op::kAdd:
        accumulate(n.a, g);
        accumulate(n.b, g);
        break;
      case Op::kSub:
        accumulate(n.a, g);
        accumulate(n.b, -g);
        break;
      case Op::kMul:
        accumulate(n.a, g.cwiseProduct(nodes_[static_cast<std::size_t>(n.b)].value));
        accumulate(n.b, g.cwiseProduct(nodes_[static_cast<std::size_t>(n.a)].value));
        break;
      case Op::kDiv: {
        const Matrix& bval = nodes_[static_cast<std::size_t>(n.b)].value;
        accumulate(n.a, g.cwiseQuotient(bval));
        accumulate(n.b, -g.cwiseProduct(n.value).cwiseQuotient(bval));
        break;
      }
      case Op::kAddScalar:
        accumulate(n.a, g);
        break;
      case Op::kMulScalar:
        accumulate(n.a, g * n.c);
        break;
      case Op::kNeg:
        accumulate(n.a, -g);
        break;
      case Op::kExp:
        accumulate(n.a, g.cwiseProduct(n.value));
        break;
      case Op::kLog:
        accumulate(n.a, g.cwiseQuotient(nodes_[static_cast<std::size_t>(n.a)].value));
        break;
      case Op::kTanh:
        accumulate(n.a, g.cwiseProduct(
                            (1.0 - n.value.array().square()).matrix()));
        break;
      case Op::kRelu: {
        const Matrix& aval = nodes_[static_cast<std::size_t>(n.a)].value;
        accumulate(n.a, g.cwiseProduct(
                            (aval.array() > 0.0).cast<double>().matrix()));
        break;
      }
      case Op::kSoftplus: {
        const Matrix& aval = nodes_[static_cast<std::size_t>(n.a)].value;
        accumulate(n.a, g.cwiseProduct(aval.unaryExpr(
                            [](double x) { return stable_sigmoid(x); })));
        break;
      }
      case Op::kMatmulNT: {
        const Matrix& aval = nodes_[static_cast<std::size_t>(n.a)].value;
        const Matrix& bval = nodes_[static_cast<std::size_t>(n.b)].value;
        accumulate(n.a, g * bval);
        accumulate(n.b, g.transpose() * aval);
        break;
      }
      case Op::kMatmulTN: {
        const Matrix& aval = nodes_[static_cast<std::size_t>(n.a)].value;
        const Matrix& bval = nodes_[static_cast<std::size_t>(n.b)].value;
        accumulate(n.a, bval * g.transpose());
        accumulate(n.b, aval * g);
        break;
      }
      case Op::kTranspose:
        accumulate(n.a, g.transpose());
        break;
      case Op::kSliceCols: {
        if (nodes_[static_cast<std::size_t>(n.a)].needs_grad) {
          Matrix& ga = grad_buf(n.a);
          ga.middleCols(n.i0, n.i1 - n.i0) += g;
        }
        break;
      }
      case Op::kAddRowVec:
        accumulate(n.a, g);
        accumulate(n.b, g.colwise().sum());
        break;
      case Op::kAddColVec:
        accumulate(n.a, g);
        accumulate(n.b, g.rowwise().sum());
        break;
      case Op::kSum: {
        const Node& pa = nodes_[static_cast<std::size_t>(n.a)];
        accumulate(n.a, Matrix::Constant(pa.value.rows(), pa.value.cols(),
                                         g(0, 0)));
        break;
      }
      case Op::kMean: {
        const Node& pa = nodes_[static_cast<std::size_t>(n.a)];
        double scale = g(0, 0) / static_cast<double>(pa.value.size());
        accumulate(n.a, Matrix::Constant(pa.value.rows(), pa.value.cols(),
                                         scale));
        break;
      }
      case Op::kSumRows: {
        const Node& pa = nodes_[static_cast<std::size_t>(n.a)];
        accumulate(n.a, g.replicate(1, pa.value.cols()));
        break;
      }
      case Op::kSumCols: {
        const Node& pa = nodes_[static_cast<std::size_t>(n.a)];
        accumulate(n.a, g.replicate(pa.value.rows(), 1));
        break;
      }
      case Op::kSoftmaxRows: {
        // dx = p .* (g - rowsum(g .* p))
        Eigen::VectorXd dots = g.cwiseProduct(n.value).rowwise().sum();
        Matrix shifted = g.colwise() - dots;
        accumulate(n.a, n.value.cwiseProduct(shifted));
        break;
      }
      case Op::kLogSumExpRows: {
        // dx(r, c) = g(r) * exp(a(r, c) - out(r))
        const Matrix& aval = nodes_[static_cast<std::size_t>(n.a)].value;
        Matrix soft = (aval.colwise() - n.value.col(0)).array().exp();
        accumulate(n.a, soft.array().colwise() * g.col(0).array());
        break;
      }
      case Op::kPickColumn: {
        if (nodes_[static_cast<std::size_t>(n.a)].needs_grad) {
          Matrix& ga = grad_buf(n.a);
          for (Eigen::Index r = 0; r < g.rows(); ++r)
            ga(r, n.index[static_cast<std::size_t>(r)]) += g(r, 0);
        }
        break;
      }
    }
  }
}

Matrix Tape::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

ObjectiveEval value_and_grad(const ObjectiveFn& objective,
                             const ParamVector& params) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const auto& e : params.entries) vars.push_back(tape.input(e.value));
  Var out = objective(tape, vars);
  ObjectiveEval result;
  result.value = tape.scalar_value(out);
  tape.backward(out);
  result.grad.entries.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i)
    result.grad.entries.push_back(
        {params.entries[i].name, tape.grad(vars[i])});
  return result;
}

}  // namespace klda::ad
