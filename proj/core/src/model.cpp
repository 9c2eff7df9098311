#include "klda/model.hpp"

#include <cmath>

#include "klda/rng.hpp"

namespace klda {

void EncoderArch::validate() const {
  require(d_x >= 1 && d_z >= 1, "EncoderArch: d_x and d_z must be positive");
  for (int h : hidden) require(h >= 1, "EncoderArch: hidden width must be positive");
}

namespace {

std::vector<std::pair<int, int>> encoder_layer_dims(const EncoderArch& a) {
  std::vector<std::pair<int, int>> dims;  // (out, in)
  int in = a.d_x;
  for (int h : a.hidden) {
    dims.emplace_back(h, in);
    in = h;
  }
  dims.emplace_back(2 * a.d_z, in);
  return dims;
}

}  // namespace

ModelParams ModelParams::zeros(const EncoderArch& arch, int n_classes) {
  arch.validate();
  require(n_classes >= 2, "ModelParams: at least two classes required");
  ModelParams m;
  m.arch = arch;
  m.n_classes = n_classes;
  int layer = 0;
  for (auto [out, in] : encoder_layer_dims(arch)) {
    m.params.entries.push_back(
        {"enc.w" + std::to_string(layer), Matrix::Zero(out, in)});
    m.params.entries.push_back(
        {"enc.b" + std::to_string(layer), Matrix::Zero(1, out)});
    ++layer;
  }
  m.params.entries.push_back({"cls.w", Matrix::Zero(n_classes, arch.d_z)});
  m.params.entries.push_back({"cls.b", Matrix::Zero(1, n_classes)});
  return m;
}

ModelParams ModelParams::init(const EncoderArch& arch, int n_classes,
                              std::uint64_t seed) {
  ModelParams m = zeros(arch, n_classes);
  Rng rng(derive_seed(seed, "model-init"));
  for (auto& e : m.params.entries) {
    if (e.name.find(".b") != std::string::npos) continue;  // biases stay zero
    const double limit =
        std::sqrt(6.0 / static_cast<double>(e.value.rows() + e.value.cols()));
    for (Eigen::Index k = 0; k < e.value.size(); ++k)
      e.value(k) = rng.uniform(-limit, limit);
  }
  return m;
}

void ModelParams::validate() const {
  arch.validate();
  require(n_classes >= 2, "ModelParams: at least two classes required");
  require(params.all_finite(), "ModelParams: non-finite parameter");
  const auto dims = encoder_layer_dims(arch);
  require(params.size() == 2 * dims.size() + 2,
          "ModelParams: wrong number of entries");
}

void BoundConfig::validate(int n_classes) const {
  require(M > 0.0, "BoundConfig: M must be positive");
  require(floor >= 0.0 && floor * n_classes < 1.0,
          "invalid bound configuration: floor * C must be below 1");
}

BoundConfig BoundConfig::from_loss_bound(double m) {
  require(m > 0.0, "BoundConfig: M must be positive");
  return BoundConfig{m, std::exp(-m)};
}

Matrix encode_batch(const ModelParams& model, const Matrix& x) {
  require(x.cols() == model.arch.d_x, "encode: input dimension mismatch");
  Matrix h = x;
  const int n_layers = model.encoder_layers();
  for (int l = 0; l < n_layers; ++l) {
    const Matrix& w = model.params[2 * static_cast<std::size_t>(l)].value;
    const Matrix& b = model.params[2 * static_cast<std::size_t>(l) + 1].value;
    h = (h * w.transpose()).rowwise() + b.row(0);
    if (l + 1 < n_layers) h = h.array().tanh();
  }
  if (!h.allFinite()) throw NumericError("numerical overflow in encode");
  return h;
}

DiagGaussian encode(const ModelParams& model, const Vector& x) {
  Matrix out = encode_batch(model, x.transpose());
  DiagGaussian g;
  g.mean = out.row(0).head(model.arch.d_z).transpose();
  g.log_var = out.row(0).tail(model.arch.d_z).transpose();
  return g;
}

Vector classify_logits(const ModelParams& model, const Vector& z) {
  require(z.size() == model.arch.d_z, "classify: representation dimension mismatch");
  const Matrix& w = model.params.at("cls.w");
  const Matrix& b = model.params.at("cls.b");
  Vector logits = w * z + b.row(0).transpose();
  if (!logits.allFinite()) throw NumericError("numerical overflow in classify");
  return logits;
}

Vector classify_probs(const ModelParams& model, const Vector& z) {
  Vector logits = classify_logits(model, z);
  const double top = logits.maxCoeff();
  Vector e = (logits.array() - top).exp();
  return e / e.sum();
}

Vector bounded_softmax(const Vector& probs, const BoundConfig& bc) {
  const int c = static_cast<int>(probs.size());
  bc.validate(c);
  return (probs * bc.rescale(c)).array() + bc.floor;
}

Vector predictive(const ModelParams& model, const Vector& x, int n_samples,
                  const BoundConfig& bc, std::uint64_t seed) {
  require(n_samples >= 1, "predictive: sample count must be positive");
  DiagGaussian g = encode(model, x);
  Rng rng(seed);
  Vector eps(g.dim());
  Vector acc = Vector::Zero(model.n_classes);
  for (int s = 0; s < n_samples; ++s) {
    for (Eigen::Index j = 0; j < eps.size(); ++j) eps(j) = rng.normal();
    acc += bounded_softmax(classify_probs(model, sample_reparam(g, eps)), bc);
  }
  return acc / static_cast<double>(n_samples);
}

double nll_loss(const Vector& probs, int label) {
  require(label >= 0 && label < probs.size(), "nll_loss: label out of range");
  const double p = probs(label);
  if (p <= 0.0)
    throw NumericError("infinite loss: zero probability assigned to label");
  return -std::log(p);
}

namespace graph {

using ad::Tape;
using ad::Var;

EncodedBatch encode_batch(Tape& tp, const ModelParams& model,
                          const std::vector<Var>& param_vars, Var x) {
  require(param_vars.size() == model.params.size(),
          "encode_batch: parameter binding mismatch");
  Var h = x;
  const int n_layers = model.encoder_layers();
  for (int l = 0; l < n_layers; ++l) {
    Var w = param_vars[2 * static_cast<std::size_t>(l)];
    Var b = param_vars[2 * static_cast<std::size_t>(l) + 1];
    h = tp.affine(h, w, b);
    if (l + 1 < n_layers) h = tp.tanh(h);
  }
  const int dz = model.arch.d_z;
  return {tp.slice_cols(h, 0, dz), tp.slice_cols(h, dz, 2 * dz)};
}

Var classifier_logits(Tape& tp, const ModelParams& model,
                      const std::vector<Var>& param_vars, Var z) {
  Var w = param_vars[param_vars.size() - 2];
  Var b = param_vars[param_vars.size() - 1];
  (void)model;
  return tp.affine(z, w, b);
}

Var bounded_probs(Tape& tp, Var logits, const BoundConfig& bc, int n_classes) {
  bc.validate(n_classes);
  return tp.add_scalar(
      tp.mul_scalar(tp.softmax_rows(logits), bc.rescale(n_classes)), bc.floor);
}

Var nll_rows_mean(Tape& tp, Var probs, const std::vector<int>& labels) {
  return tp.neg(tp.mean(tp.log(tp.pick_column(probs, labels))));
}

}  // namespace graph

}  // namespace klda
