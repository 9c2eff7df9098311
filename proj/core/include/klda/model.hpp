#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "klda/autodiff.hpp"
#include "klda/distributions.hpp"
#include "klda/param.hpp"

namespace klda {

// Encoder layer sizes: d_x -> hidden... -> 2 * d_z. The output row holds
// the mean in its first d_z entries and the log-variance in the rest.
struct EncoderArch {
  int d_x = 0;
  std::vector<int> hidden;
  int d_z = 0;

  void validate() const;
  bool operator==(const EncoderArch&) const = default;
};

// Trainable state: tanh MLP encoder emitting [mu, log_var] plus a single
// linear classifier layer d_z -> C.
struct ModelParams {
  EncoderArch arch;
  int n_classes = 0;
  ParamVector params;

  // Glorot-uniform weights, zero biases.
  static ModelParams init(const EncoderArch& arch, int n_classes,
                          std::uint64_t seed);
  // All-zero weights and biases (useful as a degenerate fixture).
  static ModelParams zeros(const EncoderArch& arch, int n_classes);

  int encoder_layers() const { return static_cast<int>(arch.hidden.size()) + 1; }
  void validate() const;
};

// Loss-bound augmentation: probabilities are rescaled onto [floor, 1] so
// that no per-example loss can exceed M.
struct BoundConfig {
  double M = 3.0;
  double floor = 0.05;

  double rescale(int n_classes) const {
    return 1.0 - floor * static_cast<double>(n_classes);
  }
  void validate(int n_classes) const;

  static BoundConfig from_loss_bound(double m);  // floor = exp(-M)
};

// Encoder forward for one input.
DiagGaussian encode(const ModelParams& model, const Vector& x);
// Encoder forward for a batch: [N x 2 d_z] with mu in the left half.
Matrix encode_batch(const ModelParams& model, const Matrix& x);

Vector classify_logits(const ModelParams& model, const Vector& z);
// Softmax of the classifier logits (the raw head, no bound).
Vector classify_probs(const ModelParams& model, const Vector& z);

// p * K + floor elementwise; preserves the argmax and sums to one.
Vector bounded_softmax(const Vector& probs, const BoundConfig& bc);

// Monte Carlo predictive distribution: average of the bounded classifier
// output over n_samples reparameterized draws from the encoder.
Vector predictive(const ModelParams& model, const Vector& x, int n_samples,
                  const BoundConfig& bc, std::uint64_t seed);

double nll_loss(const Vector& probs, int label);

namespace graph {

struct EncodedBatch {
  ad::Var mu;       // [N x d_z]
  ad::Var log_var;  // [N x d_z]
};

// Same forward as encode_batch, on the tape. `param_vars` binds the
// entries of model.params in order.
EncodedBatch encode_batch(ad::Tape& tp, const ModelParams& model,
                          const std::vector<ad::Var>& param_vars, ad::Var x);

ad::Var classifier_logits(ad::Tape& tp, const ModelParams& model,
                          const std::vector<ad::Var>& param_vars, ad::Var z);

// softmax(logits) * K + floor, rowwise.
ad::Var bounded_probs(ad::Tape& tp, ad::Var logits, const BoundConfig& bc,
                      int n_classes);

// Mean over the batch of -log p_bounded(label).
ad::Var nll_rows_mean(ad::Tape& tp, ad::Var probs,
                      const std::vector<int>& labels);

}  // namespace graph

}  // namespace klda
