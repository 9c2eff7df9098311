#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "klda/adam.hpp"
#include "klda/baselines.hpp"
#include "klda/data.hpp"
#include "klda/model.hpp"

namespace klda {

enum class Alignment { kNone, kKl, kCoral, kMmd };

Alignment alignment_from_string(const std::string& s);
std::string to_string(Alignment a);

// Everything one training run needs. Defaults follow the reference
// configuration: B=256, beta=0.3, beta_aux=0, single-layer classifier,
// M=3 with probability floor 0.05.
struct TrainConfig {
  Alignment alignment = Alignment::kKl;
  double beta = 0.3;           // reverse-KL coefficient
  double beta_aux = 0.0;       // forward-KL coefficient
  double penalty_coef = 0.01;  // coral/mmd coefficient
  double loss_bound_m = 3.0;
  double prob_floor = 0.05;
  int batch_size = 256;
  int eval_samples = 64;
  double lr = 1e-3;
  int epochs = 100;
  std::uint64_t seed = 0;
  int d_z = 16;
  std::vector<int> hidden = {128, 128};
  // ERM-style deterministic representation: the encoder's log-variance
  // head is pinned to -20 in training and evaluation.
  bool deterministic_encoder = false;
  // Fixed MMD bandwidths; empty selects the per-batch median ladder.
  std::vector<double> mmd_bandwidths;

  BoundConfig bound() const { return BoundConfig{loss_bound_m, prob_floor}; }
  void validate() const;
};

ModelParams make_model(const TrainConfig& cfg, int d_x, int n_classes,
                       std::uint64_t init_seed);

// Minibatch training objective: mean bounded NLL on the source batch (one
// reparameterized z per input) plus the configured alignment penalty
// estimated from the same minibatches.
double training_objective(const ModelParams& model, const LabeledBatch& batch_src,
                          const UnlabeledBatch& batch_tgt, const TrainConfig& cfg,
                          std::uint64_t noise_seed);

ad::ObjectiveEval training_objective_with_grad(const ModelParams& model,
                                               const LabeledBatch& batch_src,
                                               const UnlabeledBatch& batch_tgt,
                                               const TrainConfig& cfg,
                                               std::uint64_t noise_seed);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double rev_kl = 0.0;
  double fwd_kl = 0.0;
  double src_val_acc = 0.0;
  double tgt_test_acc = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  double wall_seconds = 0.0;
  bool diverged = false;
  std::string divergence_message;
  int best_val_epoch = -1;  // 1-based; -1 when no evaluation hook ran

  // Stable column order: epoch,train_loss,rev_kl,fwd_kl,src_val_acc,tgt_test_acc
  void write_csv(std::ostream& out) const;
  std::string to_json() const;
};

// Per-epoch metrics supplied by the caller; fit itself never touches
// labeled target data.
struct EpochEval {
  double src_val_acc = 0.0;
  double tgt_test_acc = 0.0;
};
using EvalHook = std::function<EpochEval(const ModelParams&, int epoch)>;

struct FitResult {
  ModelParams params;           // final epoch
  ModelParams best_val_params;  // best source-validation accuracy
  TrainReport report;
};

// Shuffled minibatch Adam on the training objective; deterministic given
// cfg.seed. On numeric divergence training stops and the last finite
// parameters are returned with report.diverged set.
FitResult fit(const ModelParams& init, const Dataset& source_train,
              const UnlabeledDataset& target_train, const TrainConfig& cfg,
              const EvalHook& hook = {});

struct EvalResult {
  double accuracy = 0.0;
  double mean_nll = 0.0;
};

// Accuracy of the argmax of the Monte Carlo predictive distribution plus
// the mean bounded NLL; deterministic given cfg.seed and the salt.
EvalResult evaluate(const ModelParams& model, const Dataset& data,
                    const TrainConfig& cfg, std::uint64_t seed_salt = 0);

}  // namespace klda
