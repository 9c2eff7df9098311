#include "klda/objective.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <sstream>

#include "klda/distributions.hpp"
#include "klda/rng.hpp"

namespace klda {

namespace {
constexpr double kPinnedLogVar = -20.0;
}

Alignment alignment_from_string(const std::string& s) {
  if (s == "none") return Alignment::kNone;
  if (s == "kl") return Alignment::kKl;
  if (s == "coral") return Alignment::kCoral;
  if (s == "mmd") return Alignment::kMmd;
  throw ContractViolation("unknown alignment mode: " + s);
}

std::string to_string(Alignment a) {
  switch (a) {
    case Alignment::kNone: return "none";
    case Alignment::kKl: return "kl";
    case Alignment::kCoral: return "coral";
    case Alignment::kMmd: return "mmd";
  }
  return "?";
}

void TrainConfig::validate() const {
  require(batch_size >= 1, "TrainConfig: batch_size must be positive");
  if (alignment != Alignment::kNone)
    require(batch_size >= 2,
            "TrainConfig: alignment penalties need batch_size >= 2");
  require(beta >= 0.0 && beta_aux >= 0.0,
          "TrainConfig: KL coefficients must be non-negative");
  require(beta_aux <= beta || (beta == 0.0 && beta_aux == 0.0),
          "TrainConfig: beta_aux must not exceed beta");
  require(penalty_coef >= 0.0, "TrainConfig: penalty_coef must be non-negative");
  require(lr > 0.0, "TrainConfig: learning rate must be positive");
  require(epochs >= 0, "TrainConfig: epochs must be non-negative");
  require(eval_samples >= 1, "TrainConfig: eval_samples must be positive");
  require(d_z >= 1, "TrainConfig: d_z must be positive");
  require(loss_bound_m > 0.0, "TrainConfig: loss bound must be positive");
  for (double g : mmd_bandwidths)
    require(g > 0.0, "TrainConfig: MMD bandwidths must be positive");
}

ModelParams make_model(const TrainConfig& cfg, int d_x, int n_classes,
                       std::uint64_t init_seed) {
  return ModelParams::init(EncoderArch{d_x, cfg.hidden, cfg.d_z}, n_classes,
                           init_seed);
}

namespace {

Matrix draw_noise(Rng& rng, int rows, int cols) {
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.normal();
  return m;
}

struct ObjectiveParts {
  ad::Var total;
  ad::Var z_src;
};

// Shared graph assembly for value-only and value-and-grad evaluation.
ObjectiveParts build_objective(ad::Tape& tp, const ModelParams& model,
                               const std::vector<ad::Var>& vars,
                               const LabeledBatch& batch_src,
                               const UnlabeledBatch& batch_tgt,
                               const TrainConfig& cfg,
                               std::uint64_t noise_seed) {
  require(batch_src.size() == batch_tgt.size(),
          "training_objective: source/target batch sizes differ");
  require(batch_src.size() >= 1, "training_objective: empty batch");
  const int b = batch_src.size();
  const int dz = model.arch.d_z;
  const BoundConfig bc = cfg.bound();
  bc.validate(model.n_classes);

  Rng noise(noise_seed);
  Matrix eps_src = draw_noise(noise, b, dz);

  auto pin_log_var = [&](ad::Var lv) {
    if (!cfg.deterministic_encoder) return lv;
    return tp.constant(Matrix::Constant(b, dz, kPinnedLogVar));
  };

  auto enc_src = graph::encode_batch(tp, model, vars, tp.constant(batch_src.inputs));
  graph::MixtureVars src_mix{enc_src.mu, pin_log_var(enc_src.log_var)};
  ad::Var z_src = graph::sample_reparam_rows(tp, src_mix, eps_src);
  ad::Var probs = graph::bounded_probs(
      tp, graph::classifier_logits(tp, model, vars, z_src), bc, model.n_classes);
  ad::Var loss = graph::nll_rows_mean(tp, probs, batch_src.labels);

  const bool wants_target =
      (cfg.alignment == Alignment::kKl && (cfg.beta > 0.0 || cfg.beta_aux > 0.0)) ||
      cfg.alignment == Alignment::kCoral || cfg.alignment == Alignment::kMmd;
  if (!wants_target) return {loss, z_src};

  Matrix eps_tgt = draw_noise(noise, b, dz);
  auto enc_tgt = graph::encode_batch(tp, model, vars, tp.constant(batch_tgt.inputs));
  graph::MixtureVars tgt_mix{enc_tgt.mu, pin_log_var(enc_tgt.log_var)};
  ad::Var z_tgt = graph::sample_reparam_rows(tp, tgt_mix, eps_tgt);

  switch (cfg.alignment) {
    case Alignment::kKl: {
      auto est = graph::minibatch_kl_terms(tp, src_mix, tgt_mix, z_src, z_tgt);
      ad::Var total = tp.add(loss, tp.mul_scalar(est.reverse_kl, cfg.beta));
      if (cfg.beta_aux > 0.0)
        total = tp.add(total, tp.mul_scalar(est.forward_kl, cfg.beta_aux));
      return {total, z_src};
    }
    case Alignment::kCoral:
      return {tp.add(loss, tp.mul_scalar(graph::coral_penalty(tp, z_src, z_tgt),
                                         cfg.penalty_coef)),
              z_src};
    case Alignment::kMmd: {
      KernelBank bank;
      if (!cfg.mmd_bandwidths.empty()) {
        bank.bandwidths = cfg.mmd_bandwidths;
      } else {
        Matrix joined(2 * b, dz);
        joined << tp.value(z_src), tp.value(z_tgt);
        bank = KernelBank::median_ladder(joined);
      }
      return {tp.add(loss, tp.mul_scalar(graph::mmd_penalty(tp, z_src, z_tgt, bank),
                                         cfg.penalty_coef)),
              z_src};
    }
    case Alignment::kNone:
      break;
  }
  return {loss, z_src};
}

ad::ObjectiveFn objective_fn(const ModelParams& model,
                             const LabeledBatch& batch_src,
                             const UnlabeledBatch& batch_tgt,
                             const TrainConfig& cfg, std::uint64_t noise_seed) {
  return [&model, &batch_src, &batch_tgt, &cfg, noise_seed](
             ad::Tape& tp, const std::vector<ad::Var>& vars) {
    return build_objective(tp, model, vars, batch_src, batch_tgt, cfg, noise_seed)
        .total;
  };
}

}  // namespace

double training_objective(const ModelParams& model, const LabeledBatch& batch_src,
                          const UnlabeledBatch& batch_tgt, const TrainConfig& cfg,
                          std::uint64_t noise_seed) {
  ad::Tape tp;
  std::vector<ad::Var> vars;
  for (const auto& e : model.params.entries) vars.push_back(tp.constant(e.value));
  return tp.scalar_value(
      build_objective(tp, model, vars, batch_src, batch_tgt, cfg, noise_seed)
          .total);
}

ad::ObjectiveEval training_objective_with_grad(const ModelParams& model,
                                               const LabeledBatch& batch_src,
                                               const UnlabeledBatch& batch_tgt,
                                               const TrainConfig& cfg,
                                               std::uint64_t noise_seed) {
  return ad::value_and_grad(objective_fn(model, batch_src, batch_tgt, cfg, noise_seed),
                            model.params);
}

void TrainReport::write_csv(std::ostream& out) const {
  out << "epoch,train_loss,rev_kl,fwd_kl,src_val_acc,tgt_test_acc\n";
  char buf[40];
  for (const auto& e : epochs) {
    out << e.epoch;
    for (double v : {e.train_loss, e.rev_kl, e.fwd_kl, e.src_val_acc,
                     e.tgt_test_acc}) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << "," << buf;
    }
    out << "\n";
  }
}

std::string TrainReport::to_json() const {
  std::ostringstream out;
  out.precision(17);
  out << "{\"diverged\":" << (diverged ? "true" : "false")
      << ",\"best_val_epoch\":" << best_val_epoch
      << ",\"wall_seconds\":" << wall_seconds << ",\"epochs\":[";
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    const auto& e = epochs[i];
    if (i) out << ",";
    out << "{\"epoch\":" << e.epoch << ",\"train_loss\":" << e.train_loss
        << ",\"rev_kl\":" << e.rev_kl << ",\"fwd_kl\":" << e.fwd_kl
        << ",\"src_val_acc\":" << e.src_val_acc
        << ",\"tgt_test_acc\":" << e.tgt_test_acc << "}";
  }
  out << "]}";
  return out.str();
}

namespace {

// Plain-path reverse/forward KL diagnostics on one seeded minibatch pair.
KlEstimates epoch_kl_diagnostics(const ModelParams& model, const Dataset& src,
                                 const UnlabeledDataset& tgt,
                                 const TrainConfig& cfg, std::uint64_t seed) {
  const int b = std::min({cfg.batch_size, src.size(), tgt.size()});
  if (b < 1) return {};
  auto stream = minibatch_stream(src, tgt, b, derive_seed(seed, "diag-batch"));
  if (stream.empty()) return {};
  const auto& pair = stream.front();

  Matrix ms = encode_batch(model, pair.source.inputs);
  Matrix mt = encode_batch(model, pair.target.inputs);
  Rng noise(derive_seed(seed, "diag-noise"));
  const int dz = model.arch.d_z;
  Matrix eps_s = draw_noise(noise, b, dz);
  Matrix eps_t = draw_noise(noise, b, dz);

  BatchMixture src_mix, tgt_mix;
  std::vector<Vector> z_src, z_tgt;
  for (int i = 0; i < b; ++i) {
    DiagGaussian gs{ms.row(i).head(dz).transpose(), ms.row(i).tail(dz).transpose()};
    DiagGaussian gt{mt.row(i).head(dz).transpose(), mt.row(i).tail(dz).transpose()};
    if (cfg.deterministic_encoder) {
      gs.log_var.setConstant(kPinnedLogVar);
      gt.log_var.setConstant(kPinnedLogVar);
    }
    z_src.push_back(sample_reparam(gs, eps_s.row(i).transpose()));
    z_tgt.push_back(sample_reparam(gt, eps_t.row(i).transpose()));
    src_mix.components.push_back(std::move(gs));
    tgt_mix.components.push_back(std::move(gt));
  }
  return minibatch_kl_terms(src_mix, tgt_mix, z_src, z_tgt);
}

}  // namespace

FitResult fit(const ModelParams& init, const Dataset& source_train,
              const UnlabeledDataset& target_train, const TrainConfig& cfg,
              const EvalHook& hook) {
  cfg.validate();
  source_train.validate();
  require(source_train.labeled(), "fit: source must be labeled");
  require(source_train.size() >= 1 && target_train.size() >= 1,
          "fit: datasets must be non-empty");
  init.validate();
  require(init.arch.d_x == source_train.dim(), "fit: model/input dim mismatch");

  const auto t0 = std::chrono::steady_clock::now();
  FitResult out;
  out.params = init;
  out.best_val_params = init;

  const std::uint64_t train_seed = derive_seed(cfg.seed, "train");
  AdamState opt = AdamState::init(init.params);
  AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;

  double best_val = -1.0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    auto stream =
        minibatch_stream(source_train, target_train, cfg.batch_size,
                         derive_seed(train_seed, "epoch", epoch));
    double loss_acc = 0.0;
    bool stepped = false;
    try {
      for (std::size_t b = 0; b < stream.size(); ++b) {
        const std::uint64_t noise_seed = derive_seed(
            train_seed, "noise",
            static_cast<std::uint64_t>(epoch) * 1000003ULL + b);
        auto eval = training_objective_with_grad(out.params, stream[b].source,
                                                 stream[b].target, cfg, noise_seed);
        auto step = adam_step(out.params.params, eval.grad, opt, adam_cfg);
        out.params.params = std::move(step.params);
        opt = std::move(step.state);
        loss_acc += eval.value;
        stepped = true;
      }
    } catch (const NumericError& err) {
      out.report.diverged = true;
      out.report.divergence_message = err.what();
      break;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = stepped ? loss_acc / static_cast<double>(stream.size()) : 0.0;
    auto diag = epoch_kl_diagnostics(out.params, source_train, target_train, cfg,
                                     derive_seed(train_seed, "diag", epoch));
    rec.rev_kl = diag.reverse_kl;
    rec.fwd_kl = diag.forward_kl;
    if (hook) {
      EpochEval ev = hook(out.params, epoch);
      rec.src_val_acc = ev.src_val_acc;
      rec.tgt_test_acc = ev.tgt_test_acc;
      if (ev.src_val_acc > best_val) {
        best_val = ev.src_val_acc;
        out.best_val_params = out.params;
        out.report.best_val_epoch = epoch;
      }
    } else {
      rec.src_val_acc = std::nan("");
      rec.tgt_test_acc = std::nan("");
    }
    out.report.epochs.push_back(rec);
  }

  if (!hook) out.best_val_params = out.params;
  out.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

EvalResult evaluate(const ModelParams& model, const Dataset& data,
                    const TrainConfig& cfg, std::uint64_t seed_salt) {
  data.validate();
  require(data.labeled(), "evaluate: dataset must be labeled");
  require(data.size() >= 1, "evaluate: empty dataset");
  require(data.n_classes == model.n_classes, "evaluate: class count mismatch");
  const BoundConfig bc = cfg.bound();
  bc.validate(model.n_classes);

  const std::uint64_t eval_seed = derive_seed(cfg.seed, "evaluate", seed_salt);
  const int dz = model.arch.d_z;
  const Matrix& cls_w = model.params.at("cls.w");
  const Matrix& cls_b = model.params.at("cls.b");
  const double rescale = bc.rescale(model.n_classes);

  int correct = 0;
  double nll_acc = 0.0;
  const int chunk = 512;
  for (int start = 0; start < data.size(); start += chunk) {
    const int n = std::min(chunk, data.size() - start);
    Matrix enc = encode_batch(model, data.inputs.middleRows(start, n));
    Matrix mu = enc.leftCols(dz);
    Matrix sigma =
        cfg.deterministic_encoder
            ? Matrix(Matrix::Constant(n, dz, std::exp(0.5 * kPinnedLogVar)))
            : Matrix((0.5 * enc.rightCols(dz).array()).exp());

    std::vector<Rng> rngs;
    rngs.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      rngs.emplace_back(derive_seed(eval_seed, "example",
                                    static_cast<std::uint64_t>(start + i)));

    Matrix acc = Matrix::Zero(n, model.n_classes);
    Matrix z(n, dz);
    for (int s = 0; s < cfg.eval_samples; ++s) {
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < dz; ++j)
          z(i, j) = mu(i, j) + sigma(i, j) * rngs[static_cast<std::size_t>(i)].normal();
      Matrix logits = (z * cls_w.transpose()).rowwise() + cls_b.row(0);
      for (int i = 0; i < n; ++i) {
        const double top = logits.row(i).maxCoeff();
        Eigen::RowVectorXd e = (logits.row(i).array() - top).exp();
        acc.row(i) += ((e / e.sum() * rescale).array() + bc.floor).matrix();
      }
    }
    acc /= static_cast<double>(cfg.eval_samples);
    for (int i = 0; i < n; ++i) {
      int arg;
      acc.row(i).maxCoeff(&arg);
      const int label = data.labels[static_cast<std::size_t>(start + i)];
      if (arg == label) ++correct;
      nll_acc += -std::log(acc(i, label));
    }
  }
  return {static_cast<double>(correct) / data.size(), nll_acc / data.size()};
}

}  // namespace klda
