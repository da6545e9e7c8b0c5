#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "iaca/autodiff.hpp"
#include "iaca/metrics.hpp"
#include "iaca/model.hpp"
#include "iaca/rng.hpp"
#include "iaca/synth.hpp"

namespace iaca {

enum class OptimizerKind : std::uint8_t { Sgd, Adam };

inline std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::Sgd ? "sgd" : "adam"; }

inline OptimizerKind parse_optimizer(std::string_view s) {
  if (s == "sgd") return OptimizerKind::Sgd;
  if (s == "adam") return OptimizerKind::Adam;
  throw DomainError("unknown optimizer '" + std::string(s) + "' (expected sgd or adam)");
}

struct TrainConfig {
  std::size_t epochs = 40;
  std::size_t batch_size = 8;
  double learning_rate = 3e-3;
  OptimizerKind optimizer = OptimizerKind::Adam;
  std::uint64_t seed = 1;
  std::size_t patience = 10;

  void validate() const {
    if (epochs < 1) throw DomainError("epochs must be >= 1");
    if (batch_size < 1) throw DomainError("batch_size must be >= 1");
    if (!(learning_rate >= 0.0)) throw DomainError("learning_rate must be >= 0");
  }
};

/// Per-tensor first/second moment estimates.
struct AdamState {
  std::vector<Matrix> m, v;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One bias-corrected Adam update over aligned parameter and gradient tensors.
inline void adaptive_moment_step(std::span<Matrix*> params, std::span<const Matrix> grads,
                                 AdamState& state, double lr) {
  if (params.size() != grads.size()) throw ContractError("adam: parameter/gradient count mismatch");
  if (state.m.empty()) {
    for (const Matrix* p : params) {
      state.m.emplace_back(p->rows(), p->cols());
      state.v.emplace_back(p->rows(), p->cols());
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix& p = *params[k];
    const Matrix& g = grads[k];
    detail::require_same(p, g, "adam");
    Matrix& m = state.m[k];
    Matrix& v = state.v[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + state.epsilon);
    }
  }
}

inline void sgd_step(std::span<Matrix*> params, std::span<const Matrix> grads, double lr) {
  for (std::size_t k = 0; k < params.size(); ++k)
    for (std::size_t i = 0; i < params[k]->size(); ++i) (*params[k])[i] -= lr * grads[k][i];
}

/// Loss value and per-parameter gradients (model order) for one batch.
struct BatchGradient {
  double loss = 0.0;
  std::vector<Matrix> grads;
};

inline BatchGradient batch_gradient(const FusionModel& model, std::span<const SyntheticSequence* const> batch,
                                    Affect affect) {
  Graph g;
  const BoundParams p(g, model);
  Var preds{};
  Matrix gold;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& s = *batch[b];
    const auto r = iaca_forward(g.leaf(s.xa), g.leaf(s.xv), p, model.config());
    preds = b == 0 ? r.prediction : concat_cols(preds, r.prediction);
    gold = b == 0 ? s.target(affect) : concat_cols(gold, s.target(affect));
  }
  const Var loss = ccc_loss(preds, gold);
  g.backward(loss);
  BatchGradient out;
  out.loss = loss.value()(0, 0);
  for (const auto& [name, _] : model.parameters()) out.grads.push_back(g.grad(p[name]));
  return out;
}

/// Predictions of every sequence concatenated into one 1 x (n L) row.
inline Matrix predict_all(const FusionModel& model, const Dataset& data) {
  Matrix out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto pred = forward_values(model, data[i].xa, data[i].xv).prediction;
    out = i == 0 ? pred : concat_cols(out, pred);
  }
  return out;
}

inline Matrix targets_all(const Dataset& data, Affect affect) {
  Matrix out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    out = i == 0 ? data[i].target(affect) : concat_cols(out, data[i].target(affect));
  }
  return out;
}

/// CCC over all clips of all sequences.
inline double evaluate(const FusionModel& model, const Dataset& data, Affect affect) {
  return ccc(predict_all(model, data), targets_all(data, affect));
}

struct EpochRecord {
  std::size_t epoch = 0;
  double train_ccc = 0.0;  // mean batch CCC during the epoch
  double val_ccc = 0.0;
  double loss = 0.0;       // mean batch loss during the epoch
};

struct FitResult {
  FusionModel model;  // best validation checkpoint
  std::vector<EpochRecord> history;
  double best_val_ccc = -2.0;
  std::size_t best_epoch = 0;
};

/// Mini-batch training on 1 - CCC with early stopping on validation CCC.
inline FitResult fit(const FusionModel& initial, const Dataset& train, const Dataset& val,
                     Affect affect, const TrainConfig& cfg) {
  cfg.validate();
  if (train.empty() || val.empty()) throw ContractError("fit: empty train or validation split");
  FitResult result{initial, {}, -2.0, 0};
  FusionModel model = initial;
  AdamState adam;
  std::vector<Matrix*> slots;
  for (auto& [_, m] : model.parameters()) slots.push_back(&m);

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng shuffle(derive_seed(cfg.seed, epoch));
    for (std::size_t j = order.size() - 1; j > 0; --j) std::swap(order[j], order[shuffle.below(j + 1)]);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      std::vector<const SyntheticSequence*> batch;
      for (std::size_t k = start; k < std::min(order.size(), start + cfg.batch_size); ++k) {
        batch.push_back(&train[order[k]]);
      }
      auto bg = batch_gradient(model, batch, affect);
      if (!std::isfinite(bg.loss)) {
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(batches));
      }
      if (cfg.optimizer == OptimizerKind::Adam) {
        adaptive_moment_step(slots, bg.grads, adam, cfg.learning_rate);
      } else {
        sgd_step(slots, bg.grads, cfg.learning_rate);
      }
      loss_sum += bg.loss;
      ++batches;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = loss_sum / static_cast<double>(batches);
    rec.train_ccc = 1.0 - rec.loss;
    rec.val_ccc = evaluate(model, val, affect);
    result.history.push_back(rec);
    if (rec.val_ccc > result.best_val_ccc) {
      result.best_val_ccc = rec.val_ccc;
      result.best_epoch = epoch;
      result.model = model;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  return result;
}

}  // namespace iaca
