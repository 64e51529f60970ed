#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sitrec/evaluation.hpp"
#include "sitrec/model.hpp"

namespace sitrec {

struct OptimizerConfig {
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::optional<double> clip_norm = 100.0;  // global norm across all tensors
  int batch_size = 64;
  int plateau_patience = 1;    // dev evaluations without improvement before decay
  double decay_factor = 0.1;
  std::int64_t max_updates = 20000;
  std::uint64_t seed = 1;

  void validate() const;
};

struct TrainState {
  ModelParams params;
  ModelGrads velocity;
  std::int64_t update_count = 0;
  double best_dev_metric = 0.0;
  double lr_current = 0.0;
};

struct TraceEntry {
  std::int64_t update_count;
  double lr;
  double train_loss;  // mean negative objective since the previous evaluation
  MetricsReport dev;
};

struct TrainResult {
  TrainState best;                // checkpoint with the best dev mean
  std::vector<TraceEntry> trace;  // one entry per dev evaluation
};

struct TrainOptions {
  OptimizerConfig opt;
  int eval_every = 250;        // dev evaluation cadence in updates
  int decode_top_k = 5;
  std::optional<bool> decode_max_marginal;  // default: compositional families only
  std::int64_t rare_threshold = 10;
  int workers = 1;
  // Optional early stop checked at each dev evaluation.
  std::function<bool(const MetricsReport&)> stop_condition;
};

// velocity <- momentum*velocity - lr*(grads + weight_decay*params);
// params <- params + velocity. Gradients are clipped to clip_norm (global
// norm) after the decay term. Throws NumericError on non-finite gradients,
// naming the tensor; the step is not applied.
void sgd_step(TrainState& state, const ModelGrads& grads, const OptimizerConfig& cfg);

// Minimizes the mean negative at-least-one-annotation log-likelihood.
// Dev is scored on a fixed cadence; plateau_patience misses multiply the
// learning rate by decay_factor. Returns the best-dev checkpoint.
TrainResult train_supervised(const Lexicon& lex, const std::vector<Example>& train,
                             const std::vector<Example>& dev, const FrequencyTable& train_freq,
                             ModelParams init, const TrainOptions& options);

// Minimizes the mean negative marginal log-likelihood of the weakly
// labeled set; runs to max_updates. The result seeds train_supervised.
TrainState pretrain_marginal(const Lexicon& lex, const std::vector<PartialExample>& web,
                             ModelParams init, const TrainOptions& options);

// Per-example loss-gradient upstream tables (exposed for gradient checks).
double supervised_example_loss(const Lexicon& lex, const ModelParams& params, const Example& ex,
                               ScoreTable* upstream_out = nullptr);
double marginal_example_loss(const Lexicon& lex, const ModelParams& params,
                             const PartialExample& pe, ScoreTable* upstream_out = nullptr);

struct GradCheckEntry {
  std::string family;
  std::string objective;  // "multi_annotation" or "marginal"
  std::string tensor;
  double max_rel_err;
};
struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double worst = 0.0;
  bool passed = false;
};

// Central finite differences (step 1e-5) on a small random instance per
// family and objective; passes iff every tensor's max relative error is
// below tolerance.
GradCheckReport grad_check(FamilySpec family, double tolerance = 1e-4, std::uint64_t seed = 42);
GradCheckReport grad_check_all(double tolerance = 1e-4, std::uint64_t seed = 42);

}  // namespace sitrec
