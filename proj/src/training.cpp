#include "sitrec/training.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

namespace sitrec {

void OptimizerConfig::validate() const {
  if (learning_rate <= 0) throw ConfigError("learning_rate must be positive");
  if (momentum < 0 || momentum >= 1) throw ConfigError("momentum must be in [0, 1)");
  if (weight_decay < 0) throw ConfigError("weight_decay must be non-negative");
  if (decay_factor <= 0 || decay_factor >= 1) throw ConfigError("decay_factor must be in (0, 1)");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (plateau_patience < 1) throw ConfigError("plateau_patience must be at least 1");
  if (max_updates < 0) throw ConfigError("max_updates must be non-negative");
  if (clip_norm && *clip_norm <= 0) throw ConfigError("clip_norm must be positive if set");
}

namespace {

// The regression families never decay pruned slots (their params stay zero),
// so plain params scaling is safe: 0 + wd*0 = 0.
void add_scaled(ModelGrads& dst, const ModelParams& src, double scale) {
  dst.regression.verb_weights += scale * src.regression.verb_weights;
  if (dst.regression.triple_weights.cols() > 0)
    dst.regression.triple_weights += scale * src.regression.triple_weights;
  if (dst.tensor) {
    dst.tensor->noun_embeddings += scale * src.tensor->noun_embeddings;
    for (std::size_t i = 0; i < dst.tensor->role_matrices.size(); ++i)
      dst.tensor->role_matrices[i] += scale * src.tensor->role_matrices[i];
    dst.tensor->composition += scale * src.tensor->composition;
  }
  if (dst.inner) {
    dst.inner->noun_embeddings += scale * src.inner->noun_embeddings;
    for (std::size_t i = 0; i < dst.inner->role_matrices.size(); ++i)
      dst.inner->role_matrices[i] += scale * src.inner->role_matrices[i];
  }
  if (dst.noun) dst.noun->noun_weights += scale * src.noun->noun_weights;
}

void accumulate(ModelGrads& dst, const ModelGrads& src, double scale) {
  dst.regression.verb_weights += scale * src.regression.verb_weights;
  if (dst.regression.triple_weights.cols() > 0)
    dst.regression.triple_weights += scale * src.regression.triple_weights;
  if (dst.tensor) {
    dst.tensor->noun_embeddings += scale * src.tensor->noun_embeddings;
    for (std::size_t i = 0; i < dst.tensor->role_matrices.size(); ++i)
      dst.tensor->role_matrices[i] += scale * src.tensor->role_matrices[i];
    dst.tensor->composition += scale * src.tensor->composition;
  }
  if (dst.inner) {
    dst.inner->noun_embeddings += scale * src.inner->noun_embeddings;
    for (std::size_t i = 0; i < dst.inner->role_matrices.size(); ++i)
      dst.inner->role_matrices[i] += scale * src.inner->role_matrices[i];
  }
  if (dst.noun) dst.noun->noun_weights += scale * src.noun->noun_weights;
}

double grad_squared_norm(ModelGrads& grads) {
  double total = 0.0;
  visit_grads(grads, [&total](const std::string&, Eigen::Ref<Eigen::MatrixXd> mat) {
    total += mat.squaredNorm();
  });
  return total;
}

}  // namespace

void sgd_step(TrainState& state, const ModelGrads& grads, const OptimizerConfig& cfg) {
  ModelGrads effective = grads;

  std::string bad_tensor;
  visit_grads(effective, [&bad_tensor](const std::string& name, Eigen::Ref<Eigen::MatrixXd> mat) {
    if (bad_tensor.empty() && !mat.allFinite()) bad_tensor = name;
  });
  if (!bad_tensor.empty())
    throw NumericError("non-finite gradient in tensor '" + bad_tensor + "' at update " +
                       std::to_string(state.update_count));

  if (cfg.weight_decay > 0) add_scaled(effective, state.params, cfg.weight_decay);
  if (cfg.clip_norm) {
    const double norm = std::sqrt(grad_squared_norm(effective));
    if (norm > *cfg.clip_norm) {
      const double scale = *cfg.clip_norm / norm;
      visit_grads(effective,
                  [scale](const std::string&, Eigen::Ref<Eigen::MatrixXd> mat) { mat *= scale; });
    }
  }

  const double lr = state.lr_current > 0 ? state.lr_current : cfg.learning_rate;
  // velocity <- momentum * velocity - lr * g'; params <- params + velocity
  auto step_pair = [&](Eigen::MatrixXd& vel, const Eigen::MatrixXd& g, Eigen::MatrixXd& par) {
    vel = cfg.momentum * vel - lr * g;
    par += vel;
  };
  step_pair(state.velocity.regression.verb_weights, effective.regression.verb_weights,
            state.params.regression.verb_weights);
  if (state.params.regression.triple_weights.cols() > 0)
    step_pair(state.velocity.regression.triple_weights, effective.regression.triple_weights,
              state.params.regression.triple_weights);
  if (state.params.tensor) {
    step_pair(state.velocity.tensor->noun_embeddings, effective.tensor->noun_embeddings,
              state.params.tensor->noun_embeddings);
    for (std::size_t i = 0; i < state.params.tensor->role_matrices.size(); ++i)
      step_pair(state.velocity.tensor->role_matrices[i], effective.tensor->role_matrices[i],
                state.params.tensor->role_matrices[i]);
    step_pair(state.velocity.tensor->composition, effective.tensor->composition,
              state.params.tensor->composition);
  }
  if (state.params.inner) {
    step_pair(state.velocity.inner->noun_embeddings, effective.inner->noun_embeddings,
              state.params.inner->noun_embeddings);
    for (std::size_t i = 0; i < state.params.inner->role_matrices.size(); ++i)
      step_pair(state.velocity.inner->role_matrices[i], effective.inner->role_matrices[i],
                state.params.inner->role_matrices[i]);
  }
  if (state.params.noun)
    step_pair(state.velocity.noun->noun_weights, effective.noun->noun_weights,
              state.params.noun->noun_weights);
  ++state.update_count;
}

double supervised_example_loss(const Lexicon& lex, const ModelParams& params, const Example& ex,
                               ScoreTable* upstream_out) {
  Eigen::Map<const Eigen::VectorXd> g(ex.features.data(),
                                      static_cast<Eigen::Index>(ex.features.size()));
  ScoreTable scores = score_model(params, lex, g);
  InferenceState state = log_partition(lex, scores);
  double loglik = multi_annotation_loglik(lex, scores, state, ex.annotations);
  if (upstream_out) {
    double total_weight = 0.0;
    ScoreTable clamped =
        posterior_expectations_noisy_or(lex, scores, state, ex.annotations, &total_weight);
    ScoreTable free = posterior_expectations_free(lex, scores, state);
    // d(-loglik)/d(phi) = W * E_free - E_clamped
    upstream_out->verb = total_weight * free.verb - clamped.verb;
    upstream_out->role_noun = total_weight * free.role_noun - clamped.role_noun;
  }
  return -loglik;
}

double marginal_example_loss(const Lexicon& lex, const ModelParams& params,
                             const PartialExample& pe, ScoreTable* upstream_out) {
  Eigen::Map<const Eigen::VectorXd> g(pe.features.data(),
                                      static_cast<Eigen::Index>(pe.features.size()));
  ScoreTable scores = score_model(params, lex, g);
  InferenceState state = log_partition(lex, scores);
  double loglik = marginal_log_prob(lex, scores, state, pe.verb, pe.partial);
  if (upstream_out) {
    ScoreTable clamped = posterior_expectations_clamped(lex, scores, state, pe.verb, pe.partial);
    ScoreTable free = posterior_expectations_free(lex, scores, state);
    upstream_out->verb = free.verb - clamped.verb;
    upstream_out->role_noun = free.role_noun - clamped.role_noun;
  }
  return -loglik;
}

namespace {

// Mean loss gradient over a batch; examples with zero-probability labels are
// skipped (counted, not fatal). ComputeFn(index, upstream*) -> loss.
template <class ComputeFn>
double batch_gradient(const ModelParams& params, const Lexicon& lex,
                      std::span<const std::size_t> batch, int workers, ModelGrads& grads_out,
                      std::int64_t& skipped, const ComputeFn& compute) {
  const int n_threads = std::max(1, std::min<int>(workers, static_cast<int>(batch.size())));
  std::vector<ModelGrads> partial(n_threads);
  std::vector<double> losses(n_threads, 0.0);
  std::vector<std::int64_t> skips(n_threads, 0);
  for (auto& p : partial) p = zero_grads(params);

  auto run_range = [&](int w, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      ScoreTable upstream;
      double loss = compute(batch[i], &upstream);
      if (!std::isfinite(loss)) {
        ++skips[w];
        continue;
      }
      losses[w] += loss;
      // upstream is d(loss)/d(score); fold into parameter grads per example.
      Eigen::Map<const Eigen::VectorXd> g = compute.features(batch[i]);
      ModelGrads example_grads = backprop_model(params, lex, g, upstream);
      accumulate(partial[w], example_grads, 1.0);
    }
  };
  if (n_threads == 1) {
    run_range(0, 0, batch.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (batch.size() + n_threads - 1) / n_threads;
    for (int w = 0; w < n_threads; ++w) {
      std::size_t begin = w * chunk;
      std::size_t end = std::min(batch.size(), begin + chunk);
      if (begin < end) pool.emplace_back(run_range, w, begin, end);
    }
    for (auto& th : pool) th.join();
  }

  grads_out = zero_grads(params);
  double loss_total = 0.0;
  std::int64_t used = static_cast<std::int64_t>(batch.size());
  for (int w = 0; w < n_threads; ++w) {
    loss_total += losses[w];
    skipped += skips[w];
    used -= skips[w];
  }
  if (used > 0) {
    const double scale = 1.0 / static_cast<double>(used);
    for (int w = 0; w < n_threads; ++w) accumulate(grads_out, partial[w], scale);
    loss_total /= static_cast<double>(used);
  }
  return loss_total;
}

}  // namespace

TrainResult train_supervised(const Lexicon& lex, const std::vector<Example>& train,
                             const std::vector<Example>& dev, const FrequencyTable& train_freq,
                             ModelParams init, const TrainOptions& options) {
  options.opt.validate();
  if (train.empty()) throw DataError("train_supervised: empty training set");

  TrainState state;
  state.params = std::move(init);
  state.velocity = zero_grads(state.params);
  state.lr_current = options.opt.learning_rate;
  state.best_dev_metric = -1.0;

  const bool use_mm = options.decode_max_marginal.value_or(state.params.family.compositional());
  auto evaluate_dev = [&](const ModelParams& params) {
    Predictor predictor;
    predictor.score = [&params, &lex](FeatureRef g) { return score_model(params, lex, g); };
    predictor.use_max_marginal = use_mm;
    predictor.top_k = options.decode_top_k;
    auto preds = predict(lex, predictor, dev, options.workers);
    return evaluate(lex, preds, dev, train_freq, options.rare_threshold);
  };

  TrainResult result;
  result.best.params = state.params;
  result.best.lr_current = state.lr_current;

  std::mt19937_64 rng(options.opt.seed);
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t cursor = 0;

  struct SupervisedCompute {
    const Lexicon& lex;
    const ModelParams& params;
    const std::vector<Example>& data;
    double operator()(std::size_t i, ScoreTable* upstream) const {
      return supervised_example_loss(lex, params, data[i], upstream);
    }
    Eigen::Map<const Eigen::VectorXd> features(std::size_t i) const {
      return {data[i].features.data(), static_cast<Eigen::Index>(data[i].features.size())};
    }
  };

  std::int64_t skipped = 0;
  int misses = 0;
  double loss_accum = 0.0;
  std::int64_t loss_batches = 0;
  while (state.update_count < options.opt.max_updates) {
    std::vector<std::size_t> batch;
    batch.reserve(options.opt.batch_size);
    for (int b = 0; b < options.opt.batch_size; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      batch.push_back(order[cursor++]);
    }
    ModelGrads grads;
    SupervisedCompute compute{lex, state.params, train};
    loss_accum +=
        batch_gradient(state.params, lex, batch, options.workers, grads, skipped, compute);
    ++loss_batches;
    sgd_step(state, grads, options.opt);

    if (state.update_count % options.eval_every == 0 ||
        state.update_count >= options.opt.max_updates) {
      MetricsReport dev_report = evaluate_dev(state.params);
      TraceEntry entry;
      entry.update_count = state.update_count;
      entry.lr = state.lr_current;
      entry.train_loss = loss_batches ? loss_accum / static_cast<double>(loss_batches) : 0.0;
      entry.dev = dev_report;
      result.trace.push_back(entry);
      loss_accum = 0.0;
      loss_batches = 0;

      if (dev_report.full.mean > state.best_dev_metric) {
        state.best_dev_metric = dev_report.full.mean;
        misses = 0;
        result.best.params = state.params;
        result.best.update_count = state.update_count;
        result.best.best_dev_metric = state.best_dev_metric;
        result.best.lr_current = state.lr_current;
      } else {
        ++misses;
        if (misses >= options.opt.plateau_patience) {
          state.lr_current *= options.opt.decay_factor;
          misses = 0;
        }
      }
      if (options.stop_condition && options.stop_condition(dev_report)) break;
    }
  }
  result.best.velocity = zero_grads(result.best.params);
  return result;
}

TrainState pretrain_marginal(const Lexicon& lex, const std::vector<PartialExample>& web,
                             ModelParams init, const TrainOptions& options) {
  options.opt.validate();
  TrainState state;
  state.params = std::move(init);
  state.velocity = zero_grads(state.params);
  state.lr_current = options.opt.learning_rate;
  if (web.empty()) return state;

  std::mt19937_64 rng(options.opt.seed);
  std::vector<std::size_t> order(web.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t cursor = 0;

  struct MarginalCompute {
    const Lexicon& lex;
    const ModelParams& params;
    const std::vector<PartialExample>& data;
    double operator()(std::size_t i, ScoreTable* upstream) const {
      return marginal_example_loss(lex, params, data[i], upstream);
    }
    Eigen::Map<const Eigen::VectorXd> features(std::size_t i) const {
      return {data[i].features.data(), static_cast<Eigen::Index>(data[i].features.size())};
    }
  };

  std::int64_t skipped = 0;
  while (state.update_count < options.opt.max_updates) {
    std::vector<std::size_t> batch;
    batch.reserve(options.opt.batch_size);
    for (int b = 0; b < options.opt.batch_size; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      batch.push_back(order[cursor++]);
    }
    ModelGrads grads;
    MarginalCompute compute{lex, state.params, web};
    batch_gradient(state.params, lex, batch, options.workers, grads, skipped, compute);
    sgd_step(state, grads, options.opt);
  }
  return state;
}

namespace {

// Small fixed lexicon for finite-difference checks: 3 verbs, 2 roles each.
Lexicon grad_check_lexicon() {
  std::vector<std::string> nouns = {"na", "nb", "nc", "nd"};
  std::vector<std::vector<std::string>> glosses = {{"na"}, {"nb"}, {"nc"}, {"nd"}};
  std::vector<std::string> roles = {"r0", "r1"};
  std::vector<std::pair<std::string, std::vector<std::string>>> frames = {
      {"f0", {"r0", "r1"}}};
  std::vector<std::tuple<std::string, std::string, std::string>> verbs = {
      {"va", "f0", "{r0} va {r1}"}, {"vb", "f0", "{r0} vb {r1}"}, {"vc", "f0", "{r0} vc {r1}"}};
  std::map<std::pair<std::string, std::string>, std::vector<std::string>> cands;
  cands[{"va", "r0"}] = {"na", "nb"};
  cands[{"va", "r1"}] = {"nc", "nd"};
  cands[{"vb", "r0"}] = {"na", "nc"};
  cands[{"vb", "r1"}] = {"nb", "nd"};
  cands[{"vc", "r0"}] = {"nb", "nd"};
  cands[{"vc", "r1"}] = {"na", "nc"};
  return Lexicon::build(nouns, glosses, roles, frames, verbs, cands);
}

double relative_error(double a, double b) {
  const double diff = std::abs(a - b);
  const double scale = std::abs(a) + std::abs(b);
  return scale < 1e-8 ? diff : diff / scale;
}

}  // namespace

GradCheckReport grad_check(FamilySpec family, double tolerance, std::uint64_t seed) {
  const Lexicon lex = grad_check_lexicon();
  ModelDims dims;
  dims.p = 8;
  dims.m = 3;
  dims.o = 4;
  dims.t = 2;
  ModelParams params = init_model(lex, family, dims, seed);

  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::uniform_real_distribution<double> unif(-0.7, 0.7);
  // Randomize everything (zero-init regressions included) to exercise the
  // product rule away from zero.
  visit_params(params, [&](const std::string&, Eigen::Ref<Eigen::MatrixXd> mat) {
    for (Eigen::Index c = 0; c < mat.cols(); ++c)
      for (Eigen::Index r = 0; r < mat.rows(); ++r) mat(r, c) = unif(rng);
  });

  Example ex;
  ex.image_id = "gc";
  ex.features.resize(dims.p);
  for (auto& f : ex.features) f = unif(rng);
  // Two annotations that disagree on the verb.
  {
    Situation s1{*lex.find_verb("va"), {}};
    s1.frame.set(*lex.find_role("r0"), *lex.find_noun("na"));
    s1.frame.set(*lex.find_role("r1"), *lex.find_noun("nd"));
    Situation s2{*lex.find_verb("vb"), {}};
    s2.frame.set(*lex.find_role("r0"), *lex.find_noun("nc"));
    s2.frame.set(*lex.find_role("r1"), *lex.find_noun("nb"));
    ex.annotations = {s1, s2};
  }
  PartialExample pe;
  pe.image_id = "gc";
  pe.features = ex.features;
  pe.verb = *lex.find_verb("vc");
  pe.partial.set(*lex.find_role("r1"), *lex.find_noun("nc"));

  GradCheckReport report;
  report.passed = true;

  auto run_objective = [&](const std::string& objective_name, auto&& loss_fn) {
    ScoreTable upstream;
    loss_fn(params, &upstream);
    Eigen::Map<const Eigen::VectorXd> g(ex.features.data(), dims.p);
    ModelGrads analytic = backprop_model(params, lex, g, upstream);

    // Walk params and analytic grads in lock-step; per-tensor max error.
    struct TensorRef {
      std::string name;
      double* data;
      Eigen::Index size;
    };
    std::vector<TensorRef> prefs, grefs;
    visit_params(params, [&](const std::string& name, Eigen::Ref<Eigen::MatrixXd> mat) {
      prefs.push_back({name, mat.data(), mat.size()});
    });
    visit_grads(analytic, [&](const std::string& name, Eigen::Ref<Eigen::MatrixXd> mat) {
      grefs.push_back({name, mat.data(), mat.size()});
    });
    if (prefs.size() != grefs.size())
      throw NumericError("grad_check: parameter/gradient tensor count mismatch");

    const double h = 1e-5;
    std::map<std::string, double> per_tensor;
    for (std::size_t t = 0; t < prefs.size(); ++t) {
      double worst = 0.0;
      for (Eigen::Index i = 0; i < prefs[t].size; ++i) {
        const double saved = prefs[t].data[i];
        prefs[t].data[i] = saved + h;
        const double up = loss_fn(params, nullptr);
        prefs[t].data[i] = saved - h;
        const double down = loss_fn(params, nullptr);
        prefs[t].data[i] = saved;
        const double fd = (up - down) / (2 * h);
        worst = std::max(worst, relative_error(grefs[t].data[i], fd));
      }
      auto [it, inserted] = per_tensor.emplace(prefs[t].name, worst);
      if (!inserted) it->second = std::max(it->second, worst);
    }
    for (const auto& [name, err] : per_tensor) {
      report.entries.push_back({family.to_string(), objective_name, name, err});
      report.worst = std::max(report.worst, err);
      if (err >= tolerance) report.passed = false;
    }
  };

  run_objective("multi_annotation", [&](const ModelParams& p, ScoreTable* upstream) {
    return supervised_example_loss(lex, p, ex, upstream);
  });
  run_objective("marginal", [&](const ModelParams& p, ScoreTable* upstream) {
    return marginal_example_loss(lex, p, pe, upstream);
  });
  return report;
}

GradCheckReport grad_check_all(double tolerance, std::uint64_t seed) {
  GradCheckReport report;
  report.passed = true;
  for (const char* spec : {"reg", "tensor", "inner", "noun", "tensor+reg"}) {
    GradCheckReport sub = grad_check(FamilySpec::parse(spec), tolerance, seed);
    report.entries.insert(report.entries.end(), sub.entries.begin(), sub.entries.end());
    report.worst = std::max(report.worst, sub.worst);
    report.passed = report.passed && sub.passed;
  }
  return report;
}

}  // namespace sitrec
