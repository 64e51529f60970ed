#pragma once

#include <span>
#include <vector>

#include "sitrec/score_table.hpp"

namespace sitrec {

// Everything here works in log space; probabilities are never materialized
// outside of expectation weights.

struct InferenceState {
  double log_partition = 0.0;
  Eigen::VectorXd verb_log_marginal;  // log p(v), size |V|; log-sum-exps to 0
  Eigen::VectorXd pair_log_norm;      // log sum_n exp phi_e, size pair_count
};

// log Z = LSE_v [ phi_v + sum_e LSE_n phi_e(v,e,n) ], plus the per-verb and
// per-(verb,role) normalizers needed by everything below.
InferenceState log_partition(const Lexicon& lex, const ScoreTable& scores);

// log p(S); -inf if an assigned noun is outside its candidate set.
double log_prob(const Lexicon& lex, const ScoreTable& scores, const InferenceState& state,
                const Situation& s);

// log p-hat of a partial situation: observed roles clamp, unobserved roles
// marginalize. Equals the LSE of log_prob over all completions.
double marginal_log_prob(const Lexicon& lex, const ScoreTable& scores,
                         const InferenceState& state, VerbId v, const RealizedFrame& partial);

// log(1 - prod_{S in A}(1 - p(S))): the at-least-one-annotation objective.
// Duplicates in A are ignored; returns -inf when every annotation has zero
// probability.
double multi_annotation_loglik(const Lexicon& lex, const ScoreTable& scores,
                               const InferenceState& state, std::span<const Situation> A);

// Expectation weights E[d/d phi] per score key, in ScoreTable layout.
// Free: verb key p(v), role-noun key p(v) p(n|v,e).
ScoreTable posterior_expectations_free(const Lexicon& lex, const ScoreTable& scores,
                                       const InferenceState& state);
// Verb clamped to v, observed roles clamped, others softmax within the role.
ScoreTable posterior_expectations_clamped(const Lexicon& lex, const ScoreTable& scores,
                                          const InferenceState& state, VerbId v,
                                          const RealizedFrame& partial);
// Mixture of fully clamped annotation indicators with weights
// w_S = p(S) prod_{S' != S}(1 - p(S')) / (1 - prod (1 - p)). The weight sum
// (needed to scale the free side of the gradient) lands in *total_weight.
ScoreTable posterior_expectations_noisy_or(const Lexicon& lex, const ScoreTable& scores,
                                           const InferenceState& state,
                                           std::span<const Situation> A,
                                           double* total_weight = nullptr);

struct ScoredSituation {
  Situation situation;
  double score;
};

// Top-k verbs by phi_v + sum_e max_n phi_e, each with its argmax frame.
// Scores are unnormalized joint log scores. Ties break by id order.
std::vector<ScoredSituation> decode_joint(const Lexicon& lex, const ScoreTable& scores, int k);

// Top-k verbs by marginal probability (sum over role values), each with its
// argmax frame. Scores are verb log-marginals.
std::vector<ScoredSituation> decode_max_marginal(const Lexicon& lex, const ScoreTable& scores,
                                                 const InferenceState& state, int k);

// Per-role argmax frame for a fixed verb (the gold-verb condition).
ScoredSituation decode_clamped(const Lexicon& lex, const ScoreTable& scores, VerbId v);

}  // namespace sitrec
