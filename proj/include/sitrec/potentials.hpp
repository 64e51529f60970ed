#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "sitrec/score_table.hpp"

namespace sitrec {

// Weight matrices are stored with one column per item (verbs, nouns,
// candidate slots) so a single GEMV scores the whole table.

// Per-decision linear regressions: a p-vector per verb and per retained
// (verb, role, noun) slot. Pruned slots score 0 and receive no gradient.
struct RegressionParams {
  Eigen::MatrixXd verb_weights;    // p x |V|
  Eigen::MatrixXd triple_weights;  // p x triple_count (may have 0 cols: verb-only)
  std::vector<std::uint8_t> triple_active;  // per slot; empty means all active

  bool has_triples() const { return triple_weights.cols() > 0; }
  bool slot_active(int slot) const { return triple_active.empty() || triple_active[slot]; }
};

// Tensor composition: noun embeddings d_n (m), per-(verb,role) matrices
// H (p x o) producing image-specific role vectors, and a global composition
// matrix A (p x m*o), the flattened third-order weight tensor. The kron
// layout pairs noun dimension x with role dimension y at column x*o + y.
struct TensorParams {
  int m = 0, o = 0;
  Eigen::MatrixXd noun_embeddings;            // m x |N|
  std::vector<Eigen::MatrixXd> role_matrices; // pair_count of p x o
  Eigen::MatrixXd composition;                // p x (m*o)
};

// Sum of t bilinear forms d_n^T H_k g per (verb, role); requires the noun
// embedding size to equal the role representation size.
struct InnerProductParams {
  int m = 0, t = 1;
  Eigen::MatrixXd noun_embeddings;            // m x |N|
  std::vector<Eigen::MatrixXd> role_matrices; // pair_count of (t*m) x p, t blocks stacked
};

// Role-independent noun regressions, added to every slot carrying the noun.
struct NounPotentialParams {
  Eigen::MatrixXd noun_weights;  // p x |N|
};

// --- scoring ---------------------------------------------------------------

ScoreTable score_regression(const RegressionParams& params, const Lexicon& lex, FeatureRef g);

// Reference implementation: materializes the full m x o x p weighted outer
// product and sums every element. Exists only to pin down score_tensor_fast.
double score_tensor_naive(const TensorParams& params, const Lexicon& lex, FeatureRef g,
                          VerbId v, int role_pos, NounId n);

// Equivalent factorized form: per (v,e) one role vector r = H^T g, then per
// candidate the contraction (A^T g) . (d_n kron r). Verb scores stay zero.
ScoreTable score_tensor_fast(const TensorParams& params, const Lexicon& lex, FeatureRef g);

ScoreTable score_inner_product(const InnerProductParams& params, const Lexicon& lex, FeatureRef g);

// Per-noun log scores; add_noun_potential broadcasts them over the support.
Eigen::VectorXd score_noun_potential(const NounPotentialParams& params, FeatureRef g);
void add_noun_potential(const NounPotentialParams& params, const Lexicon& lex, FeatureRef g,
                        ScoreTable& table);

// --- gradients ---------------------------------------------------------------
//
// Each backprop returns the exact gradient of
//   sum_key upstream[key] * score[key]
// with respect to the family's parameters. Upstream tables use the
// ScoreTable layout.

struct RegressionGrads {
  Eigen::MatrixXd verb_weights;
  Eigen::MatrixXd triple_weights;
};
struct TensorGrads {
  Eigen::MatrixXd noun_embeddings;
  std::vector<Eigen::MatrixXd> role_matrices;
  Eigen::MatrixXd composition;
};
struct InnerProductGrads {
  Eigen::MatrixXd noun_embeddings;
  std::vector<Eigen::MatrixXd> role_matrices;
};
struct NounPotentialGrads {
  Eigen::MatrixXd noun_weights;
};

RegressionGrads backprop_regression(const RegressionParams& params, const Lexicon& lex,
                                    FeatureRef g, const ScoreTable& upstream);
TensorGrads backprop_tensor(const TensorParams& params, const Lexicon& lex, FeatureRef g,
                            const ScoreTable& upstream);
InnerProductGrads backprop_inner_product(const InnerProductParams& params, const Lexicon& lex,
                                         FeatureRef g, const ScoreTable& upstream);
NounPotentialGrads backprop_noun_potential(const NounPotentialParams& params, const Lexicon& lex,
                                           FeatureRef g, const ScoreTable& upstream);

}  // namespace sitrec
