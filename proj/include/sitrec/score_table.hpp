#pragma once

#include <Eigen/Core>
#include <span>

#include "sitrec/lexicon.hpp"

namespace sitrec {

using FeatureRef = Eigen::Ref<const Eigen::VectorXd>;

// Log-potentials over the CRF support: one score per verb and one per
// (verb, role, candidate-noun) slot. Layout is the lexicon's flat support
// indexing; the same shape doubles as the per-key weight table used for
// posterior expectations and score backprop.
struct ScoreTable {
  Eigen::VectorXd verb;       // size |V|
  Eigen::VectorXd role_noun;  // size lexicon.triple_count()

  static ScoreTable zeros(const Lexicon& lex) {
    ScoreTable t;
    t.verb = Eigen::VectorXd::Zero(lex.verb_count());
    t.role_noun = Eigen::VectorXd::Zero(lex.triple_count());
    return t;
  }

  double& at(const Lexicon& lex, VerbId v, int role_pos, int cand_idx) {
    return role_noun[lex.triple_index(v, role_pos, cand_idx)];
  }
  double at(const Lexicon& lex, VerbId v, int role_pos, int cand_idx) const {
    return role_noun[lex.triple_index(v, role_pos, cand_idx)];
  }

  bool finite() const { return verb.allFinite() && role_noun.allFinite(); }
};

// Element-wise sum of log scores (product of potentials).
ScoreTable compose_scores(std::span<const ScoreTable> parts);

}  // namespace sitrec
