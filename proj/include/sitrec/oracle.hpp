#pragma once

#include <cstdint>
#include <vector>

#include "sitrec/score_table.hpp"
#include "sitrec/synth.hpp"

namespace sitrec {

// Brute-force reference computations over an explicit enumeration of the
// situation space. Deliberately independent of the inference module: plain
// exhaustive sums in long double with a single global max shift. Desk-scale
// only; callers must keep the space small.

// Every valid situation (verb, full frame over candidates), verb-major, in
// candidate order. Throws NumericError when the space exceeds max_total.
std::vector<Situation> enumerate_situations(const Lexicon& lex,
                                            std::int64_t max_total = 2'000'000);

// Raw (unnormalized) log score of a situation under a score table.
double oracle_raw_score(const Lexicon& lex, const ScoreTable& scores, const Situation& s);

// log sum over all situations of exp(raw score).
double oracle_log_partition(const Lexicon& lex, const ScoreTable& scores);

// log sum over all completions of (v, partial) of exp(raw score) minus the
// oracle log partition.
double oracle_marginal_log_prob(const Lexicon& lex, const ScoreTable& scores, VerbId v,
                                const RealizedFrame& partial);

// Argmax situation by raw score; ties by enumeration order (= id order).
Situation oracle_argmax(const Lexicon& lex, const ScoreTable& scores);

// 1 - prod(1 - p_S) evaluated directly in long double.
double oracle_multi_annotation_loglik(const Lexicon& lex, const ScoreTable& scores,
                                      const std::vector<Situation>& annotations);

// Nearest-prototype verb classification over all candidate completions of
// each verb; exact on noise-free synthetic data.
VerbId oracle_nearest_prototype_verb(const Lexicon& lex, const SynthProtos& protos,
                                     const std::vector<double>& features);

// A small random lexicon plus uniform random scores for oracle comparisons;
// deterministic in seed.
struct OracleInstance {
  Lexicon lexicon;
  ScoreTable scores;
};
OracleInstance random_oracle_instance(std::uint64_t seed, int max_verbs = 6, int max_roles = 3,
                                      int max_cands = 7);

}  // namespace sitrec
