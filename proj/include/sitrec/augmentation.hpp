#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sitrec/synth.hpp"
#include "sitrec/training.hpp"

namespace sitrec {

// Deterministic phrase realization: template slots for roles present in the
// substructure are replaced by the noun's first gloss (keeping any fixed
// words inside the slot), unused slots are dropped, whitespace collapses.
std::string realize_phrase(const Lexicon& lex, const Substructure& sub);

struct QueryEntry {
  std::string phrase;
  Substructure sub;
  std::int64_t train_count = 0;
};
struct QueryManifest {
  std::vector<QueryEntry> entries;
};

// Keep a substructure when its training count falls in [full_lo, full_hi],
// or in [single_lo, full_lo) with at most max_single_pairs pairs.
struct QueryBands {
  std::int64_t full_lo = 10;
  std::int64_t full_hi = 100;
  std::int64_t single_lo = 3;
  int max_single_pairs = 1;
};

// Substructures walk in canonical order; later duplicates of an already
// realized phrase are dropped so phrases stay unique.
QueryManifest select_queries(const Lexicon& lex, const FrequencyTable& freq,
                             const QueryBands& bands = {});

// Query manifest file ("sitrec-queries v1"):
//   <phrase>\t<verb>\t<role>:<noun>[ <role>:<noun>...]\t<count>
std::string serialize_query_manifest(const Lexicon& lex, const QueryManifest& manifest);
QueryManifest parse_query_manifest(std::string_view content, const Lexicon& lex,
                                   std::string_view path_for_errors);

// Retrieval results file ("sitrec-retrieval v1"):
//   <phrase>\t<image_id>\t<f1>,...,<fp>
struct RetrievalRecord {
  std::string phrase;
  std::string image_id;
  std::vector<double> features;
};
std::string serialize_retrieval(const std::vector<RetrievalRecord>& records);
std::vector<RetrievalRecord> parse_retrieval(std::string_view content,
                                             std::string_view path_for_errors);

// Offline stand-in for web search: per manifest phrase, images whose
// features come from a completion of the phrase's substructure; with
// probability label_noise the features instead come from an unrelated
// random situation.
std::vector<RetrievalRecord> simulate_retrieval(const Lexicon& lex, const QueryManifest& manifest,
                                                const SynthProtos& protos, int per_phrase,
                                                double label_noise, std::uint64_t seed);

struct IngestOptions {
  int per_phrase_cap = 200;
};

// Labels each record with the substructure that generated its phrase,
// drops records colliding with training images (by id or feature hash),
// and caps records per phrase in file order.
std::vector<PartialExample> ingest_web_set(const Lexicon& lex, const QueryManifest& manifest,
                                           const std::vector<RetrievalRecord>& records,
                                           const std::vector<Example>& train,
                                           const IngestOptions& options = {});

// Within each (verb, partial frame) group whose substructure is rare
// (training count <= threshold), keeps the k highest-marginal-likelihood
// members; other groups pass through. Output preserves input order.
std::vector<PartialExample> self_train_filter(const Lexicon& lex,
                                              const std::vector<PartialExample>& web,
                                              const ModelParams& model, int k,
                                              const FrequencyTable& freq,
                                              std::int64_t threshold = 10);

struct SelfTrainOptions {
  TrainOptions pretrain;
  TrainOptions supervised;
  std::vector<int> k_schedule = {10, 20};
  std::int64_t rare_threshold = 10;
  std::uint64_t init_seed = 1;
};

// Filter -> pretrain (fresh init) -> supervised retrain per k; stops early
// when the dev mean fails to improve. `ranker` is the already supervised
// model driving the first filter; `ranker_dev_mean` its dev mean. The
// number of executed rounds (at most the schedule length) lands in
// *rounds_run when given.
TrainResult self_train_loop(const Lexicon& lex, const std::vector<PartialExample>& web,
                            const std::vector<Example>& train, const std::vector<Example>& dev,
                            const FrequencyTable& train_freq, const ModelParams& ranker,
                            double ranker_dev_mean, const SelfTrainOptions& options,
                            int* rounds_run = nullptr);

}  // namespace sitrec
