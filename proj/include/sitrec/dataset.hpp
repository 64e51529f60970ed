#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "sitrec/lexicon.hpp"
#include "sitrec/substructure.hpp"

namespace sitrec {

// A fully annotated image: feature vector plus one or more gold situations
// (annotators may disagree, including on the verb).
struct Example {
  std::string image_id;
  std::vector<double> features;
  std::vector<Situation> annotations;
};

// A weakly labeled image: verb plus a partially observed frame, tagged with
// the query phrase that retrieved it.
struct PartialExample {
  std::string image_id;
  std::vector<double> features;
  VerbId verb;
  RealizedFrame partial;
  std::string source_phrase;
};

struct FrequencyTable {
  std::map<std::tuple<VerbId, RoleId, NounId>, std::int64_t> counts;
  std::map<Substructure, std::int64_t> substructure_counts;

  std::int64_t count(VerbId v, RoleId e, NounId n) const {
    auto it = counts.find({v, e, n});
    return it == counts.end() ? 0 : it->second;
  }
  std::int64_t substructure_count(const Substructure& s) const {
    auto it = substructure_counts.find(s);
    return it == substructure_counts.end() ? 0 : it->second;
  }
};

// Dataset file ("sitrec-dataset v1"), one image per line:
//   <image_id>\t<f1>,...,<fp>\t<verb> <role>:<noun> ...[\t<annotation>...]
// Every annotation is validated; errors name the image and violation.
std::vector<Example> load_dataset(const std::filesystem::path& path, const Lexicon& lex);
std::vector<Example> parse_dataset(std::string_view content, const Lexicon& lex,
                                   std::string_view path_for_errors);
std::string serialize_dataset(const Lexicon& lex, const std::vector<Example>& examples);

// Web-set file ("sitrec-webset v1"), one image per line:
//   <image_id>\t<features>\t<verb> [<role>:<noun> ...]\t<source_phrase>
std::vector<PartialExample> load_web_set(const std::filesystem::path& path, const Lexicon& lex);
std::vector<PartialExample> parse_web_set(std::string_view content, const Lexicon& lex,
                                          std::string_view path_for_errors);
std::string serialize_web_set(const Lexicon& lex, const std::vector<PartialExample>& web);

// Exact tallies over a training split: every (verb, role, noun) assignment
// per (example, annotation) pair, plus every enumerated substructure.
FrequencyTable count_frequencies(const Lexicon& lex, const std::vector<Example>& train);

// True where the example's least-frequent annotation triple occurs at most
// `threshold` times in training.
std::vector<bool> rare_mask(const std::vector<Example>& dataset, const FrequencyTable& freq,
                            std::int64_t threshold = 10);

std::int64_t least_triple_count(const Example& ex, const FrequencyTable& freq);

}  // namespace sitrec
