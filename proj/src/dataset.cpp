#include "sitrec/dataset.hpp"

#include <limits>
#include <sstream>

#include "sitrec/io_util.hpp"

namespace sitrec {

namespace {
constexpr std::string_view kDatasetMagic = "sitrec-dataset";
constexpr std::string_view kWebMagic = "sitrec-webset";

// "<verb> <role>:<noun> ..." -> (verb, frame). Roles may be omitted only if
// allow_partial.
std::pair<VerbId, RealizedFrame> parse_annotation(std::string_view text, const Lexicon& lex,
                                                  std::string_view context) {
  auto toks = io::split_ws(text);
  if (toks.empty()) throw DataError("empty annotation in " + std::string(context));
  auto verb = lex.find_verb(toks[0]);
  if (!verb)
    throw DataError("unknown verb '" + std::string(toks[0]) + "' in " + std::string(context));
  RealizedFrame frame;
  for (std::size_t i = 1; i < toks.size(); ++i) {
    auto colon = toks[i].find(':');
    if (colon == std::string_view::npos)
      throw DataError("bad role:noun pair '" + std::string(toks[i]) + "' in " +
                      std::string(context));
    auto role = lex.find_role(toks[i].substr(0, colon));
    if (!role)
      throw DataError("unknown role '" + std::string(toks[i].substr(0, colon)) + "' in " +
                      std::string(context));
    auto noun = lex.find_noun(toks[i].substr(colon + 1));
    if (!noun)
      throw DataError("unknown noun '" + std::string(toks[i].substr(colon + 1)) + "' in " +
                      std::string(context));
    if (frame.has(*role))
      throw DataError("role '" + std::string(toks[i].substr(0, colon)) + "' assigned twice in " +
                      std::string(context));
    frame.set(*role, *noun);
  }
  return {*verb, std::move(frame)};
}

std::string format_annotation(const Lexicon& lex, VerbId verb, const RealizedFrame& frame) {
  std::string out = lex.verb_name(verb);
  for (auto [role, noun] : frame.assignments()) {
    out += ' ';
    out += lex.role_name(role);
    out += ':';
    out += lex.noun_name(noun);
  }
  return out;
}
}  // namespace

std::vector<Example> parse_dataset(std::string_view content, const Lexicon& lex,
                                   std::string_view path_for_errors) {
  std::vector<Example> out;
  std::size_t feature_len = 0;
  for (auto line : io::read_record_lines(content, kDatasetMagic, path_for_errors)) {
    auto fields = io::split(line, '\t');
    if (fields.size() < 3)
      throw DataError("expected image_id, features and at least one annotation in " +
                      std::string(path_for_errors));
    Example ex;
    ex.image_id = std::string(fields[0]);
    ex.features = io::parse_vector(fields[1], "features of " + ex.image_id);
    if (out.empty()) {
      feature_len = ex.features.size();
    } else if (ex.features.size() != feature_len) {
      throw DataError("feature length mismatch at image '" + ex.image_id + "': got " +
                      std::to_string(ex.features.size()) + ", expected " +
                      std::to_string(feature_len));
    }
    for (std::size_t i = 2; i < fields.size(); ++i) {
      auto [verb, frame] = parse_annotation(fields[i], lex, "image '" + ex.image_id + "'");
      Situation s{verb, std::move(frame)};
      auto violations = validate_situation(lex, s);
      if (!violations.empty())
        throw DataError("invalid situation at image '" + ex.image_id + "': " + violations.front());
      ex.annotations.push_back(std::move(s));
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<Example> load_dataset(const std::filesystem::path& path, const Lexicon& lex) {
  return parse_dataset(io::read_file(path), lex, path.string());
}

std::string serialize_dataset(const Lexicon& lex, const std::vector<Example>& examples) {
  std::ostringstream out;
  out << kDatasetMagic << " v1\n";
  for (const auto& ex : examples) {
    out << ex.image_id << '\t' << io::fmt_vector(ex.features);
    for (const auto& a : ex.annotations) out << '\t' << format_annotation(lex, a.verb, a.frame);
    out << '\n';
  }
  return std::move(out).str();
}

std::vector<PartialExample> parse_web_set(std::string_view content, const Lexicon& lex,
                                          std::string_view path_for_errors) {
  std::vector<PartialExample> out;
  std::size_t feature_len = 0;
  for (auto line : io::read_record_lines(content, kWebMagic, path_for_errors)) {
    auto fields = io::split(line, '\t');
    if (fields.size() != 4)
      throw DataError("expected image_id, features, partial annotation, source phrase in " +
                      std::string(path_for_errors));
    PartialExample pe;
    pe.image_id = std::string(fields[0]);
    pe.features = io::parse_vector(fields[1], "features of " + pe.image_id);
    if (out.empty()) {
      feature_len = pe.features.size();
    } else if (pe.features.size() != feature_len) {
      throw DataError("feature length mismatch at image '" + pe.image_id + "'");
    }
    auto [verb, frame] = parse_annotation(fields[2], lex, "image '" + pe.image_id + "'");
    pe.verb = verb;
    pe.partial = std::move(frame);
    for (auto [role, noun] : pe.partial.assignments()) {
      if (lex.role_position(pe.verb, role) < 0)
        throw DataError("image '" + pe.image_id + "': role '" + lex.role_name(role) +
                        "' is not in the frame of verb '" + lex.verb_name(pe.verb) + "'");
      (void)noun;
    }
    pe.source_phrase = std::string(fields[3]);
    out.push_back(std::move(pe));
  }
  return out;
}

std::vector<PartialExample> load_web_set(const std::filesystem::path& path, const Lexicon& lex) {
  return parse_web_set(io::read_file(path), lex, path.string());
}

std::string serialize_web_set(const Lexicon& lex, const std::vector<PartialExample>& web) {
  std::ostringstream out;
  out << kWebMagic << " v1\n";
  for (const auto& pe : web)
    out << pe.image_id << '\t' << io::fmt_vector(pe.features) << '\t'
        << format_annotation(lex, pe.verb, pe.partial) << '\t' << pe.source_phrase << '\n';
  return std::move(out).str();
}

FrequencyTable count_frequencies(const Lexicon& lex, const std::vector<Example>& train) {
  FrequencyTable table;
  for (const auto& ex : train) {
    for (const auto& a : ex.annotations) {
      for (auto [role, noun] : a.frame.assignments()) ++table.counts[{a.verb, role, noun}];
      for (auto& sub : enumerate_substructures(lex, a)) ++table.substructure_counts[sub];
    }
  }
  return table;
}

std::int64_t least_triple_count(const Example& ex, const FrequencyTable& freq) {
  std::int64_t least = std::numeric_limits<std::int64_t>::max();
  for (const auto& a : ex.annotations)
    for (auto [role, noun] : a.frame.assignments())
      least = std::min(least, freq.count(a.verb, role, noun));
  return least;
}

std::vector<bool> rare_mask(const std::vector<Example>& dataset, const FrequencyTable& freq,
                            std::int64_t threshold) {
  std::vector<bool> mask(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i)
    mask[i] = least_triple_count(dataset[i], freq) <= threshold;
  return mask;
}

}  // namespace sitrec
