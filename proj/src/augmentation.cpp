#include "sitrec/augmentation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

#include "sitrec/inference.hpp"
#include "sitrec/io_util.hpp"

namespace sitrec {

namespace {
constexpr std::string_view kQueriesMagic = "sitrec-queries";
constexpr std::string_view kRetrievalMagic = "sitrec-retrieval";

std::string collapse_spaces(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char c : text) {
    if (c == ' ') {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += c;
  }
  return out;
}
}  // namespace

std::string realize_phrase(const Lexicon& lex, const Substructure& sub) {
  const std::string& tmpl = lex.verb_template(sub.verb);
  if (tmpl.empty())
    throw DataError("verb '" + lex.verb_name(sub.verb) + "' has no template");

  std::string out;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    std::size_t open = tmpl.find('{', pos);
    if (open == std::string::npos) {
      out += tmpl.substr(pos);
      break;
    }
    out += tmpl.substr(pos, open - pos);
    std::size_t close = tmpl.find('}', open);
    if (close == std::string::npos)
      throw DataError("unclosed slot in template of verb '" + lex.verb_name(sub.verb) + "'");
    auto inside = io::split_ws(std::string_view(tmpl).substr(open + 1, close - open - 1));
    auto role = lex.find_role(inside.back());
    if (role) {
      auto noun = sub.pairs.get(*role);
      if (noun && *noun != kNullNoun) {
        for (std::size_t i = 0; i + 1 < inside.size(); ++i) {
          out += inside[i];
          out += ' ';
        }
        out += lex.first_gloss(*noun);
      }
    }
    pos = close + 1;
  }
  return collapse_spaces(out);
}

QueryManifest select_queries(const Lexicon& lex, const FrequencyTable& freq,
                             const QueryBands& bands) {
  QueryManifest manifest;
  std::set<std::string> seen_phrases;
  for (const auto& [sub, count] : freq.substructure_counts) {
    const auto n_pairs = static_cast<int>(sub.pairs.size());
    const bool full_band = count >= bands.full_lo && count <= bands.full_hi;
    const bool single_band =
        count >= bands.single_lo && count < bands.full_lo && n_pairs <= bands.max_single_pairs;
    if (!full_band && !single_band) continue;
    std::string phrase = realize_phrase(lex, sub);
    if (!seen_phrases.insert(phrase).second) continue;
    manifest.entries.push_back({std::move(phrase), sub, count});
  }
  return manifest;
}

namespace {
std::string format_pairs(const Lexicon& lex, const RealizedFrame& pairs) {
  std::string out;
  for (auto [role, noun] : pairs.assignments()) {
    if (!out.empty()) out += ' ';
    out += lex.role_name(role);
    out += ':';
    out += lex.noun_name(noun);
  }
  return out;
}

RealizedFrame parse_pairs(const Lexicon& lex, std::string_view text, std::string_view context) {
  RealizedFrame out;
  for (auto tok : io::split_ws(text)) {
    auto colon = tok.find(':');
    if (colon == std::string_view::npos)
      throw DataError("bad role:noun '" + std::string(tok) + "' in " + std::string(context));
    auto role = lex.find_role(tok.substr(0, colon));
    auto noun = lex.find_noun(tok.substr(colon + 1));
    if (!role || !noun)
      throw DataError("unknown role or noun '" + std::string(tok) + "' in " +
                      std::string(context));
    out.set(*role, *noun);
  }
  return out;
}
}  // namespace

std::string serialize_query_manifest(const Lexicon& lex, const QueryManifest& manifest) {
  std::ostringstream out;
  out << kQueriesMagic << " v1\n";
  for (const auto& e : manifest.entries)
    out << e.phrase << '\t' << lex.verb_name(e.sub.verb) << '\t' << format_pairs(lex, e.sub.pairs)
        << '\t' << e.train_count << '\n';
  return std::move(out).str();
}

QueryManifest parse_query_manifest(std::string_view content, const Lexicon& lex,
                                   std::string_view path_for_errors) {
  QueryManifest manifest;
  for (auto line : io::read_record_lines(content, kQueriesMagic, path_for_errors)) {
    auto fields = io::split(line, '\t');
    if (fields.size() != 4)
      throw DataError("bad query record in " + std::string(path_for_errors) + ": " +
                      std::string(line));
    QueryEntry entry;
    entry.phrase = std::string(fields[0]);
    auto verb = lex.find_verb(fields[1]);
    if (!verb)
      throw DataError("unknown verb '" + std::string(fields[1]) + "' in " +
                      std::string(path_for_errors));
    entry.sub.verb = *verb;
    entry.sub.pairs = parse_pairs(lex, fields[2], "query '" + entry.phrase + "'");
    entry.train_count = io::parse_int(fields[3], "query count");
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

std::string serialize_retrieval(const std::vector<RetrievalRecord>& records) {
  std::ostringstream out;
  out << kRetrievalMagic << " v1\n";
  for (const auto& r : records)
    out << r.phrase << '\t' << r.image_id << '\t' << io::fmt_vector(r.features) << '\n';
  return std::move(out).str();
}

std::vector<RetrievalRecord> parse_retrieval(std::string_view content,
                                             std::string_view path_for_errors) {
  std::vector<RetrievalRecord> records;
  for (auto line : io::read_record_lines(content, kRetrievalMagic, path_for_errors)) {
    auto fields = io::split(line, '\t');
    if (fields.size() != 3)
      throw DataError("bad retrieval record in " + std::string(path_for_errors));
    RetrievalRecord r;
    r.phrase = std::string(fields[0]);
    r.image_id = std::string(fields[1]);
    r.features = io::parse_vector(fields[2], "retrieval features of " + r.image_id);
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<RetrievalRecord> simulate_retrieval(const Lexicon& lex, const QueryManifest& manifest,
                                                const SynthProtos& protos, int per_phrase,
                                                double label_noise, std::uint64_t seed) {
  if (per_phrase < 1) throw ConfigError("simulate_retrieval: per_phrase must be positive");
  if (label_noise < 0 || label_noise > 1)
    throw ConfigError("simulate_retrieval: label_noise must be in [0, 1]");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double coord_sd = 1.0 / std::sqrt(static_cast<double>(protos.p));

  auto sample_candidate = [&](VerbId v, int pos) -> NounId {
    auto cands = lex.candidates(v, pos);
    double total = 0.0;
    for (NounId n : cands)
      if (n != kNullNoun) total += protos.popularity[n.v];
    if (total <= 0) return kNullNoun;
    double u = unit(rng) * total;
    for (NounId n : cands) {
      if (n == kNullNoun) continue;
      u -= protos.popularity[n.v];
      if (u <= 0) return n;
    }
    return cands.back();
  };

  auto features_of = [&](VerbId v, const RealizedFrame& full) {
    Eigen::VectorXd g = protos.verb_protos.col(v.v);
    for (auto [role, noun] : full.assignments())
      if (noun != kNullNoun) g += protos.noun_protos.col(noun.v);
    for (int i = 0; i < protos.p; ++i) g[i] += protos.noise * coord_sd * gauss(rng);
    return g;
  };

  std::vector<RetrievalRecord> records;
  records.reserve(manifest.entries.size() * static_cast<std::size_t>(per_phrase));
  for (std::size_t qi = 0; qi < manifest.entries.size(); ++qi) {
    const QueryEntry& entry = manifest.entries[qi];
    for (int j = 0; j < per_phrase; ++j) {
      VerbId v;
      RealizedFrame full;
      if (unit(rng) < label_noise) {
        // Mislabeled image: an unrelated random situation.
        std::uniform_int_distribution<int> pick_verb(0, lex.verb_count() - 1);
        v = VerbId{pick_verb(rng)};
        auto roles = lex.verb_roles(v);
        for (int pos = 0; pos < static_cast<int>(roles.size()); ++pos)
          full.set(roles[pos], sample_candidate(v, pos));
      } else {
        v = entry.sub.verb;
        auto roles = lex.verb_roles(v);
        for (int pos = 0; pos < static_cast<int>(roles.size()); ++pos) {
          auto observed = entry.sub.pairs.get(roles[pos]);
          full.set(roles[pos], observed ? *observed : sample_candidate(v, pos));
        }
      }
      RetrievalRecord r;
      r.phrase = entry.phrase;
      char buf[32];
      std::snprintf(buf, sizeof(buf), "web_%05zu_%04d", qi, j);
      r.image_id = buf;
      Eigen::VectorXd g = features_of(v, full);
      r.features.assign(g.data(), g.data() + protos.p);
      records.push_back(std::move(r));
    }
  }
  return records;
}

std::vector<PartialExample> ingest_web_set(const Lexicon& /*lex*/, const QueryManifest& manifest,
                                           const std::vector<RetrievalRecord>& records,
                                           const std::vector<Example>& train,
                                           const IngestOptions& options) {
  std::map<std::string_view, const QueryEntry*> by_phrase;
  for (const auto& e : manifest.entries) by_phrase[e.phrase] = &e;

  std::unordered_set<std::string> train_ids;
  std::unordered_set<std::uint64_t> train_feature_hashes;
  for (const auto& ex : train) {
    train_ids.insert(ex.image_id);
    train_feature_hashes.insert(io::fnv1a(std::string_view(
        reinterpret_cast<const char*>(ex.features.data()), ex.features.size() * sizeof(double))));
  }

  std::map<std::string_view, int> per_phrase_kept;
  std::vector<PartialExample> out;
  for (const auto& r : records) {
    auto it = by_phrase.find(r.phrase);
    if (it == by_phrase.end())
      throw DataError("retrieval phrase '" + r.phrase + "' is not in the query manifest");
    if (train_ids.count(r.image_id)) continue;
    const std::uint64_t fh = io::fnv1a(std::string_view(
        reinterpret_cast<const char*>(r.features.data()), r.features.size() * sizeof(double)));
    if (train_feature_hashes.count(fh)) continue;
    int& kept = per_phrase_kept[it->second->phrase];
    if (kept >= options.per_phrase_cap) continue;
    ++kept;
    PartialExample pe;
    pe.image_id = r.image_id;
    pe.features = r.features;
    pe.verb = it->second->sub.verb;
    pe.partial = it->second->sub.pairs;
    pe.source_phrase = it->second->phrase;
    out.push_back(std::move(pe));
  }
  return out;
}

std::vector<PartialExample> self_train_filter(const Lexicon& lex,
                                              const std::vector<PartialExample>& web,
                                              const ModelParams& model, int k,
                                              const FrequencyTable& freq,
                                              std::int64_t threshold) {
  if (k < 1) throw ConfigError("self_train_filter: k must be at least 1");

  using GroupKey = std::pair<VerbId, RealizedFrame>;
  std::map<GroupKey, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < web.size(); ++i)
    groups[{web[i].verb, web[i].partial}].push_back(i);

  std::vector<bool> keep(web.size(), true);
  for (const auto& [key, members] : groups) {
    Substructure sub;
    sub.verb = key.first;
    for (auto [role, noun] : key.second.assignments())
      if (noun != kNullNoun) sub.pairs.set(role, noun);
    if (freq.substructure_count(sub) > threshold) continue;  // non-rare: pass through
    if (static_cast<int>(members.size()) <= k) continue;

    std::vector<std::pair<double, std::size_t>> ranked;
    ranked.reserve(members.size());
    for (std::size_t idx : members) {
      Eigen::Map<const Eigen::VectorXd> g(web[idx].features.data(),
                                          static_cast<Eigen::Index>(web[idx].features.size()));
      ScoreTable scores = score_model(model, lex, g);
      InferenceState state = log_partition(lex, scores);
      ranked.emplace_back(marginal_log_prob(lex, scores, state, web[idx].verb, web[idx].partial),
                          idx);
    }
    std::sort(ranked.begin(), ranked.end(), [&web](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return web[a.second].image_id < web[b.second].image_id;
    });
    for (std::size_t r = k; r < ranked.size(); ++r) keep[ranked[r].second] = false;
  }

  std::vector<PartialExample> out;
  out.reserve(web.size());
  for (std::size_t i = 0; i < web.size(); ++i)
    if (keep[i]) out.push_back(web[i]);
  return out;
}

TrainResult self_train_loop(const Lexicon& lex, const std::vector<PartialExample>& web,
                            const std::vector<Example>& train, const std::vector<Example>& dev,
                            const FrequencyTable& train_freq, const ModelParams& ranker,
                            double ranker_dev_mean, const SelfTrainOptions& options,
                            int* rounds_run) {
  TrainResult best;
  best.best.params = ranker;
  best.best.best_dev_metric = ranker_dev_mean;
  if (rounds_run) *rounds_run = 0;

  if (web.empty()) return best;

  const ModelParams* current_ranker = &best.best.params;
  for (int k : options.k_schedule) {
    if (rounds_run) ++*rounds_run;
    auto filtered =
        self_train_filter(lex, web, *current_ranker, k, train_freq, options.rare_threshold);
    ModelParams fresh = init_model(lex, current_ranker->family, current_ranker->dims,
                                   options.init_seed);
    fresh.regression.triple_active = current_ranker->regression.triple_active;
    TrainState pretrained = pretrain_marginal(lex, filtered, std::move(fresh), options.pretrain);
    TrainResult round = train_supervised(lex, train, dev, train_freq,
                                         std::move(pretrained.params), options.supervised);
    if (round.best.best_dev_metric > best.best.best_dev_metric) {
      best = std::move(round);
      current_ranker = &best.best.params;
    } else {
      break;  // no improvement: stop the loop
    }
  }
  return best;
}

}  // namespace sitrec
