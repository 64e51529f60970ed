#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "sitrec/augmentation.hpp"
#include "test_helpers.hpp"

using namespace sitrec;

namespace {
Situation full_carrying(const Lexicon& lex) {
  return testing::make_situation(
      lex, "carrying",
      {{"agent", "man"}, {"item", "baby"}, {"agentpart", "chest"}, {"place", "outside"}});
}

Substructure make_sub(const Lexicon& lex, const std::string& verb,
                      const std::vector<std::pair<std::string, std::string>>& pairs) {
  Substructure sub;
  sub.verb = *lex.find_verb(verb);
  for (const auto& [role, noun] : pairs) sub.pairs.set(*lex.find_role(role), *lex.find_noun(noun));
  return sub;
}
}  // namespace

TEST_CASE("substructures of a two-pair situation") {
  Lexicon lex = testing::carrying_lexicon();
  Situation s = testing::make_situation(
      lex, "carrying",
      {{"agent", "man"}, {"item", "baby"}, {"agentpart", "_"}, {"place", "_"}});
  auto subs = enumerate_substructures(lex, s);
  REQUIRE(subs.size() == 3);
  CHECK(subs[0] == make_sub(lex, "carrying", {{"agent", "man"}}));
  CHECK(subs[1] == make_sub(lex, "carrying", {{"item", "baby"}}));
  CHECK(subs[2] == make_sub(lex, "carrying", {{"agent", "man"}, {"item", "baby"}}));
}

TEST_CASE("an all-null situation has no substructures") {
  Lexicon lex = testing::carrying_lexicon();
  Situation s = testing::make_situation(
      lex, "carrying", {{"agent", "_"}, {"item", "_"}, {"agentpart", "_"}, {"place", "_"}});
  CHECK(enumerate_substructures(lex, s).empty());
}

TEST_CASE("four non-null pairs give fifteen substructures, sized then ordered") {
  Lexicon lex = testing::carrying_lexicon();
  auto subs = enumerate_substructures(lex, full_carrying(lex));
  REQUIRE(subs.size() == 15);
  for (std::size_t i = 1; i < subs.size(); ++i)
    CHECK(subs[i - 1].pairs.size() <= subs[i].pairs.size());
  // All distinct and all subsets of the source assignment.
  std::set<Substructure> unique(subs.begin(), subs.end());
  CHECK(unique.size() == 15);
  Situation s = full_carrying(lex);
  for (const auto& sub : subs) {
    CHECK(!sub.pairs.empty());
    for (auto [role, noun] : sub.pairs.assignments()) {
      CHECK(noun != kNullNoun);
      CHECK(s.frame.get(role) == std::optional<NounId>(noun));
    }
  }
}

TEST_CASE("phrases realize from the verb template") {
  Lexicon lex = testing::carrying_lexicon();
  CHECK(realize_phrase(lex, make_sub(lex, "carrying", {{"agent", "man"}})) == "man carrying");
  CHECK(realize_phrase(lex, make_sub(lex, "carrying", {{"agent", "man"}, {"item", "baby"}})) ==
        "man carrying baby");
  CHECK(realize_phrase(lex, make_sub(lex, "carrying", {{"agent", "man"},
                                                       {"item", "baby"},
                                                       {"agentpart", "chest"},
                                                       {"place", "outside"}})) ==
        "man carrying baby with chest in outside");
  // Slots keep their fixed prepositions when filled.
  CHECK(realize_phrase(lex, make_sub(lex, "carrying", {{"place", "outside"}})) ==
        "carrying in outside");
}

TEST_CASE("realized phrases have clean whitespace and no slot residue") {
  Lexicon lex = testing::carrying_lexicon();
  for (const auto& sub : enumerate_substructures(lex, full_carrying(lex))) {
    std::string phrase = realize_phrase(lex, sub);
    CHECK(!phrase.empty());
    CHECK(phrase.front() != ' ');
    CHECK(phrase.back() != ' ');
    CHECK(phrase.find("  ") == std::string::npos);
    CHECK(phrase.find('{') == std::string::npos);
    CHECK(phrase.find('}') == std::string::npos);
  }
}

TEST_CASE("query selection follows the frequency bands") {
  Lexicon lex = testing::carrying_lexicon();
  FrequencyTable freq;
  auto add = [&](const Substructure& sub, std::int64_t count) {
    freq.substructure_counts[sub] = count;
  };
  Substructure two_kept = make_sub(lex, "carrying", {{"agent", "man"}, {"item", "baby"}});
  Substructure two_low = make_sub(lex, "carrying", {{"agent", "woman"}, {"item", "baby"}});
  Substructure one_low = make_sub(lex, "carrying", {{"item", "ball"}});
  Substructure too_high = make_sub(lex, "carrying", {{"agent", "man"}});
  Substructure boundary_lo = make_sub(lex, "carrying", {{"agentpart", "chest"}, {"place", "floor"}});
  Substructure boundary_hi = make_sub(lex, "carrying", {{"place", "floor"}});
  add(two_kept, 50);     // in [10, 100] with two nouns: kept
  add(two_low, 5);       // in [3, 10) with two nouns: dropped
  add(one_low, 5);       // in [3, 10) with one noun: kept
  add(too_high, 200);    // above the band: dropped
  add(boundary_lo, 10);  // inclusive lower bound of the full band
  add(boundary_hi, 100); // inclusive upper bound

  QueryManifest manifest = select_queries(lex, freq);
  std::set<std::string> phrases;
  for (const auto& e : manifest.entries) phrases.insert(e.phrase);
  CHECK(phrases.count("man carrying baby"));
  CHECK(!phrases.count("woman carrying baby"));
  CHECK(phrases.count("carrying ball"));
  CHECK(!phrases.count("man carrying"));
  CHECK(phrases.count("carrying with chest in floor"));
  CHECK(phrases.count("carrying in floor"));
  CHECK(manifest.entries.size() == 4);

  // Counts ride along.
  for (const auto& e : manifest.entries)
    CHECK(e.train_count == freq.substructure_count(e.sub));
}

TEST_CASE("widening a band never drops a kept phrase") {
  Lexicon lex = testing::carrying_lexicon();
  FrequencyTable freq;
  std::int64_t c = 1;
  Situation s = full_carrying(lex);
  for (const auto& sub : enumerate_substructures(lex, s))
    freq.substructure_counts[sub] = (c += 17) % 230;

  QueryBands narrow;  // defaults
  QueryBands wide;
  wide.full_lo = 8;
  wide.full_hi = 150;
  wide.single_lo = 2;
  QueryManifest before = select_queries(lex, freq, narrow);
  QueryManifest after = select_queries(lex, freq, wide);
  std::set<std::string> after_phrases;
  for (const auto& e : after.entries) after_phrases.insert(e.phrase);
  for (const auto& e : before.entries) CHECK(after_phrases.count(e.phrase));
}

TEST_CASE("query manifests round-trip") {
  Lexicon lex = testing::carrying_lexicon();
  FrequencyTable freq;
  freq.substructure_counts[make_sub(lex, "carrying", {{"agent", "man"}, {"item", "baby"}})] = 42;
  freq.substructure_counts[make_sub(lex, "carrying", {{"item", "ball"}})] = 7;
  QueryManifest manifest = select_queries(lex, freq);
  std::string text = serialize_query_manifest(lex, manifest);
  QueryManifest reparsed = parse_query_manifest(text, lex, "rt");
  CHECK(serialize_query_manifest(lex, reparsed) == text);
}

namespace {
QueryManifest man_carrying_manifest(const Lexicon& lex) {
  QueryManifest manifest;
  manifest.entries.push_back({"man carrying", make_sub(lex, "carrying", {{"agent", "man"}}), 12});
  return manifest;
}

RetrievalRecord record(const std::string& phrase, const std::string& id, double seed_val) {
  return {phrase, id, {seed_val, seed_val + 1}};
}
}  // namespace

TEST_CASE("ingest labels records with the generating substructure") {
  Lexicon lex = testing::carrying_lexicon();
  QueryManifest manifest = man_carrying_manifest(lex);
  std::vector<RetrievalRecord> records = {record("man carrying", "w1", 0.1),
                                          record("man carrying", "w2", 0.2),
                                          record("man carrying", "w3", 0.3)};
  auto web = ingest_web_set(lex, manifest, records, {});
  REQUIRE(web.size() == 3);
  for (const auto& pe : web) {
    CHECK(pe.verb == *lex.find_verb("carrying"));
    CHECK(pe.partial.get(*lex.find_role("agent")) ==
          std::optional<NounId>(*lex.find_noun("man")));
    CHECK(pe.partial.size() == 1);
    CHECK(pe.source_phrase == "man carrying");
  }
}

TEST_CASE("ingest drops records colliding with training images") {
  Lexicon lex = testing::carrying_lexicon();
  QueryManifest manifest = man_carrying_manifest(lex);
  Example train_ex;
  train_ex.image_id = "train_7";
  train_ex.features = {0.2, 1.2};
  train_ex.annotations.push_back(full_carrying(lex));

  std::vector<RetrievalRecord> records = {
      record("man carrying", "train_7", 0.9),  // id collision
      record("man carrying", "w_dup", 0.2),    // feature collision (same bytes as train)
      record("man carrying", "w_ok", 0.5)};
  auto web = ingest_web_set(lex, manifest, records, {train_ex});
  REQUIRE(web.size() == 1);
  CHECK(web[0].image_id == "w_ok");
}

TEST_CASE("ingest caps records per phrase in file order") {
  Lexicon lex = testing::carrying_lexicon();
  QueryManifest manifest = man_carrying_manifest(lex);
  std::vector<RetrievalRecord> records;
  for (int i = 0; i < 250; ++i)
    records.push_back(record("man carrying", "w" + std::to_string(i), 0.01 * i));
  auto web = ingest_web_set(lex, manifest, records, {});
  REQUIRE(web.size() == 200);
  CHECK(web.front().image_id == "w0");
  CHECK(web.back().image_id == "w199");
}

TEST_CASE("ingest rejects phrases missing from the manifest") {
  Lexicon lex = testing::carrying_lexicon();
  QueryManifest manifest = man_carrying_manifest(lex);
  std::vector<RetrievalRecord> records = {record("woman carrying", "w1", 0.4)};
  CHECK_THROWS_WITH_AS(ingest_web_set(lex, manifest, records, {}),
                       doctest::Contains("woman carrying"), DataError);
}

namespace {
// Fixed-weight model whose marginal likelihood varies with the features.
ModelParams ranking_model(const Lexicon& lex) {
  ModelParams params = init_model(lex, FamilySpec::parse("reg"), ModelDims{2, 2, 2, 1}, 9);
  params.regression.verb_weights.setConstant(0.3);
  for (int s = 0; s < lex.triple_count(); ++s)
    params.regression.triple_weights.col(s).setConstant(0.05 * (s % 7));
  return params;
}

std::vector<PartialExample> web_group(const Lexicon& lex, int size) {
  std::vector<PartialExample> web;
  for (int i = 0; i < size; ++i) {
    PartialExample pe;
    pe.image_id = "w" + std::to_string(i);
    pe.features = {0.1 * i, -0.05 * i};
    pe.verb = *lex.find_verb("carrying");
    pe.partial.set(*lex.find_role("agent"), *lex.find_noun("man"));
    pe.source_phrase = "man carrying";
    web.push_back(std::move(pe));
  }
  return web;
}
}  // namespace

TEST_CASE("self-train filter keeps the top-k of rare groups") {
  Lexicon lex = testing::carrying_lexicon();
  ModelParams model = ranking_model(lex);
  auto web = web_group(lex, 5);
  FrequencyTable freq;  // substructure unseen: count 0, rare

  auto kept = self_train_filter(lex, web, model, 2, freq, 10);
  CHECK(kept.size() == 2);

  // Rank by hand to confirm the highest scores survived.
  std::vector<std::pair<double, std::string>> ranked;
  for (const auto& pe : web) {
    Eigen::Map<const Eigen::VectorXd> g(pe.features.data(), 2);
    ScoreTable scores = score_model(model, lex, g);
    InferenceState state = log_partition(lex, scores);
    ranked.emplace_back(marginal_log_prob(lex, scores, state, pe.verb, pe.partial), pe.image_id);
  }
  std::sort(ranked.rbegin(), ranked.rend());
  std::set<std::string> expected = {ranked[0].second, ranked[1].second};
  for (const auto& pe : kept) CHECK(expected.count(pe.image_id));
}

TEST_CASE("self-train filter passes non-rare groups through") {
  Lexicon lex = testing::carrying_lexicon();
  ModelParams model = ranking_model(lex);
  auto web = web_group(lex, 5);
  FrequencyTable freq;
  Substructure sub;
  sub.verb = *lex.find_verb("carrying");
  sub.pairs.set(*lex.find_role("agent"), *lex.find_noun("man"));
  freq.substructure_counts[sub] = 50;  // above the threshold

  auto kept = self_train_filter(lex, web, model, 2, freq, 10);
  CHECK(kept.size() == 5);
}

TEST_CASE("self-train filter saturates when k covers the group") {
  Lexicon lex = testing::carrying_lexicon();
  ModelParams model = ranking_model(lex);
  auto web = web_group(lex, 3);
  FrequencyTable freq;
  auto kept = self_train_filter(lex, web, model, 5, freq, 10);
  CHECK(kept.size() == 3);
}

TEST_CASE("self-train filter is a subset operation and idempotent") {
  Lexicon lex = testing::carrying_lexicon();
  ModelParams model = ranking_model(lex);
  auto web = web_group(lex, 8);
  // Add a second group that stays rare too.
  for (int i = 0; i < 4; ++i) {
    PartialExample pe;
    pe.image_id = "b" + std::to_string(i);
    pe.features = {1.0 + 0.2 * i, 0.3};
    pe.verb = *lex.find_verb("carrying");
    pe.partial.set(*lex.find_role("item"), *lex.find_noun("ball"));
    pe.source_phrase = "carrying ball";
    web.push_back(std::move(pe));
  }
  FrequencyTable freq;
  auto once = self_train_filter(lex, web, model, 3, freq, 10);
  std::set<std::string> input_ids;
  for (const auto& pe : web) input_ids.insert(pe.image_id);
  for (const auto& pe : once) CHECK(input_ids.count(pe.image_id));
  auto twice = self_train_filter(lex, once, model, 3, freq, 10);
  REQUIRE(twice.size() == once.size());
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(twice[i].image_id == once[i].image_id);
}

TEST_CASE("self-train loop with an empty web set returns the ranker unchanged") {
  Lexicon lex = testing::carrying_lexicon();
  ModelParams ranker = ranking_model(lex);
  SelfTrainOptions options;
  int rounds = -1;
  TrainResult result =
      self_train_loop(lex, {}, {}, {}, FrequencyTable{}, ranker, 0.5, options, &rounds);
  CHECK(result.best.best_dev_metric == 0.5);
  CHECK(rounds == 0);
  CHECK(result.best.params.regression.verb_weights.isApprox(ranker.regression.verb_weights));
}

TEST_CASE("self-train loop runs at most one round per scheduled k") {
  SynthConfig cfg;
  cfg.n_verbs = 4;
  cfg.n_nouns = 16;
  cfg.cands_per_role = 4;
  cfg.p = 8;
  cfg.train_size = 80;
  cfg.dev_size = 30;
  SynthData data = synth_generate(cfg, 51);
  const Lexicon& lex = data.lexicon;
  FrequencyTable freq = count_frequencies(lex, data.train);

  QueryBands bands;
  bands.full_lo = 2;
  bands.full_hi = 500;
  bands.single_lo = 1;
  QueryManifest manifest = select_queries(lex, freq, bands);
  auto web = ingest_web_set(
      lex, manifest, simulate_retrieval(lex, manifest, data.protos, 4, 0.3, 3), data.train);
  REQUIRE(!web.empty());

  SelfTrainOptions options;
  options.k_schedule = {2, 3};
  options.pretrain.opt.learning_rate = 0.05;
  options.pretrain.opt.batch_size = 8;
  options.pretrain.opt.max_updates = 10;
  options.supervised.opt.learning_rate = 0.2;
  options.supervised.opt.batch_size = 8;
  options.supervised.opt.max_updates = 30;
  options.supervised.eval_every = 15;

  ModelParams ranker = init_model(lex, FamilySpec::parse("reg"), ModelDims{8, 2, 2, 1}, 5);
  int rounds = -1;
  TrainResult result =
      self_train_loop(lex, web, data.train, data.dev, freq, ranker, 0.0, options, &rounds);
  CHECK(rounds >= 1);
  CHECK(rounds <= 2);
  CHECK(result.best.best_dev_metric >= 0.0);
}

TEST_CASE("simulated retrieval is deterministic and phrase-complete") {
  SynthConfig cfg;
  cfg.n_verbs = 4;
  cfg.n_nouns = 16;
  cfg.cands_per_role = 4;
  cfg.p = 8;
  cfg.train_size = 150;
  cfg.dev_size = 0;
  SynthData data = synth_generate(cfg, 77);
  FrequencyTable freq = count_frequencies(data.lexicon, data.train);
  QueryBands bands;
  bands.full_lo = 2;
  bands.full_hi = 1000;
  bands.single_lo = 1;
  QueryManifest manifest = select_queries(data.lexicon, freq, bands);
  REQUIRE(!manifest.entries.empty());

  auto a = simulate_retrieval(data.lexicon, manifest, data.protos, 3, 0.2, 5);
  auto b = simulate_retrieval(data.lexicon, manifest, data.protos, 3, 0.2, 5);
  REQUIRE(a.size() == manifest.entries.size() * 3);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].image_id == b[i].image_id);
    CHECK(a[i].features == b[i].features);
  }
  std::string text = serialize_retrieval(a);
  auto reparsed = parse_retrieval(text, "rt");
  CHECK(serialize_retrieval(reparsed) == text);
}
