#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "sitrec/inference.hpp"
#include "sitrec/oracle.hpp"
#include "test_helpers.hpp"

using namespace sitrec;

namespace {

// Two verbs, one role, three candidates each (incl. null).
Lexicon six_situation_lexicon() {
  return parse_lexicon(
      "sitrec-lexicon v1\n"
      "noun\ta\ta\nnoun\tb\tb\n"
      "frame\tf\tr\n"
      "verb\tv1\tf\t{r} v1\n"
      "verb\tv2\tf\t{r} v2\n"
      "cand\tv1\tr\ta\tb\n"
      "cand\tv2\tr\ta\tb\n",
      "six");
}

}  // namespace

TEST_CASE("uniform scores count the support") {
  Lexicon lex = six_situation_lexicon();
  ScoreTable scores = ScoreTable::zeros(lex);
  InferenceState state = log_partition(lex, scores);
  CHECK(state.log_partition == doctest::Approx(std::log(6.0)));
  // Verb marginals normalize.
  double lse = std::log(std::exp(state.verb_log_marginal[0]) + std::exp(state.verb_log_marginal[1]));
  CHECK(lse == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("single verb partition sums candidate weights") {
  Lexicon lex = parse_lexicon(
      "sitrec-lexicon v1\n"
      "noun\ta\ta\nnoun\tb\tb\n"
      "frame\tf\tr\n"
      "verb\tv\tf\t{r} v\n"
      "cand\tv\tr\ta\tb\n",
      "single");
  ScoreTable scores = ScoreTable::zeros(lex);
  scores.role_noun[0] = std::log(1.0);
  scores.role_noun[1] = std::log(2.0);
  scores.role_noun[2] = std::log(3.0);
  InferenceState state = log_partition(lex, scores);
  CHECK(state.log_partition == doctest::Approx(std::log(6.0)));
}

TEST_CASE("log_partition matches the enumeration oracle on random lexica") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    OracleInstance inst = random_oracle_instance(seed);
    InferenceState state = log_partition(inst.lexicon, inst.scores);
    double oracle = oracle_log_partition(inst.lexicon, inst.scores);
    CHECK(std::abs(state.log_partition - oracle) < 1e-10);
  }
}

TEST_CASE("probabilities are uniform and normalized on the six-situation space") {
  Lexicon lex = six_situation_lexicon();
  ScoreTable scores = ScoreTable::zeros(lex);
  InferenceState state = log_partition(lex, scores);
  for (const auto& s : enumerate_situations(lex))
    CHECK(log_prob(lex, scores, state, s) == doctest::Approx(std::log(1.0 / 6.0)));
}

TEST_CASE("exp(log_prob) sums to one on random lexica") {
  for (std::uint64_t seed = 100; seed < 112; ++seed) {
    OracleInstance inst = random_oracle_instance(seed);
    InferenceState state = log_partition(inst.lexicon, inst.scores);
    long double total = 0.0L;
    for (const auto& s : enumerate_situations(inst.lexicon))
      total += expl(static_cast<long double>(log_prob(inst.lexicon, inst.scores, state, s)));
    CHECK(std::abs(static_cast<double>(total) - 1.0) < 1e-10);
  }
}

TEST_CASE("adding a constant to verb scores leaves log_prob unchanged") {
  OracleInstance inst = random_oracle_instance(7);
  InferenceState state = log_partition(inst.lexicon, inst.scores);
  ScoreTable shifted = inst.scores;
  shifted.verb.array() += 3.7;
  InferenceState shifted_state = log_partition(inst.lexicon, shifted);
  for (const auto& s : enumerate_situations(inst.lexicon))
    CHECK(log_prob(inst.lexicon, inst.scores, state, s) ==
          doctest::Approx(log_prob(inst.lexicon, shifted, shifted_state, s)).epsilon(1e-10));
}

TEST_CASE("a noun outside the candidate set has zero probability") {
  Lexicon lex = six_situation_lexicon();
  std::string extra =
      "sitrec-lexicon v1\n"
      "noun\ta\ta\nnoun\tb\tb\nnoun\tc\tc\n"
      "frame\tf\tr\n"
      "verb\tv1\tf\t{r} v1\n"
      "cand\tv1\tr\ta\tb\n";
  Lexicon lex2 = parse_lexicon(extra, "extra");
  ScoreTable scores = ScoreTable::zeros(lex2);
  InferenceState state = log_partition(lex2, scores);
  Situation s = testing::make_situation(lex2, "v1", {{"r", "c"}});
  CHECK(log_prob(lex2, scores, state, s) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("marginal with a fully observed frame equals log_prob") {
  OracleInstance inst = random_oracle_instance(21);
  InferenceState state = log_partition(inst.lexicon, inst.scores);
  for (const auto& s : enumerate_situations(inst.lexicon)) {
    CHECK(marginal_log_prob(inst.lexicon, inst.scores, state, s.verb, s.frame) ==
          doctest::Approx(log_prob(inst.lexicon, inst.scores, state, s)).epsilon(1e-12));
    break;
  }
}

TEST_CASE("marginal with no observed roles is the verb log-marginal") {
  OracleInstance inst = random_oracle_instance(23);
  InferenceState state = log_partition(inst.lexicon, inst.scores);
  for (int v = 0; v < inst.lexicon.verb_count(); ++v) {
    CHECK(marginal_log_prob(inst.lexicon, inst.scores, state, VerbId{v}, RealizedFrame{}) ==
          doctest::Approx(state.verb_log_marginal[v]).epsilon(1e-12));
  }
}

TEST_CASE("marginal matches completion enumeration on random partials") {
  std::mt19937_64 rng(400);
  for (std::uint64_t seed = 200; seed < 215; ++seed) {
    OracleInstance inst = random_oracle_instance(seed);
    const Lexicon& lex = inst.lexicon;
    InferenceState state = log_partition(lex, inst.scores);
    auto all = enumerate_situations(lex);
    std::uniform_int_distribution<std::size_t> pick(0, all.size() - 1);
    for (int trial = 0; trial < 5; ++trial) {
      const Situation& s = all[pick(rng)];
      RealizedFrame partial;
      auto roles = lex.verb_roles(s.verb);
      for (RoleId role : roles) {
        std::uniform_int_distribution<int> coin(0, 1);
        if (coin(rng)) partial.set(role, *s.frame.get(role));
      }
      double fast = marginal_log_prob(lex, inst.scores, state, s.verb, partial);
      double slow = oracle_marginal_log_prob(lex, inst.scores, s.verb, partial);
      CHECK(std::abs(fast - slow) < 1e-10);
    }
  }
}

TEST_CASE("multi-annotation likelihood reduces to log_prob for one annotation") {
  OracleInstance inst = random_oracle_instance(31);
  InferenceState state = log_partition(inst.lexicon, inst.scores);
  auto all = enumerate_situations(inst.lexicon);
  std::vector<Situation> A = {all[0]};
  CHECK(multi_annotation_loglik(inst.lexicon, inst.scores, state, A) ==
        doctest::Approx(log_prob(inst.lexicon, inst.scores, state, all[0])).epsilon(1e-12));
}

TEST_CASE("two annotations at probability one half give log 0.75") {
  // Two verbs, one role each with only the null candidate: two situations.
  Lexicon lex = parse_lexicon(
      "sitrec-lexicon v1\n"
      "frame\tf\tr\n"
      "verb\tv1\tf\t{r} v1\n"
      "verb\tv2\tf\t{r} v2\n",
      "half");
  CHECK(situation_space_size(lex).total == 2);
  ScoreTable scores = ScoreTable::zeros(lex);
  InferenceState state = log_partition(lex, scores);
  auto all = enumerate_situations(lex);
  std::vector<Situation> A = {all[0], all[1]};
  CHECK(multi_annotation_loglik(lex, scores, state, A) == doctest::Approx(std::log(0.75)));
}

TEST_CASE("duplicate annotations do not double count") {
  OracleInstance inst = random_oracle_instance(37);
  InferenceState state = log_partition(inst.lexicon, inst.scores);
  auto all = enumerate_situations(inst.lexicon);
  std::vector<Situation> once = {all[0]};
  std::vector<Situation> twice = {all[0], all[0]};
  CHECK(multi_annotation_loglik(inst.lexicon, inst.scores, state, once) ==
        doctest::Approx(multi_annotation_loglik(inst.lexicon, inst.scores, state, twice)));
}

TEST_CASE("multi-annotation likelihood matches the high-precision oracle") {
  std::mt19937_64 rng(500);
  for (std::uint64_t seed = 300; seed < 315; ++seed) {
    OracleInstance inst = random_oracle_instance(seed);
    InferenceState state = log_partition(inst.lexicon, inst.scores);
    auto all = enumerate_situations(inst.lexicon);
    std::uniform_int_distribution<std::size_t> pick(0, all.size() - 1);
    std::vector<Situation> A;
    for (int i = 0; i < 3; ++i) A.push_back(all[pick(rng)]);
    double fast = multi_annotation_loglik(inst.lexicon, inst.scores, state, A);
    double slow = oracle_multi_annotation_loglik(inst.lexicon, inst.scores, A);
    CHECK(std::abs(fast - slow) < 1e-9);
  }
}

TEST_CASE("free expectations are uniform under uniform scores") {
  Lexicon lex = six_situation_lexicon();
  ScoreTable scores = ScoreTable::zeros(lex);
  InferenceState state = log_partition(lex, scores);
  ScoreTable weights = posterior_expectations_free(lex, scores, state);
  CHECK(weights.verb[0] == doctest::Approx(0.5));
  CHECK(weights.verb[1] == doctest::Approx(0.5));
}

TEST_CASE("free expectations: noun weights within a role sum to the verb weight") {
  OracleInstance inst = random_oracle_instance(41);
  const Lexicon& lex = inst.lexicon;
  InferenceState state = log_partition(lex, inst.scores);
  ScoreTable weights = posterior_expectations_free(lex, inst.scores, state);
  CHECK(weights.verb.sum() == doctest::Approx(1.0).epsilon(1e-12));
  for (int v = 0; v < lex.verb_count(); ++v) {
    VerbId verb{v};
    const int n_roles = static_cast<int>(lex.verb_roles(verb).size());
    for (int pos = 0; pos < n_roles; ++pos) {
      const int base = lex.triple_index(verb, pos, 0);
      const int count = static_cast<int>(lex.candidates(verb, pos).size());
      CHECK(weights.role_noun.segment(base, count).sum() ==
            doctest::Approx(weights.verb[v]).epsilon(1e-10));
    }
  }
}

TEST_CASE("noisy-or weights collapse to one for a single annotation") {
  OracleInstance inst = random_oracle_instance(43);
  InferenceState state = log_partition(inst.lexicon, inst.scores);
  auto all = enumerate_situations(inst.lexicon);
  std::vector<Situation> A = {all[1 % all.size()]};
  double total = 0.0;
  ScoreTable weights =
      posterior_expectations_noisy_or(inst.lexicon, inst.scores, state, A, &total);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(weights.verb[A[0].verb.v] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("clamped expectations put all verb mass on the clamp") {
  OracleInstance inst = random_oracle_instance(47);
  const Lexicon& lex = inst.lexicon;
  InferenceState state = log_partition(lex, inst.scores);
  auto all = enumerate_situations(lex);
  const Situation& s = all[0];
  RealizedFrame partial;  // clamp only the first role
  auto roles = lex.verb_roles(s.verb);
  partial.set(roles[0], *s.frame.get(roles[0]));
  ScoreTable weights = posterior_expectations_clamped(lex, inst.scores, state, s.verb, partial);
  CHECK(weights.verb.sum() == doctest::Approx(1.0));
  CHECK(weights.verb[s.verb.v] == doctest::Approx(1.0));
  // Observed role mass sits on the observed noun; free roles sum to 1.
  for (int pos = 0; pos < static_cast<int>(roles.size()); ++pos) {
    const int base = lex.triple_index(s.verb, pos, 0);
    const int count = static_cast<int>(lex.candidates(s.verb, pos).size());
    CHECK(weights.role_noun.segment(base, count).sum() == doctest::Approx(1.0).epsilon(1e-10));
  }
}

// Finite differences of the likelihoods with respect to raw scores verify
// the expectation weights (which are exactly those derivatives).
TEST_CASE("expectation weights are the score-space gradients") {
  OracleInstance inst = random_oracle_instance(53);
  const Lexicon& lex = inst.lexicon;
  auto all = enumerate_situations(lex);
  std::vector<Situation> A = {all[0], all[all.size() / 2], all[all.size() - 1]};

  InferenceState state = log_partition(lex, inst.scores);
  double total = 0.0;
  ScoreTable clamped = posterior_expectations_noisy_or(lex, inst.scores, state, A, &total);
  ScoreTable free = posterior_expectations_free(lex, inst.scores, state);

  const double h = 1e-6;
  auto objective = [&](const ScoreTable& s) {
    InferenceState st = log_partition(lex, s);
    return multi_annotation_loglik(lex, s, st, A);
  };
  ScoreTable perturbed = inst.scores;
  for (Eigen::Index i = 0; i < perturbed.verb.size(); ++i) {
    perturbed.verb[i] += h;
    double up = objective(perturbed);
    perturbed.verb[i] -= 2 * h;
    double down = objective(perturbed);
    perturbed.verb[i] += h;
    double fd = (up - down) / (2 * h);
    double analytic = clamped.verb[i] - total * free.verb[i];
    CHECK(std::abs(fd - analytic) < 1e-4);
  }
  for (Eigen::Index i = 0; i < perturbed.role_noun.size(); ++i) {
    perturbed.role_noun[i] += h;
    double up = objective(perturbed);
    perturbed.role_noun[i] -= 2 * h;
    double down = objective(perturbed);
    perturbed.role_noun[i] += h;
    double fd = (up - down) / (2 * h);
    double analytic = clamped.role_noun[i] - total * free.role_noun[i];
    CHECK(std::abs(fd - analytic) < 1e-4);
  }
}

TEST_CASE("free expectations are the gradient of log Z") {
  OracleInstance inst = random_oracle_instance(59);
  const Lexicon& lex = inst.lexicon;
  InferenceState state = log_partition(lex, inst.scores);
  ScoreTable free = posterior_expectations_free(lex, inst.scores, state);
  const double h = 1e-6;
  ScoreTable perturbed = inst.scores;
  for (Eigen::Index i = 0; i < perturbed.verb.size(); ++i) {
    perturbed.verb[i] += h;
    double up = log_partition(lex, perturbed).log_partition;
    perturbed.verb[i] -= 2 * h;
    double down = log_partition(lex, perturbed).log_partition;
    perturbed.verb[i] += h;
    CHECK(std::abs((up - down) / (2 * h) - free.verb[i]) < 1e-4);
  }
}

TEST_CASE("decode_joint top-1 equals the brute-force argmax") {
  for (std::uint64_t seed = 600; seed < 625; ++seed) {
    OracleInstance inst = random_oracle_instance(seed);
    auto decoded = decode_joint(inst.lexicon, inst.scores, 1);
    REQUIRE(decoded.size() == 1);
    Situation oracle = oracle_argmax(inst.lexicon, inst.scores);
    CHECK(decoded[0].situation == oracle);
    CHECK(decoded[0].score ==
          doctest::Approx(oracle_raw_score(inst.lexicon, inst.scores, oracle)));
  }
}

TEST_CASE("decode with k beyond the verb count saturates") {
  OracleInstance inst = random_oracle_instance(61);
  auto decoded = decode_joint(inst.lexicon, inst.scores, 1000);
  CHECK(static_cast<int>(decoded.size()) == inst.lexicon.verb_count());
  InferenceState state = log_partition(inst.lexicon, inst.scores);
  auto mm = decode_max_marginal(inst.lexicon, inst.scores, state, 1000);
  CHECK(static_cast<int>(mm.size()) == inst.lexicon.verb_count());
}

TEST_CASE("single-verb decoding agrees between both strategies") {
  OracleInstance inst = random_oracle_instance(67, /*max_verbs=*/1);
  REQUIRE(inst.lexicon.verb_count() == 1);
  InferenceState state = log_partition(inst.lexicon, inst.scores);
  auto joint = decode_joint(inst.lexicon, inst.scores, 1);
  auto mm = decode_max_marginal(inst.lexicon, inst.scores, state, 1);
  CHECK(joint[0].situation == mm[0].situation);
}

// The hand-computed two-verb instance where the strategies disagree.
TEST_CASE("max-marginal and joint decoding rank verbs differently") {
  Lexicon lex = six_situation_lexicon();  // v1, v2; candidates {null, a, b}
  VerbId v1 = *lex.find_verb("v1");
  VerbId v2 = *lex.find_verb("v2");

  ScoreTable scores = ScoreTable::zeros(lex);
  auto set_scores = [&](VerbId v, double null_s, double a_s, double b_s) {
    scores.at(lex, v, 0, 0) = null_s;
    scores.at(lex, v, 0, lex.candidate_index(v, 0, *lex.find_noun("a"))) = a_s;
    scores.at(lex, v, 0, lex.candidate_index(v, 0, *lex.find_noun("b"))) = b_s;
  };

  // Case 1: v1 role scores (1, 3); v2 (2, 1.5). Joint and max-marginal both
  // pick v1 (max 3 vs 2; sum 4 vs 3.5). Null candidates pinned far below.
  const double kLow = -100.0;
  set_scores(v1, kLow, std::log(1.0), std::log(3.0));
  set_scores(v2, kLow, std::log(2.0), std::log(1.5));
  InferenceState state = log_partition(lex, scores);
  CHECK(decode_joint(lex, scores, 1)[0].situation.verb == v1);
  CHECK(decode_max_marginal(lex, scores, state, 1)[0].situation.verb == v1);

  // Case 2: v2 becomes (2, 2.1): joint still picks v1 (3 > 2.1) but the
  // marginal favors v2 (4.1 > 4).
  set_scores(v2, kLow, std::log(2.0), std::log(2.1));
  state = log_partition(lex, scores);
  CHECK(decode_joint(lex, scores, 1)[0].situation.verb == v1);
  CHECK(decode_max_marginal(lex, scores, state, 1)[0].situation.verb == v2);
}

TEST_CASE("decoding is invariant to constant shifts") {
  OracleInstance inst = random_oracle_instance(71);
  const Lexicon& lex = inst.lexicon;
  InferenceState state = log_partition(lex, inst.scores);
  auto joint = decode_joint(lex, inst.scores, 3);
  auto mm = decode_max_marginal(lex, inst.scores, state, 3);

  ScoreTable shifted = inst.scores;
  shifted.verb.array() += 11.0;
  // Per-(verb, role) constant over all that role's candidates.
  for (int v = 0; v < lex.verb_count(); ++v) {
    VerbId verb{v};
    const int n_roles = static_cast<int>(lex.verb_roles(verb).size());
    for (int pos = 0; pos < n_roles; ++pos) {
      const int base = lex.triple_index(verb, pos, 0);
      const int count = static_cast<int>(lex.candidates(verb, pos).size());
      shifted.role_noun.segment(base, count).array() += 0.37 * (v + 1) * (pos + 1);
    }
  }
  InferenceState shifted_state = log_partition(lex, shifted);
  auto joint2 = decode_joint(lex, shifted, 3);
  auto mm2 = decode_max_marginal(lex, shifted, shifted_state, 3);
  REQUIRE(joint.size() == joint2.size());
  for (std::size_t i = 0; i < joint.size(); ++i)
    CHECK(joint[i].situation == joint2[i].situation);
  REQUIRE(mm.size() == mm2.size());
  for (std::size_t i = 0; i < mm.size(); ++i) CHECK(mm[i].situation == mm2[i].situation);
}

TEST_CASE("decoded situations validate against the lexicon") {
  for (std::uint64_t seed = 700; seed < 710; ++seed) {
    OracleInstance inst = random_oracle_instance(seed);
    InferenceState state = log_partition(inst.lexicon, inst.scores);
    for (const auto& d : decode_joint(inst.lexicon, inst.scores, 5))
      CHECK(validate_situation(inst.lexicon, d.situation).empty());
    for (const auto& d : decode_max_marginal(inst.lexicon, inst.scores, state, 5))
      CHECK(validate_situation(inst.lexicon, d.situation).empty());
  }
}
