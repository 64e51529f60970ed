#include "sitrec/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <random>

namespace sitrec {

std::vector<Situation> enumerate_situations(const Lexicon& lex, std::int64_t max_total) {
  auto size = situation_space_size(lex);
  if (size.total > max_total)
    throw NumericError("situation space too large to enumerate: " + std::to_string(size.total));

  std::vector<Situation> out;
  out.reserve(static_cast<std::size_t>(size.total));
  for (int v = 0; v < lex.verb_count(); ++v) {
    VerbId verb{v};
    auto roles = lex.verb_roles(verb);
    const int n_roles = static_cast<int>(roles.size());
    std::vector<int> cursor(n_roles, 0);
    while (true) {
      Situation s;
      s.verb = verb;
      for (int pos = 0; pos < n_roles; ++pos)
        s.frame.set(roles[pos], lex.candidates(verb, pos)[cursor[pos]]);
      out.push_back(std::move(s));
      int pos = n_roles - 1;
      while (pos >= 0) {
        if (++cursor[pos] < static_cast<int>(lex.candidates(verb, pos).size())) break;
        cursor[pos] = 0;
        --pos;
      }
      if (pos < 0) break;
    }
  }
  return out;
}

double oracle_raw_score(const Lexicon& lex, const ScoreTable& scores, const Situation& s) {
  double total = scores.verb[s.verb.v];
  auto roles = lex.verb_roles(s.verb);
  for (int pos = 0; pos < static_cast<int>(roles.size()); ++pos) {
    int c = lex.candidate_index(s.verb, pos, *s.frame.get(roles[pos]));
    if (c < 0) return -std::numeric_limits<double>::infinity();
    total += scores.role_noun[lex.triple_index(s.verb, pos, c)];
  }
  return total;
}

namespace {
double log_sum_scores(const std::vector<double>& raw) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double r : raw) mx = std::max(mx, r);
  if (!std::isfinite(mx)) return mx;
  long double sum = 0.0L;
  for (double r : raw) sum += expl(static_cast<long double>(r) - mx);
  return mx + static_cast<double>(logl(sum));
}
}  // namespace

double oracle_log_partition(const Lexicon& lex, const ScoreTable& scores) {
  std::vector<double> raw;
  for (const auto& s : enumerate_situations(lex)) raw.push_back(oracle_raw_score(lex, scores, s));
  return log_sum_scores(raw);
}

double oracle_marginal_log_prob(const Lexicon& lex, const ScoreTable& scores, VerbId v,
                                const RealizedFrame& partial) {
  std::vector<double> raw;
  for (const auto& s : enumerate_situations(lex)) {
    if (s.verb != v) continue;
    bool consistent = true;
    for (auto [role, noun] : partial.assignments())
      if (s.frame.get(role) != std::optional<NounId>(noun)) consistent = false;
    if (consistent) raw.push_back(oracle_raw_score(lex, scores, s));
  }
  if (raw.empty()) return -std::numeric_limits<double>::infinity();
  return log_sum_scores(raw) - oracle_log_partition(lex, scores);
}

Situation oracle_argmax(const Lexicon& lex, const ScoreTable& scores) {
  auto all = enumerate_situations(lex);
  std::size_t best = 0;
  double best_score = oracle_raw_score(lex, scores, all[0]);
  for (std::size_t i = 1; i < all.size(); ++i) {
    double s = oracle_raw_score(lex, scores, all[i]);
    if (s > best_score) {
      best_score = s;
      best = i;
    }
  }
  return all[best];
}

double oracle_multi_annotation_loglik(const Lexicon& lex, const ScoreTable& scores,
                                      const std::vector<Situation>& annotations) {
  std::vector<Situation> unique = annotations;
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());

  const double log_z = oracle_log_partition(lex, scores);
  long double miss_all = 1.0L;
  for (const auto& s : unique) {
    long double p = expl(static_cast<long double>(oracle_raw_score(lex, scores, s) - log_z));
    miss_all *= (1.0L - p);
  }
  return static_cast<double>(logl(1.0L - miss_all));
}

VerbId oracle_nearest_prototype_verb(const Lexicon& lex, const SynthProtos& protos,
                                     const std::vector<double>& features) {
  Eigen::Map<const Eigen::VectorXd> g(features.data(),
                                      static_cast<Eigen::Index>(features.size()));
  double best_dist = std::numeric_limits<double>::infinity();
  VerbId best_verb{0};
  for (const auto& s : enumerate_situations(lex)) {
    Eigen::VectorXd proto = protos.verb_protos.col(s.verb.v);
    for (auto [role, noun] : s.frame.assignments())
      if (noun != kNullNoun) proto += protos.noun_protos.col(noun.v);
    double dist = (g - proto).squaredNorm();
    if (dist < best_dist) {
      best_dist = dist;
      best_verb = s.verb;
    }
  }
  return best_verb;
}

OracleInstance random_oracle_instance(std::uint64_t seed, int max_verbs, int max_roles,
                                      int max_cands) {
  std::mt19937_64 rng(seed);
  auto pick = [&rng](int lo, int hi) {
    std::uniform_int_distribution<int> dist(lo, hi);
    return dist(rng);
  };

  const int n_verbs = pick(1, max_verbs);
  const int n_roles_total = std::max(2, max_roles);
  const int n_nouns = std::max(4, 2 * max_cands);

  std::vector<std::string> nouns, roles;
  std::vector<std::vector<std::string>> glosses;
  for (int n = 0; n < n_nouns; ++n) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "n%02d", n);
    nouns.emplace_back(buf);
    glosses.push_back({buf});
  }
  for (int r = 0; r < n_roles_total; ++r) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "r%d", r);
    roles.emplace_back(buf);
  }

  std::vector<std::pair<std::string, std::vector<std::string>>> frames;
  std::vector<std::tuple<std::string, std::string, std::string>> verbs;
  std::map<std::pair<std::string, std::string>, std::vector<std::string>> cands;
  for (int v = 0; v < n_verbs; ++v) {
    char vbuf[16], fbuf[16];
    std::snprintf(vbuf, sizeof(vbuf), "v%02d", v);
    std::snprintf(fbuf, sizeof(fbuf), "f%02d", v);
    const int n_roles = pick(1, max_roles);
    std::vector<std::string> frame_roles(roles.begin(), roles.begin() + n_roles);
    frames.emplace_back(fbuf, frame_roles);
    verbs.emplace_back(vbuf, fbuf, "{" + frame_roles[0] + "} " + vbuf);
    for (int r = 0; r < n_roles; ++r) {
      const int n_cands = pick(1, max_cands);
      std::vector<int> ids(n_nouns);
      for (int i = 0; i < n_nouns; ++i) ids[i] = i;
      std::shuffle(ids.begin(), ids.end(), rng);
      auto& list = cands[{vbuf, roles[r]}];
      for (int i = 0; i < n_cands; ++i) list.push_back(nouns[ids[i]]);
    }
  }

  OracleInstance inst{Lexicon::build(nouns, glosses, roles, frames, verbs, cands), {}};
  inst.scores = ScoreTable::zeros(inst.lexicon);
  std::uniform_real_distribution<double> score_dist(-4.0, 4.0);
  for (Eigen::Index i = 0; i < inst.scores.verb.size(); ++i)
    inst.scores.verb[i] = score_dist(rng);
  for (Eigen::Index i = 0; i < inst.scores.role_noun.size(); ++i)
    inst.scores.role_noun[i] = score_dist(rng);
  return inst;
}

}  // namespace sitrec
