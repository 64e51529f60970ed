#include "sitrec/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sitrec {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double lse(const Eigen::Ref<const Eigen::VectorXd>& xs) {
  double mx = xs.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < xs.size(); ++i) sum += std::exp(xs[i] - mx);
  return mx + std::log(sum);
}

// log(1 - e^x) for x <= 0.
double log1mexp(double x) {
  if (x >= 0.0) return x == 0.0 ? kNegInf : std::numeric_limits<double>::quiet_NaN();
  if (x > -M_LN2) return std::log(-std::expm1(x));
  return std::log1p(-std::exp(x));
}
}  // namespace

InferenceState log_partition(const Lexicon& lex, const ScoreTable& scores) {
  InferenceState state;
  state.pair_log_norm.resize(lex.pair_count());
  Eigen::VectorXd verb_total(lex.verb_count());
  for (int v = 0; v < lex.verb_count(); ++v) {
    VerbId verb{v};
    const int n_roles = static_cast<int>(lex.verb_roles(verb).size());
    double total = scores.verb[v];
    for (int pos = 0; pos < n_roles; ++pos) {
      const int pair = lex.pair_index(verb, pos);
      const int base = lex.triple_offset(pair);
      const int count = lex.triple_offset(pair + 1) - base;
      if (count == 0)
        throw NumericError("empty candidate set for verb '" + lex.verb_name(verb) + "' role '" +
                           lex.role_name(lex.verb_roles(verb)[pos]) + "'");
      state.pair_log_norm[pair] = lse(scores.role_noun.segment(base, count));
      total += state.pair_log_norm[pair];
    }
    verb_total[v] = total;
  }
  state.log_partition = lse(verb_total);
  state.verb_log_marginal = verb_total.array() - state.log_partition;
  return state;
}

double log_prob(const Lexicon& lex, const ScoreTable& scores, const InferenceState& state,
                const Situation& s) {
  double total = scores.verb[s.verb.v];
  auto roles = lex.verb_roles(s.verb);
  for (int pos = 0; pos < static_cast<int>(roles.size()); ++pos) {
    auto noun = s.frame.get(roles[pos]);
    if (!noun) return kNegInf;
    int c = lex.candidate_index(s.verb, pos, *noun);
    if (c < 0) return kNegInf;  // outside the support: zero probability
    total += scores.role_noun[lex.triple_index(s.verb, pos, c)];
  }
  return total - state.log_partition;
}

double marginal_log_prob(const Lexicon& lex, const ScoreTable& scores,
                         const InferenceState& state, VerbId v, const RealizedFrame& partial) {
  double total = scores.verb[v.v];
  auto roles = lex.verb_roles(v);
  for (int pos = 0; pos < static_cast<int>(roles.size()); ++pos) {
    const int pair = lex.pair_index(v, pos);
    auto noun = partial.get(roles[pos]);
    if (noun) {
      int c = lex.candidate_index(v, pos, *noun);
      if (c < 0) return kNegInf;
      total += scores.role_noun[lex.triple_index(v, pos, c)];
    } else {
      total += state.pair_log_norm[pair];
    }
  }
  return total - state.log_partition;
}

double multi_annotation_loglik(const Lexicon& lex, const ScoreTable& scores,
                               const InferenceState& state, std::span<const Situation> A) {
  if (A.empty()) throw NumericError("multi_annotation_loglik requires a non-empty annotation set");
  std::vector<Situation> unique(A.begin(), A.end());
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());

  // sum log(1 - p_S), then log(1 - e^sum).
  double log_miss_all = 0.0;
  for (const auto& s : unique) {
    double lp = log_prob(lex, scores, state, s);
    if (lp == kNegInf) continue;  // contributes log(1 - 0) = 0
    log_miss_all += log1mexp(lp);
    if (log_miss_all == kNegInf) return 0.0;  // some p_S = 1: log(1 - 0) = 0
  }
  return log1mexp(log_miss_all);
}

ScoreTable posterior_expectations_free(const Lexicon& lex, const ScoreTable& scores,
                                       const InferenceState& state) {
  ScoreTable weights = ScoreTable::zeros(lex);
  for (int v = 0; v < lex.verb_count(); ++v) {
    VerbId verb{v};
    const double pv = std::exp(state.verb_log_marginal[v]);
    weights.verb[v] = pv;
    const int n_roles = static_cast<int>(lex.verb_roles(verb).size());
    for (int pos = 0; pos < n_roles; ++pos) {
      const int pair = lex.pair_index(verb, pos);
      const int base = lex.triple_offset(pair);
      const int count = lex.triple_offset(pair + 1) - base;
      for (int c = 0; c < count; ++c)
        weights.role_noun[base + c] =
            pv * std::exp(scores.role_noun[base + c] - state.pair_log_norm[pair]);
    }
  }
  return weights;
}

ScoreTable posterior_expectations_clamped(const Lexicon& lex, const ScoreTable& scores,
                                          const InferenceState& state, VerbId v,
                                          const RealizedFrame& partial) {
  ScoreTable weights = ScoreTable::zeros(lex);
  weights.verb[v.v] = 1.0;
  auto roles = lex.verb_roles(v);
  for (int pos = 0; pos < static_cast<int>(roles.size()); ++pos) {
    const int pair = lex.pair_index(v, pos);
    const int base = lex.triple_offset(pair);
    const int count = lex.triple_offset(pair + 1) - base;
    auto noun = partial.get(roles[pos]);
    if (noun) {
      int c = lex.candidate_index(v, pos, *noun);
      if (c < 0)
        throw NumericError("clamped noun '" + lex.noun_name(*noun) +
                           "' is outside the candidate set of verb '" + lex.verb_name(v) +
                           "' role '" + lex.role_name(roles[pos]) + "'");
      weights.role_noun[base + c] = 1.0;
    } else {
      for (int c = 0; c < count; ++c)
        weights.role_noun[base + c] =
            std::exp(scores.role_noun[base + c] - state.pair_log_norm[pair]);
    }
  }
  return weights;
}

ScoreTable posterior_expectations_noisy_or(const Lexicon& lex, const ScoreTable& scores,
                                           const InferenceState& state,
                                           std::span<const Situation> A, double* total_weight) {
  std::vector<Situation> unique(A.begin(), A.end());
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());

  std::vector<double> lp(unique.size());
  std::vector<double> log_miss(unique.size());  // log(1 - p_S)
  for (std::size_t s = 0; s < unique.size(); ++s) {
    lp[s] = log_prob(lex, scores, state, unique[s]);
    log_miss[s] = lp[s] == kNegInf ? 0.0 : log1mexp(lp[s]);
  }
  double log_miss_all = 0.0;
  for (double lm : log_miss) log_miss_all += lm;
  const double log_denom = log1mexp(log_miss_all);  // log(1 - prod(1 - p))

  ScoreTable weights = ScoreTable::zeros(lex);
  double wsum = 0.0;
  for (std::size_t s = 0; s < unique.size(); ++s) {
    if (lp[s] == kNegInf) continue;
    double log_w = lp[s] - log_denom;
    for (std::size_t s2 = 0; s2 < unique.size(); ++s2)
      if (s2 != s) log_w += log_miss[s2];
    const double w = std::exp(log_w);
    if (w == 0.0) continue;
    wsum += w;
    const Situation& sit = unique[s];
    weights.verb[sit.verb.v] += w;
    auto roles = lex.verb_roles(sit.verb);
    for (int pos = 0; pos < static_cast<int>(roles.size()); ++pos) {
      int c = lex.candidate_index(sit.verb, pos, *sit.frame.get(roles[pos]));
      weights.role_noun[lex.triple_index(sit.verb, pos, c)] += w;
    }
  }
  if (total_weight) *total_weight = wsum;
  return weights;
}

namespace {
// Verb ranking scores with deterministic id-order tie-break.
std::vector<int> top_verbs(const Eigen::VectorXd& ranking, int k) {
  std::vector<int> order(ranking.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&ranking](int a, int b) {
    if (ranking[a] != ranking[b]) return ranking[a] > ranking[b];
    return a < b;
  });
  order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(k)));
  return order;
}

// Argmax frame for a verb plus the sum of its per-role maxima.
std::pair<RealizedFrame, double> argmax_frame(const Lexicon& lex, const ScoreTable& scores,
                                              VerbId verb) {
  RealizedFrame frame;
  double total = 0.0;
  auto roles = lex.verb_roles(verb);
  for (int pos = 0; pos < static_cast<int>(roles.size()); ++pos) {
    auto cands = lex.candidates(verb, pos);
    const int base = lex.triple_index(verb, pos, 0);
    int best = 0;
    for (int c = 1; c < static_cast<int>(cands.size()); ++c)
      if (scores.role_noun[base + c] > scores.role_noun[base + best]) best = c;
    frame.set(roles[pos], cands[best]);  // ties: lowest noun id wins
    total += scores.role_noun[base + best];
  }
  return {std::move(frame), total};
}
}  // namespace

std::vector<ScoredSituation> decode_joint(const Lexicon& lex, const ScoreTable& scores, int k) {
  if (k < 1) throw NumericError("decode_joint requires k >= 1");
  Eigen::VectorXd joint(lex.verb_count());
  std::vector<RealizedFrame> frames(lex.verb_count());
  for (int v = 0; v < lex.verb_count(); ++v) {
    auto [frame, role_total] = argmax_frame(lex, scores, VerbId{v});
    frames[v] = std::move(frame);
    joint[v] = scores.verb[v] + role_total;
  }
  std::vector<ScoredSituation> out;
  for (int v : top_verbs(joint, k))
    out.push_back({Situation{VerbId{v}, std::move(frames[v])}, joint[v]});
  return out;
}

std::vector<ScoredSituation> decode_max_marginal(const Lexicon& lex, const ScoreTable& scores,
                                                 const InferenceState& state, int k) {
  if (k < 1) throw NumericError("decode_max_marginal requires k >= 1");
  std::vector<ScoredSituation> out;
  for (int v : top_verbs(state.verb_log_marginal, k)) {
    auto [frame, role_total] = argmax_frame(lex, scores, VerbId{v});
    (void)role_total;
    out.push_back({Situation{VerbId{v}, std::move(frame)}, state.verb_log_marginal[v]});
  }
  return out;
}

ScoredSituation decode_clamped(const Lexicon& lex, const ScoreTable& scores, VerbId v) {
  auto [frame, role_total] = argmax_frame(lex, scores, v);
  return {Situation{v, std::move(frame)}, scores.verb[v.v] + role_total};
}

}  // namespace sitrec
