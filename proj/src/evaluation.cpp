#include "sitrec/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "sitrec/io_util.hpp"

namespace sitrec {

namespace {
constexpr std::string_view kPredictionsMagic = "sitrec-predictions";

// A role of a predicted situation is correct if any same-verb annotation
// assigns that role the same noun.
double role_match_fraction(const Lexicon& lex, const Situation& pred,
                           const std::vector<Situation>& annotations, bool* all_out) {
  auto roles = lex.verb_roles(pred.verb);
  int correct = 0;
  for (RoleId role : roles) {
    auto pnoun = pred.frame.get(role);
    bool hit = false;
    for (const auto& a : annotations) {
      if (a.verb != pred.verb) continue;
      if (pnoun && a.frame.get(role) == pnoun) {
        hit = true;
        break;
      }
    }
    if (hit) ++correct;
  }
  if (all_out) *all_out = correct == static_cast<int>(roles.size());
  return roles.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(roles.size());
}

struct ExampleScore {
  double top1_verb, top1_value, top1_value_all;
  double top5_verb, top5_value, top5_value_all;
  double gold_value, gold_value_all;
};

ExampleScore score_example(const Lexicon& lex, const Prediction& pred, const Example& gold) {
  ExampleScore s{};
  std::set<VerbId> gold_verbs;
  for (const auto& a : gold.annotations) gold_verbs.insert(a.verb);

  auto score_topk = [&](int k, double& verb_acc, double& value_acc, double& value_all_acc) {
    const int limit = std::min<int>(k, static_cast<int>(pred.ranked.size()));
    double best_value = 0.0;
    bool any_verb = false, any_all = false;
    for (int i = 0; i < limit; ++i) {
      const Situation& cand = pred.ranked[i].situation;
      if (!gold_verbs.count(cand.verb)) continue;
      any_verb = true;
      bool all = false;
      best_value = std::max(best_value, role_match_fraction(lex, cand, gold.annotations, &all));
      any_all = any_all || all;
    }
    verb_acc = any_verb ? 1.0 : 0.0;
    value_acc = any_verb ? best_value : 0.0;
    value_all_acc = any_all ? 1.0 : 0.0;
  };
  score_topk(1, s.top1_verb, s.top1_value, s.top1_value_all);
  score_topk(5, s.top5_verb, s.top5_value, s.top5_value_all);

  // Gold-verb condition: the first annotation's verb when annotators disagree.
  VerbId gv = gold.annotations.front().verb;
  const ScoredSituation* clamped = nullptr;
  for (const auto& c : pred.gold_verb)
    if (c.situation.verb == gv) clamped = &c;
  if (!clamped)
    throw DataError("prediction for image '" + pred.image_id +
                    "' is missing the gold-verb frame for verb '" + lex.verb_name(gv) + "'");
  bool all = false;
  s.gold_value = role_match_fraction(lex, clamped->situation, gold.annotations, &all);
  s.gold_value_all = all ? 1.0 : 0.0;
  return s;
}

MetricSet aggregate(const std::vector<ExampleScore>& scores, const std::vector<bool>& keep) {
  MetricSet m;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!keep[i]) continue;
    ++m.n_examples;
    m.top1_verb += scores[i].top1_verb;
    m.top1_value += scores[i].top1_value;
    m.top1_value_all += scores[i].top1_value_all;
    m.top5_verb += scores[i].top5_verb;
    m.top5_value += scores[i].top5_value;
    m.top5_value_all += scores[i].top5_value_all;
    m.gold_value += scores[i].gold_value;
    m.gold_value_all += scores[i].gold_value_all;
  }
  if (m.n_examples > 0) {
    const double n = static_cast<double>(m.n_examples);
    m.top1_verb /= n;
    m.top1_value /= n;
    m.top1_value_all /= n;
    m.top5_verb /= n;
    m.top5_value /= n;
    m.top5_value_all /= n;
    m.gold_value /= n;
    m.gold_value_all /= n;
    m.mean = (m.top1_verb + m.top1_value + m.top1_value_all + m.top5_verb + m.top5_value +
              m.top5_value_all + m.gold_value + m.gold_value_all) /
             8.0;
  }
  return m;
}
}  // namespace

std::vector<Prediction> predict(const Lexicon& lex, const Predictor& predictor,
                                const std::vector<Example>& data, int workers) {
  std::vector<Prediction> preds(data.size());
  auto run_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Example& ex = data[i];
      Eigen::Map<const Eigen::VectorXd> g(ex.features.data(),
                                          static_cast<Eigen::Index>(ex.features.size()));
      ScoreTable scores = predictor.score(g);
      Prediction pred;
      pred.image_id = ex.image_id;
      if (predictor.use_max_marginal) {
        InferenceState state = log_partition(lex, scores);
        pred.ranked = decode_max_marginal(lex, scores, state, predictor.top_k);
      } else {
        pred.ranked = decode_joint(lex, scores, predictor.top_k);
      }
      std::set<VerbId> verbs;
      for (const auto& a : ex.annotations) verbs.insert(a.verb);
      for (VerbId v : verbs) pred.gold_verb.push_back(decode_clamped(lex, scores, v));
      preds[i] = std::move(pred);
    }
  };
  if (workers <= 1 || data.size() < 2) {
    run_range(0, data.size());
  } else {
    const int n_threads = std::min<int>(workers, static_cast<int>(data.size()));
    std::vector<std::thread> pool;
    const std::size_t chunk = (data.size() + n_threads - 1) / n_threads;
    for (int w = 0; w < n_threads; ++w) {
      std::size_t begin = w * chunk;
      std::size_t end = std::min(data.size(), begin + chunk);
      if (begin < end) pool.emplace_back(run_range, begin, end);
    }
    for (auto& th : pool) th.join();
  }
  return preds;
}

MetricsReport evaluate(const Lexicon& lex, const std::vector<Prediction>& preds,
                       const std::vector<Example>& gold, const FrequencyTable& freq,
                       std::int64_t threshold) {
  std::map<std::string_view, const Prediction*> by_id;
  for (const auto& p : preds) by_id[p.image_id] = &p;

  std::vector<ExampleScore> scores(gold.size());
  for (std::size_t i = 0; i < gold.size(); ++i) {
    auto it = by_id.find(gold[i].image_id);
    if (it == by_id.end())
      throw DataError("missing predictions for image '" + gold[i].image_id + "'");
    scores[i] = score_example(lex, *it->second, gold[i]);
  }

  MetricsReport report;
  std::vector<bool> all(gold.size(), true);
  report.full = aggregate(scores, all);
  report.rare = aggregate(scores, rare_mask(gold, freq, threshold));
  return report;
}

std::vector<FrequencyBin> report_by_frequency(const Lexicon& lex,
                                              const std::vector<Prediction>& preds,
                                              const std::vector<Example>& gold,
                                              const FrequencyTable& freq,
                                              const std::vector<std::int64_t>& edges) {
  if (edges.empty() || edges.front() != 0)
    throw ConfigError("frequency bins must start at 0");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (edges[i] <= edges[i - 1]) throw ConfigError("frequency bin edges must be ascending");

  std::map<std::string_view, const Prediction*> by_id;
  for (const auto& p : preds) by_id[p.image_id] = &p;

  std::vector<FrequencyBin> bins(edges.size());
  for (std::size_t b = 0; b < edges.size(); ++b) {
    bins[b].lo = edges[b];
    if (b + 1 < edges.size()) bins[b].hi = edges[b + 1];
  }
  for (const auto& ex : gold) {
    auto it = by_id.find(ex.image_id);
    if (it == by_id.end())
      throw DataError("missing predictions for image '" + ex.image_id + "'");
    std::int64_t least = least_triple_count(ex, freq);
    std::size_t b = 0;
    while (b + 1 < bins.size() && least >= *bins[b].hi) ++b;
    ExampleScore s = score_example(lex, *it->second, ex);
    bins[b].n += 1;
    bins[b].top5_verb += s.top5_verb;
    bins[b].top5_value += s.top5_value;
    bins[b].top5_value_all += s.top5_value_all;
  }
  for (auto& bin : bins) {
    if (bin.n > 0) {
      bin.top5_verb /= static_cast<double>(bin.n);
      bin.top5_value /= static_cast<double>(bin.n);
      bin.top5_value_all /= static_cast<double>(bin.n);
    }
  }
  return bins;
}

namespace {
void format_row(std::ostringstream& out, const char* label, const MetricSet& m) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "%-5s | %7.2f %7.2f %9.2f | %7.2f %7.2f %9.2f | %7.2f %9.2f | %6.2f | n=%lld\n",
                label, 100 * m.top1_verb, 100 * m.top1_value, 100 * m.top1_value_all,
                100 * m.top5_verb, 100 * m.top5_value, 100 * m.top5_value_all,
                100 * m.gold_value, 100 * m.gold_value_all, 100 * m.mean,
                static_cast<long long>(m.n_examples));
  out << buf;
}
}  // namespace

std::string format_report(const MetricsReport& report) {
  std::ostringstream out;
  out << "      | top-1 predicted verb        | top-5 predicted verbs       | gold verbs"
         "        |  mean |\n";
  out << "      |    verb   value value-all   |    verb   value value-all   |   value"
         " value-all |       |\n";
  format_row(out, "full", report.full);
  format_row(out, "rare", report.rare);
  return std::move(out).str();
}

std::string format_bins(const std::vector<FrequencyBin>& bins) {
  std::ostringstream out;
  out << "bin_lo\tbin_hi\tmeasure\taccuracy\tn\n";
  for (const auto& bin : bins) {
    const std::pair<const char*, double> measures[] = {{"top5_verb", bin.top5_verb},
                                                       {"top5_value", bin.top5_value},
                                                       {"top5_value_all", bin.top5_value_all}};
    for (const auto& [name, acc] : measures) {
      out << bin.lo << '\t';
      if (bin.hi)
        out << *bin.hi;
      else
        out << "inf";
      out << '\t' << name << '\t' << (bin.empty() ? "absent" : io::fmt_double(acc)) << '\t'
          << bin.n << '\n';
    }
  }
  return std::move(out).str();
}

namespace {
std::string format_scored(const Lexicon& lex, char tag, const ScoredSituation& s) {
  std::string out;
  out += tag;
  out += ' ';
  out += io::fmt_double(s.score);
  out += ' ';
  out += format_situation(lex, s.situation);
  return out;
}

ScoredSituation parse_scored(const Lexicon& lex, std::string_view text,
                             std::string_view context) {
  auto toks = io::split_ws(text);
  if (toks.size() < 2) throw DataError("bad prediction record in " + std::string(context));
  ScoredSituation out;
  out.score = io::parse_double(toks[0], context);
  auto verb = lex.find_verb(toks[1]);
  if (!verb)
    throw DataError("unknown verb '" + std::string(toks[1]) + "' in " + std::string(context));
  out.situation.verb = *verb;
  for (std::size_t i = 2; i < toks.size(); ++i) {
    auto colon = toks[i].find(':');
    if (colon == std::string_view::npos)
      throw DataError("bad role:noun '" + std::string(toks[i]) + "' in " + std::string(context));
    auto role = lex.find_role(toks[i].substr(0, colon));
    auto noun = lex.find_noun(toks[i].substr(colon + 1));
    if (!role || !noun)
      throw DataError("unknown role or noun in '" + std::string(toks[i]) + "' in " +
                      std::string(context));
    out.situation.frame.set(*role, *noun);
  }
  return out;
}
}  // namespace

std::string serialize_predictions(const Lexicon& lex, const std::vector<Prediction>& preds) {
  std::ostringstream out;
  out << kPredictionsMagic << " v1\n";
  for (const auto& p : preds) {
    out << p.image_id;
    for (const auto& r : p.ranked) out << '\t' << format_scored(lex, 'R', r);
    for (const auto& g : p.gold_verb) out << '\t' << format_scored(lex, 'G', g);
    out << '\n';
  }
  return std::move(out).str();
}

std::vector<Prediction> parse_predictions(std::string_view content, const Lexicon& lex,
                                          std::string_view path_for_errors) {
  std::vector<Prediction> out;
  for (auto line : io::read_record_lines(content, kPredictionsMagic, path_for_errors)) {
    auto fields = io::split(line, '\t');
    Prediction pred;
    pred.image_id = std::string(fields[0]);
    for (std::size_t i = 1; i < fields.size(); ++i) {
      if (fields[i].size() < 2 || (fields[i][0] != 'R' && fields[i][0] != 'G'))
        throw DataError("bad prediction record '" + std::string(fields[i]) + "' for image '" +
                        pred.image_id + "'");
      auto rec = parse_scored(lex, fields[i].substr(2), "image '" + pred.image_id + "'");
      if (fields[i][0] == 'R')
        pred.ranked.push_back(std::move(rec));
      else
        pred.gold_verb.push_back(std::move(rec));
    }
    out.push_back(std::move(pred));
  }
  return out;
}

std::vector<Prediction> predictions_from_gold(const std::vector<Example>& gold) {
  std::vector<Prediction> preds;
  preds.reserve(gold.size());
  for (const auto& ex : gold) {
    Prediction p;
    p.image_id = ex.image_id;
    std::set<VerbId> verbs;
    for (const auto& a : ex.annotations) {
      p.ranked.push_back({a, 0.0});
      if (verbs.insert(a.verb).second) p.gold_verb.push_back({a, 0.0});
    }
    preds.push_back(std::move(p));
  }
  return preds;
}

}  // namespace sitrec
