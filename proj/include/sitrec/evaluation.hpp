#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sitrec/dataset.hpp"
#include "sitrec/inference.hpp"

namespace sitrec {

// Accuracy protocol: verb / value / value-all at top-1, top-5 and gold
// verb. The gold-verb condition has no verb measure, so a report is eight
// accuracies plus their mean.
struct MetricSet {
  double top1_verb = 0.0, top1_value = 0.0, top1_value_all = 0.0;
  double top5_verb = 0.0, top5_value = 0.0, top5_value_all = 0.0;
  double gold_value = 0.0, gold_value_all = 0.0;
  double mean = 0.0;
  std::int64_t n_examples = 0;
};

struct MetricsReport {
  MetricSet full;
  MetricSet rare;  // restricted to examples whose least-frequent triple <= threshold
};

// Ranked situations for one image plus the gold-verb-conditioned frames
// (one per distinct annotated verb).
struct Prediction {
  std::string image_id;
  std::vector<ScoredSituation> ranked;
  std::vector<ScoredSituation> gold_verb;
};

// Decodes predictions for every example: top-k ranked situations (joint or
// max-marginal) and a clamped frame per annotated verb.
struct Predictor {
  // Returns the score table for one feature vector.
  std::function<ScoreTable(FeatureRef)> score;
  bool use_max_marginal = false;
  int top_k = 5;
};
std::vector<Prediction> predict(const Lexicon& lex, const Predictor& predictor,
                                const std::vector<Example>& data, int workers = 1);

// Scores predictions against gold under the per-role any-annotator rule;
// value measures gate on a verb match among the top-k. The rare subset uses
// the least-frequent-triple rule at `threshold`.
MetricsReport evaluate(const Lexicon& lex, const std::vector<Prediction>& preds,
                       const std::vector<Example>& gold, const FrequencyTable& freq,
                       std::int64_t threshold = 10);

struct FrequencyBin {
  std::int64_t lo = 0;                       // inclusive
  std::optional<std::int64_t> hi;            // exclusive; absent = unbounded
  std::int64_t n = 0;
  double top5_verb = 0.0, top5_value = 0.0, top5_value_all = 0.0;
  bool empty() const { return n == 0; }
};

// Top-5 measures per bin of the least-frequent-triple count. `edges` are
// ascending bin lower bounds; the first must be 0.
std::vector<FrequencyBin> report_by_frequency(const Lexicon& lex,
                                              const std::vector<Prediction>& preds,
                                              const std::vector<Example>& gold,
                                              const FrequencyTable& freq,
                                              const std::vector<std::int64_t>& edges);

// Table-layout report (top-1 / top-5 / gold-verb blocks, full and rare rows).
std::string format_report(const MetricsReport& report);
std::string format_bins(const std::vector<FrequencyBin>& bins);

// Prediction dump ("sitrec-predictions v1"), one image per line; R records
// are ranked situations, G records gold-verb-conditioned frames.
std::string serialize_predictions(const Lexicon& lex, const std::vector<Prediction>& preds);
std::vector<Prediction> parse_predictions(std::string_view content, const Lexicon& lex,
                                          std::string_view path_for_errors);

// Predictions that copy gold annotations verbatim (fixture/testing helper).
std::vector<Prediction> predictions_from_gold(const std::vector<Example>& gold);

}  // namespace sitrec
