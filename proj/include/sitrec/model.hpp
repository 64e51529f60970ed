#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include "sitrec/dataset.hpp"
#include "sitrec/potentials.hpp"

namespace sitrec {

// Which role-noun potential families are composed. The verb potential is
// always a per-verb regression; "regression" here selects the per-triple
// regressions on top of it.
struct FamilySpec {
  bool regression = false;
  bool tensor = false;
  bool inner = false;
  bool noun = false;

  bool compositional() const { return tensor || inner || noun; }
  static FamilySpec parse(std::string_view text);  // e.g. "tensor+reg", ConfigError on junk
  std::string to_string() const;                   // canonical form

  friend bool operator==(const FamilySpec&, const FamilySpec&) = default;
};

struct ModelDims {
  int p = 0;   // feature dimension
  int m = 32;  // noun embedding size
  int o = 32;  // tensor role representation size
  int t = 16;  // inner-product matrix count
};

struct ModelParams {
  FamilySpec family;
  ModelDims dims;
  RegressionParams regression;  // verb_weights always present; triples iff family.regression
  std::optional<TensorParams> tensor;
  std::optional<InnerProductParams> inner;
  std::optional<NounPotentialParams> noun;
};

struct ModelGrads {
  RegressionGrads regression;
  std::optional<TensorGrads> tensor;
  std::optional<InnerProductGrads> inner;
  std::optional<NounPotentialGrads> noun;
};

// Embeddings and bilinear maps start uniform in [-r, r] with r = 1/sqrt(fan-in);
// all regressions start at zero.
ModelParams init_model(const Lexicon& lex, FamilySpec family, ModelDims dims, std::uint64_t seed);

// Zero-shaped gradients congruent with params (also the velocity buffer).
ModelGrads zero_grads(const ModelParams& params);

// Drops regression triples observed fewer than `threshold` times; only
// meaningful when regression is composed with a compositional family.
void prune_regression(ModelParams& params, const Lexicon& lex, const FrequencyTable& freq,
                      std::int64_t threshold);

ScoreTable score_model(const ModelParams& params, const Lexicon& lex, FeatureRef g);
ModelGrads backprop_model(const ModelParams& params, const Lexicon& lex, FeatureRef g,
                          const ScoreTable& upstream);

// Visits every parameter tensor as a flat coefficient array, paired with a
// stable name. Grads visit in the identical order.
void visit_params(ModelParams& params,
                  const std::function<void(const std::string&, Eigen::Ref<Eigen::MatrixXd>)>& fn);
void visit_params(const ModelParams& params,
                  const std::function<void(const std::string&, const Eigen::MatrixXd&)>& fn);
void visit_grads(ModelGrads& grads,
                 const std::function<void(const std::string&, Eigen::Ref<Eigen::MatrixXd>)>& fn);

// Checkpoint container ("sitrec-checkpoint v1"): family tag, dimension
// header, identifier tables, then row-major tensors in hex floats.
// Round-trips bit-exactly.
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const Lexicon& lex);
ModelParams load_checkpoint(const std::filesystem::path& path, const Lexicon& lex);

}  // namespace sitrec
