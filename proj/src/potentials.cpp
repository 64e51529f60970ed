#include "sitrec/potentials.hpp"

#include <string>

namespace sitrec {

namespace {
void check_dim(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want)
    throw NumericError(std::string("dimension mismatch in ") + what + ": got " +
                       std::to_string(got) + ", expected " + std::to_string(want));
}
}  // namespace

ScoreTable compose_scores(std::span<const ScoreTable> parts) {
  if (parts.empty()) return {};
  ScoreTable out = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) {
    check_dim(parts[i].verb.size(), out.verb.size(), "compose_scores");
    check_dim(parts[i].role_noun.size(), out.role_noun.size(), "compose_scores");
    out.verb += parts[i].verb;
    out.role_noun += parts[i].role_noun;
  }
  return out;
}

ScoreTable score_regression(const RegressionParams& params, const Lexicon& lex, FeatureRef g) {
  check_dim(g.size(), params.verb_weights.rows(), "score_regression");
  ScoreTable out = ScoreTable::zeros(lex);
  out.verb.noalias() = params.verb_weights.transpose() * g;
  if (params.has_triples()) {
    check_dim(params.triple_weights.cols(), lex.triple_count(), "score_regression triples");
    out.role_noun.noalias() = params.triple_weights.transpose() * g;
    if (!params.triple_active.empty())
      for (int s = 0; s < lex.triple_count(); ++s)
        if (!params.triple_active[s]) out.role_noun[s] = 0.0;
  }
  return out;
}

double score_tensor_naive(const TensorParams& params, const Lexicon& lex, FeatureRef g,
                          VerbId v, int role_pos, NounId n) {
  const int m = params.m, o = params.o;
  const int p = static_cast<int>(g.size());
  check_dim(params.composition.rows(), p, "score_tensor_naive");
  const Eigen::MatrixXd& H = params.role_matrices[lex.pair_index(v, role_pos)];
  check_dim(H.rows(), p, "score_tensor_naive H");
  Eigen::VectorXd d = params.noun_embeddings.col(n.v);
  Eigen::VectorXd r = H.transpose() * g;  // o

  // Full m x o x p tensor C .* (d (x) r (x) g), then the triple sum.
  std::vector<double> tensor(static_cast<std::size_t>(m) * o * p);
  for (int x = 0; x < m; ++x)
    for (int y = 0; y < o; ++y)
      for (int z = 0; z < p; ++z)
        tensor[(static_cast<std::size_t>(x) * o + y) * p + z] =
            params.composition(z, x * o + y) * d[x] * r[y] * g[z];
  double sum = 0.0;
  for (double val : tensor) sum += val;
  return sum;
}

ScoreTable score_tensor_fast(const TensorParams& params, const Lexicon& lex, FeatureRef g) {
  const int m = params.m, o = params.o;
  check_dim(params.composition.rows(), g.size(), "score_tensor_fast");
  check_dim(params.composition.cols(), static_cast<Eigen::Index>(m) * o, "score_tensor_fast A");
  ScoreTable out = ScoreTable::zeros(lex);

  // u = A^T g, reshaped so row x holds the o weights paired with noun dim x.
  Eigen::VectorXd u = params.composition.transpose() * g;
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> U(
      u.data(), m, o);

  for (int v = 0; v < lex.verb_count(); ++v) {
    VerbId verb{v};
    const int n_roles = static_cast<int>(lex.verb_roles(verb).size());
    for (int pos = 0; pos < n_roles; ++pos) {
      const Eigen::MatrixXd& H = params.role_matrices[lex.pair_index(verb, pos)];
      Eigen::VectorXd r = H.transpose() * g;  // o
      Eigen::VectorXd w = U * r;              // m; score of noun n is d_n . w
      auto cands = lex.candidates(verb, pos);
      const int base = lex.triple_index(verb, pos, 0);
      for (int c = 0; c < static_cast<int>(cands.size()); ++c)
        out.role_noun[base + c] = params.noun_embeddings.col(cands[c].v).dot(w);
    }
  }
  return out;
}

ScoreTable score_inner_product(const InnerProductParams& params, const Lexicon& lex,
                               FeatureRef g) {
  const int m = params.m;
  ScoreTable out = ScoreTable::zeros(lex);
  for (int v = 0; v < lex.verb_count(); ++v) {
    VerbId verb{v};
    const int n_roles = static_cast<int>(lex.verb_roles(verb).size());
    for (int pos = 0; pos < n_roles; ++pos) {
      const Eigen::MatrixXd& H = params.role_matrices[lex.pair_index(verb, pos)];
      check_dim(H.cols(), g.size(), "score_inner_product H");
      check_dim(H.rows(), static_cast<Eigen::Index>(params.t) * m, "score_inner_product H rows");
      Eigen::VectorXd z = H * g;  // t*m stacked
      Eigen::VectorXd zsum = Eigen::VectorXd::Zero(m);
      for (int k = 0; k < params.t; ++k) zsum += z.segment(static_cast<Eigen::Index>(k) * m, m);
      auto cands = lex.candidates(verb, pos);
      const int base = lex.triple_index(verb, pos, 0);
      for (int c = 0; c < static_cast<int>(cands.size()); ++c)
        out.role_noun[base + c] = params.noun_embeddings.col(cands[c].v).dot(zsum);
    }
  }
  return out;
}

Eigen::VectorXd score_noun_potential(const NounPotentialParams& params, FeatureRef g) {
  check_dim(g.size(), params.noun_weights.rows(), "score_noun_potential");
  return params.noun_weights.transpose() * g;
}

void add_noun_potential(const NounPotentialParams& params, const Lexicon& lex, FeatureRef g,
                        ScoreTable& table) {
  Eigen::VectorXd per_noun = score_noun_potential(params, g);
  for (int v = 0; v < lex.verb_count(); ++v) {
    VerbId verb{v};
    const int n_roles = static_cast<int>(lex.verb_roles(verb).size());
    for (int pos = 0; pos < n_roles; ++pos) {
      auto cands = lex.candidates(verb, pos);
      const int base = lex.triple_index(verb, pos, 0);
      for (int c = 0; c < static_cast<int>(cands.size()); ++c)
        table.role_noun[base + c] += per_noun[cands[c].v];
    }
  }
}

RegressionGrads backprop_regression(const RegressionParams& params, const Lexicon& lex,
                                    FeatureRef g, const ScoreTable& upstream) {
  check_dim(upstream.verb.size(), params.verb_weights.cols(), "backprop_regression");
  RegressionGrads grads;
  grads.verb_weights.noalias() = g * upstream.verb.transpose();
  if (params.has_triples()) {
    Eigen::VectorXd up = upstream.role_noun;
    if (!params.triple_active.empty())
      for (int s = 0; s < lex.triple_count(); ++s)
        if (!params.triple_active[s]) up[s] = 0.0;
    grads.triple_weights.noalias() = g * up.transpose();
  } else {
    grads.triple_weights.resize(g.size(), 0);
  }
  return grads;
}

TensorGrads backprop_tensor(const TensorParams& params, const Lexicon& lex, FeatureRef g,
                            const ScoreTable& upstream) {
  const int m = params.m, o = params.o;
  TensorGrads grads;
  grads.noun_embeddings = Eigen::MatrixXd::Zero(m, params.noun_embeddings.cols());
  grads.role_matrices.resize(params.role_matrices.size());
  Eigen::VectorXd kron_sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m) * o);
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> Ksum(
      kron_sum.data(), m, o);

  Eigen::VectorXd u = params.composition.transpose() * g;
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> U(
      u.data(), m, o);

  for (int v = 0; v < lex.verb_count(); ++v) {
    VerbId verb{v};
    const int n_roles = static_cast<int>(lex.verb_roles(verb).size());
    for (int pos = 0; pos < n_roles; ++pos) {
      const int pair = lex.pair_index(verb, pos);
      const Eigen::MatrixXd& H = params.role_matrices[pair];
      Eigen::VectorXd r = H.transpose() * g;  // o
      Eigen::VectorXd w = U * r;              // m

      auto cands = lex.candidates(verb, pos);
      const int base = lex.triple_index(verb, pos, 0);
      Eigen::VectorXd dsum = Eigen::VectorXd::Zero(m);  // sum_n up_n d_n
      for (int c = 0; c < static_cast<int>(cands.size()); ++c) {
        const double up = upstream.role_noun[base + c];
        if (up == 0.0) continue;
        dsum.noalias() += up * params.noun_embeddings.col(cands[c].v);
        grads.noun_embeddings.col(cands[c].v).noalias() += up * w;
      }
      // d(phi)/dH = g (U^T dsum)^T, d(phi)/dA accumulates g (dsum kron r)^T.
      grads.role_matrices[pair].noalias() = g * (U.transpose() * dsum).transpose();
      Ksum.noalias() += dsum * r.transpose();
    }
  }
  grads.composition.noalias() = g * kron_sum.transpose();
  return grads;
}

InnerProductGrads backprop_inner_product(const InnerProductParams& params, const Lexicon& lex,
                                         FeatureRef g, const ScoreTable& upstream) {
  const int m = params.m;
  InnerProductGrads grads;
  grads.noun_embeddings = Eigen::MatrixXd::Zero(m, params.noun_embeddings.cols());
  grads.role_matrices.resize(params.role_matrices.size());

  for (int v = 0; v < lex.verb_count(); ++v) {
    VerbId verb{v};
    const int n_roles = static_cast<int>(lex.verb_roles(verb).size());
    for (int pos = 0; pos < n_roles; ++pos) {
      const int pair = lex.pair_index(verb, pos);
      const Eigen::MatrixXd& H = params.role_matrices[pair];
      Eigen::VectorXd z = H * g;
      Eigen::VectorXd zsum = Eigen::VectorXd::Zero(m);
      for (int k = 0; k < params.t; ++k) zsum += z.segment(static_cast<Eigen::Index>(k) * m, m);

      auto cands = lex.candidates(verb, pos);
      const int base = lex.triple_index(verb, pos, 0);
      Eigen::VectorXd dsum = Eigen::VectorXd::Zero(m);
      for (int c = 0; c < static_cast<int>(cands.size()); ++c) {
        const double up = upstream.role_noun[base + c];
        if (up == 0.0) continue;
        dsum.noalias() += up * params.noun_embeddings.col(cands[c].v);
        grads.noun_embeddings.col(cands[c].v).noalias() += up * zsum;
      }
      // Every k block shares the gradient dsum g^T.
      Eigen::MatrixXd block = dsum * g.transpose();
      grads.role_matrices[pair].resize(H.rows(), H.cols());
      for (int k = 0; k < params.t; ++k)
        grads.role_matrices[pair].middleRows(static_cast<Eigen::Index>(k) * m, m) = block;
    }
  }
  return grads;
}

NounPotentialGrads backprop_noun_potential(const NounPotentialParams& params, const Lexicon& lex,
                                           FeatureRef g, const ScoreTable& upstream) {
  Eigen::VectorXd per_noun = Eigen::VectorXd::Zero(params.noun_weights.cols());
  for (int v = 0; v < lex.verb_count(); ++v) {
    VerbId verb{v};
    const int n_roles = static_cast<int>(lex.verb_roles(verb).size());
    for (int pos = 0; pos < n_roles; ++pos) {
      auto cands = lex.candidates(verb, pos);
      const int base = lex.triple_index(verb, pos, 0);
      for (int c = 0; c < static_cast<int>(cands.size()); ++c)
        per_noun[cands[c].v] += upstream.role_noun[base + c];
    }
  }
  NounPotentialGrads grads;
  grads.noun_weights.noalias() = g * per_noun.transpose();
  return grads;
}

}  // namespace sitrec
