#include "sitrec/model.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "sitrec/io_util.hpp"

namespace sitrec {

FamilySpec FamilySpec::parse(std::string_view text) {
  FamilySpec spec;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t pos = text.find('+', start);
    std::string_view part =
        pos == std::string_view::npos ? text.substr(start) : text.substr(start, pos - start);
    if (part == "reg" || part == "regression") {
      spec.regression = true;
    } else if (part == "tensor") {
      spec.tensor = true;
    } else if (part == "inner") {
      spec.inner = true;
    } else if (part == "noun") {
      spec.noun = true;
    } else {
      throw ConfigError("unknown potential family '" + std::string(part) + "' in '" +
                        std::string(text) + "'");
    }
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  if (!(spec.regression || spec.tensor || spec.inner || spec.noun))
    throw ConfigError("empty family spec");
  return spec;
}

std::string FamilySpec::to_string() const {
  std::string out;
  auto add = [&out](const char* part) {
    if (!out.empty()) out += '+';
    out += part;
  };
  if (tensor) add("tensor");
  if (inner) add("inner");
  if (noun) add("noun");
  if (regression) add("reg");
  return out;
}

namespace {

// Fixed-order uniform fill so init is reproducible for a given seed.
void fill_uniform(Eigen::Ref<Eigen::MatrixXd> mat, double radius, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-radius, radius);
  for (Eigen::Index c = 0; c < mat.cols(); ++c)
    for (Eigen::Index r = 0; r < mat.rows(); ++r) mat(r, c) = dist(rng);
}

}  // namespace

ModelParams init_model(const Lexicon& lex, FamilySpec family, ModelDims dims,
                       std::uint64_t seed) {
  if (dims.p <= 0) throw ConfigError("feature dimension p must be positive");
  ModelParams params;
  params.family = family;
  params.dims = dims;
  std::mt19937_64 rng(seed);

  params.regression.verb_weights = Eigen::MatrixXd::Zero(dims.p, lex.verb_count());
  if (family.regression) {
    params.regression.triple_weights = Eigen::MatrixXd::Zero(dims.p, lex.triple_count());
  } else {
    params.regression.triple_weights.resize(dims.p, 0);
  }

  if (family.tensor) {
    TensorParams tp;
    tp.m = dims.m;
    tp.o = dims.o;
    tp.noun_embeddings.resize(dims.m, lex.noun_count());
    fill_uniform(tp.noun_embeddings, 1.0 / std::sqrt(double(dims.m)), rng);
    tp.role_matrices.resize(lex.pair_count());
    for (auto& H : tp.role_matrices) {
      H.resize(dims.p, dims.o);
      fill_uniform(H, 1.0 / std::sqrt(double(dims.p)), rng);
    }
    tp.composition.resize(dims.p, Eigen::Index(dims.m) * dims.o);
    fill_uniform(tp.composition, 1.0 / std::sqrt(double(dims.m) * dims.o), rng);
    params.tensor = std::move(tp);
  }

  if (family.inner) {
    InnerProductParams ip;
    ip.m = dims.m;
    ip.t = dims.t;
    ip.noun_embeddings.resize(dims.m, lex.noun_count());
    fill_uniform(ip.noun_embeddings, 1.0 / std::sqrt(double(dims.m)), rng);
    ip.role_matrices.resize(lex.pair_count());
    for (auto& H : ip.role_matrices) {
      H.resize(Eigen::Index(dims.t) * dims.m, dims.p);
      fill_uniform(H, 1.0 / std::sqrt(double(dims.p)), rng);
    }
    params.inner = std::move(ip);
  }

  if (family.noun) {
    NounPotentialParams np;
    np.noun_weights = Eigen::MatrixXd::Zero(dims.p, lex.noun_count());
    params.noun = std::move(np);
  }
  return params;
}

ModelGrads zero_grads(const ModelParams& params) {
  ModelGrads grads;
  grads.regression.verb_weights = Eigen::MatrixXd::Zero(params.regression.verb_weights.rows(),
                                                        params.regression.verb_weights.cols());
  grads.regression.triple_weights = Eigen::MatrixXd::Zero(
      params.regression.triple_weights.rows(), params.regression.triple_weights.cols());
  if (params.tensor) {
    TensorGrads tg;
    tg.noun_embeddings = Eigen::MatrixXd::Zero(params.tensor->noun_embeddings.rows(),
                                               params.tensor->noun_embeddings.cols());
    tg.role_matrices.resize(params.tensor->role_matrices.size());
    for (std::size_t i = 0; i < tg.role_matrices.size(); ++i)
      tg.role_matrices[i] = Eigen::MatrixXd::Zero(params.tensor->role_matrices[i].rows(),
                                                  params.tensor->role_matrices[i].cols());
    tg.composition = Eigen::MatrixXd::Zero(params.tensor->composition.rows(),
                                           params.tensor->composition.cols());
    grads.tensor = std::move(tg);
  }
  if (params.inner) {
    InnerProductGrads ig;
    ig.noun_embeddings = Eigen::MatrixXd::Zero(params.inner->noun_embeddings.rows(),
                                               params.inner->noun_embeddings.cols());
    ig.role_matrices.resize(params.inner->role_matrices.size());
    for (std::size_t i = 0; i < ig.role_matrices.size(); ++i)
      ig.role_matrices[i] = Eigen::MatrixXd::Zero(params.inner->role_matrices[i].rows(),
                                                  params.inner->role_matrices[i].cols());
    grads.inner = std::move(ig);
  }
  if (params.noun) {
    NounPotentialGrads ng;
    ng.noun_weights = Eigen::MatrixXd::Zero(params.noun->noun_weights.rows(),
                                            params.noun->noun_weights.cols());
    grads.noun = std::move(ng);
  }
  return grads;
}

void prune_regression(ModelParams& params, const Lexicon& lex, const FrequencyTable& freq,
                      std::int64_t threshold) {
  if (!params.family.regression || threshold <= 0) return;
  params.regression.triple_active.assign(lex.triple_count(), 1);
  for (int v = 0; v < lex.verb_count(); ++v) {
    VerbId verb{v};
    auto roles = lex.verb_roles(verb);
    for (int pos = 0; pos < static_cast<int>(roles.size()); ++pos) {
      auto cands = lex.candidates(verb, pos);
      for (int c = 0; c < static_cast<int>(cands.size()); ++c) {
        if (freq.count(verb, roles[pos], cands[c]) < threshold)
          params.regression.triple_active[lex.triple_index(verb, pos, c)] = 0;
      }
    }
  }
}

ScoreTable score_model(const ModelParams& params, const Lexicon& lex, FeatureRef g) {
  ScoreTable table = score_regression(params.regression, lex, g);
  if (params.tensor) {
    ScoreTable t = score_tensor_fast(*params.tensor, lex, g);
    table.role_noun += t.role_noun;
  }
  if (params.inner) {
    ScoreTable t = score_inner_product(*params.inner, lex, g);
    table.role_noun += t.role_noun;
  }
  if (params.noun) add_noun_potential(*params.noun, lex, g, table);
  return table;
}

ModelGrads backprop_model(const ModelParams& params, const Lexicon& lex, FeatureRef g,
                          const ScoreTable& upstream) {
  ModelGrads grads;
  grads.regression = backprop_regression(params.regression, lex, g, upstream);
  if (params.tensor) grads.tensor = backprop_tensor(*params.tensor, lex, g, upstream);
  if (params.inner) grads.inner = backprop_inner_product(*params.inner, lex, g, upstream);
  if (params.noun) grads.noun = backprop_noun_potential(*params.noun, lex, g, upstream);
  return grads;
}

namespace {
template <class Params, class Fn>
void visit_impl(Params& params, const Fn& fn) {
  fn("verb_weights", params.regression.verb_weights);
  if (params.regression.triple_weights.cols() > 0)
    fn("reg_triple_weights", params.regression.triple_weights);
  if (params.tensor) {
    fn("tensor_noun_embeddings", params.tensor->noun_embeddings);
    for (std::size_t i = 0; i < params.tensor->role_matrices.size(); ++i)
      fn("tensor_role_matrices", params.tensor->role_matrices[i]);
    fn("tensor_composition", params.tensor->composition);
  }
  if (params.inner) {
    fn("inner_noun_embeddings", params.inner->noun_embeddings);
    for (std::size_t i = 0; i < params.inner->role_matrices.size(); ++i)
      fn("inner_role_matrices", params.inner->role_matrices[i]);
  }
  if (params.noun) fn("noun_weights", params.noun->noun_weights);
}
}  // namespace

void visit_params(ModelParams& params,
                  const std::function<void(const std::string&, Eigen::Ref<Eigen::MatrixXd>)>& fn) {
  visit_impl(params, [&fn](const char* name, Eigen::MatrixXd& mat) {
    fn(name, Eigen::Ref<Eigen::MatrixXd>(mat));
  });
}

void visit_params(const ModelParams& params,
                  const std::function<void(const std::string&, const Eigen::MatrixXd&)>& fn) {
  visit_impl(params,
             [&fn](const char* name, const Eigen::MatrixXd& mat) { fn(name, mat); });
}

void visit_grads(ModelGrads& grads,
                 const std::function<void(const std::string&, Eigen::Ref<Eigen::MatrixXd>)>& fn) {
  fn("verb_weights", grads.regression.verb_weights);
  if (grads.regression.triple_weights.cols() > 0)
    fn("reg_triple_weights", grads.regression.triple_weights);
  if (grads.tensor) {
    fn("tensor_noun_embeddings", grads.tensor->noun_embeddings);
    for (auto& H : grads.tensor->role_matrices) fn("tensor_role_matrices", H);
    fn("tensor_composition", grads.tensor->composition);
  }
  if (grads.inner) {
    fn("inner_noun_embeddings", grads.inner->noun_embeddings);
    for (auto& H : grads.inner->role_matrices) fn("inner_role_matrices", H);
  }
  if (grads.noun) fn("noun_weights", grads.noun->noun_weights);
}

namespace {
constexpr std::string_view kCheckpointMagic = "sitrec-checkpoint";

void write_matrix(std::ostream& out, std::string_view name, const Eigen::MatrixXd& mat) {
  out << "tensor\t" << name << '\t' << mat.rows() << '\t' << mat.cols() << '\n';
  for (Eigen::Index r = 0; r < mat.rows(); ++r) {
    for (Eigen::Index c = 0; c < mat.cols(); ++c) {
      if (c) out << ' ';
      out << io::fmt_hex(mat(r, c));
    }
    out << '\n';
  }
}
}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const Lexicon& lex) {
  std::ostringstream out;
  out << kCheckpointMagic << " v1\n";
  out << "family\t" << params.family.to_string() << '\n';
  out << "dims\t" << params.dims.p << '\t' << params.dims.m << '\t' << params.dims.o << '\t'
      << params.dims.t << '\n';
  out << "verbs";
  for (int v = 0; v < lex.verb_count(); ++v) out << '\t' << lex.verb_name(VerbId{v});
  out << "\nnouns";
  for (int n = 0; n < lex.noun_count(); ++n) out << '\t' << lex.noun_name(NounId{n});
  out << "\nroles";
  for (int r = 0; r < lex.role_count(); ++r) out << '\t' << lex.role_name(RoleId{r});
  out << '\n';
  if (!params.regression.triple_active.empty()) {
    out << "active\treg_triple_weights\t";
    for (auto flag : params.regression.triple_active) out << (flag ? '1' : '0');
    out << '\n';
  }
  std::ostringstream tensors;
  visit_params(params, [&tensors](const std::string& name, const Eigen::MatrixXd& mat) {
    write_matrix(tensors, name, mat);
  });
  out << tensors.str();
  io::write_file(path, out.str());
}

ModelParams load_checkpoint(const std::filesystem::path& path, const Lexicon& lex) {
  std::string content = io::read_file(path);
  auto lines = io::read_record_lines(content, kCheckpointMagic, path.string());
  std::size_t i = 0;
  auto next = [&]() -> std::string_view {
    if (i >= lines.size()) throw DataError("truncated checkpoint: " + path.string());
    return lines[i++];
  };

  auto family_fields = io::split(next(), '\t');
  if (family_fields.size() != 2 || family_fields[0] != "family")
    throw DataError("checkpoint missing family record: " + path.string());
  FamilySpec family = FamilySpec::parse(family_fields[1]);

  auto dim_fields = io::split(next(), '\t');
  if (dim_fields.size() != 5 || dim_fields[0] != "dims")
    throw DataError("checkpoint missing dims record: " + path.string());
  ModelDims dims;
  dims.p = static_cast<int>(io::parse_int(dim_fields[1], "dims.p"));
  dims.m = static_cast<int>(io::parse_int(dim_fields[2], "dims.m"));
  dims.o = static_cast<int>(io::parse_int(dim_fields[3], "dims.o"));
  dims.t = static_cast<int>(io::parse_int(dim_fields[4], "dims.t"));

  // Identifier tables must match the lexicon the model will run against.
  auto check_names = [&](std::string_view kind, int count,
                         const std::function<const std::string&(int)>& name_of) {
    auto fields = io::split(next(), '\t');
    if (fields.empty() || fields[0] != kind)
      throw DataError("checkpoint missing " + std::string(kind) + " table: " + path.string());
    if (static_cast<int>(fields.size()) - 1 != count)
      throw DataError("checkpoint " + std::string(kind) + " table size mismatch (" +
                      std::to_string(fields.size() - 1) + " vs lexicon " + std::to_string(count) +
                      "): " + path.string());
    for (int k = 0; k < count; ++k)
      if (fields[k + 1] != name_of(k))
        throw DataError("checkpoint " + std::string(kind) + " table mismatch at id " +
                        std::to_string(k) + " ('" + std::string(fields[k + 1]) + "' vs '" +
                        name_of(k) + "'): " + path.string());
  };
  check_names("verbs", lex.verb_count(),
              [&lex](int v) -> const std::string& { return lex.verb_name(VerbId{v}); });
  check_names("nouns", lex.noun_count(),
              [&lex](int n) -> const std::string& { return lex.noun_name(NounId{n}); });
  check_names("roles", lex.role_count(),
              [&lex](int r) -> const std::string& { return lex.role_name(RoleId{r}); });

  ModelParams params = init_model(lex, family, dims, /*seed=*/0);

  if (i < lines.size()) {
    auto fields = io::split(lines[i], '\t');
    if (!fields.empty() && fields[0] == "active") {
      ++i;
      if (fields.size() != 3 || fields[1] != "reg_triple_weights")
        throw DataError("bad active record in checkpoint: " + path.string());
      if (static_cast<int>(fields[2].size()) != lex.triple_count())
        throw DataError("active mask size mismatch in checkpoint: " + path.string());
      params.regression.triple_active.resize(lex.triple_count());
      for (int s = 0; s < lex.triple_count(); ++s)
        params.regression.triple_active[s] = fields[2][s] == '1';
    }
  }

  visit_params(params, [&](const std::string& name, Eigen::Ref<Eigen::MatrixXd> mat) {
    auto header = io::split(next(), '\t');
    if (header.size() != 4 || header[0] != "tensor" || header[1] != name)
      throw DataError("checkpoint tensor order mismatch, expected '" + name +
                      "': " + path.string());
    auto rows = io::parse_int(header[2], "tensor rows");
    auto cols = io::parse_int(header[3], "tensor cols");
    if (rows != mat.rows() || cols != mat.cols())
      throw DataError("checkpoint tensor '" + name + "' shape mismatch: " + path.string());
    for (Eigen::Index r = 0; r < mat.rows(); ++r) {
      auto toks = io::split_ws(next());
      if (static_cast<Eigen::Index>(toks.size()) != mat.cols())
        throw DataError("checkpoint tensor '" + name + "' row width mismatch: " + path.string());
      for (Eigen::Index c = 0; c < mat.cols(); ++c)
        mat(r, c) = io::parse_double(toks[c], "tensor " + name);
    }
  });
  if (i != lines.size()) throw DataError("trailing data in checkpoint: " + path.string());
  return params;
}

}  // namespace sitrec
