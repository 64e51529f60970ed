#include "sitrec/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <sstream>

#include "sitrec/io_util.hpp"

namespace sitrec {

void SynthConfig::validate() const {
  if (n_verbs < 1 || roles_per_frame < 1 || n_nouns < 1 || p < 1)
    throw ConfigError("synth: verb, role, noun and feature counts must be positive");
  if (cands_per_role < 1) throw ConfigError("synth: cands_per_role must be positive");
  if (n_nouns < roles_per_frame)
    throw ConfigError("synth: need at least one noun per role pool");
  if (cands_per_role > n_nouns / roles_per_frame)
    throw ConfigError("synth: cands_per_role exceeds the per-role noun pool (" +
                      std::to_string(n_nouns / roles_per_frame) + ")");
  if (exponent < 0) throw ConfigError("synth: exponent must be non-negative");
  if (noise < 0) throw ConfigError("synth: noise must be non-negative");
  if (p_null < 0 || p_null >= 1) throw ConfigError("synth: p_null must be in [0, 1)");
  if (annotators < 1) throw ConfigError("synth: annotators must be at least 1");
  if (train_size < 0 || dev_size < 0) throw ConfigError("synth: split sizes must be non-negative");
}

namespace {

std::string padded(const char* prefix, int i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%0*d", prefix, width, i);
  return buf;
}

const char* kPrepositions[] = {"with", "at", "on", "in"};

}  // namespace

SynthData synth_generate(const SynthConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const int vw = cfg.n_verbs > 999 ? 5 : 3;
  const int nw = cfg.n_nouns > 999 ? 5 : 3;

  std::vector<std::string> verb_names(cfg.n_verbs), noun_names(cfg.n_nouns);
  for (int v = 0; v < cfg.n_verbs; ++v) verb_names[v] = padded("v", v, vw);
  for (int n = 0; n < cfg.n_nouns; ++n) noun_names[n] = padded("n", n, nw);
  std::vector<std::string> role_names(cfg.roles_per_frame);
  for (int r = 0; r < cfg.roles_per_frame; ++r) role_names[r] = padded("role", r, 1);

  // Disjoint per-role noun pools; rank within a pool drives popularity.
  const int pool_size = cfg.n_nouns / cfg.roles_per_frame;
  auto pool_of = [&](int role) {
    std::vector<int> pool;
    for (int j = role * pool_size; j < (role + 1) * pool_size; ++j) pool.push_back(j);
    return pool;
  };

  std::vector<std::vector<std::string>> glosses(cfg.n_nouns);
  for (int n = 0; n < cfg.n_nouns; ++n) glosses[n] = {noun_names[n]};

  std::vector<std::pair<std::string, std::vector<std::string>>> frames;
  std::vector<std::tuple<std::string, std::string, std::string>> verb_defs;
  std::map<std::pair<std::string, std::string>, std::vector<std::string>> cand_lists;

  // One frame per verb; template slots cycle through fixed prepositions.
  for (int v = 0; v < cfg.n_verbs; ++v) {
    std::string fname = padded("f", v, vw);
    frames.emplace_back(fname, role_names);
    std::string tmpl = "{" + role_names[0] + "} " + verb_names[v];
    for (int r = 1; r < cfg.roles_per_frame; ++r)
      tmpl += " {" + std::string(kPrepositions[(r - 1) % 4]) + " " + role_names[r] + "}";
    verb_defs.emplace_back(verb_names[v], fname, tmpl);
  }

  // Candidate subsets: seeded sample without replacement from the pool.
  std::vector<std::vector<std::vector<int>>> cand_ids(cfg.n_verbs);
  for (int v = 0; v < cfg.n_verbs; ++v) {
    cand_ids[v].resize(cfg.roles_per_frame);
    for (int r = 0; r < cfg.roles_per_frame; ++r) {
      std::vector<int> pool = pool_of(r);
      for (int i = 0; i < cfg.cands_per_role; ++i) {
        std::uniform_int_distribution<int> pick(i, static_cast<int>(pool.size()) - 1);
        std::swap(pool[i], pool[pick(rng)]);
      }
      pool.resize(cfg.cands_per_role);
      std::sort(pool.begin(), pool.end());
      cand_ids[v][r] = pool;
      auto& names = cand_lists[{verb_names[v], role_names[r]}];
      for (int n : pool) names.push_back(noun_names[n]);
    }
  }

  SynthData data;
  data.lexicon = Lexicon::build(noun_names, glosses, role_names, frames, verb_defs, cand_lists);
  const Lexicon& lex = data.lexicon;

  SynthProtos& protos = data.protos;
  protos.p = cfg.p;
  protos.noise = cfg.noise;
  const double coord_sd = 1.0 / std::sqrt(static_cast<double>(cfg.p));
  protos.verb_protos.resize(cfg.p, cfg.n_verbs);
  for (int v = 0; v < cfg.n_verbs; ++v)
    for (int i = 0; i < cfg.p; ++i) protos.verb_protos(i, v) = coord_sd * gauss(rng);
  protos.noun_protos = Eigen::MatrixXd::Zero(cfg.p, lex.noun_count());
  for (int n = 1; n < lex.noun_count(); ++n)
    for (int i = 0; i < cfg.p; ++i) protos.noun_protos(i, n) = coord_sd * gauss(rng);
  protos.popularity = Eigen::VectorXd::Zero(lex.noun_count());
  for (int n = 0; n < cfg.n_nouns; ++n) {
    int rank_in_pool = n % pool_size;  // generator id order; pools are contiguous
    NounId id = *lex.find_noun(noun_names[n]);
    protos.popularity[id.v] = std::pow(1.0 + rank_in_pool, -cfg.exponent);
  }

  // Generator ids coincide with lexicon ids only by construction of the
  // name padding; resolve through the lexicon to stay honest.
  std::vector<VerbId> verb_ids(cfg.n_verbs);
  for (int v = 0; v < cfg.n_verbs; ++v) verb_ids[v] = *lex.find_verb(verb_names[v]);
  std::vector<NounId> noun_ids(cfg.n_nouns);
  for (int n = 0; n < cfg.n_nouns; ++n) noun_ids[n] = *lex.find_noun(noun_names[n]);
  std::vector<RoleId> role_ids(cfg.roles_per_frame);
  for (int r = 0; r < cfg.roles_per_frame; ++r) role_ids[r] = *lex.find_role(role_names[r]);

  auto sample_noun = [&](int v, int r) -> NounId {
    if (unit(rng) < cfg.p_null) return kNullNoun;
    const auto& cands = cand_ids[v][r];
    double total = 0.0;
    for (int n : cands) total += protos.popularity[noun_ids[n].v];
    double u = unit(rng) * total;
    for (int n : cands) {
      u -= protos.popularity[noun_ids[n].v];
      if (u <= 0) return noun_ids[n];
    }
    return noun_ids[cands.back()];
  };

  auto make_example = [&](const std::string& image_id) {
    Example ex;
    ex.image_id = image_id;
    std::uniform_int_distribution<int> pick_verb(0, cfg.n_verbs - 1);
    const int v = pick_verb(rng);
    Situation truth;
    truth.verb = verb_ids[v];
    for (int r = 0; r < cfg.roles_per_frame; ++r)
      truth.frame.set(role_ids[r], sample_noun(v, r));

    Eigen::VectorXd g = protos.verb_protos.col(verb_ids[v].v);
    for (auto [role, noun] : truth.frame.assignments())
      if (noun != kNullNoun) g += protos.noun_protos.col(noun.v);
    for (int i = 0; i < cfg.p; ++i) g[i] += cfg.noise * coord_sd * gauss(rng);

    ex.features.assign(g.data(), g.data() + cfg.p);
    ex.annotations.push_back(truth);
    for (int a = 1; a < cfg.annotators; ++a) {
      Situation alt = truth;
      for (auto [role, noun] : truth.frame.assignments())
        if (noun != kNullNoun && unit(rng) < cfg.annotator_null) alt.frame.set(role, kNullNoun);
      ex.annotations.push_back(std::move(alt));
    }
    return ex;
  };

  data.train.reserve(cfg.train_size);
  for (int i = 0; i < cfg.train_size; ++i) data.train.push_back(make_example(padded("train_", i, 6)));
  data.dev.reserve(cfg.dev_size);
  for (int i = 0; i < cfg.dev_size; ++i) data.dev.push_back(make_example(padded("dev_", i, 6)));
  return data;
}

namespace {
constexpr std::string_view kProtosMagic = "sitrec-protos";

void write_matrix_rows(std::ostringstream& out, std::string_view tag, const Eigen::MatrixXd& mat) {
  out << tag << '\t' << mat.rows() << '\t' << mat.cols() << '\n';
  for (Eigen::Index r = 0; r < mat.rows(); ++r) {
    for (Eigen::Index c = 0; c < mat.cols(); ++c) {
      if (c) out << ' ';
      out << io::fmt_hex(mat(r, c));
    }
    out << '\n';
  }
}
}  // namespace

void save_protos(const std::filesystem::path& path, const SynthProtos& protos) {
  std::ostringstream out;
  out << kProtosMagic << " v1\n";
  out << "dims\t" << protos.p << '\t' << io::fmt_hex(protos.noise) << '\n';
  write_matrix_rows(out, "verb_protos", protos.verb_protos);
  write_matrix_rows(out, "noun_protos", protos.noun_protos);
  write_matrix_rows(out, "popularity", protos.popularity);
  io::write_file(path, out.str());
}

SynthProtos load_protos(const std::filesystem::path& path) {
  std::string content = io::read_file(path);
  auto lines = io::read_record_lines(content, kProtosMagic, path.string());
  std::size_t i = 0;
  auto next = [&]() -> std::string_view {
    if (i >= lines.size()) throw DataError("truncated protos file: " + path.string());
    return lines[i++];
  };
  auto dims = io::split(next(), '\t');
  if (dims.size() != 3 || dims[0] != "dims")
    throw DataError("protos file missing dims record: " + path.string());
  SynthProtos protos;
  protos.p = static_cast<int>(io::parse_int(dims[1], "protos p"));
  protos.noise = io::parse_double(dims[2], "protos noise");

  auto read_matrix = [&](std::string_view tag, Eigen::MatrixXd& mat) {
    auto header = io::split(next(), '\t');
    if (header.size() != 3 || header[0] != tag)
      throw DataError("protos file missing " + std::string(tag) + ": " + path.string());
    auto rows = io::parse_int(header[1], "rows");
    auto cols = io::parse_int(header[2], "cols");
    mat.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      auto toks = io::split_ws(next());
      if (static_cast<Eigen::Index>(toks.size()) != cols)
        throw DataError("protos row width mismatch in " + std::string(tag));
      for (Eigen::Index c = 0; c < cols; ++c)
        mat(r, c) = io::parse_double(toks[c], "protos value");
    }
  };
  read_matrix("verb_protos", protos.verb_protos);
  read_matrix("noun_protos", protos.noun_protos);
  Eigen::MatrixXd pop;
  read_matrix("popularity", pop);
  protos.popularity = pop.col(0);
  if (pop.cols() != 1) throw DataError("popularity must be a single column: " + path.string());
  return protos;
}

}  // namespace sitrec
