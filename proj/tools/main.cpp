// sitrec: situation-recognition experiments over precomputed feature vectors.
// Subcommands cover data generation, training, semantic augmentation,
// evaluation and the brute-force verification suites.

#include <CLI11.hpp>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <map>
#include <optional>
#include <random>
#include <string>

#include "sitrec/augmentation.hpp"
#include "sitrec/evaluation.hpp"
#include "sitrec/io_util.hpp"
#include "sitrec/model.hpp"
#include "sitrec/oracle.hpp"
#include "sitrec/synth.hpp"
#include "sitrec/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sitrec;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct CommonFlags {
  std::uint64_t seed = 1;
  int workers = 1;
  std::string out;
  std::string config;
};

// Path flags may be overridden through SITREC_* environment variables when
// the flag is not given explicitly.
void env_override(const CLI::App* cmd, const std::string& flag, std::string& value,
                  const char* env_name) {
  if (cmd->count(flag) > 0) return;
  if (const char* env = std::getenv(env_name); env && *env && value.empty()) value = env;
}

json load_config_json(const std::string& path) {
  if (path.empty()) return json::object();
  json parsed = json::parse(io::read_file(path), nullptr, false);
  if (parsed.is_discarded()) throw ConfigError("config file is not valid JSON: " + path);
  if (!parsed.is_object()) throw ConfigError("config file must hold a JSON object: " + path);
  return parsed;
}

template <class T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("bad config value for '") + key + "'");
  }
}

OptimizerConfig optimizer_from_json(const json& section, std::uint64_t seed) {
  OptimizerConfig cfg;
  cfg.learning_rate = get_or(section, "learning_rate", cfg.learning_rate);
  cfg.momentum = get_or(section, "momentum", cfg.momentum);
  cfg.weight_decay = get_or(section, "weight_decay", cfg.weight_decay);
  if (section.contains("clip_norm")) {
    if (section.at("clip_norm").is_null())
      cfg.clip_norm.reset();
    else
      cfg.clip_norm = section.at("clip_norm").get<double>();
  }
  cfg.batch_size = get_or(section, "batch_size", cfg.batch_size);
  cfg.plateau_patience = get_or(section, "plateau_patience", cfg.plateau_patience);
  cfg.decay_factor = get_or(section, "decay_factor", cfg.decay_factor);
  cfg.max_updates = get_or<std::int64_t>(section, "max_updates", cfg.max_updates);
  cfg.seed = seed;
  cfg.validate();
  return cfg;
}

struct ModelConfig {
  FamilySpec family = FamilySpec::parse("tensor+reg");
  int m = 0, o = 0, t = 0;          // 0: resolve per family defaults
  std::int64_t prune_below = -1;    // -1: default by family composition
};

ModelConfig model_from_json(const json& section, const std::string& family_flag) {
  ModelConfig cfg;
  std::string family = get_or<std::string>(section, "family", "tensor+reg");
  if (!family_flag.empty()) family = family_flag;
  cfg.family = FamilySpec::parse(family);
  cfg.m = get_or(section, "m", 0);
  cfg.o = get_or(section, "o", 0);
  cfg.t = get_or(section, "t", 0);
  cfg.prune_below = get_or<std::int64_t>(section, "prune_below", -1);
  return cfg;
}

ModelDims resolve_dims(const ModelConfig& cfg, int p) {
  ModelDims dims;
  dims.p = p;
  // Paper-scale defaults: tensor embeddings 32/32; the inner-product family
  // alone runs best at m = 16 with t = 16.
  const bool inner_only = cfg.family.inner && !cfg.family.tensor;
  dims.m = cfg.m > 0 ? cfg.m : (inner_only ? 16 : 32);
  dims.o = cfg.o > 0 ? cfg.o : 32;
  dims.t = cfg.t > 0 ? cfg.t : 16;
  return dims;
}

std::int64_t resolve_prune(const ModelConfig& cfg) {
  if (cfg.prune_below >= 0) return cfg.prune_below;
  return (cfg.family.regression && cfg.family.compositional()) ? 10 : 0;
}

std::optional<bool> resolve_decode(const std::string& decode_flag) {
  if (decode_flag.empty() || decode_flag == "auto") return std::nullopt;
  if (decode_flag == "joint") return false;
  if (decode_flag == "max-marginal") return true;
  throw ConfigError("unknown decode mode '" + decode_flag + "'");
}

// Every run drops a manifest beside its artifacts: the resolved seed, a
// hash of the config, and content hashes of the inputs.
struct Manifest {
  std::string command;
  std::uint64_t seed = 0;
  int workers = 1;
  json config = json::object();
  std::map<std::string, std::string> inputs;
  std::vector<std::string> outputs;

  void add_input(const std::string& path) {
    if (!path.empty()) inputs[path] = io::file_hash(path);
  }
  void write(const fs::path& out_dir) const {
    json doc;
    doc["command"] = command;
    doc["seed"] = seed;
    doc["workers"] = workers;
    doc["config_hash"] = io::content_hash(config.dump());
    doc["inputs"] = inputs;
    doc["outputs"] = outputs;
    io::write_file(out_dir / "manifest.json", doc.dump(2) + "\n");
  }
};

fs::path require_out(const CommonFlags& flags) {
  if (flags.out.empty()) throw ConfigError("--out is required");
  fs::path out(flags.out);
  fs::create_directories(out);
  return out;
}

std::string format_trace(const TrainResult& result) {
  std::string text = "update\tlr\ttrain_loss";
  for (const char* split : {"full", "rare"})
    for (const char* metric :
         {"top1_verb", "top1_value", "top1_value_all", "top5_verb", "top5_value",
          "top5_value_all", "gold_value", "gold_value_all", "mean", "n"})
      text += '\t' + std::string(split) + '_' + metric;
  text += '\n';
  for (const auto& e : result.trace) {
    text += std::to_string(e.update_count) + '\t' + io::fmt_double(e.lr) + '\t' +
            io::fmt_double(e.train_loss);
    for (const MetricSet* m : {&e.dev.full, &e.dev.rare}) {
      for (double v : {m->top1_verb, m->top1_value, m->top1_value_all, m->top5_verb,
                       m->top5_value, m->top5_value_all, m->gold_value, m->gold_value_all,
                       m->mean})
        text += '\t' + io::fmt_double(v);
      text += '\t' + std::to_string(m->n_examples);
    }
    text += '\n';
  }
  return text;
}

json metrics_json(const MetricsReport& report) {
  auto set_to_json = [](const MetricSet& m) {
    json j;
    j["top1_verb"] = m.top1_verb;
    j["top1_value"] = m.top1_value;
    j["top1_value_all"] = m.top1_value_all;
    j["top5_verb"] = m.top5_verb;
    j["top5_value"] = m.top5_value;
    j["top5_value_all"] = m.top5_value_all;
    j["gold_value"] = m.gold_value;
    j["gold_value_all"] = m.gold_value_all;
    j["mean"] = m.mean;
    j["n_examples"] = m.n_examples;
    return j;
  };
  json j;
  j["full"] = set_to_json(report.full);
  j["rare"] = set_to_json(report.rare);
  return j;
}

std::vector<Prediction> predict_with_model(const Lexicon& lex, const ModelParams& params,
                                           const std::vector<Example>& data,
                                           std::optional<bool> decode_mm, int workers) {
  Predictor predictor;
  predictor.score = [&params, &lex](FeatureRef g) { return score_model(params, lex, g); };
  predictor.use_max_marginal = decode_mm.value_or(params.family.compositional());
  predictor.top_k = 5;
  return predict(lex, predictor, data, workers);
}

// --- subcommand bodies -------------------------------------------------------

int run_synth(const CommonFlags& flags) {
  fs::path out = require_out(flags);
  json config = load_config_json(flags.config);

  SynthConfig cfg;
  cfg.n_verbs = get_or(config, "n_verbs", cfg.n_verbs);
  cfg.roles_per_frame = get_or(config, "roles_per_frame", cfg.roles_per_frame);
  cfg.n_nouns = get_or(config, "n_nouns", cfg.n_nouns);
  cfg.p = get_or(config, "p", cfg.p);
  cfg.cands_per_role = get_or(config, "cands_per_role", cfg.cands_per_role);
  cfg.exponent = get_or(config, "exponent", cfg.exponent);
  cfg.noise = get_or(config, "noise", cfg.noise);
  cfg.p_null = get_or(config, "p_null", cfg.p_null);
  cfg.annotators = get_or(config, "annotators", cfg.annotators);
  cfg.annotator_null = get_or(config, "annotator_null", cfg.annotator_null);
  cfg.train_size = get_or(config, "train_size", cfg.train_size);
  cfg.dev_size = get_or(config, "dev_size", cfg.dev_size);

  SynthData data = synth_generate(cfg, flags.seed);
  io::write_file(out / "lexicon.lex", serialize_lexicon(data.lexicon));
  io::write_file(out / "train.data", serialize_dataset(data.lexicon, data.train));
  io::write_file(out / "dev.data", serialize_dataset(data.lexicon, data.dev));
  save_protos(out / "protos.txt", data.protos);

  Manifest manifest{"synth", flags.seed, flags.workers, config, {}, {}};
  manifest.add_input(flags.config);
  manifest.outputs = {"lexicon.lex", "train.data", "dev.data", "protos.txt"};
  manifest.write(out);
  std::cout << "synth: |V|=" << data.lexicon.verb_count() << " |N|=" << data.lexicon.noun_count()
            << " train=" << data.train.size() << " dev=" << data.dev.size() << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string lexicon, train, dev, family, decode, init;
};

int run_train(const CommonFlags& flags, const TrainArgs& args) {
  fs::path out = require_out(flags);
  json config = load_config_json(flags.config);

  Lexicon lex = load_lexicon(args.lexicon);
  auto train_set = load_dataset(args.train, lex);
  auto dev_set = load_dataset(args.dev, lex);
  if (train_set.empty()) throw DataError("empty training set: " + args.train);
  FrequencyTable freq = count_frequencies(lex, train_set);

  ModelConfig model_cfg = model_from_json(config.value("model", json::object()), args.family);
  const int p = static_cast<int>(train_set.front().features.size());
  ModelParams params;
  if (!args.init.empty()) {
    params = load_checkpoint(args.init, lex);
    if (!args.family.empty() && FamilySpec::parse(args.family) != params.family)
      throw ConfigError("--family conflicts with the checkpoint family '" +
                        params.family.to_string() + "'");
    model_cfg.family = params.family;
  } else {
    params = init_model(lex, model_cfg.family, resolve_dims(model_cfg, p), flags.seed);
  }
  prune_regression(params, lex, freq, resolve_prune(model_cfg));

  TrainOptions options;
  options.opt = optimizer_from_json(config.value("supervised", json::object()), flags.seed);
  options.eval_every = get_or(config.value("supervised", json::object()), "eval_every", 250);
  options.decode_max_marginal = resolve_decode(args.decode);
  options.workers = flags.workers;

  TrainResult result = train_supervised(lex, train_set, dev_set, freq, std::move(params), options);

  save_checkpoint(out / "model.ckpt", result.best.params, lex);
  io::write_file(out / "trace.tsv", format_trace(result));
  auto preds = predict_with_model(lex, result.best.params, dev_set,
                                  options.decode_max_marginal, flags.workers);
  MetricsReport report = evaluate(lex, preds, dev_set, freq);
  io::write_file(out / "report.txt", format_report(report));
  io::write_file(out / "metrics.json", metrics_json(report).dump(2) + "\n");

  Manifest manifest{"train", flags.seed, flags.workers, config, {}, {}};
  manifest.add_input(flags.config);
  manifest.add_input(args.lexicon);
  manifest.add_input(args.train);
  manifest.add_input(args.dev);
  manifest.add_input(args.init);
  manifest.outputs = {"model.ckpt", "trace.tsv", "report.txt", "metrics.json"};
  manifest.write(out);
  std::cout << format_report(report);
  std::cout << "best dev mean " << io::fmt_double(result.best.best_dev_metric) << " at update "
            << result.best.update_count << "\n";
  return kExitOk;
}

struct PretrainArgs {
  std::string lexicon, web, family;
};

int run_pretrain(const CommonFlags& flags, const PretrainArgs& args) {
  fs::path out = require_out(flags);
  json config = load_config_json(flags.config);

  Lexicon lex = load_lexicon(args.lexicon);
  auto web = load_web_set(args.web, lex);
  if (web.empty()) throw DataError("empty web set: " + args.web);

  ModelConfig model_cfg = model_from_json(config.value("model", json::object()), args.family);
  const int p = static_cast<int>(web.front().features.size());
  ModelParams params = init_model(lex, model_cfg.family, resolve_dims(model_cfg, p), flags.seed);

  TrainOptions options;
  options.opt = optimizer_from_json(config.value("pretrain", json::object()), flags.seed);
  options.workers = flags.workers;

  TrainState state = pretrain_marginal(lex, web, std::move(params), options);
  save_checkpoint(out / "model.ckpt", state.params, lex);

  Manifest manifest{"pretrain", flags.seed, flags.workers, config, {}, {}};
  manifest.add_input(flags.config);
  manifest.add_input(args.lexicon);
  manifest.add_input(args.web);
  manifest.outputs = {"model.ckpt"};
  manifest.write(out);
  std::cout << "pretrain: " << state.update_count << " updates over " << web.size()
            << " web examples\n";
  return kExitOk;
}

struct SelfTrainArgs {
  std::string lexicon, train, dev, web, init, decode;
  std::vector<int> k_schedule = {10, 20};
};

int run_selftrain(const CommonFlags& flags, const SelfTrainArgs& args) {
  fs::path out = require_out(flags);
  json config = load_config_json(flags.config);

  Lexicon lex = load_lexicon(args.lexicon);
  auto train_set = load_dataset(args.train, lex);
  auto dev_set = load_dataset(args.dev, lex);
  auto web = load_web_set(args.web, lex);
  FrequencyTable freq = count_frequencies(lex, train_set);

  ModelParams ranker = load_checkpoint(args.init, lex);
  auto ranker_preds =
      predict_with_model(lex, ranker, dev_set, resolve_decode(args.decode), flags.workers);
  double ranker_mean = evaluate(lex, ranker_preds, dev_set, freq).full.mean;

  SelfTrainOptions options;
  options.pretrain.opt = optimizer_from_json(config.value("pretrain", json::object()), flags.seed);
  options.pretrain.workers = flags.workers;
  options.supervised.opt =
      optimizer_from_json(config.value("supervised", json::object()), flags.seed);
  options.supervised.eval_every =
      get_or(config.value("supervised", json::object()), "eval_every", 250);
  options.supervised.decode_max_marginal = resolve_decode(args.decode);
  options.supervised.workers = flags.workers;
  options.k_schedule = args.k_schedule;
  options.init_seed = flags.seed;

  TrainResult result =
      self_train_loop(lex, web, train_set, dev_set, freq, ranker, ranker_mean, options);

  save_checkpoint(out / "model.ckpt", result.best.params, lex);
  auto preds = predict_with_model(lex, result.best.params, dev_set, resolve_decode(args.decode),
                                  flags.workers);
  MetricsReport report = evaluate(lex, preds, dev_set, freq);
  io::write_file(out / "report.txt", format_report(report));
  io::write_file(out / "metrics.json", metrics_json(report).dump(2) + "\n");

  Manifest manifest{"selftrain", flags.seed, flags.workers, config, {}, {}};
  manifest.add_input(flags.config);
  manifest.add_input(args.lexicon);
  manifest.add_input(args.train);
  manifest.add_input(args.dev);
  manifest.add_input(args.web);
  manifest.add_input(args.init);
  manifest.outputs = {"model.ckpt", "report.txt", "metrics.json"};
  manifest.write(out);
  std::cout << format_report(report);
  std::cout << "self-train best dev mean " << io::fmt_double(result.best.best_dev_metric) << "\n";
  return kExitOk;
}

struct QueriesArgs {
  std::string lexicon, train;
  std::int64_t full_lo = 10, full_hi = 100, single_lo = 3;
  int max_single_pairs = 1;
};

int run_queries(const CommonFlags& flags, const QueriesArgs& args) {
  fs::path out = require_out(flags);
  Lexicon lex = load_lexicon(args.lexicon);
  auto train_set = load_dataset(args.train, lex);
  FrequencyTable freq = count_frequencies(lex, train_set);
  QueryBands bands{args.full_lo, args.full_hi, args.single_lo, args.max_single_pairs};
  QueryManifest manifest = select_queries(lex, freq, bands);
  io::write_file(out / "queries.tsv", serialize_query_manifest(lex, manifest));

  Manifest run{"queries", flags.seed, flags.workers, json::object(), {}, {}};
  run.config["full_lo"] = args.full_lo;
  run.config["full_hi"] = args.full_hi;
  run.config["single_lo"] = args.single_lo;
  run.config["max_single_pairs"] = args.max_single_pairs;
  run.add_input(args.lexicon);
  run.add_input(args.train);
  run.outputs = {"queries.tsv"};
  run.write(out);
  std::cout << "queries: kept " << manifest.entries.size() << " phrases\n";
  return kExitOk;
}

struct IngestArgs {
  std::string lexicon, manifest, train, retrieval, protos;
  int per_phrase = 50;
  double label_noise = 0.0;
  int cap = 200;
};

int run_ingest(const CommonFlags& flags, const IngestArgs& args) {
  fs::path out = require_out(flags);
  Lexicon lex = load_lexicon(args.lexicon);
  QueryManifest manifest =
      parse_query_manifest(io::read_file(args.manifest), lex, args.manifest);
  std::vector<Example> train_set;
  if (!args.train.empty()) train_set = load_dataset(args.train, lex);

  std::vector<RetrievalRecord> records;
  std::vector<std::string> outputs;
  if (!args.retrieval.empty()) {
    records = parse_retrieval(io::read_file(args.retrieval), args.retrieval);
  } else if (!args.protos.empty()) {
    SynthProtos protos = load_protos(args.protos);
    records = simulate_retrieval(lex, manifest, protos, args.per_phrase, args.label_noise,
                                 flags.seed);
    io::write_file(out / "retrieval.retr", serialize_retrieval(records));
    outputs.push_back("retrieval.retr");
  } else {
    throw ConfigError("ingest needs either --retrieval or --protos");
  }

  IngestOptions options;
  options.per_phrase_cap = args.cap;
  auto web = ingest_web_set(lex, manifest, records, train_set, options);
  io::write_file(out / "web.pdata", serialize_web_set(lex, web));
  outputs.push_back("web.pdata");

  Manifest run{"ingest", flags.seed, flags.workers, json::object(), {}, {}};
  run.config["per_phrase"] = args.per_phrase;
  run.config["label_noise"] = args.label_noise;
  run.config["cap"] = args.cap;
  run.add_input(args.lexicon);
  run.add_input(args.manifest);
  run.add_input(args.train);
  run.add_input(args.retrieval);
  run.add_input(args.protos);
  run.outputs = outputs;
  run.write(out);
  std::cout << "ingest: " << records.size() << " records -> " << web.size() << " web examples\n";
  return kExitOk;
}

struct EvalArgs {
  std::string lexicon, data, train, model, preds, decode;
  std::int64_t threshold = 10;
};

int run_eval(const CommonFlags& flags, const EvalArgs& args) {
  fs::path out = require_out(flags);
  Lexicon lex = load_lexicon(args.lexicon);
  auto data = load_dataset(args.data, lex);
  auto train_set = load_dataset(args.train, lex);
  FrequencyTable freq = count_frequencies(lex, train_set);

  std::vector<Prediction> preds;
  std::vector<std::string> outputs = {"report.txt", "metrics.json"};
  if (!args.model.empty()) {
    ModelParams params = load_checkpoint(args.model, lex);
    preds = predict_with_model(lex, params, data, resolve_decode(args.decode), flags.workers);
    io::write_file(out / "predictions.preds", serialize_predictions(lex, preds));
    outputs.push_back("predictions.preds");
  } else if (!args.preds.empty()) {
    preds = parse_predictions(io::read_file(args.preds), lex, args.preds);
  } else {
    throw ConfigError("eval needs either --model or --preds");
  }

  MetricsReport report = evaluate(lex, preds, data, freq, args.threshold);
  io::write_file(out / "report.txt", format_report(report));
  io::write_file(out / "metrics.json", metrics_json(report).dump(2) + "\n");

  Manifest run{"eval", flags.seed, flags.workers, json::object(), {}, {}};
  run.config["threshold"] = args.threshold;
  run.add_input(args.lexicon);
  run.add_input(args.data);
  run.add_input(args.train);
  run.add_input(args.model);
  run.add_input(args.preds);
  run.outputs = outputs;
  run.write(out);
  std::cout << format_report(report);
  return kExitOk;
}

struct BinsArgs {
  EvalArgs eval;
  std::vector<std::int64_t> edges = {0, 1, 3, 11, 26, 51, 101};
};

int run_bins(const CommonFlags& flags, const BinsArgs& args) {
  fs::path out = require_out(flags);
  Lexicon lex = load_lexicon(args.eval.lexicon);
  auto data = load_dataset(args.eval.data, lex);
  auto train_set = load_dataset(args.eval.train, lex);
  FrequencyTable freq = count_frequencies(lex, train_set);

  std::vector<Prediction> preds;
  if (!args.eval.model.empty()) {
    ModelParams params = load_checkpoint(args.eval.model, lex);
    preds =
        predict_with_model(lex, params, data, resolve_decode(args.eval.decode), flags.workers);
  } else if (!args.eval.preds.empty()) {
    preds = parse_predictions(io::read_file(args.eval.preds), lex, args.eval.preds);
  } else {
    throw ConfigError("bins needs either --model or --preds");
  }

  auto bins = report_by_frequency(lex, preds, data, freq, args.edges);
  io::write_file(out / "bins.tsv", format_bins(bins));

  Manifest run{"bins", flags.seed, flags.workers, json::object(), {}, {}};
  run.config["edges"] = args.edges;
  run.add_input(args.eval.lexicon);
  run.add_input(args.eval.data);
  run.add_input(args.eval.train);
  run.add_input(args.eval.model);
  run.add_input(args.eval.preds);
  run.outputs = {"bins.tsv"};
  run.write(out);
  std::cout << format_bins(bins);
  return kExitOk;
}

int run_gradcheck(const CommonFlags& flags, const std::string& family, double tolerance) {
  fs::path out = require_out(flags);
  GradCheckReport report = family.empty() ? grad_check_all(tolerance, flags.seed)
                                          : grad_check(FamilySpec::parse(family), tolerance,
                                                       flags.seed);
  std::string text;
  for (const auto& e : report.entries) {
    text += e.family + '\t' + e.objective + '\t' + e.tensor + '\t' +
            io::fmt_double(e.max_rel_err) + '\t' + (e.max_rel_err < tolerance ? "ok" : "FAIL") +
            '\n';
  }
  text += "worst\t" + io::fmt_double(report.worst) + '\t' +
          (report.passed ? "PASS" : "FAIL") + '\n';
  io::write_file(out / "gradcheck.tsv", text);
  std::cout << text;

  Manifest run{"gradcheck", flags.seed, flags.workers, json::object(), {}, {}};
  run.config["tolerance"] = tolerance;
  run.config["family"] = family.empty() ? "all" : family;
  run.outputs = {"gradcheck.tsv"};
  run.write(out);
  if (!report.passed) throw NumericError("gradient check failed: worst relative error " +
                                         io::fmt_double(report.worst));
  return kExitOk;
}

int run_oracle(const CommonFlags& flags, const std::string& lexicon_path, int trials) {
  fs::path out = require_out(flags);
  std::string text;
  double worst = 0.0;
  bool decode_ok = true;

  auto check_instance = [&](const Lexicon& lex, const ScoreTable& scores,
                            const std::string& label, std::uint64_t seed) {
    InferenceState state = log_partition(lex, scores);
    double dz = std::abs(state.log_partition - oracle_log_partition(lex, scores));

    long double total = 0.0L;
    auto all = enumerate_situations(lex);
    for (const auto& s : all)
      total += expl(static_cast<long double>(log_prob(lex, scores, state, s)));
    double dnorm = std::abs(static_cast<double>(total) - 1.0);

    std::mt19937_64 rng(seed ^ 0xabcdef);
    std::uniform_int_distribution<std::size_t> pick(0, all.size() - 1);
    double dmarg = 0.0;
    for (int i = 0; i < 3; ++i) {
      const Situation& s = all[pick(rng)];
      RealizedFrame partial;
      auto roles = lex.verb_roles(s.verb);
      for (std::size_t r = 0; r + 1 < roles.size(); r += 2)
        partial.set(roles[r], *s.frame.get(roles[r]));
      dmarg = std::max(dmarg,
                       std::abs(marginal_log_prob(lex, scores, state, s.verb, partial) -
                                oracle_marginal_log_prob(lex, scores, s.verb, partial)));
    }

    auto decoded = decode_joint(lex, scores, 1);
    bool agree = decoded[0].situation == oracle_argmax(lex, scores);
    decode_ok = decode_ok && agree;

    worst = std::max({worst, dz, dnorm, dmarg});
    text += label + "\tpartition=" + io::fmt_double(dz) + "\tnormalization=" +
            io::fmt_double(dnorm) + "\tmarginal=" + io::fmt_double(dmarg) + "\tdecode=" +
            (agree ? "ok" : "MISMATCH") + '\n';
  };

  if (!lexicon_path.empty()) {
    Lexicon lex = load_lexicon(lexicon_path);
    std::mt19937_64 rng(flags.seed);
    std::uniform_real_distribution<double> dist(-4.0, 4.0);
    ScoreTable scores = ScoreTable::zeros(lex);
    for (Eigen::Index i = 0; i < scores.verb.size(); ++i) scores.verb[i] = dist(rng);
    for (Eigen::Index i = 0; i < scores.role_noun.size(); ++i) scores.role_noun[i] = dist(rng);
    check_instance(lex, scores, "lexicon", flags.seed);
  }
  for (int t = 0; t < trials; ++t) {
    OracleInstance inst = random_oracle_instance(flags.seed + static_cast<std::uint64_t>(t));
    check_instance(inst.lexicon, inst.scores, "random_" + std::to_string(t), flags.seed + t);
  }
  text += "worst\t" + io::fmt_double(worst) + '\t' +
          ((worst < 1e-9 && decode_ok) ? "PASS" : "FAIL") + '\n';
  io::write_file(out / "oracle.tsv", text);
  std::cout << text;

  Manifest run{"oracle", flags.seed, flags.workers, json::object(), {}, {}};
  run.config["trials"] = trials;
  run.add_input(lexicon_path);
  run.outputs = {"oracle.tsv"};
  run.write(out);
  if (worst >= 1e-9 || !decode_ok)
    throw NumericError("oracle deltas exceed 1e-9 (worst " + io::fmt_double(worst) + ")");
  return kExitOk;
}

void emit_error(int code, const std::string& message) {
  json record;
  record["error"]["code"] = code;
  record["error"]["message"] = message;
  std::cerr << record.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"situation recognition experiments"};
  app.require_subcommand(1);

  CommonFlags flags;
  TrainArgs train_args;
  PretrainArgs pretrain_args;
  SelfTrainArgs selftrain_args;
  QueriesArgs queries_args;
  IngestArgs ingest_args;
  EvalArgs eval_args;
  BinsArgs bins_args;
  std::string gradcheck_family;
  double gradcheck_tolerance = 1e-4;
  std::string oracle_lexicon;
  int oracle_trials = 20;

  auto add_common = [&flags](CLI::App* cmd) {
    cmd->add_option("--seed", flags.seed, "random seed");
    cmd->add_option("--workers", flags.workers, "concurrent per-example workers")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--out", flags.out, "output directory");
    cmd->add_option("--config", flags.config, "JSON config file");
  };

  CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic benchmark");
  add_common(synth_cmd);

  CLI::App* train_cmd = app.add_subcommand("train", "supervised training");
  add_common(train_cmd);
  train_cmd->add_option("--lexicon", train_args.lexicon, "lexicon file");
  train_cmd->add_option("--train", train_args.train, "training dataset");
  train_cmd->add_option("--dev", train_args.dev, "development dataset");
  train_cmd->add_option("--family", train_args.family,
                        "potential families, e.g. reg, tensor+reg, inner+reg, noun+reg");
  train_cmd->add_option("--decode", train_args.decode, "joint | max-marginal | auto");
  train_cmd->add_option("--init", train_args.init, "checkpoint to start from");

  CLI::App* pretrain_cmd = app.add_subcommand("pretrain", "marginal-likelihood pretraining");
  add_common(pretrain_cmd);
  pretrain_cmd->add_option("--lexicon", pretrain_args.lexicon, "lexicon file");
  pretrain_cmd->add_option("--web", pretrain_args.web, "web set file");
  pretrain_cmd->add_option("--family", pretrain_args.family, "potential families");

  CLI::App* selftrain_cmd = app.add_subcommand("selftrain", "self-training loop");
  add_common(selftrain_cmd);
  selftrain_cmd->add_option("--lexicon", selftrain_args.lexicon, "lexicon file");
  selftrain_cmd->add_option("--train", selftrain_args.train, "training dataset");
  selftrain_cmd->add_option("--dev", selftrain_args.dev, "development dataset");
  selftrain_cmd->add_option("--web", selftrain_args.web, "web set file");
  selftrain_cmd->add_option("--init", selftrain_args.init, "supervised checkpoint (the ranker)");
  selftrain_cmd->add_option("--decode", selftrain_args.decode, "joint | max-marginal | auto");
  selftrain_cmd->add_option("--k", selftrain_args.k_schedule, "k schedule, e.g. --k 10 20");

  CLI::App* queries_cmd = app.add_subcommand("queries", "emit the query manifest");
  add_common(queries_cmd);
  queries_cmd->add_option("--lexicon", queries_args.lexicon, "lexicon file");
  queries_cmd->add_option("--train", queries_args.train, "training dataset");
  queries_cmd->add_option("--full-lo", queries_args.full_lo, "full band lower bound (inclusive)");
  queries_cmd->add_option("--full-hi", queries_args.full_hi, "full band upper bound (inclusive)");
  queries_cmd->add_option("--single-lo", queries_args.single_lo,
                          "single-noun band lower bound (inclusive)");

  CLI::App* ingest_cmd = app.add_subcommand("ingest", "build a web set from retrieval results");
  add_common(ingest_cmd);
  ingest_cmd->add_option("--lexicon", ingest_args.lexicon, "lexicon file");
  ingest_cmd->add_option("--manifest", ingest_args.manifest, "query manifest");
  ingest_cmd->add_option("--train", ingest_args.train, "training dataset (duplicate removal)");
  ingest_cmd->add_option("--retrieval", ingest_args.retrieval, "retrieval results file");
  ingest_cmd->add_option("--protos", ingest_args.protos,
                         "prototype file: simulate retrieval instead");
  ingest_cmd->add_option("--per-phrase", ingest_args.per_phrase, "simulated records per phrase");
  ingest_cmd->add_option("--label-noise", ingest_args.label_noise,
                         "simulated fraction of mislabeled records");
  ingest_cmd->add_option("--cap", ingest_args.cap, "per-phrase cap");

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a model or a predictions file");
  add_common(eval_cmd);
  eval_cmd->add_option("--lexicon", eval_args.lexicon, "lexicon file");
  eval_cmd->add_option("--data", eval_args.data, "dataset to score");
  eval_cmd->add_option("--train", eval_args.train, "training dataset (frequency table)");
  eval_cmd->add_option("--model", eval_args.model, "model checkpoint");
  eval_cmd->add_option("--preds", eval_args.preds, "predictions file");
  eval_cmd->add_option("--decode", eval_args.decode, "joint | max-marginal | auto");
  eval_cmd->add_option("--threshold", eval_args.threshold, "rare threshold");

  CLI::App* bins_cmd = app.add_subcommand("bins", "accuracy by training frequency");
  add_common(bins_cmd);
  bins_cmd->add_option("--lexicon", bins_args.eval.lexicon, "lexicon file");
  bins_cmd->add_option("--data", bins_args.eval.data, "dataset to score");
  bins_cmd->add_option("--train", bins_args.eval.train, "training dataset (frequency table)");
  bins_cmd->add_option("--model", bins_args.eval.model, "model checkpoint");
  bins_cmd->add_option("--preds", bins_args.eval.preds, "predictions file");
  bins_cmd->add_option("--decode", bins_args.eval.decode, "joint | max-marginal | auto");
  bins_cmd->add_option("--edges", bins_args.edges, "bin lower bounds, first must be 0");

  CLI::App* gradcheck_cmd = app.add_subcommand("gradcheck", "finite-difference gradient check");
  add_common(gradcheck_cmd);
  gradcheck_cmd->add_option("--family", gradcheck_family, "single family (default: all)");
  gradcheck_cmd->add_option("--tolerance", gradcheck_tolerance, "max relative error");

  CLI::App* oracle_cmd = app.add_subcommand("oracle", "brute-force verification suite");
  add_common(oracle_cmd);
  oracle_cmd->add_option("--lexicon", oracle_lexicon, "also check this lexicon");
  oracle_cmd->add_option("--trials", oracle_trials, "random lexica to verify");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    emit_error(kExitConfig, e.what());
    return kExitConfig;
  }

  try {
    CLI::App* cmd = app.get_subcommands().front();
    env_override(cmd, "--out", flags.out, "SITREC_OUT");
    if (cmd == train_cmd) {
      env_override(cmd, "--lexicon", train_args.lexicon, "SITREC_LEXICON");
      env_override(cmd, "--train", train_args.train, "SITREC_TRAIN");
      env_override(cmd, "--dev", train_args.dev, "SITREC_DEV");
      return run_train(flags, train_args);
    }
    if (cmd == synth_cmd) return run_synth(flags);
    if (cmd == pretrain_cmd) {
      env_override(cmd, "--lexicon", pretrain_args.lexicon, "SITREC_LEXICON");
      env_override(cmd, "--web", pretrain_args.web, "SITREC_WEB");
      return run_pretrain(flags, pretrain_args);
    }
    if (cmd == selftrain_cmd) {
      env_override(cmd, "--lexicon", selftrain_args.lexicon, "SITREC_LEXICON");
      env_override(cmd, "--train", selftrain_args.train, "SITREC_TRAIN");
      env_override(cmd, "--dev", selftrain_args.dev, "SITREC_DEV");
      env_override(cmd, "--web", selftrain_args.web, "SITREC_WEB");
      return run_selftrain(flags, selftrain_args);
    }
    if (cmd == queries_cmd) {
      env_override(cmd, "--lexicon", queries_args.lexicon, "SITREC_LEXICON");
      env_override(cmd, "--train", queries_args.train, "SITREC_TRAIN");
      return run_queries(flags, queries_args);
    }
    if (cmd == ingest_cmd) {
      env_override(cmd, "--lexicon", ingest_args.lexicon, "SITREC_LEXICON");
      env_override(cmd, "--train", ingest_args.train, "SITREC_TRAIN");
      return run_ingest(flags, ingest_args);
    }
    if (cmd == eval_cmd) {
      env_override(cmd, "--lexicon", eval_args.lexicon, "SITREC_LEXICON");
      env_override(cmd, "--train", eval_args.train, "SITREC_TRAIN");
      return run_eval(flags, eval_args);
    }
    if (cmd == bins_cmd) {
      env_override(cmd, "--lexicon", bins_args.eval.lexicon, "SITREC_LEXICON");
      env_override(cmd, "--train", bins_args.eval.train, "SITREC_TRAIN");
      return run_bins(flags, bins_args);
    }
    if (cmd == gradcheck_cmd) return run_gradcheck(flags, gradcheck_family, gradcheck_tolerance);
    if (cmd == oracle_cmd) return run_oracle(flags, oracle_lexicon, oracle_trials);
    emit_error(kExitConfig, "unknown subcommand");
    return kExitConfig;
  } catch (const ConfigError& e) {
    emit_error(kExitConfig, e.what());
    return kExitConfig;
  } catch (const DataError& e) {
    emit_error(kExitData, e.what());
    return kExitData;
  } catch (const NumericError& e) {
    emit_error(kExitNumeric, e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    emit_error(kExitNumeric, std::string("unexpected error: ") + e.what());
    return kExitNumeric;
  }
}
