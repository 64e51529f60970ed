#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "sitrec/io_util.hpp"

namespace fs = std::filesystem;

namespace {

const char* kCli = SITREC_CLI_PATH;
const char* kFixtures = SITREC_FIXTURES_DIR;

struct TempDir {
  fs::path path;
  TempDir(const std::string& name) {
    path = fs::temp_directory_path() / ("sitrec_cli_" + name);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

int run(const std::string& args) {
  std::string cmd = std::string(kCli) + " " + args + " > /dev/null 2> /dev/null";
  int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string fixture(const std::string& name) { return std::string(kFixtures) + "/" + name; }

bool same_tree(const fs::path& a, const fs::path& b) {
  for (const auto& entry : fs::directory_iterator(a)) {
    fs::path other = b / entry.path().filename();
    if (!fs::exists(other)) return false;
    if (sitrec::io::read_file(entry.path()) != sitrec::io::read_file(other)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("synth writes a complete benchmark directory") {
  TempDir dir("synth");
  std::string config = dir.str() + "/cfg.json";
  std::ofstream(config) << "{\"n_verbs\": 4, \"n_nouns\": 16, \"cands_per_role\": 4, \"p\": 8,"
                           "\"train_size\": 40, \"dev_size\": 10}";
  int code = run("synth --seed 3 --config " + config + " --out " + dir.str() + "/out");
  CHECK(code == 0);
  CHECK(fs::exists(dir.path / "out/lexicon.lex"));
  CHECK(fs::exists(dir.path / "out/train.data"));
  CHECK(fs::exists(dir.path / "out/dev.data"));
  CHECK(fs::exists(dir.path / "out/protos.txt"));
  CHECK(fs::exists(dir.path / "out/manifest.json"));
}

TEST_CASE("train runs on the shipped fixtures and emits artifacts") {
  TempDir dir("train");
  int code = run("train --lexicon " + fixture("tiny.lex") + " --train " + fixture("tiny.data") +
                 " --dev " + fixture("tiny.data") + " --config " + fixture("opt_tiny.json") +
                 " --seed 1 --out " + dir.str());
  CHECK(code == 0);
  CHECK(fs::exists(dir.path / "model.ckpt"));
  CHECK(fs::exists(dir.path / "trace.tsv"));
  CHECK(fs::exists(dir.path / "report.txt"));
  CHECK(fs::exists(dir.path / "metrics.json"));
  CHECK(fs::exists(dir.path / "manifest.json"));
}

TEST_CASE("the full augmentation pipeline runs offline on fixtures") {
  TempDir dir("pipeline");
  // Build a synthetic corpus, derive queries, simulate retrieval, ingest,
  // pretrain, then self-train; all offline.
  std::string cfg = dir.str() + "/synth.json";
  std::ofstream(cfg) << "{\"n_verbs\": 4, \"n_nouns\": 16, \"cands_per_role\": 4, \"p\": 8,"
                        "\"train_size\": 120, \"dev_size\": 30}";
  REQUIRE(run("synth --seed 5 --config " + cfg + " --out " + dir.str() + "/data") == 0);

  std::string lex = dir.str() + "/data/lexicon.lex";
  std::string train = dir.str() + "/data/train.data";
  std::string dev = dir.str() + "/data/dev.data";

  REQUIRE(run("queries --lexicon " + lex + " --train " + train + " --full-lo 2 --full-hi 500 "
              "--single-lo 1 --out " + dir.str() + "/queries") == 0);
  CHECK(fs::exists(dir.path / "queries/queries.tsv"));

  REQUIRE(run("ingest --lexicon " + lex + " --manifest " + dir.str() + "/queries/queries.tsv" +
              " --train " + train + " --protos " + dir.str() + "/data/protos.txt" +
              " --per-phrase 5 --label-noise 0.2 --seed 9 --out " + dir.str() + "/web") == 0);
  CHECK(fs::exists(dir.path / "web/web.pdata"));
  CHECK(fs::exists(dir.path / "web/retrieval.retr"));

  std::string opt = dir.str() + "/opt.json";
  std::ofstream(opt)
      << "{\"model\": {\"family\": \"tensor+reg\", \"m\": 4, \"o\": 4, \"prune_below\": 0},"
         "\"supervised\": {\"learning_rate\": 0.2, \"batch_size\": 8, \"max_updates\": 40,"
         " \"eval_every\": 20, \"plateau_patience\": 2},"
         "\"pretrain\": {\"learning_rate\": 0.05, \"batch_size\": 8, \"max_updates\": 20}}";

  REQUIRE(run("pretrain --lexicon " + lex + " --web " + dir.str() + "/web/web.pdata" +
              " --config " + opt + " --seed 2 --out " + dir.str() + "/pre") == 0);
  CHECK(fs::exists(dir.path / "pre/model.ckpt"));

  REQUIRE(run("train --lexicon " + lex + " --train " + train + " --dev " + dev + " --config " +
              opt + " --init " + dir.str() + "/pre/model.ckpt --seed 2 --out " +
              dir.str() + "/sup") == 0);

  REQUIRE(run("selftrain --lexicon " + lex + " --train " + train + " --dev " + dev +
              " --web " + dir.str() + "/web/web.pdata --init " + dir.str() + "/sup/model.ckpt" +
              " --config " + opt + " --k 2 --seed 2 --out " + dir.str() + "/st") == 0);
  CHECK(fs::exists(dir.path / "st/model.ckpt"));

  REQUIRE(run("eval --lexicon " + lex + " --data " + dev + " --train " + train + " --model " +
              dir.str() + "/sup/model.ckpt --out " + dir.str() + "/eval") == 0);
  CHECK(fs::exists(dir.path / "eval/predictions.preds"));
  CHECK(fs::exists(dir.path / "eval/metrics.json"));

  REQUIRE(run("bins --lexicon " + lex + " --data " + dev + " --train " + train + " --preds " +
              dir.str() + "/eval/predictions.preds --edges 0 1 3 11 --out " +
              dir.str() + "/bins") == 0);
  CHECK(fs::exists(dir.path / "bins/bins.tsv"));
}

TEST_CASE("eval on predictions equal to gold reports all ones") {
  TempDir dir("goldeval");
  // Predict with the gold annotations themselves via a tiny predictions file.
  std::string preds = dir.str() + "/gold.preds";
  std::ofstream(preds)
      << "sitrec-predictions v1\n"
         "img_xyz\tR 0 carrying agent:man item:baby agentpart:chest place:outside\t"
         "G 0 carrying agent:man item:baby agentpart:chest place:outside\n";
  std::string gold = dir.str() + "/gold.data";
  std::ofstream(gold) << "sitrec-dataset v1\n"
                         "img_xyz\t1,0,0,0\tcarrying agent:man item:baby agentpart:chest "
                         "place:outside\n";
  int code = run("eval --lexicon " + fixture("tiny.lex") + " --data " + gold + " --train " +
                 gold + " --preds " + preds + " --out " + dir.str() + "/out");
  CHECK(code == 0);
  std::string metrics = sitrec::io::read_file(dir.path / "out/metrics.json");
  CHECK(metrics.find("\"mean\": 1.0") != std::string::npos);
}

TEST_CASE("oracle passes on the shipped lexicon and random instances") {
  TempDir dir("oracle");
  int code = run("oracle --lexicon " + fixture("tiny.lex") + " --trials 5 --seed 11 --out " +
                 dir.str());
  CHECK(code == 0);
  std::string report = sitrec::io::read_file(dir.path / "oracle.tsv");
  CHECK(report.find("PASS") != std::string::npos);
}

TEST_CASE("gradcheck passes for the regression family") {
  TempDir dir("gradcheck");
  int code = run("gradcheck --family reg --seed 5 --out " + dir.str());
  CHECK(code == 0);
  CHECK(fs::exists(dir.path / "gradcheck.tsv"));
}

TEST_CASE("config errors exit with code 2, data errors with 3") {
  TempDir dir("errors");
  CHECK(run("train --lexicon missing.lex --train missing.data --dev missing.data --out " +
            dir.str()) == 3);
  CHECK(run("eval --lexicon " + fixture("tiny.lex") + " --data " + fixture("tiny.data") +
            " --train " + fixture("tiny.data") + " --out " + dir.str()) == 2);
  CHECK(run("bogus-subcommand") == 2);
  CHECK(run("train") == 2);  // missing --out
}

TEST_CASE("path flags fall back to environment variables") {
  TempDir dir("envvars");
  std::string cmd = "SITREC_LEXICON=" + fixture("tiny.lex") + " SITREC_TRAIN=" +
                    fixture("tiny.data") + " " + std::string(kCli) +
                    " queries --full-lo 1 --single-lo 1 --out " + dir.str() +
                    " > /dev/null 2> /dev/null";
  CHECK(WEXITSTATUS(std::system(cmd.c_str())) == 0);
  CHECK(fs::exists(dir.path / "queries.tsv"));
}

TEST_CASE("identical seeds produce byte-identical artifacts") {
  TempDir dir("determinism");
  std::string cfg = dir.str() + "/synth.json";
  std::ofstream(cfg) << "{\"n_verbs\": 3, \"n_nouns\": 12, \"cands_per_role\": 4, \"p\": 8,"
                        "\"train_size\": 60, \"dev_size\": 20}";
  REQUIRE(run("synth --seed 17 --config " + cfg + " --out " + dir.str() + "/a") == 0);
  REQUIRE(run("synth --seed 17 --config " + cfg + " --out " + dir.str() + "/b") == 0);
  CHECK(same_tree(dir.path / "a", dir.path / "b"));

  std::string opt = dir.str() + "/opt.json";
  std::ofstream(opt)
      << "{\"model\": {\"family\": \"reg\"},"
         "\"supervised\": {\"learning_rate\": 0.3, \"batch_size\": 8, \"max_updates\": 30,"
         " \"eval_every\": 10}}";
  std::string common = " --lexicon " + dir.str() + "/a/lexicon.lex --train " + dir.str() +
                       "/a/train.data --dev " + dir.str() + "/a/dev.data --config " + opt +
                       " --seed 23 --workers 1 --out ";
  REQUIRE(run("train" + common + dir.str() + "/t1") == 0);
  REQUIRE(run("train" + common + dir.str() + "/t2") == 0);
  CHECK(same_tree(dir.path / "t1", dir.path / "t2"));
}
