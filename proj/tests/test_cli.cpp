#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "adsq/adsq.hpp"
#include "scratch_dir.hpp"

using namespace adsq;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Run cli(const ScratchDir& dir, const std::string& args) {
  const std::string out = dir.file("stdout.txt");
  const std::string err = dir.file("stderr.txt");
  const std::string cmd = std::string(ADSQ_CLI_PATH) + " " + args + " >" + out + " 2>" + err;
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  return json::parse(in);
}

const char* kSmallTrain =
    " --set encoder_hidden=[16] --semantic-dim 8 --outer-rounds 2 --batch-size 16 --t-label 2 --t-img 1"
    " --lr-min 1e-6 --lr-max 1e-5 --lr-steps 2";

std::string synth_small(const ScratchDir& dir, const std::string& name = "data") {
  const auto out = dir.file(name);
  const auto r = cli(dir, "synth --classes 4 --dim 8 --per-class 20 --queries-per-class 5 --seed 7 --out " + out);
  EXPECT_EQ(r.code, 0) << r.err;
  return out;
}

std::string train_small(const ScratchDir& dir, const std::string& data, const std::string& extra = "") {
  const auto model = dir.file("model");
  const auto r = cli(dir, "train --features " + data + "/train.feat --labels " + data + "/train.lab --out " + model +
                              kSmallTrain + " " + extra);
  EXPECT_EQ(r.code, 0) << r.err;
  return model;
}

}  // namespace

TEST(CliSynth, WritesFilesAndManifest) {
  ScratchDir dir;
  const auto out = dir.file("data");
  const auto r = cli(dir, "synth --classes 4 --dim 32 --per-class 100 --seed 7 --out " + out);
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"train.feat", "train.lab", "query.feat", "query.lab", "manifest.json"})
    EXPECT_TRUE(std::filesystem::exists(out + "/" + f)) << f;
  const auto m = load_json(out + "/manifest.json");
  EXPECT_EQ(m["command"], "synth");
  EXPECT_EQ(m["seeds"]["synth"], 7);
  EXPECT_EQ(m["outputs"].size(), 4u);
  EXPECT_TRUE(m.contains("version"));
  EXPECT_TRUE(m.contains("wall_clock_seconds"));
  EXPECT_EQ(load_features(out + "/train.feat").rows(), 400);
}

TEST(CliSynth, MissingOutIsUsageError) {
  ScratchDir dir;
  EXPECT_EQ(cli(dir, "synth --classes 4").code, 2);
  EXPECT_EQ(cli(dir, "").code, 2);
  EXPECT_EQ(cli(dir, "frobnicate").code, 2);
  EXPECT_EQ(cli(dir, "synth --help").code, 0);
}

TEST(CliSynth, SameFlagsSameDigests) {
  ScratchDir dir;
  const auto a = synth_small(dir, "a");
  const auto b = synth_small(dir, "b");
  const auto ma = load_json(a + "/manifest.json")["outputs"];
  const auto mb = load_json(b + "/manifest.json")["outputs"];
  for (const char* f : {"train.feat", "train.lab", "query.feat", "query.lab"})
    EXPECT_EQ(ma[a + "/" + f], mb[b + "/" + f]) << f;
}

TEST(CliSynth, InvalidSpecIsRuntimeError) {
  ScratchDir dir;
  EXPECT_EQ(cli(dir, "synth --classes 1 --out " + dir.file("d")).code, 1);
}

TEST(CliTrain, WritesModelDirectory) {
  ScratchDir dir;
  const auto data = synth_small(dir);
  const auto model = train_small(dir, data);
  for (const char* f : {"label.net", "imgx.net", "imgy.net", "bx.codes", "by.codes", "train_log.csv", "config.json",
                        "manifest.json"})
    EXPECT_TRUE(std::filesystem::exists(model + "/" + f)) << f;
  const auto m = load_json(model + "/manifest.json");
  EXPECT_EQ(m["command"], "train");
  EXPECT_EQ(m["inputs"].size(), 2u);
  EXPECT_TRUE(m["wall_clock_seconds"].contains("wstep"));
  EXPECT_TRUE(m["wall_clock_seconds"].contains("bstep"));
  EXPECT_EQ(load_codes(model + "/bx.codes").k_total, 8u);
}

TEST(CliTrain, PublishedDefaultsWhenOmitted) {
  ScratchDir dir;
  const auto data = synth_small(dir);
  const auto model = train_small(dir, data);
  const auto c = load_json(model + "/config.json");
  EXPECT_EQ(c["alpha"], 1.0);
  EXPECT_EQ(c["beta"], 1.0);
  EXPECT_EQ(c["gamma"], 0.01);
  EXPECT_EQ(c["nu"], 10.0);
  EXPECT_EQ(c["eta"], 10.0);
  EXPECT_EQ(c["semantic_dim"], 8);
}

TEST(CliTrain, FlagsOverrideConfigFile) {
  ScratchDir dir;
  const auto data = synth_small(dir);
  {
    std::ofstream cfg(dir.file("cfg.json"));
    cfg << R"({"alpha": 0.5, "outer_rounds": 1, "seed": 3})";
  }
  const auto r = cli(dir, "train --config " + dir.file("cfg.json") + " --features " + data + "/train.feat --labels " +
                              data + "/train.lab --out " + dir.file("m") + kSmallTrain + " --seed 9");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto c = load_json(dir.file("m") + "/config.json");
  EXPECT_EQ(c["alpha"], 0.5);
  EXPECT_EQ(c["seed"], 9);
  EXPECT_EQ(c["outer_rounds"], 2);  // flag from kSmallTrain wins over the file
}

TEST(CliTrain, SymmetricVariantSharesWeights) {
  ScratchDir dir;
  const auto data = synth_small(dir);
  const auto model = train_small(dir, data, "--variant sym");
  EXPECT_EQ(read_raw(model + "/imgx.net"), read_raw(model + "/imgy.net"));
  EXPECT_EQ(load_json(model + "/config.json")["variant"], "symmetric");
}

TEST(CliTrain, UnknownConfigKeyNamed) {
  ScratchDir dir;
  const auto data = synth_small(dir);
  const auto r = cli(dir, "train --features " + data + "/train.feat --labels " + data + "/train.lab --out " +
                              dir.file("m") + " --set lerning_rate=0.1");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("lerning_rate"), std::string::npos) << r.err;
}

TEST(CliTrain, UnknownKeyInConfigFile) {
  ScratchDir dir;
  const auto data = synth_small(dir);
  {
    std::ofstream cfg(dir.file("cfg.json"));
    cfg << R"({"alfa": 1})";
  }
  const auto r = cli(dir, "train --config " + dir.file("cfg.json") + " --features " + data + "/train.feat --labels " +
                              data + "/train.lab --out " + dir.file("m"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("alfa"), std::string::npos) << r.err;
}

TEST(CliTrain, TrainingErrorExitsOne) {
  ScratchDir dir;
  const auto data = synth_small(dir);
  const auto r = cli(dir, "train --features " + data + "/train.feat --labels " + data + "/train.lab --out " +
                              dir.file("m") + " --set encoder_hidden=[16] --semantic-dim 8 --outer-rounds 2 --batch-size 16" +
                              " --t-label 2 --t-img 1 --lr-min 1e6 --lr-max 1e6 --lr-steps 2 --set weight_decay=0");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("round"), std::string::npos) << r.err;
}

TEST(CliTrain, MissingInputsIsUsageError) {
  ScratchDir dir;
  EXPECT_EQ(cli(dir, "train --out " + dir.file("m")).code, 2);
}

TEST(CliEncode, MatchesForwardSigns) {
  ScratchDir dir;
  const auto data = synth_small(dir);
  const auto model = train_small(dir, data);
  const auto r = cli(dir, "encode --model " + model + " --features " + data + "/train.feat --out " + dir.file("t.codes"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto codes = load_codes(dir.file("t.codes"));
  EXPECT_EQ(codes.k_total, 16u);
  const Matrix x = load_features(data + "/train.feat");
  const Matrix b = unpack(codes);
  const Matrix ux = forward(load_params(model + "/imgx.net"), x).u;
  const Matrix uy = forward(load_params(model + "/imgy.net"), x).u;
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < 8; ++j) {
      ASSERT_EQ(b(i, j), ux(i, j) >= 0.0 ? 1.0 : -1.0);
      ASSERT_EQ(b(i, 8 + j), uy(i, j) >= 0.0 ? 1.0 : -1.0);
    }
  EXPECT_TRUE(std::filesystem::exists(dir.file("t.codes") + ".manifest.json"));
}

TEST(CliEncode, Deterministic) {
  ScratchDir dir;
  const auto data = synth_small(dir);
  const auto model = train_small(dir, data);
  for (const char* name : {"a.codes", "b.codes"})
    ASSERT_EQ(cli(dir, "encode --model " + model + " --features " + data + "/query.feat --out " + dir.file(name)).code, 0);
  EXPECT_EQ(read_raw(dir.file("a.codes")), read_raw(dir.file("b.codes")));
}

TEST(CliEncode, EmptyOrMismatchedFeatures) {
  ScratchDir dir;
  const auto data = synth_small(dir);
  const auto model = train_small(dir, data);
  write_raw(dir.file("empty.feat"), {});
  EXPECT_EQ(cli(dir, "encode --model " + model + " --features " + dir.file("empty.feat") + " --out " + dir.file("e")).code, 1);
  save_features(dir.file("none.feat"), Matrix(0, 8));
  EXPECT_EQ(cli(dir, "encode --model " + model + " --features " + dir.file("none.feat") + " --out " + dir.file("e")).code, 1);
  save_features(dir.file("wide.feat"), Matrix::Ones(3, 9));
  const auto r = cli(dir, "encode --model " + model + " --features " + dir.file("wide.feat") + " --out " + dir.file("e"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("dimension"), std::string::npos) << r.err;
}

TEST(CliEval, MatchesLibraryAndRecordsCutoff) {
  ScratchDir dir;
  const auto data = synth_small(dir);
  // Enough rounds to actually separate the clusters.
  const auto model = train_small(dir, data, "--set outer_rounds=8 --set t_img=3 --set t_label=10");
  ASSERT_EQ(cli(dir, "encode --model " + model + " --features " + data + "/train.feat --out " + dir.file("db")).code, 0);
  ASSERT_EQ(cli(dir, "encode --model " + model + " --features " + data + "/query.feat --out " + dir.file("q")).code, 0);
  const auto r = cli(dir, "eval --query-codes " + dir.file("q") + " --db-codes " + dir.file("db") + " --query-labels " +
                              data + "/query.lab --db-labels " + data +
                              "/train.lab --metrics map,ph2,pr,pn --map-r 5000 --pn-list 1,10,80 --pr-steps 4 --out " +
                              dir.file("m.csv"));
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream csv(dir.file("m.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "metric,k_total,value,grid_point");
  std::map<std::string, std::vector<std::pair<double, std::string>>> rows;
  while (std::getline(csv, line)) {
    std::stringstream ss(line);
    std::string metric, k, value, grid;
    std::getline(ss, metric, ',');
    std::getline(ss, k, ',');
    std::getline(ss, value, ',');
    std::getline(ss, grid, ',');
    EXPECT_EQ(k, "16");
    rows[metric].emplace_back(std::stod(value), grid);
  }
  const auto q = load_codes(dir.file("q"));
  const auto db = load_codes(dir.file("db"));
  const RelevanceJudge judge(load_labels(data + "/query.lab"), load_labels(data + "/train.lab"));
  ASSERT_EQ(rows["map"].size(), 1u);
  EXPECT_EQ(rows["map"][0].second, "5000");
  EXPECT_EQ(rows["map"][0].first, mean_ap(q, db, judge, 5000));
  EXPECT_EQ(rows["ph2"][0].first, mean_precision_at_hamming2(q, db, judge));
  const auto pr = pr_curve(q, db, judge, uniform_recall_grid(4));
  ASSERT_EQ(rows["pr"].size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(rows["pr"][i].first, pr[i].precision);
  const auto pn = precision_at_n(q, db, judge, {1, 10, 80});
  ASSERT_EQ(rows["pn"].size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(rows["pn"][i].first, pn[i].precision);
  EXPECT_EQ(rows["pn"][2].second, "80");
  EXPECT_TRUE(std::filesystem::exists(dir.file("m.csv") + ".manifest.json"));
}

TEST(CliEval, SelfRetrievalAboveRandom) {
  ScratchDir dir;
  const auto data = synth_small(dir);
  // Enough rounds to actually separate the clusters.
  const auto model = train_small(dir, data, "--set outer_rounds=8 --set t_img=3 --set t_label=10");
  ASSERT_EQ(cli(dir, "encode --model " + model + " --features " + data + "/train.feat --out " + dir.file("db")).code, 0);
  ASSERT_EQ(cli(dir, "eval --query-codes " + dir.file("db") + " --db-codes " + dir.file("db") + " --query-labels " +
                         data + "/train.lab --db-labels " + data + "/train.lab --map-r 20 --out " + dir.file("m.csv"))
                .code,
            0);
  const auto m = load_json(dir.file("m.csv") + ".manifest.json");
  EXPECT_GT(m["summary"]["map"].get<double>(), 0.5);  // four balanced classes: random is about 0.25
}

TEST(CliEval, CodeLengthMismatch) {
  ScratchDir dir;
  const auto data = synth_small(dir);
  Matrix a = Matrix::Ones(20, 16), b = Matrix::Ones(80, 12);
  save_codes(dir.file("q"), pack(a));
  save_codes(dir.file("db"), pack(b));
  const auto r = cli(dir, "eval --query-codes " + dir.file("q") + " --db-codes " + dir.file("db") + " --query-labels " +
                              data + "/query.lab --db-labels " + data + "/train.lab --out " + dir.file("m.csv"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("bits"), std::string::npos) << r.err;
}

TEST(CliEval, UnknownMetricIsUsageError) {
  ScratchDir dir;
  EXPECT_EQ(cli(dir, "eval --query-codes a --db-codes b --query-labels c --db-labels d --metrics nope --out x").code, 2);
}
