#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "htl/data.hpp"
#include "htl/eval.hpp"
#include "htl/hierarchy.hpp"
#include "htl/model.hpp"
#include "htl/trainer.hpp"
#include "support/oracles.hpp"

namespace htl {
namespace {

namespace fs = std::filesystem;

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream s(text);
  for (std::string line; std::getline(s, line);) out.push_back(line);
  return out;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("htl_cli_test_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  CliResult run(std::vector<std::string> args) {
    args.insert(args.begin(), "htl");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // Small hierarchical dataset written with `generate`.
  std::string tiny_dataset(const std::string& name = "tiny.csv") {
    const CliResult r = run({"generate", "--out", path(name), "--num-superclasses", "2",
                             "--subclasses-per-super", "3", "--samples-per-class", "10",
                             "--input-dim", "6", "--seed", "4"});
    EXPECT_EQ(r.code, 0) << r.err;
    return path(name);
  }

  std::vector<std::string> tiny_train_args(const std::string& data, const std::string& out) {
    return {"train",         "--dataset",          data,   "--output-dir", out,
            "--epochs",      "2",                  "--l-prime", "1",       "--m",
            "3",             "--t",                "3",    "--embedding-dim", "4",
            "--hidden-dims", "8",                  "--learning-rate", "0.05",
            "--holdout-per-class", "2",            "--record-wall-time", "false"};
  }

  fs::path dir_;
};

TEST_F(CliTest, GenerateDefaultSpec) {
  const CliResult r = run({"generate", "--out", path("data.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines_of(slurp(path("data.csv"))).size(), 600u);
  const auto meta = nlohmann::json::parse(slurp(path("data.csv.meta.json")));
  EXPECT_EQ(meta["num_classes"], 20);
  EXPECT_EQ(meta["noise_scale"], 0.3);
  const LabeledDataset ds = load_dataset(path("data.csv"));
  EXPECT_EQ(ds.features, generate_synthetic(SyntheticSpec{}).features);
}

TEST_F(CliTest, GenerateSameSeedIdenticalFiles) {
  ASSERT_EQ(run({"generate", "--out", path("a.csv"), "--seed", "9"}).code, 0);
  ASSERT_EQ(run({"generate", "--out", path("b.csv"), "--seed", "9"}).code, 0);
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
  ASSERT_EQ(run({"generate", "--out", path("c.csv"), "--seed", "10"}).code, 0);
  EXPECT_NE(slurp(path("a.csv")), slurp(path("c.csv")));
}

TEST_F(CliTest, GenerateInvalidSpecLeavesNoFiles) {
  const CliResult r = run({"generate", "--out", path("bad.csv"), "--noise-scale", "2.0"});
  EXPECT_NE(r.code, 0);
  EXPECT_EQ(lines_of(r.err).size(), 1u);
  EXPECT_EQ(r.err.rfind("htl: error:", 0), 0u);
  EXPECT_TRUE(fs::is_empty(dir_));
}

TEST_F(CliTest, GenerateUnwritablePathFails) {
  const CliResult r = run({"generate", "--out", path("missing/dir/data.csv")});
  EXPECT_NE(r.code, 0);
  EXPECT_FALSE(r.err.empty());
}

TEST_F(CliTest, UnknownCommandOrFlagFails) {
  EXPECT_NE(run({"frobnicate"}).code, 0);
  EXPECT_NE(run({"train", "--no-such-flag", "1"}).code, 0);
  EXPECT_NE(run({}).code, 0);
}

TEST_F(CliTest, TrainSmokeWritesOutputs) {
  const std::string data = tiny_dataset();
  const auto start = std::chrono::steady_clock::now();
  const CliResult r = run(tiny_train_args(data, path("run")));
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_LT(seconds, 10.0);
  for (const char* f : {"model.ckpt", "epoch_000.ckpt", "epoch_001.ckpt", "metrics.csv",
                        "config.resolved.json"}) {
    EXPECT_TRUE(fs::exists(dir_ / "run" / f)) << f;
  }
  const auto metrics = lines_of(slurp(dir_ / "run" / "metrics.csv"));
  ASSERT_GE(metrics.size(), 2u);
  EXPECT_EQ(metrics[0],
            "iteration,epoch,loss,active_fraction,recall@1,recall@2,recall@4,recall@8,seconds");
  EXPECT_NO_THROW(load_checkpoint(dir_ / "run" / "model.ckpt"));
}

TEST_F(CliTest, TrainRerunGivesIdenticalMetrics) {
  const std::string data = tiny_dataset();
  ASSERT_EQ(run(tiny_train_args(data, path("r1"))).code, 0);
  ASSERT_EQ(run(tiny_train_args(data, path("r2"))).code, 0);
  EXPECT_EQ(slurp(dir_ / "r1" / "metrics.csv"), slurp(dir_ / "r2" / "metrics.csv"));
  EXPECT_EQ(slurp(dir_ / "r1" / "model.ckpt"), slurp(dir_ / "r2" / "model.ckpt"));
}

TEST_F(CliTest, FlagsOverrideConfigFile) {
  const std::string data = tiny_dataset();
  std::ofstream(path("cfg.json")) << nlohmann::json{{"epochs", 5}, {"embedding_dim", 3},
                                                    {"dataset", data}}.dump();
  auto args = tiny_train_args(data, path("run"));
  args.insert(args.begin() + 1, {"--config", path("cfg.json")});
  ASSERT_EQ(run(args).code, 0);
  const auto resolved = nlohmann::json::parse(slurp(dir_ / "run" / "config.resolved.json"));
  EXPECT_EQ(resolved["epochs"], 2);
  EXPECT_EQ(resolved["embedding_dim"], 4);
  EXPECT_EQ(resolved["dataset"], data);

  // The file alone is also honoured.
  std::ofstream(path("only.json")) << nlohmann::json{{"epochs", 1}, {"dataset", data},
                                                     {"output_dir", path("only")},
                                                     {"l_prime", 1}, {"m", 3}, {"t", 3},
                                                     {"embedding_dim", 4}}.dump();
  ASSERT_EQ(run({"train", "--config", path("only.json")}).code, 0);
  EXPECT_EQ(nlohmann::json::parse(slurp(dir_ / "only" / "config.resolved.json"))["epochs"], 1);
}

TEST_F(CliTest, UnknownConfigKeyRejected) {
  std::ofstream(path("cfg.json")) << R"({"epochs": 1, "learning_rte": 0.1})";
  const CliResult r = run({"train", "--config", path("cfg.json"), "--dataset", tiny_dataset()});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("learning_rte"), std::string::npos);
}

TEST_F(CliTest, EvaluateDuplicatePairsWithSelfExclusion) {
  // Each class is a pair of identical rows; with self-matches excluded, R@1 is perfect.
  std::ofstream f(path("pairs.csv"));
  for (int c = 0; c < 6; ++c) {
    for (int copy = 0; copy < 2; ++copy) f << c << "," << c + 1 << "," << (c % 2) - 0.5 << "\n";
  }
  f.close();
  save_checkpoint(MlpEmbedder({2, 2}, {Eigen::MatrixXd::Identity(2, 2)}, {Vector::Zero(2)}),
                  path("m.ckpt"));
  const CliResult r = run({"evaluate", "--checkpoint", path("m.ckpt"), "--query", path("pairs.csv"),
                           "--ks", "1", "--out", path("eval.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("self-matches excluded"), std::string::npos);
  EXPECT_EQ(lines_of(slurp(path("eval.csv"))), (std::vector<std::string>{"K,recall", "1,1.000000"}));
  const auto sidecar = nlohmann::json::parse(slurp(path("eval.csv.config.json")));
  EXPECT_EQ(sidecar["self_match_excluded"], true);
}

TEST_F(CliTest, EvaluateMatchesOracle) {
  const std::string query = tiny_dataset("q.csv");
  const CliResult g = run({"generate", "--out", path("g.csv"), "--num-superclasses", "2",
                           "--subclasses-per-super", "3", "--samples-per-class", "10",
                           "--input-dim", "6", "--seed", "5"});
  ASSERT_EQ(g.code, 0);
  const MlpEmbedder model({6, 8, 4}, 3);
  save_checkpoint(model, path("m.ckpt"));
  const CliResult r = run({"evaluate", "--checkpoint", path("m.ckpt"), "--query", query,
                           "--gallery", path("g.csv"), "--ks", "1,2,4,8", "--out",
                           path("eval.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const LabeledDataset q = load_dataset(query);
  const LabeledDataset gal = load_dataset(path("g.csv"));
  const std::vector<int> ks = {1, 2, 4, 8};
  const auto expected =
      testing::naive_recall(model.embed(q.features), q.labels, model.embed(gal.features),
                            gal.labels, ks, false);
  const auto rows = lines_of(slurp(path("eval.csv")));
  ASSERT_EQ(rows.size(), 5u);
  for (std::size_t i = 0; i < ks.size(); ++i) {
    EXPECT_EQ(rows[i + 1], fmt::format("{},{:.6f}", ks[i], expected[i]));
  }
}

TEST_F(CliTest, EvaluateDimensionMismatchFails) {
  const std::string data = tiny_dataset();
  save_checkpoint(MlpEmbedder({5, 3}, 1), path("m.ckpt"));
  const CliResult r = run({"evaluate", "--checkpoint", path("m.ckpt"), "--query", data});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("dimension"), std::string::npos);
}

TEST_F(CliTest, TreeDumpDepthOne) {
  const std::string data = tiny_dataset();
  save_checkpoint(MlpEmbedder({6, 8, 4}, 1), path("m.ckpt"));
  const CliResult r = run({"tree", "--checkpoint", path("m.ckpt"), "--dataset", data, "--depth",
                           "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  const HierarchicalTree tree = read_tree(in);
  ASSERT_EQ(tree.thresholds().size(), 2u);
  EXPECT_EQ(tree.thresholds()[1], 4.0);
}

TEST_F(CliTest, TreeDumpParsesBackToRebuiltTree) {
  const std::string data = tiny_dataset();
  const MlpEmbedder model({6, 8, 4}, 1);
  save_checkpoint(model, path("m.ckpt"));
  const CliResult r = run({"tree", "--checkpoint", path("m.ckpt"), "--dataset", data, "--out",
                           path("tree.txt"), "--stats-out", path("stats.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(path("tree.txt"));
  const HierarchicalTree dumped = read_tree(in);
  const auto [tree, stats] = rebuild_hierarchy(model, load_dataset(data), 16);
  EXPECT_TRUE(dumped == tree);
  const auto counts = dumped.node_counts();
  for (std::size_t l = 1; l < counts.size(); ++l) EXPECT_LE(counts[l], counts[l - 1]);
  EXPECT_EQ(lines_of(slurp(path("stats.csv"))).size(), 1u + 6u + 1u);
}

TEST_F(CliTest, CompareTwoStrategies) {
  const std::string data = tiny_dataset();
  auto args = tiny_train_args(data, path("cmp"));
  args[0] = "compare";
  args.insert(args.end(), {"--eval-every", "2", "--strategies",
                           "random:constant-margin,anchor-neighbor:dynamic-margin"});
  const CliResult r = run(args);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines_of(slurp(dir_ / "cmp" / "compare.csv"));
  ASSERT_GE(rows.size(), 2u);
  EXPECT_EQ(rows[0], "iteration,random:constant-margin,anchor-neighbor:dynamic-margin");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_EQ(std::count(rows[i].begin(), rows[i].end(), ','), 2) << rows[i];
  }
  EXPECT_TRUE(fs::exists(dir_ / "cmp" / "compare.csv.config.json"));
}

TEST_F(CliTest, CompareSameStrategyTwiceGivesIdenticalCurves) {
  const std::string data = tiny_dataset();
  auto args = tiny_train_args(data, path("cmp"));
  args[0] = "compare";
  args.insert(args.end(), {"--eval-every", "2", "--strategies",
                           "anchor-neighbor:dynamic-margin,anchor-neighbor:dynamic-margin",
                           "--out", path("twice.csv")});
  ASSERT_EQ(run(args).code, 0);
  const auto rows = lines_of(slurp(path("twice.csv")));
  ASSERT_GE(rows.size(), 2u);
  EXPECT_EQ(rows[0],
            "iteration,anchor-neighbor:dynamic-margin,anchor-neighbor:dynamic-margin#2");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto first = rows[i].find(',');
    const auto second = rows[i].find(',', first + 1);
    EXPECT_EQ(rows[i].substr(first + 1, second - first - 1), rows[i].substr(second + 1));
  }
}

TEST_F(CliTest, CompareWithoutEvaluationSetFails) {
  const std::string data = tiny_dataset();
  const CliResult r = run({"compare", "--dataset", data, "--strategies", "random:constant-margin",
                           "--output-dir", path("cmp")});
  EXPECT_NE(r.code, 0);
}

}  // namespace
}  // namespace htl
