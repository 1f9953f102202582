#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "mnagt/tools/cli.hpp"

namespace fs = std::filesystem;
using mnagt::cli::run;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "mnagt");
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

const std::string kData = MNAGT_TEST_DATA;

// Small enough that a full train run takes well under a second.
const std::vector<std::string> kTiny{"--dataset", "triangles", "--dim", "8", "--heads", "2", "--layers", "1",
                                     "--c", "1", "--batch-size", "32", "--no-time"};

std::vector<std::string> with(std::vector<std::string> head, const std::vector<std::string>& tail) {
  head.insert(head.end(), tail.begin(), tail.end());
  return head;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("mnagt_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override {
    fs::remove_all(dir_);
    ::unsetenv("MNAGT_DATA_DIR");
  }
  fs::path dir_;
};

std::vector<nlohmann::json> json_lines(const std::string& text) {
  std::vector<nlohmann::json> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);)
    if (!line.empty() && line.front() == '{') out.push_back(nlohmann::json::parse(line));
  return out;
}

}  // namespace

TEST_F(CliTest, UsageErrorsExitOne) {
  EXPECT_EQ(invoke({}).code, 1);
  EXPECT_EQ(invoke({"frobnicate"}).code, 1);
  EXPECT_EQ(invoke(with({"train"}, {"--dropout", "1.5"})).code, 1);
  EXPECT_EQ(invoke(with({"train"}, {"--aggregator", "median"})).code, 1);
  EXPECT_EQ(invoke(with({"train"}, {"--lr", "0"})).code, 1);
  EXPECT_EQ(invoke({"train", "--help"}).code, 0);
}

TEST_F(CliTest, MissingDataExitsTwo) {
  const auto r = invoke({"inspect", "--dataset", "NCI1", "--data-dir", (dir_ / "nope").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("nope"), std::string::npos) << r.err;
  EXPECT_EQ(invoke({"inspect", "--dataset", "NCI1", "--data-dir", dir_.string()}).code, 2);
}

TEST_F(CliTest, InspectMutag) {
  const auto r = invoke({"inspect", "--dataset", "MUTAG", "--data-dir", kData});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("188"), std::string::npos) << r.out;
}

TEST_F(CliTest, DataDirFromEnvironment) {
  ::setenv("MNAGT_DATA_DIR", kData.c_str(), 1);
  EXPECT_EQ(invoke({"inspect", "--dataset", "MUTAG"}).code, 0);
  // The flag wins over the environment.
  EXPECT_EQ(invoke({"inspect", "--dataset", "MUTAG", "--data-dir", (dir_ / "nope").string()}).code, 2);
}

TEST_F(CliTest, TrainWritesMetricsAndSummary) {
  const auto r = invoke(with({"train"}, with(kTiny, {"--epochs", "2", "--seeds", "5", "--out", dir_.string()})));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto lines = json_lines(r.out);
  ASSERT_EQ(lines.size(), 6u);  // 2 x (train, val), test, summary
  EXPECT_EQ(lines[0]["split"], "train");
  EXPECT_EQ(lines[4]["split"], "test");
  EXPECT_EQ(lines[5]["summary"], true);
  EXPECT_EQ(lines[5]["per_seed"][0]["seed"], 5);
  EXPECT_TRUE(fs::exists(dir_ / "metrics.jsonl"));
  EXPECT_TRUE(fs::exists(dir_ / "summary.json"));
  EXPECT_TRUE(fs::exists(dir_ / "checkpoints" / "seed_5.ckpt.json"));
}

TEST_F(CliTest, ConfigFileSectionsAndFlagPrecedence) {
  std::ofstream(dir_ / "run.ini") << "[train]\nepochs=1\nheads=4\nseeds=9\n";
  const auto r =
      invoke(with({"train", "--config", (dir_ / "run.ini").string()}, with(kTiny, {"--out", (dir_ / "o").string()})));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto summary = json_lines(r.out).back();
  EXPECT_EQ(summary["config"]["train"]["epochs"], 1);
  EXPECT_EQ(summary["per_seed"][0]["seed"], 9);
  EXPECT_EQ(summary["config"]["model"]["heads"], 2);  // flag beats file

  std::ofstream(dir_ / "typo.ini") << "[train]\nepoch=1\n";
  EXPECT_EQ(invoke({"train", "--config", (dir_ / "typo.ini").string()}).code, 1);
  EXPECT_EQ(invoke({"train", "--config", (dir_ / "missing.ini").string()}).code, 1);
}

TEST_F(CliTest, AblateReportsFourVariants) {
  const auto r =
      invoke(with({"ablate"}, with(kTiny, {"--epochs", "1", "--seeds", "0", "--out", dir_.string()})));
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(dir_ / "ablation.json");
  nlohmann::json j;
  in >> j;
  ASSERT_TRUE(j.contains("ablation")) << j.dump();
  EXPECT_EQ(j["ablation"].size(), 4u);
  EXPECT_TRUE(j.contains("ordering"));
  for (const char* name : {"sum", "average", "concat", "adaptive"})
    EXPECT_NE(r.out.find(name), std::string::npos) << name;
}

TEST_F(CliTest, GradcheckAndFaultInjection) {
  EXPECT_EQ(invoke({"gradcheck"}).code, 0);
  const auto r = invoke({"gradcheck", "--inject-fault", "layer_norm"});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.out.find("FAIL grad.op layer_norm"), std::string::npos) << r.out;
}

TEST_F(CliTest, VerifyPasses) {
  const auto r = invoke({"verify", "--trials", "5"});
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
}
