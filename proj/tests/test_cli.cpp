#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

namespace {

namespace fs = std::filesystem;

struct Result {
  int code = -1;
  std::string out;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("srank_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Result run(const std::string& args, const std::string& env = "") const {
    const std::string cmd = "cd '" + dir_.string() + "' && " + env + " '" SRANK_CLI_PATH "' " + args + " 2>&1";
    Result r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return r;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
  }

  std::string slurp(const std::string& name) const {
    std::ifstream is(dir_ / name, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
  }

  void write(const std::string& name, const std::string& text) const { std::ofstream(dir_ / name) << text; }

  static constexpr const char* kSmallGen = "gen --groups 4 --queries 300";
  static constexpr const char* kSmallModel = "--d-model 16 --heads 2 --hidden 16";

  fs::path dir_;
};

TEST_F(Cli, GenPrintsSummaryAndIsDeterministic) {
  const auto a = run(std::string(kSmallGen) + " --out a.srnk");
  ASSERT_EQ(a.code, 0) << a.out;
  for (const char* key : {"groups: 4", "group size histogram", "empty rate", "digest"})
    EXPECT_NE(a.out.find(key), std::string::npos) << key;
  ASSERT_EQ(run(std::string(kSmallGen) + " --out b.srnk").code, 0);
  EXPECT_EQ(slurp("a.srnk"), slurp("b.srnk"));
  ASSERT_EQ(run(std::string(kSmallGen) + " --out c.srnk --seed 2").code, 0);
  EXPECT_NE(slurp("a.srnk"), slurp("c.srnk"));
}

TEST_F(Cli, GenAtBothCatalogScales) {
  const auto sr = run("gen --groups 22 --size-min 3 --size-max 26 --queries 200");
  ASSERT_EQ(sr.code, 0) << sr.out;
  EXPECT_NE(sr.out.find("groups: 22"), std::string::npos);
  const auto aci = run("gen --groups 32 --size-min 8 --size-max 39 --queries 200");
  ASSERT_EQ(aci.code, 0) << aci.out;
  EXPECT_NE(aci.out.find("  8: 1"), std::string::npos);
  EXPECT_NE(aci.out.find("  39: 1"), std::string::npos);
}

TEST_F(Cli, TrainEvalPipeline) {
  ASSERT_EQ(run(kSmallGen).code, 0);
  const auto t = run(std::string("train ") + kSmallModel + " --max-epochs 4 --refresh-interval 2 --log log.json");
  ASSERT_EQ(t.code, 0) << t.out;
  EXPECT_NE(t.out.find("epoch 4 loss"), std::string::npos);
  EXPECT_NE(t.out.find("refresh"), std::string::npos);
  EXPECT_EQ(slurp("params.srnk").substr(0, 8), "SRNKPARM");
  EXPECT_EQ(slurp("cache.srnk").substr(0, 8), "SRNKCACH");
  const auto log = nlohmann::json::parse(slurp("log.json"));
  EXPECT_EQ(log["kind"], "train");
  EXPECT_EQ(log["epochs"].size(), 4u);
  EXPECT_EQ(log["cache_version"], 3);

  ASSERT_EQ(run("eval --json e1.json").code, 0);
  const auto e2 = run("eval --json e2.json");
  ASSERT_EQ(e2.code, 0) << e2.out;
  EXPECT_EQ(slurp("e1.json"), slurp("e2.json"));
  EXPECT_NE(e2.out.find("top-one accuracy"), std::string::npos);
  const auto report = nlohmann::json::parse(slurp("e1.json"));
  EXPECT_EQ(report["kind"], "eval");
  EXPECT_EQ(report["n_queries"], 60);
}

TEST_F(Cli, SameSeedSameTrainingLog) {
  ASSERT_EQ(run(kSmallGen).code, 0);
  const std::string args = std::string("train ") + kSmallModel + " --max-epochs 3 --refresh-interval 2";
  ASSERT_EQ(run(args + " --log a.json --params pa --cache ca").code, 0);
  ASSERT_EQ(run(args + " --log b.json --params pb --cache cb").code, 0);
  EXPECT_EQ(slurp("a.json"), slurp("b.json"));
  EXPECT_EQ(slurp("pa"), slurp("pb"));
  EXPECT_EQ(slurp("ca"), slurp("cb"));
}

TEST_F(Cli, ChunkedTrainingMatchesUnchunked) {
  ASSERT_EQ(run(kSmallGen).code, 0);
  const std::string args = std::string("train ") + kSmallModel + " --max-epochs 3 --refresh-interval 2";
  ASSERT_EQ(run(args + " --log a.json").code, 0);
  ASSERT_EQ(run(args + " --log b.json --chunk-size 8").code, 0);
  const auto a = nlohmann::json::parse(slurp("a.json"))["epochs"];
  const auto b = nlohmann::json::parse(slurp("b.json"))["epochs"];
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    EXPECT_NEAR(a[i]["mean_loss"].get<double>(), b[i]["mean_loss"].get<double>(), 1e-9);
}

TEST_F(Cli, MissingCheckpointIsAUsageError) {
  ASSERT_EQ(run(kSmallGen).code, 0);
  const auto r = run("eval --params missing.srnk");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("missing.srnk"), std::string::npos);
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  EXPECT_EQ(run("gen --bogus 3").code, 1);
  EXPECT_EQ(run("train --loss hinge").code, 1);
  EXPECT_EQ(run("gen --size-min 1").code, 1);
  EXPECT_EQ(run("--help").code, 0);
}

TEST_F(Cli, ConfigFileWithOverrides) {
  write("run.cfg", "# experiment\nseed = 9\ngroups = 3\nqueries = 50\nbogus_key = 1\n");
  const auto bad = run("--config run.cfg gen");
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.out.find("bogus_key"), std::string::npos);

  write("run.cfg", "seed = 9\ngroups = 3\nqueries = 50\n");
  ASSERT_EQ(run("--config run.cfg --save-config eff.cfg gen --queries 40").code, 0);
  const std::string eff = slurp("eff.cfg");
  EXPECT_NE(eff.find("seed = 9\n"), std::string::npos);
  EXPECT_NE(eff.find("groups = 3\n"), std::string::npos);
  EXPECT_NE(eff.find("queries = 40\n"), std::string::npos);

  ASSERT_EQ(run("--config run.cfg --save-config env.cfg gen", "SRANK_SEED=4").code, 0);
  EXPECT_NE(slurp("env.cfg").find("seed = 4\n"), std::string::npos);
  ASSERT_EQ(run("--config run.cfg --seed 7 --save-config flag.cfg gen", "SRANK_SEED=4").code, 0);
  EXPECT_NE(slurp("flag.cfg").find("seed = 7\n"), std::string::npos);

  // The saved file reproduces the run.
  ASSERT_EQ(run("--config eff.cfg gen --out x.srnk").code, 0);
  ASSERT_EQ(run("--seed 9 gen --groups 3 --queries 40 --out y.srnk").code, 0);
  EXPECT_EQ(slurp("x.srnk"), slurp("y.srnk"));
}

TEST_F(Cli, CorruptDatasetIsADataError) {
  ASSERT_EQ(run(kSmallGen).code, 0);
  const std::string bytes = slurp("dataset.srnk");
  write("dataset.srnk", bytes.substr(0, bytes.size() / 2));
  const auto r = run("train --max-epochs 1");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("unexpected end of file"), std::string::npos);
}

TEST_F(Cli, DivergenceIsANumericalError) {
  ASSERT_EQ(run(kSmallGen).code, 0);
  const auto r = run(std::string("train ") + kSmallModel + " --lr 1e300 --max-epochs 2");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.out.find("epoch 1"), std::string::npos);
  EXPECT_NE(r.out.find("step"), std::string::npos);
}

TEST_F(Cli, VerifyPasses) {
  const auto r = run("verify --json v.json");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("all checks passed"), std::string::npos);
  EXPECT_TRUE(nlohmann::json::parse(slurp("v.json"))["passed"].get<bool>());
}

TEST_F(Cli, BenchWritesReport) {
  ASSERT_EQ(run(kSmallGen).code, 0);
  ASSERT_EQ(run(std::string("train ") + kSmallModel + " --max-epochs 1").code, 0);
  const auto r = run("bench --sizes 16..256 --reps 5 --inference --json b.json");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("log-log slope"), std::string::npos);
  const auto j = nlohmann::json::parse(slurp("b.json"));
  EXPECT_EQ(j["loss_scaling"]["points"].size(), 5u);
  EXPECT_TRUE(j.contains("inference"));
  EXPECT_EQ(run("bench --sizes 256..512").code, 1);
}

}  // namespace
