// Drives the daca-calib binary as a subprocess and checks exit codes and
// written artifacts.

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "daca/io.h"
#include "daca/synthetic.h"
#include "schema_check.h"

namespace daca {
namespace {

namespace fs = std::filesystem;

std::string Slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("daca_cli_test_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int Run(const std::string& args) {
    const std::string cmd = std::string("\"") + DACA_CALIB_EXE + "\" " + args + " >\"" +
                            (dir_ / "stdout.txt").string() + "\" 2>\"" +
                            (dir_ / "stderr.txt").string() + "\"";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string Stderr() const { return Slurp(dir_ / "stderr.txt"); }
  std::string Stdout() const { return Slurp(dir_ / "stdout.txt"); }

  fs::path Write(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream(p, std::ios::binary) << text;
    return p;
  }

  fs::path WriteMixture(const std::string& name, MixtureConfig cfg, const std::string& prefix) {
    const fs::path p = dir_ / name;
    WriteLogitsJsonl(p, GenerateMixture(cfg, std::nullopt, prefix));
    return p;
  }

  fs::path WriteDivergent(const std::string& name) {
    std::vector<LogitRecord> records;
    for (std::uint64_t s = 0; s < 3; ++s) {
      auto rec = MakeDivergentRecord(4, s);
      rec.id = "d" + std::to_string(s);
      records.push_back(rec);
    }
    const fs::path p = dir_ / name;
    WriteLogitsJsonl(p, Dataset(4, std::move(records)));
    return p;
  }

  static MixtureConfig Mixture(std::uint64_t seed) {
    MixtureConfig cfg;
    cfg.pi = 0.3;
    cfg.n = 600;
    cfg.seed = seed;
    cfg.acc_f_agree = cfg.acc_g_agree = 0.7;
    cfg.acc_f_dis = 0.35;
    cfg.acc_g_dis = 0.55;
    cfg.conf_sharpness = 2.5;
    return cfg;
  }

  std::string Q(const fs::path& p) const { return "\"" + p.string() + "\""; }

  fs::path dir_;
};

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(Run(""), 1);
  EXPECT_EQ(Run("calibrate --val /no/such/file.jsonl --test /no/such/file.jsonl --out x"), 1);
  EXPECT_EQ(Run("frobnicate"), 1);
  EXPECT_EQ(Run("--help"), 0);
  const auto val = WriteMixture("val.jsonl", Mixture(1), "v");
  EXPECT_EQ(Run("calibrate --val " + Q(val) + " --test " + Q(val) + " --objective bogus --out " +
                Q(dir_ / "o")),
            1);
}

TEST_F(CliTest, CalibrateSucceedsAndWritesArtifacts) {
  const auto val = WriteMixture("val.jsonl", Mixture(1), "v");
  const auto test = WriteMixture("test.jsonl", Mixture(2), "t");
  const fs::path out = dir_ / "out";
  ASSERT_EQ(Run("calibrate --val " + Q(val) + " --test " + Q(test) +
                " --objective daca --shape scalar --bins 15 --epochs 100 --out " + Q(out)),
            0)
      << Stderr();
  for (const char* name :
       {"report.json", "params.json", "reliability.csv", "selective.csv", "trace.csv"}) {
    EXPECT_TRUE(fs::exists(out / name)) << name;
  }
  std::ifstream schema_in(DACA_SCHEMA_FILE);
  const auto schema = nlohmann::json::parse(schema_in);
  const auto report = nlohmann::json::parse(Slurp(out / "report.json"));
  const auto errors = testing::ValidateAgainstSchema(report, schema);
  EXPECT_TRUE(errors.empty()) << (errors.empty() ? "" : errors.front());
  EXPECT_EQ(report["config"]["bins"], 15);

  const fs::path eval_out = dir_ / "eval";
  ASSERT_EQ(Run("evaluate --test " + Q(test) + " --params " + Q(out / "params.json") + " --out " +
                Q(eval_out)),
            0)
      << Stderr();
  const auto evaluated = nlohmann::json::parse(Slurp(eval_out / "report.json"));
  EXPECT_EQ(evaluated["metrics"]["post"]["nll"], report["metrics"]["post"]["nll"]);
}

TEST_F(CliTest, ParseErrorExitsTwo) {
  const auto bad = Write("bad.jsonl", R"({"id":"a","k":2,"plm_logits":[1,0],"polm_logits":[1,0]})"
                                      "\n{\"id\":\"b\",\"k\":2}\n");
  EXPECT_EQ(Run("calibrate --val " + Q(bad) + " --test " + Q(bad) + " --out " + Q(dir_ / "o")), 2);
  EXPECT_NE(Stderr().find("bad.jsonl:2:"), std::string::npos) << Stderr();
}

TEST_F(CliTest, AllDisagreeExitsThree) {
  const auto val = WriteDivergent("dis.jsonl");
  const auto test = WriteMixture("test.jsonl", Mixture(2), "t");
  EXPECT_EQ(Run("calibrate --val " + Q(val) + " --test " + Q(test) +
                " --objective daca --out " + Q(dir_ / "o")),
            3);
  EXPECT_NE(Stderr().find("agreement=0"), std::string::npos) << Stderr();
}

TEST_F(CliTest, NaiveOnDivergentRecordsExitsFourWithReport) {
  const auto val = WriteDivergent("dis.jsonl");
  const auto test = WriteMixture("test.jsonl", Mixture(2), "t");
  const fs::path out = dir_ / "o";
  EXPECT_EQ(Run("calibrate --val " + Q(val) + " --test " + Q(test) +
                " --objective naive --epochs 200000 --out " + Q(out)),
            4);
  const auto report = nlohmann::json::parse(Slurp(out / "report.json"));
  EXPECT_EQ(report["optimizer"]["diverged"], true);
  EXPECT_GT(report["params"]["values"][0].get<double>(), kDivergenceGuard);
}

TEST_F(CliTest, ConfigErrorExitsFiveNamingField) {
  const auto cfg = Write("sim.json", R"({"pi":0.3,"n":100,"k":4,"acc_f_dis":0.9})");
  EXPECT_EQ(Run("simulate --config " + Q(cfg) + " --out " + Q(dir_ / "o")), 5);
  EXPECT_NE(Stderr().find("acc_f_dis"), std::string::npos) << Stderr();
}

TEST_F(CliTest, UnlabeledTestExitsSix) {
  const auto val = WriteMixture("val.jsonl", Mixture(1), "v");
  const auto unlabeled = WriteDivergent("dis.jsonl");
  EXPECT_EQ(Run("calibrate --val " + Q(val) + " --test " + Q(unlabeled) + " --out " +
                Q(dir_ / "o")),
            6);
}

TEST_F(CliTest, UnwritableOutputExitsSeven) {
  const auto val = WriteMixture("val.jsonl", Mixture(1), "v");
  const auto blocker = Write("blocker", "x");
  EXPECT_EQ(Run("calibrate --val " + Q(val) + " --test " + Q(val) + " --epochs 5 --out " +
                Q(blocker / "sub")),
            7)
      << Stderr();
}

TEST_F(CliTest, SimulateIsDeterministicAndEmitsThreeSeries) {
  const auto cfg = Write("sim.json", R"({"pi":0.3,"n":500,"k":4,"seed":9,
      "acc_f_agree":0.7,"acc_g_agree":0.7,"acc_f_dis":0.35,"acc_g_dis":0.55,
      "optimizer":{"epochs":30}})");
  ASSERT_EQ(Run("simulate --config " + Q(cfg) + " --out " + Q(dir_ / "a")), 0) << Stderr();
  ASSERT_EQ(Run("simulate --config " + Q(cfg) + " --out " + Q(dir_ / "b")), 0) << Stderr();
  for (const char* name : {"validation.jsonl", "test.jsonl", "propositions.json", "trace.csv"}) {
    EXPECT_EQ(Slurp(dir_ / "a" / name), Slurp(dir_ / "b" / name)) << name;
  }
  std::set<std::string> series;
  std::istringstream csv(Slurp(dir_ / "a" / "trace.csv"));
  std::string line;
  std::getline(csv, line);
  while (std::getline(csv, line)) series.insert(line.substr(0, line.find(',')));
  EXPECT_EQ(series, (std::set<std::string>{"agreement", "disagreement", "all"}));
}

TEST_F(CliTest, SimulateAllDisagreementReportsDivergentProposition) {
  const auto cfg = Write("sim.json", R"({"pi":1.0,"n":200,"k":4,"seed":2,
      "optimizer":{"epochs":10}})");
  ASSERT_EQ(Run("simulate --config " + Q(cfg) + " --out " + Q(dir_ / "o")), 0) << Stderr();
  const auto props = nlohmann::json::parse(Slurp(dir_ / "o" / "propositions.json"));
  bool found = false;
  for (const auto& p : props["propositions"]) {
    if (p["name"] == "divergent_temperature") {
      found = true;
      EXPECT_EQ(p["passed"], true);
    }
  }
  EXPECT_TRUE(found) << props.dump();
}

TEST_F(CliTest, OracleCheckPassesOnMixture) {
  auto mix = Mixture(4);
  mix.n = 2000;
  const auto val = WriteMixture("val.jsonl", mix, "v");
  ASSERT_EQ(Run("oracle-check --val " + Q(val) + " --objective daca"), 0) << Stderr() << Stdout();
  const auto result = nlohmann::json::parse(Stdout());
  EXPECT_EQ(result["passed"], true);
}

}  // namespace
}  // namespace daca
