#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cgdetect/cli.hpp"
#include "cgdetect/errors.hpp"
#include "cgdetect/trainer.hpp"

using namespace cgd;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "cgdetect");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

const std::vector<std::string> kTiny{"--crop", "32", "--width-multiplier", "0.25", "--batch-size", "4",
                                     "--lr", "0.01"};

class CliData : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "cgd_cli";
    fs::remove_all(dir_);
    ASSERT_EQ(cli({"generate", "--out", dir_.string(), "--count", "6", "--size", "32", "--seed", "3"}).code, 0);
    ASSERT_EQ(cli({"split", "--manifest", (dir_ / "manifest.tsv").string(), "--ratios", "2:1:1"}).code, 0);
  }
  static std::vector<std::string> train_args(const std::string& tag, int epochs, bool with_val = true) {
    std::vector<std::string> a{"train", "--train", (dir_ / "manifest.tsv.train").string(), "--checkpoint",
                               (dir_ / (tag + ".cgdn")).string(), "--log", (dir_ / (tag + ".csv")).string(),
                               "--epochs", std::to_string(epochs), "--seed", "7"};
    if (with_val) {
      a.push_back("--val");
      a.push_back((dir_ / "manifest.tsv.val").string());
    }
    a.insert(a.end(), kTiny.begin(), kTiny.end());
    return a;
  }
  static fs::path dir_;
};

fs::path CliData::dir_;

}  // namespace

TEST(Cli, UsageErrors) {
  EXPECT_EQ(cli({}).code, kExitUsage);
  EXPECT_EQ(cli({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(cli({"train"}).code, kExitUsage);
  EXPECT_EQ(cli({"summary", "--fusion", "sum"}).code, kExitUsage);
  EXPECT_EQ(cli({"summary", "--crop", "100"}).code, kExitUsage);
  EXPECT_EQ(cli({"ablate", "--family", "colours", "--train", "a", "--val", "b"}).code, kExitUsage);
  EXPECT_EQ(cli({"--help"}).code, kExitOk);
}

TEST(Cli, SummaryPrintsParameterCount) {
  const CliRun r = cli({"summary"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("877570"), std::string::npos);
  EXPECT_EQ(r.out.substr(0, 11), "# lr=0.001\n");
}

TEST(Cli, DumpKernels) {
  const CliRun all = cli({"dump-kernels"});
  EXPECT_EQ(all.code, 0);
  EXPECT_NE(all.out.find("square5"), std::string::npos);
  const CliRun sub = cli({"dump-kernels", "--subset", "all_3x3"});
  EXPECT_NE(sub.out.find("17 kernels"), std::string::npos);
  EXPECT_EQ(cli({"dump-kernels", "--subset", "all_4x4"}).code, kExitUsage);
}

TEST(Cli, GradcheckAndNegativeControl) {
  const CliRun ok = cli({"gradcheck"});
  EXPECT_EQ(ok.code, 0) << ok.out;
  EXPECT_NE(ok.out.find("all 10 gradient checks passed"), std::string::npos);
  const CliRun bad = cli({"gradcheck", "--perturb-softpool"});
  EXPECT_EQ(bad.code, kExitNumeric);
  EXPECT_NE(bad.out.find("1 of 10 gradient checks failed"), std::string::npos);
}

TEST(Cli, AblationRowTables) {
  auto labels = [](std::string_view f) {
    std::vector<std::string> out;
    for (const auto& r : ablation_rows(f)) out.push_back(r.label);
    return out;
  };
  EXPECT_EQ(labels("streams"), (std::vector<std::string>{"Only residual stream", "Only joint channel stream", "Ours"}));
  EXPECT_EQ(ablation_rows("filters").size(), 6u);
  EXPECT_EQ(ablation_rows("residual").size(), 6u);
  EXPECT_EQ(labels("pooling"), (std::vector<std::string>{"M1", "M2", "M3", "Ours"}));
  EXPECT_THROW(ablation_rows("colours"), ConfigError);
}

TEST_F(CliData, SplitWroteStratifiedParts) {
  EXPECT_EQ(slurp(dir_ / "manifest.tsv.train").size() > 0, true);
  std::size_t lines = 0;
  for (const char* s : {".train", ".val", ".test"}) {
    const std::string t = slurp(dir_ / ("manifest.tsv" + std::string(s)));
    lines += static_cast<std::size_t>(std::count(t.begin(), t.end(), '\n'));
  }
  EXPECT_EQ(lines, 12u);
}

TEST_F(CliData, TrainWritesLogAndCheckpoints) {
  const CliRun r = cli(train_args("a", 2));
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string log = slurp(dir_ / "a.csv");
  EXPECT_EQ(log.substr(0, 9), "# lr=0.01");
  EXPECT_NE(log.find("\nepoch,lr,train_loss,val_acc\n0,0.01,"), std::string::npos);
  EXPECT_NE(log.find("\n1,0.01,"), std::string::npos);
  EXPECT_NE(r.out.find(log), std::string::npos);  // stdout mirrors the log
  EXPECT_TRUE(fs::exists(dir_ / "a.cgdn"));
  EXPECT_TRUE(fs::exists(dir_ / "a.best.cgdn"));
}

TEST_F(CliData, SeededTrainingIsDeterministic) {
  ASSERT_EQ(cli(train_args("d1", 2)).code, 0);
  ASSERT_EQ(cli(train_args("d2", 2)).code, 0);
  auto body = [](std::string s) { return s.substr(s.find("epoch,")); };
  EXPECT_EQ(body(slurp(dir_ / "d1.csv")), body(slurp(dir_ / "d2.csv")));
  EXPECT_EQ(slurp(dir_ / "d1.cgdn"), slurp(dir_ / "d2.cgdn"));
}

TEST_F(CliData, EvalAndPredict) {
  ASSERT_EQ(cli(train_args("e", 1, false)).code, 0);
  EXPECT_FALSE(fs::exists(dir_ / "e.best.cgdn"));
  const std::string ckpt = (dir_ / "e.cgdn").string();
  const CliRun ev = cli({"eval", "--checkpoint", ckpt, "--manifest", (dir_ / "manifest.tsv.test").string()});
  ASSERT_EQ(ev.code, 0) << ev.err;
  EXPECT_EQ(ev.out.substr(0, 4), "Acc=");
  EXPECT_NE(ev.out.find(" P=1 N=1"), std::string::npos) << ev.out;

  const CliRun mismatch = cli({"eval", "--checkpoint", ckpt, "--manifest", (dir_ / "manifest.tsv.test").string(),
                            "--fusion", "logit_avg"});
  EXPECT_EQ(mismatch.code, kExitUsage);
  EXPECT_NE(mismatch.err.find("mismatch"), std::string::npos);

  const std::string img = (dir_ / "pg" / "pg_00000.png").string();
  const CliRun p = cli({"predict", "--checkpoint", ckpt, img});
  ASSERT_EQ(p.code, 0) << p.err;
  double pc = 0, pp = 0;
  ASSERT_EQ(std::sscanf(p.out.substr(p.out.find("p_cg=")).c_str(), "p_cg=%lf\tp_pg=%lf", &pc, &pp), 2);
  EXPECT_NEAR(pc + pp, 1.0, 2e-6);
  EXPECT_EQ(p.out.substr(0, img.size() + 1), img + "\t");

  EXPECT_EQ(cli({"predict", "--checkpoint", ckpt, (dir_ / "nope.png").string()}).code, kExitData);
  EXPECT_EQ(cli({"eval", "--checkpoint", (dir_ / "nope.cgdn").string(), "--manifest", "x"}).code, kExitData);
}

TEST_F(CliData, ConstantPredictionScoresHalf) {
  // Zero head weights with a pg-favouring bias: every image is called pg.
  RunConfig cfg;
  cfg.model.crop = 32;
  cfg.model.width_multiplier = 0.25;
  Net net(cfg.model, 0);
  net.params().value("head.weight").fill(0.0f);
  net.params().value("head.bias")[1] = 5.0f;
  const fs::path ck = dir_ / "constant.cgdn";
  write_checkpoint_file(ck, make_checkpoint(net, cfg));
  const CliRun r = cli({"eval", "--checkpoint", ck.string(), "--manifest", (dir_ / "manifest.tsv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "Acc=50.00% TP=6 TN=0 P=6 N=6\n");
}

TEST_F(CliData, RepeatSplitsRetrains) {
  std::vector<std::string> a{"eval", "--checkpoint", (dir_ / "d1.cgdn").string(), "--manifest",
                             (dir_ / "manifest.tsv").string(), "--repeat-splits", "2", "--ratios", "2:1:1"};
  if (!fs::exists(dir_ / "d1.cgdn")) {
    ASSERT_EQ(cli(train_args("d1", 2)).code, 0);
  }
  const CliRun r = cli(a);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("split 0 (seed 7"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("split 1 (seed 8"), std::string::npos);
  EXPECT_NE(r.out.find("mean Acc over 2 splits: "), std::string::npos);
}

TEST_F(CliData, AblateRunsEveryRow) {
  std::vector<std::string> a{"ablate", "--family", "streams", "--train", (dir_ / "manifest.tsv.train").string(),
                             "--val", (dir_ / "manifest.tsv.val").string(), "--test",
                             (dir_ / "manifest.tsv.test").string(), "--epochs", "1"};
  a.insert(a.end(), kTiny.begin(), kTiny.end());
  const CliRun r = cli(a);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("family,model,variant,params,val_acc,test_acc,seconds,status"), std::string::npos);
  EXPECT_NE(r.out.find("Only joint channel stream"), std::string::npos);
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n') > 6, true);
}

TEST_F(CliData, NumericFailureExitCode) {
  std::vector<std::string> a = train_args("nan", 1, false);
  *(std::find(a.begin(), a.end(), "--lr") + 1) = "1e30";
  const CliRun r = cli(a);
  EXPECT_EQ(r.code, kExitNumeric) << r.err;
}
