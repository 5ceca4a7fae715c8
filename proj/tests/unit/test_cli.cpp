#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "../support/temp_dir.hpp"
#include "rcnds/cli/cli.hpp"
#include "rcnds/graph/dsl.hpp"
#include "rcnds/graph/presets.hpp"
#include "rcnds/io/checkpoint.hpp"
#include "rcnds/io/run_config.hpp"
#include "rcnds/train/toy.hpp"

using namespace rcnds;
using rcnds::testing::slurp;
using rcnds::testing::TempDir;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "rcnds");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::cli_dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

constexpr const char* kTinyArch =
    "input 3 16 16\n"
    "conv c1 from=input out=6 k=3 p=1 scale=1\n"
    "maxpool p1 from=c1 k=2 s=2\n"
    "conv c2 from=p1 out=8 k=3 p=1 relu=0 scale=1\n"
    "add j from=p1,c2 relu=1\n"
    "branch b1 from=j conv=4 fc=8\n"
    "fc f1 from=j out=16 dropout=0.5\n"
    "fc f2 from=f1 out=4 relu=0\n"
    "output prob from=f2 classes=4\n";

// Tiny on-disk workspace: an architecture plus train/val splits of 4-class
// toy data (and a 3-class set for fine-tuning).
class CliWorkspace : public ::testing::Test {
 protected:
  void SetUp() override {
    arch = dir.write("arch.txt", kTinyArch);
    train::ToyOptions o;
    o.classes = 4;
    o.side = 20;
    o.per_class = 4;
    o.seed = 1;
    train_manifest = train::write_toy_dataset(train::make_toy_dataset(o), dir.file("train"), io::Split::kTrain);
    o.per_class = 2;
    o.seed = 2;
    val_manifest = train::write_toy_dataset(train::make_toy_dataset(o), dir.file("val"), io::Split::kVal);
    o.classes = 3;
    o.shape_offset = 5;
    o.seed = 3;
    new_manifest = train::write_toy_dataset(train::make_toy_dataset(o), dir.file("new"), io::Split::kTrain);
  }

  Outcome train_run(const std::string& out, std::vector<std::string> extra = {}) {
    std::vector<std::string> args{"train", "--arch", arch, "--train", train_manifest, "--val", val_manifest,
                                  "--out", dir.file(out), "--epochs", "2", "--batch", "4", "--init-std", "0.02"};
    args.insert(args.end(), extra.begin(), extra.end());
    return run(args);
  }

  TempDir dir;
  std::string arch, train_manifest, val_manifest, new_manifest;
};

}  // namespace

TEST(Cli, BuildPresetParsesBackToThePreset) {
  TempDir dir;
  const Outcome r = run({"build", "--preset", "rcnds8", "--classes", "8", "--input", "3x64x64", "--compact-stem",
                         "-o", dir.file("arch.txt")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("trunk_convs=8"), std::string::npos);
  const auto g = graph::load_arch_file(dir.file("arch.txt"));
  EXPECT_EQ(g, graph::build_preset("rcnds8", 8, {3, 64, 64}, {1, true}));
  // A written architecture validates back to itself.
  const Outcome again = run({"build", "--arch", dir.file("arch.txt")});
  ASSERT_EQ(again.code, 0);
  EXPECT_EQ(again.out, slurp(dir.file("arch.txt")));
  // The full-size stem does not fit 64x64: pool5 would see a 1x1 map.
  EXPECT_EQ(run({"build", "--preset", "rcnds8", "--classes", "8", "--input", "3x64x64"}).code, cli::kExitData);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, cli::kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, cli::kExitUsage);
  const Outcome unknown = run({"build", "--preset", "rcnds8", "--classes", "8", "--bogus"});
  EXPECT_EQ(unknown.code, cli::kExitUsage);
  EXPECT_FALSE(unknown.err.empty());
  EXPECT_EQ(run({"build", "--preset", "rcnds8"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"build", "--preset", "vgg", "--classes", "8"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"build", "--preset", "rcnds8", "--classes", "8", "--input", "64"}).code, cli::kExitUsage);
  const Outcome help = run({"--help"});
  EXPECT_EQ(help.code, 0);
  for (const char* sub : {"build", "probe", "train", "eval", "finetune", "inspect"}) {
    EXPECT_NE(help.out.find(sub), std::string::npos) << sub;
  }
}

TEST(Cli, DataErrors) {
  TempDir dir;
  EXPECT_EQ(run({"build", "--arch", dir.file("missing.txt")}).code, cli::kExitData);
  const std::string bad = dir.write("bad.txt", "input 3 8 8\nconv c from=nowhere out=2 k=1\n");
  const Outcome r = run({"build", "--arch", bad});
  EXPECT_EQ(r.code, cli::kExitData);
  EXPECT_NE(r.err.find("line 2"), std::string::npos) << r.err;
  EXPECT_EQ(run({"inspect", "--ckpt", dir.write("junk.ckpt", "not a checkpoint")}).code, cli::kExitData);
}

TEST(Cli, ProbeWritesOneRowPerConv) {
  TempDir dir;
  std::string stack = "input 3 16 16\n";
  for (int i = 1; i <= 4; ++i) {
    stack += "conv c" + std::to_string(i) + " from=" + (i == 1 ? "input" : "c" + std::to_string(i - 1)) +
             " out=4 k=3 p=1\n";
  }
  stack += "fc f from=c4 out=3 relu=0\noutput prob from=f classes=3\n";
  const std::string arch = dir.write("arch.txt", stack);
  const Outcome r = run({"probe", "--arch", arch, "--threshold", "1e-7", "--iters", "20"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "layer,mean_abs_grad,flagged");
  for (int i = 1; i <= 4; ++i) {
    ASSERT_TRUE(std::getline(lines, line));
    EXPECT_EQ(line.rfind("c" + std::to_string(i) + ",", 0), 0u) << line;
  }
  ASSERT_TRUE(std::getline(lines, line));
  EXPECT_EQ(line.rfind("# recommended: ", 0), 0u);
  EXPECT_FALSE(std::getline(lines, line));
}

TEST_F(CliWorkspace, TrainEvalInspect) {
  const Outcome t = train_run("run");
  ASSERT_EQ(t.code, 0) << t.err;
  const std::string metrics = slurp(dir.file("run/metrics.csv"));
  EXPECT_EQ(metrics.rfind("epoch,lr,alpha,train_loss,val_top1,val_top5,wall_time_s\n", 0), 0u);
  EXPECT_EQ(std::count(metrics.begin(), metrics.end(), '\n'), 3);

  const std::string ckpt = dir.file("run/best.ckpt");
  for (bool ten : {false, true}) {
    std::vector<std::string> args{"eval", "--ckpt", ckpt, "--manifest", val_manifest};
    if (ten) args.push_back("--ten-crop");
    const Outcome e = run(args);
    ASSERT_EQ(e.code, 0) << e.err;
    EXPECT_EQ(e.out.rfind("top1=", 0), 0u) << e.out;
    EXPECT_NE(e.out.find(" top5="), std::string::npos);
  }

  const Outcome i = run({"inspect", "--ckpt", ckpt});
  ASSERT_EQ(i.code, 0) << i.err;
  EXPECT_NE(i.out.find("main.c1.weight"), std::string::npos);
  EXPECT_NE(i.out.find("(6x3x3x3)"), std::string::npos);
  EXPECT_NE(i.out.find("branch1.b1_conv.weight"), std::string::npos);
  EXPECT_NE(i.out.find("l2_norm"), std::string::npos);

  // Validation checkpoint of another class count does not fit the manifest.
  EXPECT_EQ(run({"eval", "--ckpt", ckpt, "--manifest", new_manifest}).code, cli::kExitData);
}

TEST_F(CliWorkspace, SeedSourcesAndThreads) {
  const std::string cfg = dir.write("cfg.json", R"({"seed": 11, "alpha0": 0.2})");
  ::setenv("RCNDS_SEED", "42", 1);
  ASSERT_EQ(train_run("env", {"--config", cfg, "--threads", "2"}).code, 0);
  ASSERT_EQ(train_run("flag", {"--config", cfg, "--seed", "7"}).code, 0);
  ::unsetenv("RCNDS_SEED");
  ASSERT_EQ(train_run("file", {"--config", cfg}).code, 0);

  EXPECT_EQ(io::load_checkpoint(dir.file("env/best.ckpt")).seed, 42u);
  EXPECT_EQ(io::load_checkpoint(dir.file("flag/best.ckpt")).seed, 7u);
  EXPECT_EQ(io::load_checkpoint(dir.file("file/best.ckpt")).seed, 11u);
  const auto written = io::load_run_config(dir.file("env/config.json"));
  EXPECT_EQ(written.alpha0, 0.2);
  EXPECT_EQ(written.threads, 2);
  EXPECT_EQ(written.crop, 16);
  EXPECT_EQ(written.source_side, 20);

  EXPECT_EQ(train_run("bad", {"--config", dir.write("bad.json", R"({"sede": 1})")}).code, cli::kExitUsage);
  EXPECT_EQ(train_run("zero", {"--threads", "0"}).code, cli::kExitUsage);
}

TEST_F(CliWorkspace, FinetuneToNewClasses) {
  ASSERT_EQ(train_run("base").code, 0);
  const Outcome f = run({"finetune", "--ckpt", dir.file("base/best.ckpt"), "--train", new_manifest, "--val", new_manifest,
                     "--out", dir.file("ft"), "--epochs", "2", "--batch", "4"});
  ASSERT_EQ(f.code, 0) << f.err;
  const auto c = io::load_checkpoint(dir.file("ft/best.ckpt"));
  EXPECT_EQ(c.params.at("main.f2.weight").shape(), (Shape{3, 16}));
  EXPECT_EQ(io::checkpoint_graph(c).num_classes, 3);
  const auto cfg = io::load_run_config(dir.file("ft/config.json"));
  EXPECT_EQ(cfg.base_lr, 0.001);
  EXPECT_EQ(cfg.lr_halving_period, 4);
}

TEST_F(CliWorkspace, DivergenceExitCode) {
  const Outcome r = run({"train", "--arch", arch, "--train", train_manifest, "--val", val_manifest, "--out",
                         dir.file("div"), "--epochs", "3", "--batch", "4", "--init-std", "1e9"});
  EXPECT_EQ(r.code, cli::kExitDiverged) << r.err;
  EXPECT_NE(r.err.find("batch"), std::string::npos);
}

TEST_F(CliWorkspace, BadManifestIsDataError) {
  const std::string m = dir.write("train/broken.txt", "#classes: a,b\n0/0.ppm\t7\n");
  const Outcome r = run({"train", "--arch", arch, "--train", m, "--val", val_manifest, "--out", dir.file("x")});
  EXPECT_EQ(r.code, cli::kExitData);
  EXPECT_NE(r.err.find("line 2"), std::string::npos) << r.err;
}
