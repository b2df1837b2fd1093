#include <filesystem>
#include <fstream>
#include <sstream>

#include "cite/checkpoint.hpp"
#include "cite/ensemble.hpp"
#include "commands.hpp"
#include "config.hpp"
#include "support.hpp"

using namespace cite;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "cite");
  std::ostringstream out, err;
  Outcome o;
  o.code = cli::run(args, out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  for (std::string f; std::getline(in, f, ',');) out.push_back(f);
  return out;
}

const std::vector<std::string> kQuick = {"--set", "train.epochs=2", "--set", "pretrain.epochs=4"};

std::vector<std::string> with_quick(std::vector<std::string> args) {
  args.insert(args.end(), kQuick.begin(), kQuick.end());
  return args;
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / "cite_cli_tests";
    fs::remove_all(root_);
    fs::create_directories(root_ / "data");
    ASSERT_EQ(run_cli({"gen", "--out", (root_ / "data").string()}).code, 0);
    ASSERT_EQ(run_cli(with_quick({"pretrain", "--out", (root_ / "zs.ckpt").string()})).code, 0);
    ASSERT_EQ(run_cli(with_quick({"finetune", "--data", data(), "--init", zs(), "--out", ft()})).code, 0);
  }
  static std::string data() { return (root_ / "data").string(); }
  static std::string zs() { return (root_ / "zs.ckpt").string(); }
  static std::string ft() { return (root_ / "ft.ckpt").string(); }
  static std::string path(const std::string& name) { return (root_ / name).string(); }

  static fs::path root_;
};

fs::path CliTest::root_;

}  // namespace

TEST(CliConfig, DefaultsFollowReferenceValues) {
  const cli::RunConfig cfg = cli::load_run_config("", {});
  EXPECT_EQ(cfg.train.loss.lambda, 0.7);
  EXPECT_EQ(cfg.train.loss.eta, 0.1);
  EXPECT_EQ(cfg.ensemble.alpha, 0.5);
  EXPECT_EQ(cfg.train.loss.tau_main, 0.01);
  EXPECT_EQ(cfg.train.loss.tau_vld, 0.1);
  EXPECT_EQ(cfg.train.epochs, 20u);
  EXPECT_EQ(cfg.train.shots, 16u);
}

TEST(CliConfig, FlagBeatsFileBeatsDefault) {
  const fs::path file = fs::temp_directory_path() / "cite_cli_precedence.cfg";
  std::ofstream(file) << "# comment\ntrain.epochs = 7   # trailing comment\nloss.eta = 0.3\n";
  const cli::RunConfig cfg = cli::load_run_config(file.string(), {"train.epochs=9"});
  EXPECT_EQ(cfg.train.epochs, 9u);
  EXPECT_EQ(cfg.train.loss.eta, 0.3);
  EXPECT_EQ(cfg.train.loss.lambda, 0.7);
}

TEST(CliConfig, DumpParsesBack) {
  cli::RunConfig cfg = cli::load_run_config("", {"data.domains=0:0:0:1;3:0.25:0.5:1.1", "train.freeze_image=first:1",
                                                 "train.max_steps=5", "eval.protocol=cdg"});
  const fs::path file = fs::temp_directory_path() / "cite_cli_dump.cfg";
  std::ofstream(file) << cli::dump(cfg);
  EXPECT_EQ(cli::dump(cli::load_run_config(file.string(), {})), cli::dump(cfg));
}

TEST(CliConfig, ShippedConfigEqualsDefaults) {
  const fs::path shipped = fs::path(CITE_SOURCE_DIR) / "configs" / "default.cfg";
  EXPECT_EQ(cli::dump(cli::load_run_config(shipped.string(), {})), cli::dump(cli::load_run_config("", {})));
}

TEST(CliConfig, Rejections) {
  EXPECT_CITE_ERROR(cli::load_run_config("", {"train.epoch=3"}), ErrorCode::kConfig);
  EXPECT_CITE_ERROR(cli::load_run_config("", {"train.epochs=three"}), ErrorCode::kConfig);
  EXPECT_CITE_ERROR(cli::load_run_config("", {"loss.vld=maybe"}), ErrorCode::kConfig);
  EXPECT_CITE_ERROR(cli::load_run_config("", {"train.batch_size=1"}), ErrorCode::kConfig);
  EXPECT_CITE_ERROR(cli::load_run_config("", {"ensemble.alpha=2"}), ErrorCode::kConfig);
  EXPECT_CITE_ERROR(cli::load_run_config("/nonexistent/x.cfg", {}), ErrorCode::kIo);
}

TEST(CliHelp, EverySubcommandDocumentsEveryKey) {
  for (const std::string sub : {"gen", "pretrain", "finetune", "eval", "sweep-alpha", "gradcheck"}) {
    const Outcome o = run_cli({sub, "--help"});
    EXPECT_EQ(o.code, 0) << sub;
    for (const auto& k : cli::documented_keys()) EXPECT_NE(o.out.find(k.name), std::string::npos) << sub << " " << k.name;
  }
  EXPECT_EQ(run_cli({"--help"}).code, 0);
}

TEST(CliErrors, ExitCodes) {
  EXPECT_EQ(run_cli({"gen", "--out", "/nonexistent/dir"}).code, 3);
  EXPECT_EQ(run_cli({"gen", "--out", ".", "--set", "nope=1"}).code, 2);
  EXPECT_EQ(run_cli({"gen"}).code, 2);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 2);
  EXPECT_EQ(cli::exit_code_for(ErrorCode::kChecksumMismatch), 3);
  EXPECT_EQ(cli::exit_code_for(ErrorCode::kDegenerateSplit), 2);
  EXPECT_EQ(cli::exit_code_for(ErrorCode::kNonFiniteLoss), 1);
}

TEST_F(CliTest, GenWritesThreeDomainsAndManifest) {
  for (const char* f : {"domain_0.csv", "domain_1.csv", "domain_2.csv", "split.txt"})
    EXPECT_TRUE(fs::exists(root_ / "data" / f)) << f;
  EXPECT_FALSE(fs::exists(root_ / "data" / "domain_3.csv"));
  const cli::DataDir d = cli::read_data_dir(data());
  EXPECT_EQ(d.domains.size(), 3u);
  EXPECT_EQ(d.split.base.size() + d.split.novel.size(), 10u);
}

TEST_F(CliTest, GenIsByteDeterministic) {
  fs::create_directories(root_ / "again");
  ASSERT_EQ(run_cli({"gen", "--out", path("again")}).code, 0);
  for (const char* f : {"domain_0.csv", "domain_1.csv", "domain_2.csv", "split.txt"})
    EXPECT_EQ(slurp(root_ / "again" / f), slurp(root_ / "data" / f)) << f;
}

TEST_F(CliTest, FinetuneTraceHasOneRowPerStep) {
  const Outcome o = run_cli({"finetune", "--data", data(), "--init", zs(), "--out", path("t.ckpt"), "--trace",
                             path("trace.csv"), "--set", "train.epochs=3"});
  ASSERT_EQ(o.code, 0) << o.err;
  const auto rows = lines_of(slurp(path("trace.csv")));
  EXPECT_EQ(rows[0], "step,epoch,batch,total,dva,scl,vld");
  // 5 base classes x 16 shots = 80 rows; batch 32 -> 3 batches (tail 16 kept).
  EXPECT_EQ(rows.size() - 1, 3u * 3u);
  EXPECT_EQ(load_checkpoint(path("t.ckpt")).step, 9u + load_checkpoint(zs()).step);
}

TEST_F(CliTest, AblateDvaIsLabelled) {
  const Outcome o = run_cli(with_quick({"finetune", "--data", data(), "--init", zs(), "--out", path("dva.ckpt"), "--trace",
                                    path("dva.csv"), "--ablate", "dva"}));
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find("objective: DVA\n"), std::string::npos);
  for (const auto& line : lines_of(slurp(path("dva.csv")))) {
    if (line.rfind("step", 0) == 0) continue;
    const auto f = split_csv(line);
    EXPECT_EQ(f[5], "0");
    EXPECT_EQ(f[6], "0");
    EXPECT_EQ(f[3], f[4]);
  }
  EXPECT_NE(run_cli(with_quick({"finetune", "--data", data(), "--init", zs(), "--out", path("x.ckpt"), "--ablate",
                            "dva+scl"}))
                .out.find("objective: DVA+SCL\n"),
            std::string::npos);
  EXPECT_EQ(run_cli({"finetune", "--data", data(), "--init", zs(), "--out", path("x.ckpt"), "--ablate", "vld"}).code, 2);
}

TEST_F(CliTest, NanLossExitsWithStep) {
  const Outcome o = run_cli(with_quick({"finetune", "--data", data(), "--init", zs(), "--out", path("nan.ckpt"), "--set",
                                    "loss.tau_main=1e-320"}));
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.err.find("step 1"), std::string::npos) << o.err;
}

TEST_F(CliTest, EvalThreeAlphas) {
  const Outcome o = run_cli({"eval", "--data", data(), "--zs", zs(), "--ft", ft(), "--protocol", "bng", "--alpha",
                         "0,0.5,1", "--out", path("m.csv")});
  ASSERT_EQ(o.code, 0) << o.err;
  const auto rows = lines_of(slurp(path("m.csv")));
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], "protocol,alpha,B,N,HM,seed");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto f = split_csv(rows[i]);
    ASSERT_EQ(f.size(), 6u);
    EXPECT_EQ(f[0], "bng");
    // HM recomputed from the printed B and N agrees to the printed precision.
    EXPECT_NEAR(std::stod(f[4]), harmonic_mean(std::stod(f[2]), std::stod(f[3])), 0.01 + 1e-9);
  }
  EXPECT_NE(o.out.find("protocol"), std::string::npos);

  const Outcome z = run_cli({"eval", "--data", data(), "--zs", zs(), "--protocol", "bng", "--out", path("z.csv")});
  ASSERT_EQ(z.code, 0) << z.err;
  EXPECT_EQ(lines_of(slurp(path("z.csv")))[1], rows[1]);
}

TEST_F(CliTest, SweepEmitsElevenAscendingRows) {
  ASSERT_EQ(run_cli({"sweep-alpha", "--data", data(), "--zs", zs(), "--ft", ft(), "--out", path("sweep.csv")}).code, 0);
  const auto rows = lines_of(slurp(path("sweep.csv")));
  ASSERT_EQ(rows.size(), 12u);
  for (int i = 0; i <= 10; ++i) EXPECT_NEAR(std::stod(split_csv(rows[i + 1])[1]), i / 10.0, 1e-12);
}

TEST_F(CliTest, CorruptCheckpointIsIoClass) {
  std::string bytes = slurp(ft());
  bytes[bytes.size() / 2] ^= 1;
  std::ofstream(path("bad.ckpt"), std::ios::binary) << bytes;
  const Outcome o = run_cli({"eval", "--data", data(), "--zs", zs(), "--ft", path("bad.ckpt")});
  EXPECT_EQ(o.code, 3);
  EXPECT_NE(o.err.find("ChecksumMismatch"), std::string::npos);
}

TEST_F(CliTest, DataConfigMismatchIsConfigError) {
  const Outcome o = run_cli(with_quick({"finetune", "--data", data(), "--out", path("m.ckpt"), "--set", "data.n_classes=8"}));
  EXPECT_EQ(o.code, 2);
}

TEST_F(CliTest, MissingDomainForProtocol) {
  EXPECT_EQ(run_cli({"eval", "--data", data(), "--zs", zs(), "--protocol", "cdg", "--set", "eval.test_domain=5"}).code, 2);
}

TEST(CliGradcheck, ReportsAndFaultHook) {
  const Outcome o = run_cli({"gradcheck"});
  EXPECT_EQ(o.code, 0);
  const auto rows = lines_of(o.out);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].rfind("dva", 0), 0u);
  EXPECT_EQ(rows[1].rfind("scl", 0), 0u);
  EXPECT_EQ(rows[2].rfind("vld", 0), 0u);
  EXPECT_EQ(rows[3].rfind("total", 0), 0u);
  EXPECT_EQ(run_cli({"gradcheck", "--inject-fault", "--instances", "2"}).code, 1);
}
