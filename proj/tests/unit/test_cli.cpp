#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "netconform/cli.hpp"

using namespace netconform;
namespace fs = std::filesystem;

namespace {

const fs::path fixtures{NETCONFORM_FIXTURES};

class CliTest : public ::testing::Test {
 protected:
  fs::path root;

  void SetUp() override {
    root = fs::temp_directory_path() /
           ("netconform_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root);
    fs::create_directories(root);
  }
  void TearDown() override { fs::remove_all(root); }

  fs::path write_config(const std::string& name, const std::string& text) {
    const fs::path p = root / name;
    write_file_atomic(p, text);
    return p;
  }

  int run(Command c, const fs::path& config, const fs::path& out, std::string* err_text = nullptr) {
    RunSpec spec;
    spec.command = c;
    spec.config_path = config;
    spec.out_dir = out;
    std::ostringstream err;
    const int rc = run_command(spec, err);
    if (err_text) *err_text = err.str();
    return rc;
  }

  static Json manifest(const fs::path& dir) { return Json::parse(read_text_file(dir / "manifest.json")); }
};

}  // namespace

TEST_F(CliTest, SimulateExtractConformPipeline) {
  const auto sim_cfg = write_config("sim.toml", "scenario = \"rdpg_linear\"\nn = 80\nseed = 4\nsparsity_exponent = 0.1\n");
  ASSERT_EQ(run(Command::simulate, sim_cfg, root / "sim"), 0);
  EXPECT_TRUE(fs::exists(root / "sim" / "nodes.csv"));
  EXPECT_TRUE(fs::exists(root / "sim" / "edges.tsv"));
  const Json sm = manifest(root / "sim");
  EXPECT_EQ(sm.at("status"), "ok");
  EXPECT_EQ(sm.at("nodes").get<int>(), 81);

  const auto ext_cfg = write_config("ext.toml", R"(
seed = 1
nodes = "sim/nodes.csv"
graph = "sim/edges.tsv"
covariates = [{ type = "degree" }, { type = "ase", p = 3, q = 0 }, { type = "khop", kmax = 2 }]
)");
  ASSERT_EQ(run(Command::extract, ext_cfg, root / "ext"), 0);
  const auto features = read_dense_csv(root / "ext" / "features.csv");
  EXPECT_EQ(features.values.rows(), 81);
  EXPECT_EQ(features.header.front(), "degree");
  EXPECT_EQ(features.header[1], "ase_u1");

  const auto conf_cfg = write_config("conf.toml", R"(
seed = 9
alpha = 0.1
nodes = "sim/nodes.csv"
graph = "sim/edges.tsv"
covariates = [{ type = "ase", p = 3 }]
[splits]
fractions = [0.4, 0.4, 0.2]
)");
  ASSERT_EQ(run(Command::conform, conf_cfg, root / "conf"), 0);
  const Json preds = Json::parse(read_text_file(root / "conf" / "predictions.json"));
  EXPECT_EQ(preds.at("predictions").size(), 16u);  // floor(0.2 * 81) test nodes
  EXPECT_EQ(preds.at("calibration_size").get<int>(), 32);
  const auto& p0 = preds.at("predictions").at(0);
  EXPECT_LT(p0.at("lower").get<double>(), p0.at("upper").get<double>());
  EXPECT_TRUE(fs::exists(root / "conf" / "report.csv"));
}

TEST_F(CliTest, ConformTreatsMissingResponsesAsTestNodes) {
  write_file_atomic(root / "nodes.csv", "x,y\n0.1,1.0\n0.5,1.4\n0.9,2.1\n1.3,2.4\n1.7,3.2\n2.1,3.3\n2.5,nan\n");
  write_file_atomic(root / "edges.tsv", "0\t1\n1\t2\n2\t3\n3\t4\n4\t5\n5\t6\n");
  const auto cfg = write_config("c.toml", "seed = 2\nalpha = 0.4\nnodes = \"nodes.csv\"\ngraph = \"edges.tsv\"\n");
  ASSERT_EQ(run(Command::conform, cfg, root / "out"), 0);
  const Json preds = Json::parse(read_text_file(root / "out" / "predictions.json"));
  ASSERT_EQ(preds.at("predictions").size(), 1u);
  EXPECT_EQ(preds.at("predictions").at(0).at("node").get<int>(), 6);
  EXPECT_FALSE(preds.at("predictions").at(0).contains("covered"));
  EXPECT_FALSE(fs::exists(root / "out" / "report.csv"));
}

TEST_F(CliTest, ExperimentRerunsAreByteIdentical) {
  const fs::path cfg = fixtures / "smoke_experiment.toml";
  ASSERT_EQ(run(Command::experiment, cfg, root / "a"), 0);
  ASSERT_EQ(run(Command::experiment, cfg, root / "b"), 0);
  for (const char* f : {"report.csv", "curves.csv", "manifest.json"})
    EXPECT_EQ(read_text_file(root / "a" / f), read_text_file(root / "b" / f)) << f;
  const auto report = read_text_file(root / "a" / "report.csv");
  EXPECT_EQ(report.rfind("method,cell,coverage,ci_lo,ci_hi,mean_width,replicates\n", 0), 0u);
}

TEST_F(CliTest, SeedOverrideChangesResults) {
  const fs::path cfg = fixtures / "smoke_experiment.toml";
  RunSpec spec{Command::experiment, cfg, root / "a", 5u, std::nullopt};
  std::ostringstream err;
  ASSERT_EQ(run_command(spec, err), 0);
  ASSERT_EQ(run(Command::experiment, cfg, root / "b"), 0);
  EXPECT_NE(read_text_file(root / "a" / "report.csv"), read_text_file(root / "b" / "report.csv"));
  EXPECT_EQ(manifest(root / "a").at("seed").get<int>(), 5);
}

TEST_F(CliTest, ClassifyTinyFixtureGivesSetPerTestNode) {
  const auto cfg = write_config("tiny.toml", fmt::format("content = \"{}\"\ncites = \"{}\"\nseed = 3\nalpha = 0.1\n",
                                                         (fixtures / "tiny.content").string(),
                                                         (fixtures / "tiny.cites").string()));
  ASSERT_EQ(run(Command::classify, cfg, root / "out"), 0);
  const Json doc = Json::parse(read_text_file(root / "out" / "predictions.json"));
  ASSERT_FALSE(doc.at("results").empty());
  for (const auto& result : doc.at("results")) {
    ASSERT_EQ(result.at("predictions").size(), 1u);
    EXPECT_FALSE(result.at("predictions").at(0).at("set").empty());
  }
}

TEST_F(CliTest, ClassifySmallFixtureReportsEachCovariateSet) {
  const fs::path out = root / "out";
  ASSERT_EQ(run(Command::classify, fixtures / "small_classify.toml", out), 0);
  const Json doc = Json::parse(read_text_file(out / "predictions.json"));
  ASSERT_EQ(doc.at("results").size(), 3u);
  for (const auto& r : doc.at("results")) EXPECT_EQ(r.at("predictions").size(), 20u);
  const auto report = read_text_file(out / "report.csv");
  EXPECT_NE(report.find("logistic,sets=1+4,"), std::string::npos);
  const Json m = manifest(out);
  EXPECT_EQ(m.at("nodes").get<int>(), 60);
}

TEST_F(CliTest, ClassifyRejectsUnsupportedCovariateSet) {
  const auto cfg = write_config("c.toml", fmt::format("content = \"{}\"\ncites = \"{}\"\nseed = 3\ncovariate_sets = [[3]]\n",
                                                      (fixtures / "small.content").string(),
                                                      (fixtures / "small.cites").string()));
  std::string err;
  EXPECT_EQ(run(Command::classify, cfg, root / "out", &err), 1);
  EXPECT_NE(err.find("error[config_error]"), std::string::npos) << err;
}

TEST_F(CliTest, MissingInputLeavesOnlyErrorManifest) {
  const auto cfg = write_config("bad.toml", "seed = 1\nnodes = \"absent.csv\"\ngraph = \"absent.tsv\"\n");
  std::string err;
  EXPECT_EQ(run(Command::conform, cfg, root / "out", &err), 1);
  EXPECT_NE(err.find("error[io_error]"), std::string::npos) << err;
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(root / "out")) files.push_back(e.path().filename().string());
  EXPECT_EQ(files, std::vector<std::string>{"manifest.json"});
  const Json m = manifest(root / "out");
  EXPECT_EQ(m.at("status"), "error");
  EXPECT_EQ(m.at("error").at("code"), "io_error");
  EXPECT_EQ(m.at("error_counts").at("io_error").get<int>(), 1);
  EXPECT_TRUE(m.at("outputs").empty());
}

TEST_F(CliTest, MissingSeedFailsWithConfigCode) {
  const auto cfg = write_config("noseed.toml", "scenario = \"rdpg_linear\"\nn = 40\nreplicates = 2\n");
  std::string err;
  EXPECT_EQ(run(Command::experiment, cfg, root / "out", &err), 1);
  EXPECT_EQ(manifest(root / "out").at("error").at("code"), "config_error");
  EXPECT_FALSE(fs::exists(root / "out" / "report.csv"));
}

TEST_F(CliTest, FailedWriteRollsBackEarlierFiles) {
  const fs::path out = root / "out";
  before_rename_hook() = [](const fs::path& p) {
    if (p.filename() == "curves.csv.partial") throw Error(ErrorCode::io, "disk full");
  };
  const int rc = run(Command::experiment, fixtures / "smoke_experiment.toml", out);
  before_rename_hook() = nullptr;
  EXPECT_EQ(rc, 1);
  EXPECT_FALSE(fs::exists(out / "report.csv"));
  EXPECT_FALSE(fs::exists(out / "curves.csv"));
  EXPECT_EQ(manifest(out).at("status"), "error");
}
