#include <filesystem>

#include <gtest/gtest.h>

#include "netconform/config.hpp"

using namespace netconform;
namespace fs = std::filesystem;

TEST(Toml, ScalarsArraysAndTables) {
  const Json j = parse_toml(R"(
# top-level comment
name = "run 1"   # trailing comment
count = 1_000
ratio = 2.5e-1
flag = true
grid = [
  0.1,
  0.75,  # spans lines
]
nested = [[1], [1, 4]]
literal = 'C:\path'
inline = { kind = "cdf_distance", folds = 3 }

[score]
kind = "abs_residual"

[[covariates]]
type = "degree"

[[covariates]]
type = "ase"
p = 3
)");
  EXPECT_EQ(j.at("name"), "run 1");
  EXPECT_EQ(j.at("count").get<int>(), 1000);
  EXPECT_DOUBLE_EQ(j.at("ratio").get<double>(), 0.25);
  EXPECT_TRUE(j.at("flag").get<bool>());
  EXPECT_EQ(j.at("grid").size(), 2u);
  EXPECT_EQ(j.at("nested").at(1).at(1).get<int>(), 4);
  EXPECT_EQ(j.at("literal"), "C:\\path");
  EXPECT_EQ(j.at("inline").at("folds").get<int>(), 3);
  EXPECT_EQ(j.at("score").at("kind"), "abs_residual");
  ASSERT_EQ(j.at("covariates").size(), 2u);
  EXPECT_EQ(j.at("covariates").at(1).at("p").get<int>(), 3);
}

TEST(Toml, DottedKeysAndSpecialFloats) {
  const Json j = parse_toml("a.b = 1\na.c = inf\n[x.y]\nz = -inf\n");
  EXPECT_EQ(j.at("a").at("b").get<int>(), 1);
  EXPECT_TRUE(std::isinf(j.at("a").at("c").get<double>()));
  EXPECT_LT(j.at("x").at("y").at("z").get<double>(), 0.0);
}

TEST(Toml, ErrorsNameTheLine) {
  for (const char* bad : {"a = 1\nb = \n", "a = 1\na = 2\n", "a = \"open\n", "a = 1 2\n", "a = [1, 2\n",
                          "a = \"\"\"x\"\"\"\n", "a = 1979-05-27\n"}) {
    try {
      parse_toml(bad);
      ADD_FAILURE() << "accepted: " << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::parse);
      EXPECT_NE(std::string(e.what()).find("config line"), std::string::npos);
    }
  }
}

TEST(ConfigAccess, MissingSeedIsHardError) {
  try {
    config_seed(Json::object());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::config);
  }
  EXPECT_THROW(config_seed(Json{{"seed", 1.5}}), Error);
  EXPECT_EQ(config_seed(Json{{"seed", 42}}), 42u);
  EXPECT_THROW(config_value<int>(Json{{"n", "x"}}, "n", 1), Error);
  EXPECT_THROW(config_alpha(Json{{"alpha", 1.0}}), Error);
}

TEST(ConfigAccess, ExperimentConfigFromToml) {
  const Json j = parse_toml(R"(
scenario = "sar"
seed = 7
n = 200
replicates = 3
sparsity_exponents = [0.1, 0.5]
models = [1, 3]
population = 400
test_nodes = 2
)");
  const auto cfg = experiment_config_from_json(j);
  EXPECT_EQ(cfg.scenario, Scenario::sar);
  EXPECT_EQ(cfg.seed, 7u);
  EXPECT_EQ(cfg.sar_models, (std::vector<int>{1, 3}));
  EXPECT_EQ(cfg.sparsity_exponents.size(), 2u);
  EXPECT_EQ(cfg.test_per_replicate, 2);
  EXPECT_DOUBLE_EQ(cfg.comparator_alpha(), 0.05);

  Json no_seed = j;
  no_seed.erase("seed");
  EXPECT_THROW(experiment_config_from_json(no_seed), Error);
  Json bad_model = j;
  bad_model["models"] = Json::array({5});
  EXPECT_THROW(experiment_config_from_json(bad_model), Error);
}

TEST(ConfigAccess, CovariateAndScoreDescriptors) {
  const Json j = parse_toml(R"(
covariates = [
  { type = "degree" },
  { type = "khop", kmax = 3, columns = [0], fallback = "zero" },
  { type = "neighbor_weighted_response", rule = "geometric", gamma = 0.3, kmax = 2 },
]
score = { kind = "classification_adaptive", randomized = true }
)");
  const auto spec = covariate_spec_from_json(j.at("covariates"));
  ASSERT_EQ(spec.extractors.size(), 3u);
  EXPECT_EQ(std::get<KHopExtractor>(spec.extractors[1]).kmax, 3);
  const auto score = score_spec_from_json(j.at("score"));
  EXPECT_EQ(score.kind, ScoreSpec::Kind::classification_adaptive);
  EXPECT_TRUE(score.randomized);
  EXPECT_TRUE(score.jitter_relative.has_value());
  EXPECT_THROW(extractor_from_json(Json{{"type", "spectral"}}), Error);
  EXPECT_THROW(score_spec_from_json(Json{{"kind", "nope"}}), Error);
}

TEST(ConfigFiles, JsonAndTomlByExtension) {
  const fs::path dir = fs::temp_directory_path() / "netconform_config";
  fs::create_directories(dir);
  write_file_atomic(dir / "a.json", R"({"seed": 5, "alpha": 0.2})");
  write_file_atomic(dir / "a.toml", "seed = 5\nalpha = 0.2\n");
  EXPECT_EQ(load_config(dir / "a.json"), load_config(dir / "a.toml"));
  write_file_atomic(dir / "bad.json", "{seed: }");
  EXPECT_THROW(load_config(dir / "bad.json"), Error);
  EXPECT_THROW(load_config(dir / "missing.toml"), Error);
  fs::remove_all(dir);
}
