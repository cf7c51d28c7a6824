#include <gtest/gtest.h>

#include "ligs/config.hpp"
#include "test_util.hpp"

using namespace ligs;
using testutil::TempDir;

TEST(Config, DefaultsMatchDocumentedValues) {
  PipelineConfig cfg;
  EXPECT_EQ(cfg.lambda_gmm, 1.0);
  EXPECT_EQ(cfg.lambda_d, 0.1);
  EXPECT_EQ(cfg.lambda_n, 0.1);
  EXPECT_EQ(cfg.gmm_knn, 4);
  EXPECT_EQ(cfg.gmm_sigma, 0.1);
  EXPECT_EQ(cfg.shape_alpha, 0.5);
  EXPECT_EQ(cfg.tau, 0.01);
  EXPECT_EQ(cfg.omega_growth, 0.4);
  EXPECT_EQ(cfg.omega_scale, 0.0002);
  EXPECT_EQ(cfg.omega_pruning, 0.003);
  EXPECT_EQ(cfg.seed, 1u);
}

TEST(Config, SetParsesEveryValueKind) {
  PipelineConfig cfg;
  cfg.set("seed", "99");
  cfg.set("threads", "3");
  cfg.set("lambda_d", "0.25");
  cfg.set("scene_dir", "some/dir");
  cfg.set("scene_preset", "box_room");
  EXPECT_EQ(cfg.seed, 99u);
  EXPECT_EQ(cfg.threads, 3);
  EXPECT_EQ(cfg.lambda_d, 0.25);
  EXPECT_EQ(cfg.scene_dir, "some/dir");
  EXPECT_EQ(cfg.scene_preset, "box_room");
}

TEST(Config, UnknownKeyNamesTheKey) {
  PipelineConfig cfg;
  try {
    cfg.set("lamda_GMM", "1.0");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key, "lamda_GMM");
    EXPECT_NE(std::string(e.what()).find("lamda_GMM"), std::string::npos);
  }
}

TEST(Config, BadValueThrows) {
  PipelineConfig cfg;
  EXPECT_THROW(cfg.set("iterations", "not_a_number"), ConfigError);
  EXPECT_THROW(cfg.set("lambda_d", "abc"), ConfigError);
}

TEST(Config, SaveLoadRoundTrip) {
  TempDir dir("tmp_config_rt");
  PipelineConfig cfg;
  cfg.seed = 1234;
  cfg.iterations = 777;
  cfg.lambda_n = 0.015625;  // dyadic, so text round-trip is exact
  cfg.scene_dir = "scenes/room";
  cfg.save(dir / "cfg.txt");

  PipelineConfig back;
  back.load(dir / "cfg.txt");
  EXPECT_EQ(back.seed, cfg.seed);
  EXPECT_EQ(back.iterations, cfg.iterations);
  EXPECT_EQ(back.lambda_n, cfg.lambda_n);
  EXPECT_EQ(back.scene_dir, cfg.scene_dir);
  EXPECT_EQ(back.to_text(), cfg.to_text());
}

TEST(Config, LoadSkipsCommentsAndBlanks) {
  TempDir dir("tmp_config_comments");
  {
    std::FILE* f = std::fopen((dir / "cfg.txt").c_str(), "w");
    std::fputs("# comment line\n\nseed = 5\n  iterations=42\n", f);
    std::fclose(f);
  }
  PipelineConfig cfg;
  cfg.load(dir / "cfg.txt");
  EXPECT_EQ(cfg.seed, 5u);
  EXPECT_EQ(cfg.iterations, 42);
}

TEST(Config, LoadMissingFileThrowsIoError) {
  PipelineConfig cfg;
  EXPECT_THROW(cfg.load("definitely/missing.txt"), IoError);
}

TEST(Config, UnknownKeyInFileNamesIt) {
  TempDir dir("tmp_config_unknown");
  {
    std::FILE* f = std::fopen((dir / "cfg.txt").c_str(), "w");
    std::fputs("sceen_dir = oops\n", f);
    std::fclose(f);
  }
  PipelineConfig cfg;
  try {
    cfg.load(dir / "cfg.txt");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key, "sceen_dir");
  }
}
