// SPDX-License-Identifier: Apache-2.0
//
// End-to-end through the shared library only.

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mgrr/mgrr.h"

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "mgrr_test_capi" / name;
  fs::remove_all(dir);
  fs::create_directories(dir.parent_path());
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void quiet(const char*, void*) {}

class CApi : public ::testing::Test {
 protected:
  void SetUp() override {
    mgrr_set_log(quiet, nullptr);
    ASSERT_EQ(mgrr_config_new(&cfg_), MGRR_OK);
    const char* sets[] = {"aus=3", "landmarks=8", "layers=1", "heads=2", "attn_width=8", "feature_width=8",
                          "channels=4", "map_size=8", "image_size=16", "align_width=8", "sample_count=20",
                          "links=1:0:0.9", "blob_sigma=1.5", "epochs=1", "batch_size=5", "lr=0.05"};
    for (const char* s : sets) ASSERT_EQ(mgrr_config_assign(cfg_, s), MGRR_OK) << s;
  }
  void TearDown() override {
    mgrr_config_free(cfg_);
    mgrr_set_log(nullptr, nullptr);
  }
  mgrr_config* cfg_ = nullptr;
};

}  // namespace

TEST_F(CApi, ConfigAccessAndErrors) {
  char buf[8];
  size_t needed = 0;
  ASSERT_EQ(mgrr_config_get(cfg_, "aus", buf, sizeof buf, &needed), MGRR_OK);
  EXPECT_STREQ(buf, "3");
  EXPECT_EQ(needed, 2u);
  EXPECT_EQ(mgrr_config_get(cfg_, "links", buf, 2, &needed), MGRR_ERR_ARGUMENT);
  EXPECT_EQ(needed, 8u);
  EXPECT_EQ(mgrr_config_set(cfg_, "bogus", "1"), MGRR_ERR_SPEC);
  EXPECT_NE(std::string(mgrr_last_error()).find("bogus"), std::string::npos);
  EXPECT_EQ(mgrr_config_set(nullptr, "aus", "1"), MGRR_ERR_ARGUMENT);
  EXPECT_EQ(mgrr_config_load(cfg_, "/nonexistent.cfg"), MGRR_ERR_INPUT);
  EXPECT_GT(mgrr_config_key_count(), 30u);
  EXPECT_STREQ(mgrr_config_key_name(0), "aus");
  EXPECT_STREQ(mgrr_config_key_default(0), "12");
  EXPECT_EQ(mgrr_config_key_name(100000), nullptr);
  EXPECT_STREQ(mgrr_status_name(MGRR_ERR_PARSE), "parse error");
}

TEST_F(CApi, InfeasibleSpecFails) {
  ASSERT_EQ(mgrr_config_set(cfg_, "marginals", "0.5,0.2,0.3"), MGRR_OK);
  ASSERT_EQ(mgrr_config_set(cfg_, "links", "1:0:1"), MGRR_OK);
  EXPECT_EQ(mgrr_generate(cfg_, scratch("bad").c_str(), 1), MGRR_ERR_SPEC);
}

TEST_F(CApi, GenerateTrainEvalPredict) {
  const auto data = scratch("data"), again = scratch("data2"), run = scratch("run");
  ASSERT_EQ(mgrr_generate(cfg_, data.c_str(), 0), MGRR_OK) << mgrr_last_error();
  ASSERT_EQ(mgrr_generate(cfg_, again.c_str(), 0), MGRR_OK);
  EXPECT_EQ(slurp(data / "manifest.json"), slurp(again / "manifest.json"));
  EXPECT_EQ(slurp(data / "labels.csv"), slurp(again / "labels.csv"));
  EXPECT_EQ(mgrr_generate(cfg_, data.c_str(), 0), MGRR_ERR_INPUT);

  ASSERT_EQ(mgrr_train(cfg_, data.c_str(), run.c_str(), 0, 0), MGRR_OK) << mgrr_last_error();
  EXPECT_TRUE(fs::exists(run / "metrics.csv"));

  mgrr_report* rep = nullptr;
  ASSERT_EQ(mgrr_eval((run / "checkpoint").c_str(), data.c_str(), "test", nullptr, &rep), MGRR_OK)
      << mgrr_last_error();
  ASSERT_EQ(mgrr_report_aus(rep), 3u);
  const double f1 = mgrr_report_avg_f1(rep);
  EXPECT_GE(f1, 0.0);
  EXPECT_LE(f1, 1.0);
  mgrr_report_free(rep);
  EXPECT_EQ(mgrr_eval((run / "checkpoint").c_str(), data.c_str(), "half", nullptr, nullptr), MGRR_ERR_ARGUMENT);

  mgrr_model* m = nullptr;
  ASSERT_EQ(mgrr_model_load((run / "checkpoint").c_str(), &m), MGRR_OK) << mgrr_last_error();
  ASSERT_EQ(mgrr_model_aus(m), 3u);
  const size_t S = mgrr_model_image_size(m), lm = 2 * mgrr_model_landmarks(m);
  std::vector<double> image(mgrr_model_image_channels(m) * S * S, 0.3), pts(lm, 7.0), probs(3), out(lm);
  ASSERT_EQ(mgrr_model_predict(m, image.data(), image.size(), pts.data(), pts.size(), probs.data(), out.data()),
            MGRR_OK);
  for (double p : probs) {
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
  }
  EXPECT_EQ(mgrr_model_predict(m, image.data(), image.size() - 1, pts.data(), pts.size(), probs.data(), nullptr),
            MGRR_ERR_DIMENSION);
  pts[0] = 100.0;
  EXPECT_EQ(mgrr_model_predict(m, image.data(), image.size(), pts.data(), pts.size(), probs.data(), nullptr),
            MGRR_ERR_INPUT);
  mgrr_model_free(m);
  EXPECT_EQ(mgrr_model_load("/nonexistent", &m), MGRR_ERR_INPUT);
}
