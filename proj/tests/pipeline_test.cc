#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "hoigen/error.h"
#include "hoigen/pipeline.h"
#include "test_util.h"

namespace hoigen {
namespace {

namespace fs = std::filesystem;

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(DatasetTest, TrainingScenesOnlyCarrySeenCategories) {
  const RunConfig cfg = testing::FastConfig();
  const Dataset data = BuildDataset(cfg);
  EXPECT_EQ(data.taxonomy.num_hois(), 12);
  EXPECT_EQ(data.split.unseen_hois.size(), 4u);
  ASSERT_FALSE(data.train.empty());
  for (const auto& pairs : data.train_pairs) {
    for (const auto& p : pairs) {
      for (int l : p.labels) EXPECT_TRUE(data.split.IsSeen(l)) << l;
    }
  }
  EXPECT_EQ(data.train_pairs.size(), data.train.size());
  EXPECT_EQ(data.test_pairs.size(), data.test.size());
}

TEST(PipelineTest, RunIsDeterministic) {
  const RunConfig cfg = testing::FastConfig();
  const auto a = testing::ScratchDir("pipeline_det_a");
  const auto b = testing::ScratchDir("pipeline_det_b");
  std::vector<fs::path> written;
  TrainAndEval(cfg, a, &written);
  TrainAndEval(cfg, b);
  ASSERT_FALSE(written.empty());
  EXPECT_EQ(Slurp(a / "report.txt"), Slurp(b / "report.txt"));
  EXPECT_EQ(Slurp(a / "detections.txt"), Slurp(b / "detections.txt"));
  for (const char* f : {"config.txt", "split.txt", "ground_truth.txt", "report.json"}) {
    EXPECT_TRUE(fs::exists(a / f)) << f;
  }
  const RunConfig back = LoadRunConfig(a / "config.txt");
  EXPECT_EQ(back.ToKvDoc().ToString(), cfg.ToKvDoc().ToString());
}

TEST(PipelineTest, BaselineSkipsGenerator) {
  RunConfig cfg = testing::FastConfig();
  cfg.generation = false;
  const auto dir = testing::ScratchDir("pipeline_baseline");
  const RunResult res = TrainAndEval(cfg, dir);
  EXPECT_FALSE(fs::exists(dir / "generator"));
  EXPECT_TRUE(res.report.full.has_value());
  EXPECT_TRUE(res.report.unseen.has_value());
  EXPECT_EQ(res.report.ap.size(), 12u);
}

TEST(PipelineTest, ReportAggregatesAreConsistent) {
  const RunResult res = TrainAndEval(testing::FastConfig(), std::nullopt);
  ASSERT_TRUE(res.report.full && res.report.seen && res.report.unseen);
  for (const auto& v : {*res.report.full, *res.report.seen, *res.report.unseen}) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  const double full = (8 * *res.report.seen + 4 * *res.report.unseen) / 12;
  EXPECT_NEAR(*res.report.full, full, 1e-12);
}

TEST(PipelineTest, FailuresNameTheStage) {
  RunConfig cfg = testing::FastConfig();
  cfg.backend = "pretrained";
  cfg.cache_dir = "/nonexistent/cache";
  try {
    TrainAndEval(cfg, std::nullopt);
    FAIL() << "expected a stage failure";
  } catch (const StageFailure& e) {
    EXPECT_EQ(e.stage(), "dataset");
  }
  const Dataset data = BuildDataset(testing::FastConfig());
  try {
    RunDownstream(data, nullptr, testing::FastConfig());
    FAIL() << "expected a stage failure";
  } catch (const StageFailure& e) {
    EXPECT_EQ(e.stage(), "synthesis");
  }
}

TEST(PipelineTest, AblationProducesOneRowPerValue) {
  RunConfig cfg = testing::FastConfig();
  const auto rows = Ablate(cfg, "construction", {1});
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].value, "R");
  EXPECT_EQ(rows[3].value, "G");
  for (const auto& r : rows) {
    EXPECT_EQ(r.unseen_per_seed.size(), 1u);
    EXPECT_GE(r.unseen, 0.0);
    EXPECT_LE(r.unseen, 1.0);
  }
  const std::string table = FormatAblation("construction", rows);
  EXPECT_NE(table.find("R_concat_G"), std::string::npos);
  EXPECT_THROW(Ablate(cfg, "bogus", {1}), ConfigError);
  EXPECT_THROW(Ablate(cfg, "n_bs", {}), ConfigError);
}

}  // namespace
}  // namespace hoigen
