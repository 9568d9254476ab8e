#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "ap_oracle.h"
#include "hoigen/error.h"
#include "hoigen/evalmap.h"
#include "hoigen/kvdoc.h"
#include "hoigen/rng.h"
#include "json.hpp"
#include "test_util.h"

namespace hoigen {
namespace {

const Box kHuman{0, 0, 10, 10};
const Box kObject{20, 20, 30, 30};

DetectionRecord Det(const std::string& image, Box h, Box o, int hoi, double score) {
  return {image, h, o, hoi, score};
}

GroundTruthRecord Gt(const std::string& image, Box h, Box o, int hoi) { return {image, h, o, hoi}; }

Box Shifted(const Box& b, double dx) { return {b.x1 + dx, b.y1, b.x2 + dx, b.y2}; }

TEST(MatchPairsTest, SingleExactMatchIsTruePositive) {
  const auto m = MatchPairs({Det("a", kHuman, kObject, 0, 0.9)}, {Gt("a", kHuman, kObject, 0)});
  EXPECT_EQ(m.tp, std::vector<bool>({true}));
  EXPECT_EQ(m.num_gt, 1);
}

TEST(MatchPairsTest, SecondDetectionOnSameGroundTruthIsFalsePositive) {
  const auto m = MatchPairs({Det("a", kHuman, kObject, 0, 0.5), Det("a", kHuman, kObject, 0, 0.9)},
                            {Gt("a", kHuman, kObject, 0)});
  EXPECT_EQ(m.order, std::vector<std::size_t>({1, 0}));
  EXPECT_EQ(m.tp, std::vector<bool>({true, false}));
}

TEST(MatchPairsTest, BothBoxesMustOverlap) {
  // Human IoU 0.6, object IoU 0.4 at a shift of 2.5 and 4.286 respectively.
  const Box h = Shifted(kHuman, 2.5);
  const Box o = Shifted(kObject, 60.0 / 14.0);
  ASSERT_NEAR(Iou(h, kHuman), 0.6, 1e-9);
  ASSERT_NEAR(Iou(o, kObject), 0.4, 1e-9);
  const auto m = MatchPairs({Det("a", h, o, 0, 0.9)}, {Gt("a", kHuman, kObject, 0)});
  EXPECT_EQ(m.tp, std::vector<bool>({false}));
  const auto ok = MatchPairs({Det("a", h, kObject, 0, 0.9)}, {Gt("a", kHuman, kObject, 0)});
  EXPECT_EQ(ok.tp, std::vector<bool>({true}));
}

TEST(MatchPairsTest, ImageAndCategoryMustAgree) {
  const auto m = MatchPairs({Det("b", kHuman, kObject, 0, 0.9), Det("a", kHuman, kObject, 1, 0.8)},
                            {Gt("a", kHuman, kObject, 0)});
  EXPECT_EQ(m.tp, std::vector<bool>({false, false}));
}

TEST(AveragePrecisionTest, HandCases) {
  EXPECT_DOUBLE_EQ(*AveragePrecision({true}, 1), 1.0);
  EXPECT_NEAR(*AveragePrecision({true, false, true}, 2), 0.5 * (1.0 + 2.0 / 3.0), 1e-9);
  EXPECT_NEAR(*AveragePrecision({true, false, true}, 2), 0.8333333333, 1e-9);
  EXPECT_DOUBLE_EQ(*AveragePrecision({false, false}, 1), 0.0);
  EXPECT_DOUBLE_EQ(*AveragePrecision({}, 3), 0.0);
  EXPECT_FALSE(AveragePrecision({false, true}, 0).has_value());
}

TEST(AveragePrecisionTest, MatchesStaircaseOracleOnRandomRankings) {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.Index(40);
    std::vector<bool> flags(n);
    int tp = 0;
    for (std::size_t i = 0; i < n; ++i) {
      flags[i] = rng.Uniform() < 0.4;
      tp += flags[i];
    }
    const int num_gt = tp + static_cast<int>(rng.Index(5));
    if (num_gt == 0) continue;
    const double ap = *AveragePrecision(flags, num_gt);
    EXPECT_NEAR(ap, testing::StaircaseAp(flags, num_gt), 1e-12) << "trial " << trial;
    EXPECT_GE(ap, 0.0);
    EXPECT_LE(ap, 1.0);
  }
}

struct Instance {
  std::vector<DetectionRecord> dets;
  std::vector<GroundTruthRecord> gts;
};

// Random scenes with ground-truth pairs and noisy detections around them,
// with scores quantized so ties are common.
Instance RandomInstance(Rng& rng, int num_classes) {
  Instance inst;
  const int images = 1 + static_cast<int>(rng.Index(4));
  for (int i = 0; i < images; ++i) {
    const std::string image = "img" + std::to_string(i);
    const int pairs = 1 + static_cast<int>(rng.Index(3));
    for (int p = 0; p < pairs; ++p) {
      const double x = rng.Uniform(0, 100), y = rng.Uniform(0, 100);
      const Box h{x, y, x + 20, y + 40};
      const Box o{x + 30, y, x + 50, y + 20};
      const int hoi = static_cast<int>(rng.Index(num_classes));
      inst.gts.push_back(Gt(image, h, o, hoi));
      const int dets = static_cast<int>(rng.Index(4));
      for (int d = 0; d < dets; ++d) {
        const double dx = rng.Uniform(-8, 8);
        const double score = std::round(rng.Uniform() * 4) / 4;
        inst.dets.push_back(Det(image, Shifted(h, dx), Shifted(o, -dx), hoi, score));
      }
    }
  }
  return inst;
}

TEST(MatchPairsTest, ShufflingTiedDetectionsDoesNotChangeAp) {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    Instance inst = RandomInstance(rng, 1);
    const auto before = MatchPairs(inst.dets, inst.gts);
    const double ap = AveragePrecision(before.tp, before.num_gt).value_or(-1);
    rng.Shuffle(inst.dets);
    rng.Shuffle(inst.gts);
    const auto after = MatchPairs(inst.dets, inst.gts);
    EXPECT_EQ(before.tp, after.tp);
    EXPECT_DOUBLE_EQ(AveragePrecision(after.tp, after.num_gt).value_or(-1), ap);
  }
}

TEST(MatchPairsTest, AppendingLowestScoredFalsePositiveNeverRaisesAp) {
  Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    Instance inst = RandomInstance(rng, 1);
    const auto base = MatchPairs(inst.dets, inst.gts);
    const double ap = *AveragePrecision(base.tp, base.num_gt);
    inst.dets.push_back(Det("nowhere", kHuman, kObject, 0, -1.0));
    const auto more = MatchPairs(inst.dets, inst.gts);
    EXPECT_LE(*AveragePrecision(more.tp, more.num_gt), ap + 1e-15);
  }
}

ZeroShotSplit TwoByTwoSplit() {
  ZeroShotSplit s;
  s.num_hois = 4;
  s.unseen_count = 2;
  s.seen_hois = {0, 1};
  s.unseen_hois = {2, 3};
  return s;
}

TEST(MapReportTest, PerfectDetectionsScoreOne) {
  std::vector<GroundTruthRecord> gts;
  std::vector<DetectionRecord> dets;
  for (int c = 0; c < 4; ++c) {
    gts.push_back(Gt("a", kHuman, kObject, c));
    dets.push_back(Det("a", kHuman, kObject, c, 0.5));
  }
  const ZeroShotSplit split = TwoByTwoSplit();
  RarityPartition rarity{{0}, {1, 2, 3}};
  const MapReport r = ComputeMapReport(dets, gts, 4, &split, &rarity);
  EXPECT_DOUBLE_EQ(*r.full, 1.0);
  EXPECT_DOUBLE_EQ(*r.seen, 1.0);
  EXPECT_DOUBLE_EQ(*r.unseen, 1.0);
  EXPECT_DOUBLE_EQ(*r.rare, 1.0);
  EXPECT_DOUBLE_EQ(*r.nonrare, 1.0);
}

TEST(MapReportTest, SeenCorrectUnseenWrong) {
  std::vector<GroundTruthRecord> gts;
  std::vector<DetectionRecord> dets;
  for (int c = 0; c < 4; ++c) {
    gts.push_back(Gt("a", kHuman, kObject, c));
    dets.push_back(Det("a", c < 2 ? kHuman : Shifted(kHuman, 50), kObject, c, 0.5));
  }
  const ZeroShotSplit split = TwoByTwoSplit();
  const MapReport r = ComputeMapReport(dets, gts, 4, &split, nullptr);
  EXPECT_DOUBLE_EQ(*r.seen, 1.0);
  EXPECT_DOUBLE_EQ(*r.unseen, 0.0);
  EXPECT_DOUBLE_EQ(*r.full, 0.5);
  EXPECT_FALSE(r.rare.has_value());
}

TEST(MapReportTest, CategoriesWithoutGroundTruthAreExcluded) {
  const MapReport r =
      ComputeMapReport({Det("a", kHuman, kObject, 1, 0.5)}, {Gt("a", kHuman, kObject, 0)}, 3, nullptr, nullptr);
  EXPECT_DOUBLE_EQ(*r.ap[0], 0.0);
  EXPECT_FALSE(r.ap[1].has_value());
  EXPECT_FALSE(r.ap[2].has_value());
  EXPECT_DOUBLE_EQ(*r.full, 0.0);
}

TEST(MapReportTest, RejectsOutOfRangeCategory) {
  EXPECT_THROW(ComputeMapReport({}, {Gt("a", kHuman, kObject, 5)}, 3, nullptr, nullptr), MissingCategory);
  EXPECT_THROW(ComputeMapReport({Det("a", kHuman, kObject, -1, 0)}, {}, 3, nullptr, nullptr),
               MissingCategory);
}

TEST(MapReportTest, AggregatesInUnitIntervalAndOrderIndependent) {
  Rng rng(17);
  const ZeroShotSplit split = TwoByTwoSplit();
  for (int trial = 0; trial < 50; ++trial) {
    Instance inst = RandomInstance(rng, 4);
    const MapReport a = ComputeMapReport(inst.dets, inst.gts, 4, &split, nullptr);
    for (const auto& v : {a.full, a.seen, a.unseen}) {
      if (!v) continue;
      EXPECT_GE(*v, 0.0);
      EXPECT_LE(*v, 1.0);
    }
    rng.Shuffle(inst.dets);
    rng.Shuffle(inst.gts);
    const MapReport b = ComputeMapReport(inst.dets, inst.gts, 4, &split, nullptr);
    EXPECT_EQ(FormatReportText(a), FormatReportText(b));
  }
}

TEST(RecordFileTest, RoundTripPreservesRecords) {
  const auto dir = testing::ScratchDir("records");
  const std::vector<DetectionRecord> clean = {Det("img0", kHuman, kObject, 2, 0.1 + 0.2),
                                              Det("b", {1.5, 2.25, 3, 4}, kObject, 0, 1e-17)};
  EXPECT_NO_THROW(WriteDetections(dir / "d.txt", clean, {"written by test"}));
  const auto back = ReadDetections(dir / "d.txt");
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].image, clean[i].image);
    EXPECT_EQ(back[i].human, clean[i].human);
    EXPECT_EQ(back[i].object, clean[i].object);
    EXPECT_EQ(back[i].hoi, clean[i].hoi);
    EXPECT_EQ(back[i].score, clean[i].score);
  }
  WriteGroundTruth(dir / "g.txt", {Gt("a", kHuman, kObject, 3)});
  const auto gts = ReadGroundTruth(dir / "g.txt");
  ASSERT_EQ(gts.size(), 1u);
  EXPECT_EQ(gts[0].hoi, 3);
  EXPECT_EQ(gts[0].object, kObject);
}

TEST(RecordFileTest, MalformedLinesAreParseErrors) {
  const auto dir = testing::ScratchDir("records_bad");
  {
    std::ofstream(dir / "short.txt") << "a 0 0 1 1 0 0 1\n";
    std::ofstream(dir / "box.txt") << "a 5 5 1 1 0 0 1 1 0 0.5\n";
    std::ofstream(dir / "extra.txt") << "a 0 0 1 1 0 0 1 1 0 0.5 7\n";
  }
  EXPECT_THROW(ReadDetections(dir / "short.txt"), ParseError);
  EXPECT_THROW(ReadDetections(dir / "box.txt"), ParseError);
  EXPECT_THROW(ReadDetections(dir / "extra.txt"), ParseError);
  EXPECT_THROW(ReadDetections(dir / "missing.txt"), ParseError);
}

TEST(ReportFormatTest, TextAndJsonCarryAggregates) {
  MapReport r;
  r.ap = {0.5, std::nullopt};
  r.full = 0.5;
  r.config["seed"] = "3";
  const KvDoc doc = KvDoc::Parse(FormatReportText(r));
  EXPECT_DOUBLE_EQ(doc.GetDouble("map.full"), 0.5);
  EXPECT_EQ(doc.GetString("map.seen"), "n/a");
  EXPECT_EQ(doc.GetString("ap.1"), "n/a");
  EXPECT_EQ(doc.GetString("config.seed"), "3");
  const auto j = nlohmann::json::parse(FormatReportJson(r));
  EXPECT_DOUBLE_EQ(j["map"]["full"].get<double>(), 0.5);
  EXPECT_TRUE(j["map"]["unseen"].is_null());
  EXPECT_TRUE(j["ap"][1].is_null());
  EXPECT_EQ(j["config"]["seed"], "3");
}

}  // namespace
}  // namespace hoigen
